use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dikin_core::diagnostics::{self, CheckReport, CorpusEntry};
use dikin_core::metrics::{LewisParams, MetricKind};
use dikin_core::planner::{self, BudgetMetric, MixingBudgetQuery, Regime, WarmStartBall};
use dikin_core::polytope::Polytope;
use dikin_core::target::{self, FnTarget, GaussianTarget, LogConcaveTarget};
use dikin_core::walk::{self, ChainState, SampleBatch, StepStats, WalkConfig};
use dikin_core::{ChainRng, Error};
use nalgebra::DVector;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::formats::{self, fmt_f64, fmt_vector, FormatError, KeyValues};

const TOOL: &str = concat!("dikin ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: String, source: FormatError },
    #[error("{0}")]
    Usage(String),
    #[error("infeasible initial point: {0}")]
    Infeasible(Error),
    #[error("invalid input: {0}")]
    Input(Error),
    #[error("numeric failure: {0}")]
    Numeric(Error),
    #[error("{0}")]
    Chain(walk::RunFailure),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Format { .. } | CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Numeric(_) | CliError::Chain(_) => 4,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Errors raised while setting up a run from user input.
fn input_error(e: Error) -> CliError {
    match e {
        Error::NotInterior | Error::BallNotInside => CliError::Infeasible(e),
        Error::DimensionMismatch { .. }
        | Error::ZeroRow(_)
        | Error::NonFinite
        | Error::DegenerateBounds(_)
        | Error::NotSymmetric
        | Error::InvalidParameter(_)
        | Error::InconsistentQuery(_)
        | Error::MissingGradient
        | Error::RequiresStrongConvexity
        | Error::TooFewConstraints { .. } => CliError::Input(e),
        _ => CliError::Numeric(e),
    }
}

#[derive(Debug, Parser)]
#[command(name = "dikin", version, about = "Sample log-concave densities on polytopes with regularized Dikin walks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the walk and write samples as CSV.
    Sample(SampleArgs),
    /// Whiten a Gaussian target: write the reduced polytope and the back-transform.
    Precondition(PreconditionArgs),
    /// Solve for the modes and build a warm-start ball.
    Warmstart(WarmstartArgs),
    /// Iteration budgets from the closed-form mixing bounds.
    Budget(BudgetArgs),
    /// Exact truncated-Gaussian samples by rejection.
    Oracle(OracleArgs),
    /// Randomized self-concordance and symmetry checks.
    Diagnose(DiagnoseArgs),
    /// Re-run the command recorded in an output file's header.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TargetArgs {
    /// Gaussian file: `n`, the mean, then n covariance rows.
    #[arg(long, conflicts_with_all = ["mean", "uniform"])]
    pub gaussian: Option<PathBuf>,
    /// Mean of a Gaussian with diagonal precision, e.g. `0,1`.
    #[arg(long, requires = "precision_diag", conflicts_with = "uniform")]
    pub mean: Option<String>,
    /// Diagonal precision entries matching --mean.
    #[arg(long, requires = "mean")]
    pub precision_diag: Option<String>,
    /// Flat density on the polytope.
    #[arg(long)]
    pub uniform: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricChoice {
    Soft,
    Lewis,
}

impl MetricChoice {
    fn name(self) -> &'static str {
        match self {
            MetricChoice::Soft => "soft",
            MetricChoice::Lewis => "lewis",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MetricArgs {
    /// soft: A_xᵀA_x + λI; lewis: c1·√n·(ln m)^c2·A_xᵀW_xA_x + λI.
    #[arg(long, value_enum, default_value_t = MetricChoice::Soft)]
    pub metric: MetricChoice,
    /// Regularization λ.
    #[arg(long, required_unless_present = "lambda_from_beta", conflicts_with = "lambda_from_beta")]
    pub lambda: Option<f64>,
    /// Use λ = β of the target.
    #[arg(long)]
    pub lambda_from_beta: bool,
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 0.0)]
    pub c2: f64,
    /// Even Lewis exponent q ≥ 4 (default from m).
    #[arg(long)]
    pub q: Option<u32>,
    #[arg(long, default_value_t = 1e-8)]
    pub lewis_tol: f64,
    #[arg(long, default_value_t = 200)]
    pub lewis_max_iter: usize,
}

#[derive(Debug, Clone, Args)]
#[group(id = "init", required = true, multiple = false, args = ["x0", "init_point", "init_warmstart"])]
pub struct InitArgs {
    /// Starting point as comma-separated coordinates.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// File holding the starting point on one line.
    #[arg(long)]
    pub init_point: Option<PathBuf>,
    /// Output of `warmstart`; the start is drawn uniformly from its ball.
    #[arg(long)]
    pub init_warmstart: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SampleArgs {
    /// Polytope file: `n m`, m rows of A, then b.
    #[arg(long)]
    pub polytope: PathBuf,
    #[command(flatten)]
    pub target: TargetArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[command(flatten)]
    pub init: InitArgs,
    #[arg(long, default_value_t = 0.1)]
    pub step_size: f64,
    /// Steps after burn-in.
    #[arg(long)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    /// Keep the step size fixed during burn-in.
    #[arg(long)]
    pub no_adapt: bool,
    #[arg(long, default_value_t = 100)]
    pub adapt_window: usize,
    /// Disable the lazy coin flip.
    #[arg(long)]
    pub no_lazy: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Write an `x1,…,xn` column header.
    #[arg(long)]
    pub header: bool,
    /// Map samples through this transform (from `precondition`) before writing.
    #[arg(long)]
    pub transform: Option<PathBuf>,
    /// Independent chains with seeds seed, seed+1, …; files get a `.chainI` suffix.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    /// Worker threads for --chains (default: one per core).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PreconditionArgs {
    /// Polytope file: `n m`, m rows of A, then b.
    #[arg(long)]
    pub polytope: PathBuf,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Where to write the whitened polytope.
    #[arg(long)]
    pub output_polytope: PathBuf,
    /// Where to write the back-transform y ↦ Σ^{1/2}y + μ.
    #[arg(long)]
    pub output_transform: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct WarmstartArgs {
    /// Polytope file: `n m`, m rows of A, then b.
    #[arg(long)]
    pub polytope: PathBuf,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Centre of a ball known to lie in K.
    #[arg(long, allow_hyphen_values = true)]
    pub x1: String,
    /// Radius of that ball.
    #[arg(long)]
    pub r_tilde: f64,
    /// Radius of a ball around x1 containing K (estimated when omitted).
    #[arg(long)]
    pub r_outer: Option<f64>,
    /// Mode solver tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Mode solver iteration cap.
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeChoice {
    Strong,
    Weak,
    Beyond,
}

#[derive(Debug, Clone, Args)]
#[group(id = "warmness_group", required = true, multiple = false, args = ["warmness", "log_warmness"])]
pub struct BudgetArgs {
    /// strong and weak use --m/--n; beyond uses the polytope and target.
    #[arg(long, value_enum)]
    pub regime: RegimeChoice,
    #[arg(long, value_enum, default_value_t = MetricChoice::Soft)]
    pub metric: MetricChoice,
    /// Exponent of ln m in the Lewis factor.
    #[arg(long, default_value_t = 0.0)]
    pub c2: f64,
    /// Number of constraints.
    #[arg(long)]
    pub m: Option<usize>,
    /// Dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Condition number β/α (strong regime).
    #[arg(long)]
    pub kappa: Option<f64>,
    /// β·η with η ≥ ‖Cov π‖ (weak regime).
    #[arg(long)]
    pub beta_eta: Option<f64>,
    /// ψ_n² for the weak regime (default max(1, ln n)).
    #[arg(long)]
    pub psi_n_sq: Option<f64>,
    /// Warmness M ≥ 1.
    #[arg(long)]
    pub warmness: Option<f64>,
    /// ln M, for warmness too large to write out.
    #[arg(long)]
    pub log_warmness: Option<f64>,
    /// Total-variation accuracy in (0, 1).
    #[arg(long)]
    pub eps: f64,
    /// Universal constant C.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Polytope for the beyond-worst-case regime.
    #[arg(long)]
    pub polytope: Option<PathBuf>,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Mode solver tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Mode solver iteration cap.
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    /// Polytope file: `n m`, m rows of A, then b.
    #[arg(long)]
    pub polytope: PathBuf,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Number of samples.
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write an `x1,…,xn` column header.
    #[arg(long)]
    pub header: bool,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    /// Trials per check.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Check this polytope instead of the built-in corpus.
    #[arg(long, requires = "anchor")]
    pub polytope: Option<PathBuf>,
    /// Interior point of --polytope.
    #[arg(long, allow_hyphen_values = true)]
    pub anchor: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// A file written by `sample`, `oracle`, `warmstart`, `budget` or `precondition`.
    pub from: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn execute(command: &Command, out: &mut dyn Write) -> CliResult<i32> {
    match command {
        Command::Sample(a) => cmd_sample(a, out),
        Command::Precondition(a) => cmd_precondition(a),
        Command::Warmstart(a) => cmd_warmstart(a, out),
        Command::Budget(a) => cmd_budget(a, out),
        Command::Oracle(a) => cmd_oracle(a, out),
        Command::Diagnose(a) => cmd_diagnose(a, out),
        Command::Replay(a) => cmd_replay(a, out),
    }
}

fn read(path: &Path) -> CliResult<String> {
    formats::read_file(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn parsed<T>(path: &Path, r: Result<T, FormatError>) -> CliResult<T> {
    r.map_err(|source| CliError::Format { path: path.display().to_string(), source })
}

fn flag_value<T>(flag: &str, r: Result<T, FormatError>) -> CliResult<T> {
    r.map_err(|e| CliError::Usage(format!("--{flag}: {}", e.message)))
}

fn load_polytope(path: &Path) -> CliResult<Polytope> {
    parsed(path, formats::parse_polytope(&read(path)?))
}

/// Where the output goes: a file (written atomically) or stdout.
fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => formats::write_atomic(p, text).map_err(|source| CliError::Io { path: p.display().to_string(), source }),
        None => out.write_all(text.as_bytes()).map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

enum LoadedTarget {
    Gaussian(GaussianTarget, target::QuadraticTarget),
    Uniform(FnTarget),
}

impl LoadedTarget {
    fn as_target(&self) -> &(dyn LogConcaveTarget + Send + Sync) {
        match self {
            LoadedTarget::Gaussian(_, q) => q,
            LoadedTarget::Uniform(f) => f,
        }
    }

    fn gaussian(&self) -> CliResult<&GaussianTarget> {
        match self {
            LoadedTarget::Gaussian(g, _) => Ok(g),
            LoadedTarget::Uniform(_) => Err(CliError::Usage("this command needs a Gaussian target (--gaussian or --mean/--precision-diag)".into())),
        }
    }
}

fn load_target(args: &TargetArgs, dim: usize) -> CliResult<LoadedTarget> {
    let gaussian = if let Some(path) = &args.gaussian {
        Some(parsed(path, formats::parse_gaussian(&read(path)?))?)
    } else if let (Some(mean), Some(prec)) = (&args.mean, &args.precision_diag) {
        let mean = flag_value("mean", formats::parse_point(mean))?;
        let prec = flag_value("precision-diag", formats::parse_point(prec))?;
        if prec.len() != mean.len() {
            return Err(CliError::Usage("--mean and --precision-diag differ in length".into()));
        }
        if prec.iter().any(|p| !(*p > 0.0)) {
            return Err(CliError::Usage("--precision-diag entries must be > 0".into()));
        }
        let cov = nalgebra::DMatrix::from_diagonal(&prec.map(|p| 1.0 / p));
        Some(GaussianTarget::new(mean, cov).map_err(input_error)?)
    } else {
        None
    };
    match gaussian {
        Some(g) => {
            if g.dim() != dim {
                return Err(CliError::Input(Error::DimensionMismatch { expected: dim, found: g.dim() }));
            }
            let q = target::quadratic_target(&g).map_err(input_error)?;
            Ok(LoadedTarget::Gaussian(g, q))
        }
        None if args.uniform => Ok(LoadedTarget::Uniform(FnTarget::flat(dim))),
        None => Err(CliError::Usage("a target is required: --gaussian, --mean with --precision-diag, or --uniform".into())),
    }
}

fn push_target(kv: &mut KeyValues, args: &TargetArgs) {
    if let Some(g) = &args.gaussian {
        kv.push("gaussian", g.display().to_string());
    }
    if let (Some(m), Some(p)) = (&args.mean, &args.precision_diag) {
        kv.push("mean", m.clone());
        kv.push("precision-diag", p.clone());
    }
    if args.uniform {
        kv.push("uniform", "true");
    }
}

fn manifest(command: &str) -> KeyValues {
    let mut kv = KeyValues::default();
    kv.push("tool", TOOL);
    kv.push("command", command);
    kv
}

fn resolve_metric(args: &MetricArgs, target: &LoadedTarget) -> CliResult<MetricKind> {
    let lambda = match (args.lambda, args.lambda_from_beta) {
        (Some(l), _) => l,
        (None, true) => match target {
            LoadedTarget::Gaussian(_, q) => q.beta(),
            LoadedTarget::Uniform(_) => {
                return Err(CliError::Usage("--lambda-from-beta needs a target with known beta; pass --lambda".into()))
            }
        },
        (None, false) => return Err(CliError::Usage("pass --lambda or --lambda-from-beta".into())),
    };
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(CliError::Usage("lambda must be finite and > 0".into()));
    }
    Ok(match args.metric {
        MetricChoice::Soft => MetricKind::soft_threshold(lambda),
        MetricChoice::Lewis => MetricKind::RegularizedLewis(LewisParams {
            lambda,
            c1: args.c1,
            c2: args.c2,
            q: args.q,
            tol: args.lewis_tol,
            max_iter: args.lewis_max_iter,
        }),
    })
}

fn push_metric(kv: &mut KeyValues, kind: &MetricKind) {
    match kind {
        MetricKind::SoftThreshold { lambda } => {
            kv.push("metric", "soft");
            kv.push("lambda", fmt_f64(*lambda));
        }
        MetricKind::RegularizedLewis(p) => {
            kv.push("metric", "lewis");
            kv.push("lambda", fmt_f64(p.lambda));
            kv.push("c1", fmt_f64(p.c1));
            kv.push("c2", fmt_f64(p.c2));
            if let Some(q) = p.q {
                kv.push("q", q.to_string());
            }
            kv.push("lewis-tol", fmt_f64(p.tol));
            kv.push("lewis-max-iter", p.max_iter.to_string());
        }
    }
}

enum Start {
    Point(DVector<f64>),
    Ball(WarmStartBall),
}

fn load_start(args: &InitArgs) -> CliResult<Start> {
    if let Some(s) = &args.x0 {
        return Ok(Start::Point(flag_value("x0", formats::parse_point(s))?));
    }
    if let Some(path) = &args.init_point {
        let text = read(path)?;
        let line = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#')).unwrap_or("");
        return Ok(Start::Point(parsed(path, formats::parse_point(line))?));
    }
    let path = args.init_warmstart.as_ref().expect("clap enforces one init source");
    let kv = parsed(path, formats::KeyValues::parse(&read(path)?))?;
    let get_f = |key: &str| -> CliResult<f64> {
        let v = parsed(path, kv.require(key))?;
        v.parse().map_err(|_| CliError::Format {
            path: path.display().to_string(),
            source: FormatError { line: 0, message: format!("invalid number for '{key}'") },
        })
    };
    let x0 = parsed(path, kv.require("x0").and_then(formats::parse_point))?;
    Ok(Start::Ball(WarmStartBall {
        x0,
        r0: get_f("r0")?,
        r1: get_f("r1")?,
        log_m: get_f("logM")?,
        r_outer: get_f("r_outer")?,
        r_outer_estimated: kv.get("r_outer_estimated") == Some("true"),
    }))
}

fn push_init(kv: &mut KeyValues, args: &InitArgs) {
    if let Some(s) = &args.x0 {
        kv.push("x0", s.clone());
    }
    if let Some(p) = &args.init_point {
        kv.push("init-point", p.display().to_string());
    }
    if let Some(p) = &args.init_warmstart {
        kv.push("init-warmstart", p.display().to_string());
    }
}

fn stats_block(kv: &mut KeyValues, prefix: &str, s: &StepStats) {
    kv.push(&format!("{prefix}proposed"), s.proposed.to_string());
    kv.push(&format!("{prefix}accepted"), s.accepted.to_string());
    kv.push(&format!("{prefix}lazy_skips"), s.lazy_skips.to_string());
    kv.push(&format!("{prefix}rejected_outside"), s.rejected_outside.to_string());
    kv.push(&format!("{prefix}rejected_mh"), s.rejected_mh.to_string());
    kv.push(&format!("{prefix}nonfinite_target"), s.nonfinite_target.to_string());
    kv.push(&format!("{prefix}acceptance_rate"), fmt_f64(s.acceptance_rate()));
    kv.push(&format!("{prefix}mean_log_ratio"), fmt_f64(s.mean_log_ratio));
}

fn run_chain(
    start: &Start,
    target: &(dyn LogConcaveTarget + Send + Sync),
    p: &Polytope,
    config: &WalkConfig,
) -> CliResult<SampleBatch> {
    let state = match start {
        Start::Point(x0) => ChainState::new(x0.clone(), target, p, &config.metric, config.seed),
        Start::Ball(ball) => {
            if ball.x0.len() != p.dim() {
                return Err(CliError::Input(Error::DimensionMismatch { expected: p.dim(), found: ball.x0.len() }));
            }
            let mut rng = ChainRng::seed_from_u64(config.seed);
            let x0 = planner::sample_warm_start(ball, &mut rng);
            ChainState::with_rng(x0, target, p, &config.metric, rng)
        }
    }
    .map_err(input_error)?;
    walk::run_from_state(state, target, p, config).map_err(|f| {
        if f.completed_steps == 0 && matches!(f.error, Error::InvalidParameter(_)) {
            CliError::Input(f.error)
        } else {
            CliError::Chain(f)
        }
    })
}

fn chain_path(path: &Path, index: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.chain{index}.{}", ext.to_string_lossy()),
        None => format!("{stem}.chain{index}"),
    };
    path.with_file_name(name)
}

fn cmd_sample(args: &SampleArgs, out: &mut dyn Write) -> CliResult<i32> {
    if args.chains == 0 {
        return Err(CliError::Usage("--chains must be >= 1".into()));
    }
    if args.chains > 1 && args.output.is_none() {
        return Err(CliError::Usage("--chains > 1 needs --output".into()));
    }
    let p = load_polytope(&args.polytope)?;
    let target = load_target(&args.target, p.dim())?;
    let metric = resolve_metric(&args.metric, &target)?;
    let start = load_start(&args.init)?;
    let transform = match &args.transform {
        Some(path) => Some(parsed(path, formats::parse_transform(&read(path)?))?),
        None => None,
    };
    let base = WalkConfig {
        step_size: args.step_size,
        metric,
        lazy: !args.no_lazy,
        steps: args.steps,
        burn_in: args.burn_in,
        adapt: !args.no_adapt,
        adapt_window: args.adapt_window,
        seed: args.seed,
        thin: args.thin,
    };

    let render = |index: usize| -> CliResult<String> {
        let config = WalkConfig { seed: args.seed.wrapping_add(index as u64), ..base.clone() };
        let batch = run_chain(&start, target.as_target(), &p, &config)?;
        let samples = match &transform {
            Some(t) => t.map_samples(&batch.samples).map_err(input_error)?,
            None => batch.samples.clone(),
        };
        Ok(formats::render_csv(&sample_manifest(args, &config), args.header, &samples, &sample_footer(&batch)))
    };

    if args.chains == 1 {
        let text = render(0)?;
        emit(args.output.as_deref(), &text, out)?;
        return Ok(0);
    }
    let run_all = || (0..args.chains).into_par_iter().map(render).collect::<Vec<_>>();
    let results = match args.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?
            .install(run_all),
        None => run_all(),
    };
    let texts = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    let path = args.output.as_deref().expect("checked above");
    for (i, text) in texts.iter().enumerate() {
        emit(Some(&chain_path(path, i)), text, out)?;
    }
    Ok(0)
}

fn sample_manifest(args: &SampleArgs, config: &WalkConfig) -> KeyValues {
    let mut kv = manifest("sample");
    kv.push("polytope", args.polytope.display().to_string());
    push_target(&mut kv, &args.target);
    push_metric(&mut kv, &config.metric);
    push_init(&mut kv, &args.init);
    kv.push("step-size", fmt_f64(config.step_size));
    kv.push("steps", config.steps.to_string());
    kv.push("burn-in", config.burn_in.to_string());
    kv.push("no-adapt", (!config.adapt).to_string());
    kv.push("adapt-window", config.adapt_window.to_string());
    kv.push("no-lazy", (!config.lazy).to_string());
    kv.push("seed", config.seed.to_string());
    kv.push("thin", config.thin.to_string());
    kv.push("header", args.header.to_string());
    if let Some(t) = &args.transform {
        kv.push("transform", t.display().to_string());
    }
    kv
}

fn sample_footer(batch: &SampleBatch) -> KeyValues {
    let mut kv = KeyValues::default();
    stats_block(&mut kv, "", &batch.stats);
    stats_block(&mut kv, "burn_in_", &batch.burn_in_stats);
    kv.push("final_step_size", fmt_f64(batch.step_size));
    kv.push("seed", batch.seed.to_string());
    kv
}

fn cmd_precondition(args: &PreconditionArgs) -> CliResult<i32> {
    let p = load_polytope(&args.polytope)?;
    let target = load_target(&args.target, p.dim())?;
    let (reduced, transform) = target::precondition_gaussian(target.gaussian()?, &p).map_err(input_error)?;
    let mut kv = manifest("precondition");
    kv.push("polytope", args.polytope.display().to_string());
    push_target(&mut kv, &args.target);
    kv.push("output-polytope", args.output_polytope.display().to_string());
    kv.push("output-transform", args.output_transform.display().to_string());
    let header = kv.render("# ");
    let poly_text = format!("{header}{}", formats::serialize_polytope(&reduced));
    let transform_text = format!("{header}{}", formats::serialize_transform(&transform));
    emit(Some(&args.output_polytope), &poly_text, &mut std::io::sink())?;
    emit(Some(&args.output_transform), &transform_text, &mut std::io::sink())?;
    Ok(0)
}

fn cmd_warmstart(args: &WarmstartArgs, out: &mut dyn Write) -> CliResult<i32> {
    let p = load_polytope(&args.polytope)?;
    let target = load_target(&args.target, p.dim())?;
    let x1 = flag_value("x1", formats::parse_point(&args.x1))?;
    let t = target.as_target();
    let modes = planner::solve_modes(t, &p, args.tol, args.max_iter).map_err(input_error)?;
    let ball = planner::warm_start_ball(t, &p, &x1, args.r_tilde, &modes, args.r_outer).map_err(input_error)?;

    let mut head = manifest("warmstart");
    head.push("polytope", args.polytope.display().to_string());
    push_target(&mut head, &args.target);
    head.push("x1", args.x1.clone());
    head.push("r-tilde", fmt_f64(args.r_tilde));
    if let Some(r) = args.r_outer {
        head.push("r-outer", fmt_f64(r));
    }
    head.push("tol", fmt_f64(args.tol));
    head.push("max-iter", args.max_iter.to_string());

    let mut kv = KeyValues::default();
    kv.push("x0", fmt_vector(&ball.x0, ","));
    kv.push("r0", fmt_f64(ball.r0));
    kv.push("r1", fmt_f64(ball.r1));
    kv.push("logM", fmt_f64(ball.log_m));
    kv.push("r_outer", fmt_f64(ball.r_outer));
    kv.push("r_outer_estimated", ball.r_outer_estimated.to_string());
    kv.push("x_star", fmt_vector(&modes.x_star, ","));
    kv.push("x_dag", fmt_vector(&modes.x_dag, ","));
    kv.push("grad_norm_star", fmt_f64(modes.grad_norm_star));
    kv.push("kkt_residual_dag", fmt_f64(modes.kkt_residual_dag));
    kv.push("modes_converged", modes.converged.to_string());
    emit(args.output.as_deref(), &format!("{}{}", head.render("# "), kv.render("")), out)?;
    Ok(0)
}

fn cmd_budget(args: &BudgetArgs, out: &mut dyn Write) -> CliResult<i32> {
    let log_m = match (args.warmness, args.log_warmness) {
        (Some(m), None) if m >= 1.0 => m.ln(),
        (Some(_), None) => return Err(CliError::Usage("--warmness must be >= 1".into())),
        (None, Some(l)) => l,
        _ => return Err(CliError::Usage("pass exactly one of --warmness and --log-warmness".into())),
    };
    let mut head = manifest("budget");
    head.push("regime", format!("{:?}", args.regime).to_lowercase());
    head.push("metric", args.metric.name());
    head.push("c2", fmt_f64(args.c2));
    let mut kv = KeyValues::default();
    match args.regime {
        RegimeChoice::Strong | RegimeChoice::Weak => {
            let (Some(m), Some(n)) = (args.m, args.n) else {
                return Err(CliError::Usage("--m and --n are required".into()));
            };
            let q = MixingBudgetQuery {
                regime: if args.regime == RegimeChoice::Strong { Regime::StronglyLogConcave } else { Regime::WeaklyLogConcave },
                m,
                n,
                kappa: args.kappa,
                beta_eta: args.beta_eta,
                metric: match args.metric {
                    MetricChoice::Soft => BudgetMetric::SoftThreshold,
                    MetricChoice::Lewis => BudgetMetric::Lewis { c2: args.c2 },
                },
                log_m,
                eps: args.eps,
                c: args.c,
                psi_n_sq: args.psi_n_sq,
            };
            let t = planner::mixing_budget(&q).map_err(input_error)?;
            head.push("m", m.to_string());
            head.push("n", n.to_string());
            if let Some(k) = args.kappa {
                head.push("kappa", fmt_f64(k));
            }
            if let Some(b) = args.beta_eta {
                head.push("beta-eta", fmt_f64(b));
            }
            if let Some(psi) = args.psi_n_sq {
                head.push("psi-n-sq", fmt_f64(psi));
            }
            kv.push("T", t.to_string());
        }
        RegimeChoice::Beyond => {
            let Some(path) = &args.polytope else {
                return Err(CliError::Usage("the beyond regime needs --polytope and a target".into()));
            };
            if args.metric != MetricChoice::Soft {
                return Err(CliError::Usage("the beyond regime is defined for the soft-threshold metric".into()));
            }
            let p = load_polytope(path)?;
            let target = load_target(&args.target, p.dim())?;
            let t = target.as_target();
            let modes = planner::solve_modes(t, &p, args.tol, args.max_iter).map_err(input_error)?;
            let res = planner::beyond_worst_case_budget(&p, t, &modes, log_m, args.eps, args.c, &planner::default_delta_grid())
                .map_err(input_error)?;
            head.push("polytope", path.display().to_string());
            push_target(&mut head, &args.target);
            head.push("tol", fmt_f64(args.tol));
            head.push("max-iter", args.max_iter.to_string());
            kv.push("T", res.budget.to_string());
            kv.push("best_delta", if res.best_delta.is_infinite() { "inf".to_string() } else { fmt_f64(res.best_delta) });
            kv.push("count", res.count.to_string());
            kv.push("plain_T", res.plain_budget.to_string());
            kv.push("radius_hat", fmt_f64(res.radius_hat));
            kv.push("modes_converged", modes.converged.to_string());
        }
    }
    head.push("log-warmness", fmt_f64(log_m));
    head.push("eps", fmt_f64(args.eps));
    head.push("c", fmt_f64(args.c));
    emit(args.output.as_deref(), &format!("{}{}", head.render("# "), kv.render("")), out)?;
    Ok(0)
}

fn cmd_oracle(args: &OracleArgs, out: &mut dyn Write) -> CliResult<i32> {
    let p = load_polytope(&args.polytope)?;
    let target = load_target(&args.target, p.dim())?;
    let mut rng = ChainRng::seed_from_u64(args.seed);
    let batch = diagnostics::rejection_oracle(target.gaussian()?, &p, args.count, &mut rng).map_err(CliError::Numeric)?;
    let mut head = manifest("oracle");
    head.push("polytope", args.polytope.display().to_string());
    push_target(&mut head, &args.target);
    head.push("count", args.count.to_string());
    head.push("seed", args.seed.to_string());
    head.push("header", args.header.to_string());
    let mut foot = KeyValues::default();
    foot.push("attempts", batch.attempts.to_string());
    foot.push("acceptance_rate", fmt_f64(batch.acceptance_rate()));
    emit(args.output.as_deref(), &formats::render_csv(&head, args.header, &batch.samples, &foot), out)?;
    Ok(0)
}

fn cmd_diagnose(args: &DiagnoseArgs, out: &mut dyn Write) -> CliResult<i32> {
    let corpus = match (&args.polytope, &args.anchor) {
        (Some(path), Some(anchor)) => {
            let p = load_polytope(path)?;
            let anchor = flag_value("anchor", formats::parse_point(anchor))?;
            if !p.contains(&anchor).map_err(input_error)? {
                return Err(CliError::Infeasible(Error::NotInterior));
            }
            vec![CorpusEntry { name: path.display().to_string(), polytope: p, anchor }]
        }
        _ => diagnostics::standard_corpus(),
    };
    let reports = diagnostics::run_standard_checks(&corpus, args.trials, args.seed).map_err(input_error)?;
    let text = render_reports(&reports);
    emit(args.output.as_deref(), &text, out)?;
    Ok(if reports.iter().all(CheckReport::passed) { 0 } else { 1 })
}

fn render_reports(reports: &[CheckReport]) -> String {
    let mut text = String::from("# check trials violations max_ratio\n");
    for r in reports {
        text.push_str(&format!("{} {} {} {}\n", r.name, r.trials, r.violations, fmt_f64(r.max_ratio)));
    }
    text
}

/// Rebuild the argument list from a `# key=value` header.
fn replay_args(header: &KeyValues) -> CliResult<Vec<String>> {
    let command = header.get("command").ok_or_else(|| CliError::Usage("no '# command=' line in header".into()))?;
    let mut argv = vec!["dikin".to_string(), command.to_string()];
    for (k, v) in &header.0 {
        if k == "tool" || k == "command" || k == "output-polytope" || k == "output-transform" {
            continue;
        }
        match v.as_str() {
            "true" => argv.push(format!("--{k}")),
            "false" => {}
            _ => argv.push(format!("--{k}={v}")),
        }
    }
    if command == "precondition" {
        for k in ["output-polytope", "output-transform"] {
            if let Some(v) = header.get(k) {
                argv.push(format!("--{k}={v}"));
            }
        }
    }
    Ok(argv)
}

fn cmd_replay(args: &ReplayArgs, out: &mut dyn Write) -> CliResult<i32> {
    let text = read(&args.from)?;
    let mut argv = replay_args(&formats::leading_comment_block(&text))?;
    if let Some(o) = &args.output {
        argv.push(format!("--output={}", o.display()));
    }
    let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Usage(format!("recorded arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Usage("cannot replay a replay".into()));
    }
    execute(&cli.command, out)
}
