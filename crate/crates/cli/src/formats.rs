//! Text formats: polytopes, Gaussians, affine transforms, points, sample CSV
//! and flat `key=value` blocks. Every float is written with 17 significant
//! digits so that reading a file back reproduces the exact doubles.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use dikin_core::polytope::Polytope;
use dikin_core::target::{AffineTransform, GaussianTarget};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

fn fail<T>(line: usize, message: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError { line, message: message.into() })
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_vector(v: &DVector<f64>, sep: &str) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(sep)
}

/// Non-blank lines that do not start with `#`, with 1-based line numbers.
fn data_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

fn parse_floats(line: usize, s: &str, sep: Option<char>) -> Result<Vec<f64>, FormatError> {
    let tokens: Vec<&str> = match sep {
        Some(c) => s.split(c).map(str::trim).collect(),
        None => s.split_whitespace().collect(),
    };
    tokens
        .into_iter()
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => fail(line, format!("non-finite value '{t}'")),
            Err(_) => fail(line, format!("invalid number '{t}'")),
        })
        .collect()
}

fn parse_row(line: usize, s: &str, n: usize) -> Result<Vec<f64>, FormatError> {
    let row = parse_floats(line, s, None)?;
    if row.len() != n {
        return fail(line, format!("expected {n} values, found {}", row.len()));
    }
    Ok(row)
}

fn parse_count(line: usize, token: &str, what: &str) -> Result<usize, FormatError> {
    token.parse().or_else(|_| fail(line, format!("malformed header: {what} must be a nonnegative integer")))
}

fn plural(k: usize, word: &str) -> String {
    if k == 1 {
        format!("{k} {word}")
    } else {
        format!("{k} {word}s")
    }
}

/// Header `n m`, `m` rows of `A`, then one line with `b` (omitted when `m = 0`).
pub fn parse_polytope(text: &str) -> Result<Polytope, FormatError> {
    let lines = data_lines(text);
    let Some(&(hline, header)) = lines.first() else {
        return fail(1, "missing header 'n m'");
    };
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 {
        return fail(hline, "malformed header: expected 'n m'");
    }
    let n = parse_count(hline, head[0], "n")?;
    let m = parse_count(hline, head[1], "m")?;
    if n == 0 {
        return fail(hline, "dimension n must be at least 1");
    }
    let body = &lines[1..];
    let expected_lines = if m == 0 { 0 } else { m + 1 };
    let too_many = || format!("expected {}", plural(m, "constraint row"));
    let mut a = DMatrix::zeros(m, n);
    for i in 0..m {
        let Some(&(l, s)) = body.get(i) else {
            return fail(lines.last().map_or(hline, |x| x.0), format!("expected {}, found {i}", plural(m, "constraint row")));
        };
        let row = parse_row(l, s, n)?;
        a.row_mut(i).copy_from_slice(&row);
    }
    let mut b = DVector::zeros(m);
    if m > 0 {
        let Some(&(l, s)) = body.get(m) else {
            return fail(lines.last().map_or(hline, |x| x.0), "missing offset line b");
        };
        let values = parse_floats(l, s, None)?;
        if values.len() != m {
            return fail(l, format!("{} (offset line must hold {}, found {})", too_many(), plural(m, "value"), values.len()));
        }
        b.copy_from(&DVector::from_vec(values));
    }
    if let Some(&(l, _)) = body.get(expected_lines) {
        return fail(l, format!("{}; unexpected trailing data", too_many()));
    }
    Polytope::new(a, b).or_else(|e| fail(hline, format!("invalid polytope: {e}")))
}

pub fn serialize_polytope(p: &Polytope) -> String {
    let mut out = format!("{} {}\n", p.dim(), p.num_constraints());
    for row in p.a().row_iter() {
        let _ = writeln!(out, "{}", fmt_vector(&row.transpose(), " "));
    }
    if p.num_constraints() > 0 {
        let _ = writeln!(out, "{}", fmt_vector(p.b(), " "));
    }
    out
}

fn parse_square_block(lines: &[(usize, &str)], n: usize, what: &str) -> Result<DMatrix<f64>, FormatError> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let Some(&(l, s)) = lines.get(i) else {
            return fail(lines.last().map_or(1, |x| x.0), format!("expected {n} rows of {what}, found {i}"));
        };
        m.row_mut(i).copy_from_slice(&parse_row(l, s, n)?);
    }
    Ok(m)
}

fn parse_dim_header(lines: &[(usize, &str)]) -> Result<usize, FormatError> {
    let Some(&(l, s)) = lines.first() else {
        return fail(1, "missing header 'n'");
    };
    let n = parse_count(l, s, "n")?;
    if n == 0 {
        return fail(l, "dimension n must be at least 1");
    }
    Ok(n)
}

fn reject_trailing(lines: &[(usize, &str)], used: usize) -> Result<(), FormatError> {
    match lines.get(used) {
        Some(&(l, _)) => fail(l, "unexpected trailing data"),
        None => Ok(()),
    }
}

/// Header `n`, one line with the mean, then `n` rows of the covariance.
pub fn parse_gaussian(text: &str) -> Result<GaussianTarget, FormatError> {
    let lines = data_lines(text);
    let n = parse_dim_header(&lines)?;
    let Some(&(l, s)) = lines.get(1) else {
        return fail(lines[0].0, "missing mean line");
    };
    let mean = DVector::from_vec(parse_row(l, s, n)?);
    let cov = parse_square_block(&lines[2..], n, "covariance")?;
    reject_trailing(&lines, n + 2)?;
    GaussianTarget::new(mean, cov).or_else(|e| fail(lines[0].0, format!("invalid Gaussian: {e}")))
}

pub fn serialize_gaussian(g: &GaussianTarget) -> String {
    let mut out = format!("{}\n{}\n", g.dim(), fmt_vector(g.mean(), " "));
    for row in g.cov().row_iter() {
        let _ = writeln!(out, "{}", fmt_vector(&row.transpose(), " "));
    }
    out
}

/// Header `n`, `n` rows of the linear part, then one line with the shift.
pub fn parse_transform(text: &str) -> Result<AffineTransform, FormatError> {
    let lines = data_lines(text);
    let n = parse_dim_header(&lines)?;
    let linear = parse_square_block(&lines[1..], n, "the linear map")?;
    let Some(&(l, s)) = lines.get(n + 1) else {
        return fail(lines.last().map_or(1, |x| x.0), "missing shift line");
    };
    let shift = DVector::from_vec(parse_row(l, s, n)?);
    reject_trailing(&lines, n + 2)?;
    AffineTransform::new(linear, shift).or_else(|e| fail(lines[0].0, format!("invalid transform: {e}")))
}

pub fn serialize_transform(t: &AffineTransform) -> String {
    let mut out = format!("{}\n", t.dim());
    for row in t.linear.row_iter() {
        let _ = writeln!(out, "{}", fmt_vector(&row.transpose(), " "));
    }
    let _ = writeln!(out, "{}", fmt_vector(&t.shift, " "));
    out
}

/// Comma-separated coordinates, e.g. `1,2.5,-3`.
pub fn parse_point(s: &str) -> Result<DVector<f64>, FormatError> {
    let values = parse_floats(1, s.trim(), Some(','))?;
    if values.is_empty() {
        return fail(1, "empty point");
    }
    Ok(DVector::from_vec(values))
}

/// Ordered `key=value` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(pub Vec<(String, String)>);

impl KeyValues {
    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.0.push((key.to_string(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// One `key=value` per line, each prefixed by `prefix`.
    pub fn render(&self, prefix: &str) -> String {
        self.0.iter().map(|(k, v)| format!("{prefix}{k}={v}\n")).collect()
    }

    /// Reads `key=value` lines, skipping blanks and `#` comments.
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut out = Self::default();
        for (l, s) in data_lines(text) {
            let Some((k, v)) = s.split_once('=') else {
                return fail(l, "expected key=value");
            };
            out.push(k.trim(), v.trim());
        }
        Ok(out)
    }

    pub fn require(&self, key: &str) -> Result<&str, FormatError> {
        self.get(key).ok_or_else(|| FormatError { line: 0, message: format!("missing key '{key}'") })
    }
}

/// Sample CSV: `#` header block, optional column header, rows, `#` footer block.
pub fn render_csv(
    header: &KeyValues,
    column_header: bool,
    samples: &[DVector<f64>],
    footer: &KeyValues,
) -> String {
    let mut out = header.render("# ");
    if column_header {
        let n = samples.first().map_or(0, |s| s.len());
        let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        let _ = writeln!(out, "{}", names.join(","));
    }
    for s in samples {
        out.push_str(&fmt_vector(s, ","));
        out.push('\n');
    }
    out.push_str(&footer.render("# "));
    out
}

/// Rows of a sample CSV; comment lines and an `x1,…` header are skipped.
pub fn parse_csv(text: &str) -> Result<Vec<DVector<f64>>, FormatError> {
    data_lines(text)
        .into_iter()
        .filter(|(_, s)| !s.starts_with('x'))
        .map(|(l, s)| parse_floats(l, s, Some(',')).map(DVector::from_vec))
        .collect()
}

/// The `# key=value` lines of a file.
pub fn comment_block(text: &str) -> KeyValues {
    let mut out = KeyValues::default();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some((k, v)) = rest.split_once('=') {
                out.push(k, v);
            }
        }
    }
    out
}

/// The `# key=value` lines before the first data line.
pub fn leading_comment_block(text: &str) -> KeyValues {
    let end = text
        .lines()
        .position(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .unwrap_or(usize::MAX);
    let head: Vec<&str> = text.lines().take(end).collect();
    comment_block(&head.join("\n"))
}

/// Write through a temporary file in the target directory and rename it into
/// place, so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn read_file(path: &Path) -> std::io::Result<String> {
    fs::read_to_string(path)
}
