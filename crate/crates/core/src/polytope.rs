//! Open H-polytopes `K = {x | Ax > b}`: slacks, strict membership and chords.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{check_dim, check_finite};
use crate::{Error, Result};

/// The open polytope `{x ∈ ℝⁿ | aᵢᵀx − bᵢ > 0, i = 1..m}`.
///
/// `m = 0` is allowed and describes all of `ℝⁿ`. Rows of `A` must be nonzero
/// and all entries finite. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

/// Per-constraint slacks `sᵢ = aᵢᵀx − bᵢ` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Slack {
    pub values: DVector<f64>,
}

impl Slack {
    /// All slacks strictly positive.
    pub fn is_interior(&self) -> bool {
        self.values.iter().all(|&s| s > 0.0)
    }

    /// The diagonal matrix `S_x`.
    pub fn diag(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.values)
    }

    /// The row-scaled matrix `A_x = S_x⁻¹A`.
    pub fn scaled_rows(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut ax = a.clone();
        for (mut row, s) in ax.row_iter_mut().zip(self.values.iter()) {
            row /= *s;
        }
        ax
    }
}

/// Parameter interval `(t_minus, t_plus)` of the line `x + t·d` inside `K`.
///
/// Either end may be infinite when the line leaves `K` only at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chord {
    pub t_minus: f64,
    pub t_plus: f64,
}

impl Chord {
    pub fn contains(&self, t: f64) -> bool {
        self.t_minus < t && t < self.t_plus
    }

    pub fn is_bounded(&self) -> bool {
        self.t_minus.is_finite() && self.t_plus.is_finite()
    }
}

impl Polytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.len() });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if let Some(i) = a.row_iter().position(|row| row.iter().all(|&v| v == 0.0)) {
            return Err(Error::ZeroRow(i));
        }
        Ok(Self { a, b })
    }

    /// `ℝⁿ` with no constraints.
    pub fn unconstrained(n: usize) -> Self {
        Self { a: DMatrix::zeros(0, n), b: DVector::zeros(0) }
    }

    /// The box `lo < x < hi`: rows `xᵢ > loᵢ` followed by `−xᵢ > −hiᵢ`.
    pub fn make_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let n = lo.len();
        if hi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: hi.len() });
        }
        if let Some(i) = (0..n).find(|&i| !(lo[i] < hi[i])) {
            return Err(Error::DegenerateBounds(i));
        }
        let eye = DMatrix::<f64>::identity(n, n);
        let mut a = DMatrix::zeros(2 * n, n);
        a.rows_mut(0, n).copy_from(&eye);
        a.rows_mut(n, n).copy_from(&(-eye));
        let b = DVector::from_iterator(2 * n, lo.iter().copied().chain(hi.iter().map(|h| -h)));
        Self::new(a, b)
    }

    /// The positive orthant `xᵢ > 0`.
    pub fn make_orthant(n: usize) -> Self {
        Self { a: DMatrix::identity(n, n), b: DVector::zeros(n) }
    }

    /// The open standard simplex `xᵢ > 0, 1 − Σxᵢ > 0`.
    pub fn make_simplex(n: usize) -> Self {
        let mut a = DMatrix::zeros(n + 1, n);
        a.rows_mut(0, n).fill_with_identity();
        a.row_mut(n).fill(-1.0);
        let mut b = DVector::zeros(n + 1);
        b[n] = -1.0;
        Self { a, b }
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    /// Number of constraints `m`.
    pub fn num_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Slacks at `x`; `x` need not be interior.
    pub fn slack(&self, x: &DVector<f64>) -> Result<Slack> {
        check_dim(x, self.dim())?;
        check_finite(x)?;
        Ok(self.slack_unchecked(x))
    }

    pub(crate) fn slack_unchecked(&self, x: &DVector<f64>) -> Slack {
        Slack { values: &self.a * x - &self.b }
    }

    /// Strict membership; boundary points are outside.
    pub fn contains(&self, x: &DVector<f64>) -> Result<bool> {
        check_dim(x, self.dim())?;
        Ok(self.is_interior(x))
    }

    pub(crate) fn is_interior(&self, x: &DVector<f64>) -> bool {
        self.slack_unchecked(x).is_interior()
    }

    /// Interior slack, or [`Error::NotInterior`].
    pub fn interior_slack(&self, x: &DVector<f64>) -> Result<Slack> {
        let s = self.slack(x)?;
        if s.is_interior() {
            Ok(s)
        } else {
            Err(Error::NotInterior)
        }
    }

    /// Chord of `K` through interior `x` along `d`.
    ///
    /// Constraint `i` bounds the `+d` side when `aᵢᵀd < 0` and the `−d` side
    /// when `aᵢᵀd > 0`; rows with `aᵢᵀd == 0.0` exactly are parallel.
    pub fn chord(&self, x: &DVector<f64>, d: &DVector<f64>) -> Result<Chord> {
        check_dim(d, self.dim())?;
        check_finite(d)?;
        let s = self.interior_slack(x)?;
        if d.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroDirection);
        }
        let ad = &self.a * d;
        let mut chord = Chord { t_minus: f64::NEG_INFINITY, t_plus: f64::INFINITY };
        for (si, adi) in s.values.iter().zip(ad.iter()) {
            if *adi < 0.0 {
                chord.t_plus = chord.t_plus.min(si / -adi);
            } else if *adi > 0.0 {
                chord.t_minus = chord.t_minus.max(-si / adi);
            }
        }
        Ok(chord)
    }

    /// Euclidean norm of each constraint row.
    pub fn row_norms(&self) -> DVector<f64> {
        DVector::from_iterator(self.num_constraints(), self.a.row_iter().map(|r| r.norm()))
    }
}
