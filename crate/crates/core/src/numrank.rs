//! SVD-based numerical rank, spectral condition number, log-determinant
//! magnitude, and minimum-norm least squares.

use nalgebra::{DMatrix, DVector, SVD};
use serde::Serialize;

use crate::error::{Error, Result};

/// Unit roundoff of `f64` (half the machine epsilon).
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

/// Singular values within this factor of the threshold mark a rank decision
/// as borderline.
pub const BORDERLINE_FACTOR: f64 = 10.0;

/// Singular values at or below `ROUNDING_FLOOR * u * sigma_1` are rounding
/// noise of a backward-stable SVD and never make a decision borderline.
pub const ROUNDING_FLOOR: f64 = 4.0;

/// How the rank threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub enum TolerancePolicy {
    /// `tau = max(rows, cols) * unit roundoff * sigma_1`.
    #[default]
    ShapeRelative,
    /// `tau = factor * sigma_1`.
    Relative { factor: f64 },
    /// Fixed `tau`.
    Absolute { tau: f64 },
}

impl TolerancePolicy {
    pub fn relative(factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter(format!("tolerance factor must be positive, got {factor}")));
        }
        Ok(TolerancePolicy::Relative { factor })
    }

    pub fn absolute(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("absolute tolerance must be positive, got {tau}")));
        }
        Ok(TolerancePolicy::Absolute { tau })
    }

    /// The threshold for a `rows x cols` matrix with largest singular value
    /// `sigma_max`.
    pub fn threshold(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        match *self {
            TolerancePolicy::ShapeRelative => rows.max(cols) as f64 * UNIT_ROUNDOFF * sigma_max,
            TolerancePolicy::Relative { factor } => factor * sigma_max,
            TolerancePolicy::Absolute { tau } => tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    /// Descending.
    pub singular_values: Vec<f64>,
    pub numerical_rank: usize,
    pub tolerance_used: f64,
    /// `sigma_1 / sigma_min`, or infinity when `sigma_min` is at or below the
    /// tolerance.
    pub condition_number: f64,
    /// `sigma_1 / sigma_min` regardless of the tolerance; infinite only for
    /// an exactly zero `sigma_min`.
    pub spectral_ratio: f64,
    /// `sum(ln sigma_i)` for square matrices.
    pub log_abs_det: Option<f64>,
    /// Some singular value lies within [`BORDERLINE_FACTOR`] of the
    /// threshold on either side and above the rounding floor
    /// ([`ROUNDING_FLOOR`]).
    pub borderline: bool,
}

impl RankReport {
    pub fn is_full_rank(&self) -> bool {
        self.numerical_rank == self.singular_values.len()
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn svd(m: DMatrix<f64>, vectors: bool) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    SVD::try_new(m, vectors, vectors, f64::EPSILON, 0).ok_or(Error::NoConvergence)
}

/// Singular values in descending order.
pub fn singular_values(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_finite(matrix)?;
    let mut sv: Vec<f64> = svd(matrix.clone(), false)?.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

pub fn rank_report(matrix: &DMatrix<f64>, policy: TolerancePolicy) -> Result<RankReport> {
    let sv = singular_values(matrix)?;
    Ok(report_from_singular_values(sv, matrix.nrows(), matrix.ncols(), policy))
}

fn report_from_singular_values(sv: Vec<f64>, rows: usize, cols: usize, policy: TolerancePolicy) -> RankReport {
    let sigma_max = sv[0];
    let sigma_min = *sv.last().unwrap();
    let tau = policy.threshold(rows, cols, sigma_max);
    let numerical_rank = sv.iter().filter(|&&s| s > tau).count();
    let spectral_ratio = if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY };
    let condition_number = if sigma_min > tau && sigma_min > 0.0 { spectral_ratio } else { f64::INFINITY };
    let log_abs_det = (rows == cols).then(|| sv.iter().map(|s| s.ln()).sum());
    let floor = (tau / BORDERLINE_FACTOR).max(ROUNDING_FLOOR * UNIT_ROUNDOFF * sigma_max);
    let borderline = tau > 0.0 && sv.iter().any(|&s| s > floor && s < tau * BORDERLINE_FACTOR);
    RankReport {
        singular_values: sv,
        numerical_rank,
        tolerance_used: tau,
        condition_number,
        spectral_ratio,
        log_abs_det,
        borderline,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    /// Minimum-norm minimizer of `|A x - b|`.
    pub x: DVector<f64>,
    pub residual_norm: f64,
    pub rank: usize,
    /// `rank == cols`.
    pub unique: bool,
}

/// Minimum-norm least-squares solve through the truncated SVD, using the
/// same threshold rule as [`rank_report`].
pub fn solve_least_squares(a: &DMatrix<f64>, b: &DVector<f64>, policy: TolerancePolicy) -> Result<LeastSquares> {
    check_finite(a)?;
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), actual: b.len() });
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let dec = svd(a.clone(), true)?;
    let (u, v_t) = match (&dec.u, &dec.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::NoConvergence),
    };
    let sigma_max = dec.singular_values.iter().copied().fold(0.0, f64::max);
    let tau = policy.threshold(a.nrows(), a.ncols(), sigma_max);
    let mut x = DVector::zeros(a.ncols());
    let mut rank = 0;
    for (i, &s) in dec.singular_values.iter().enumerate() {
        if s > tau {
            rank += 1;
            let coef = u.column(i).dot(b) / s;
            x += v_t.row(i).transpose() * coef;
        }
    }
    let residual_norm = (a * &x - b).norm();
    Ok(LeastSquares { x, residual_norm, rank, unique: rank == a.ncols() })
}
