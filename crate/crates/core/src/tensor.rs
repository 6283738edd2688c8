//! Rank-one operator fields and the linear systems built from them.
//!
//! For a sample `p_0..p_{k-1}` with coordinate dimension `d`, the field holds
//! the `k x k` blocks `Y[j][i] = eta_ji eta_ji^T` where `eta_ji = log_{p_j}(p_i)`.
//! A weight vector `f` produces the covariance field
//! `Sigma[f]_j = sum_i f_i Y[j][i]`, and recovering `f` from `Sigma[f]` is the
//! linear system `sum_i f_i Y[j][i] = C_j`.
//!
//! Layouts (all indices zero-based, `l, m < d`, `j, i, r, s < k`):
//!
//! * `Y` is `d^2 k x k` with `Y[(l d + m) k + j, i] = Y[j][i][l, m]`, i.e. the
//!   `k x k` slices `B_lm[j, i] = Y[j][i][l, m]` stacked vertically in
//!   row-major `(l, m)` order.
//! * `C` is the length `d^2 k` vector with `C[(l d + m) k + j] = Sigma_j[l, m]`,
//!   so `Y f = C` whenever `C` comes from `Sigma[f]`.
//! * `Z` is `d k x d k` with block `(r, s)` equal to `Y[s][r]`, i.e.
//!   `Z[r d + l, s d + m] = Y[s][r][l, m]`. The first block row reads
//!   `Y[0][0] Y[1][0] .. Y[k-1][0]`.
//! * `Psi` is `k x k` with `Psi[j, i] = tr Y[j][i] = d(p_j, p_i)^2`.
//!
//! These layouts are part of the CSV output contract and are versioned as
//! [`LAYOUT_VERSION`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::manifold::{ManifoldSpec, SampleSet};
use crate::numrank::{rank_report, solve_least_squares, TolerancePolicy};

pub const LAYOUT_VERSION: u32 = 1;

/// The blocks `Y[j][i]` for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorField {
    pub manifold: ManifoldSpec,
    pub sample: SampleSet,
    blocks: Vec<DMatrix<f64>>,
    distances: DMatrix<f64>,
}

impl OperatorField {
    pub fn k(&self) -> usize {
        self.sample.len()
    }

    /// Coordinate dimension of each block.
    pub fn d(&self) -> usize {
        self.manifold.coord_dim()
    }

    /// `Y[j][i]`.
    pub fn block(&self, j: usize, i: usize) -> &DMatrix<f64> {
        &self.blocks[j * self.k() + i]
    }

    /// Geodesic distance `d(p_j, p_i)`.
    pub fn distance(&self, j: usize, i: usize) -> f64 {
        self.distances[(j, i)]
    }
}

/// Builds the field `Y[j][i] = log_{p_j}(p_i) log_{p_j}(p_i)^T`.
pub fn outer_field(manifold: ManifoldSpec, sample: &SampleSet) -> Result<OperatorField> {
    if sample.manifold != manifold {
        return Err(Error::SampleMismatch);
    }
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let k = sample.len();
    let d = manifold.coord_dim();
    let mut blocks = Vec::with_capacity(k * k);
    let mut distances = DMatrix::zeros(k, k);
    for j in 0..k {
        for i in 0..k {
            if i == j {
                blocks.push(DMatrix::zeros(d, d));
                continue;
            }
            let eta = manifold
                .log_map(&sample.points[j], &sample.points[i])
                .map_err(|e| match e {
                    Error::Antipodal { .. } => Error::Antipodal { first: j, second: i },
                    other => other,
                })?
                .coords;
            distances[(j, i)] = manifold.distance_unchecked(&sample.points[j], &sample.points[i]);
            blocks.push(&eta * eta.transpose());
        }
    }
    Ok(OperatorField { manifold, sample: sample.clone(), blocks, distances })
}

/// The matrices `Sigma_j`, one per sample point.
#[derive(Debug, Clone, PartialEq)]
pub struct CovField {
    pub sigmas: Vec<DMatrix<f64>>,
    /// The weights that generated the field, when known.
    pub f: Option<DVector<f64>>,
    /// Seed of the sample the field was built on.
    pub sample_seed: u64,
}

impl CovField {
    /// Wraps externally supplied `Sigma_j` blocks.
    pub fn from_blocks(sigmas: Vec<DMatrix<f64>>, sample_seed: u64) -> Result<Self> {
        let d = sigmas.first().ok_or(Error::EmptySample)?.nrows();
        for s in &sigmas {
            if s.nrows() != d || s.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: s.ncols() });
            }
            if s.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(CovField { sigmas, f: None, sample_seed })
    }

    pub fn k(&self) -> usize {
        self.sigmas.len()
    }

    fn check_against(&self, field: &OperatorField) -> Result<()> {
        let d = field.d();
        if self.k() != field.k() || self.sample_seed != field.sample.seed || self.sigmas.iter().any(|s| s.nrows() != d)
        {
            return Err(Error::SampleMismatch);
        }
        Ok(())
    }

    /// The unfolded vector `C` (see the module docs for the order).
    pub fn unfold(&self) -> DVector<f64> {
        let k = self.k();
        let d = self.sigmas.first().map_or(0, |s| s.nrows());
        let mut c = DVector::zeros(d * d * k);
        for (j, sigma) in self.sigmas.iter().enumerate() {
            for l in 0..d {
                for m in 0..d {
                    c[(l * d + m) * k + j] = sigma[(l, m)];
                }
            }
        }
        c
    }
}

fn check_weights(field: &OperatorField, f: &DVector<f64>) -> Result<()> {
    if f.len() != field.k() {
        return Err(Error::DimensionMismatch { expected: field.k(), actual: f.len() });
    }
    if f.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// `Sigma[f]_j = sum_i f_i Y[j][i]`.
pub fn sigma_field(field: &OperatorField, f: &DVector<f64>) -> Result<CovField> {
    check_weights(field, f)?;
    Ok(weighted_field(field, f, |_, _| 1.0))
}

/// Covariance field with the per-point shift weight
/// `Sigma_j = sum_{i : d_ji > 0} f_i (1 - alpha_j / d_ji)^2 Y[j][i]`.
///
/// Pairs at distance zero are skipped; their block is zero.
pub fn modified_sigma_field(field: &OperatorField, f: &DVector<f64>, alpha: &[f64]) -> Result<CovField> {
    check_weights(field, f)?;
    if alpha.len() != field.k() {
        return Err(Error::DimensionMismatch { expected: field.k(), actual: alpha.len() });
    }
    if let Some(a) = alpha.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
        return Err(Error::InvalidParameter(format!("shift must be finite and >= 0, got {a}")));
    }
    Ok(weighted_field(field, f, |j, i| (1.0 - alpha[j] / field.distance(j, i)).powi(2)))
}

fn weighted_field(field: &OperatorField, f: &DVector<f64>, weight: impl Fn(usize, usize) -> f64) -> CovField {
    let k = field.k();
    let d = field.d();
    let sigmas = (0..k)
        .map(|j| {
            let mut sigma = DMatrix::zeros(d, d);
            for i in 0..k {
                if field.distance(j, i) == 0.0 {
                    continue;
                }
                sigma += field.block(j, i) * (f[i] * weight(j, i));
            }
            sigma
        })
        .collect();
    CovField { sigmas, f: Some(f.clone()), sample_seed: field.sample.seed }
}

/// The `d^2 k x k` system matrix `Y`.
pub fn assemble_y(field: &OperatorField) -> DMatrix<f64> {
    let k = field.k();
    let d = field.d();
    DMatrix::from_fn(d * d * k, k, |row, i| {
        let j = row % k;
        let lm = row / k;
        field.block(j, i)[(lm / d, lm % d)]
    })
}

/// Free-function form of [`CovField::unfold`].
pub fn unfold_c(cov: &CovField) -> DVector<f64> {
    cov.unfold()
}

/// The `d k x d k` block matrix `Z`.
pub fn assemble_z(field: &OperatorField) -> DMatrix<f64> {
    let k = field.k();
    let d = field.d();
    DMatrix::from_fn(d * k, d * k, |row, col| {
        let (r, l) = (row / d, row % d);
        let (s, m) = (col / d, col % d);
        field.block(s, r)[(l, m)]
    })
}

/// `Psi[j, i] = tr Y[j][i]` and, when a covariance field is given,
/// `c[j] = tr Sigma_j`.
pub fn trace_system(field: &OperatorField, cov: Option<&CovField>) -> Result<(DMatrix<f64>, Option<DVector<f64>>)> {
    let k = field.k();
    let psi = DMatrix::from_fn(k, k, |j, i| field.block(j, i).trace());
    let c = match cov {
        Some(cov) => {
            cov.check_against(field)?;
            Some(DVector::from_iterator(k, cov.sigmas.iter().map(|s| s.trace())))
        }
        None => None,
    };
    Ok((psi, c))
}

/// Every matrix derived from one field.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSystem {
    pub y: DMatrix<f64>,
    pub c: Option<DVector<f64>>,
    pub z: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    pub c_trace: Option<DVector<f64>>,
}

impl TensorSystem {
    pub fn build(field: &OperatorField, cov: Option<&CovField>) -> Result<Self> {
        let (psi, c_trace) = trace_system(field, cov)?;
        Ok(TensorSystem { y: assemble_y(field), c: cov.map(CovField::unfold), z: assemble_z(field), psi, c_trace })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub f_hat: DVector<f64>,
    /// `|Y f_hat - C|`.
    pub residual: f64,
    pub rank_y: usize,
    /// Rank of `[Y | C]`.
    pub rank_augmented: usize,
    pub unique: bool,
}

/// Minimum-norm least-squares solution of `Y f = C`.
pub fn recover(field: &OperatorField, c: &DVector<f64>, policy: TolerancePolicy) -> Result<Recovery> {
    let y = assemble_y(field);
    if c.len() != y.nrows() {
        return Err(Error::DimensionMismatch { expected: y.nrows(), actual: c.len() });
    }
    let ls = solve_least_squares(&y, c, policy)?;
    let k = y.ncols();
    let mut augmented = y.insert_column(k, 0.0);
    augmented.set_column(k, c);
    let rank_augmented = rank_report(&augmented, policy)?.numerical_rank;
    Ok(Recovery { f_hat: ls.x, residual: ls.residual_norm, rank_y: ls.rank, rank_augmented, unique: ls.unique })
}

/// [`recover`] from a covariance field built on the same sample.
pub fn recover_cov(field: &OperatorField, cov: &CovField, policy: TolerancePolicy) -> Result<Recovery> {
    cov.check_against(field)?;
    recover(field, &cov.unfold(), policy)
}
