//! Seeded experiment drivers.
//!
//! Trial `t` at sample size `k` draws its points with
//! [`trial_seed`]`(seed, k, t)`, so results depend only on the configuration
//! and not on how rayon schedules trials. Per-trial results are collected in
//! trial order before any aggregation.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, theoretical_rank, KernelFamily, KernelSpec, RankClass};
use crate::manifold::{ManifoldSpec, Region, SampleSet};
use crate::numrank::{rank_report, RankReport, TolerancePolicy};
use crate::rng::derive_seed;
use crate::tensor::{assemble_y, assemble_z, outer_field};

/// Trials whose borderline share exceeds this are inconclusive.
pub const INCONCLUSIVE_BORDERLINE_FRACTION: f64 = 0.05;

/// Sample sizes of the reference condition-number table.
pub const DEFAULT_K_GRID: [usize; 6] = [50, 100, 150, 200, 250, 300];

/// Trials per table cell in the reference condition-number table.
pub const DEFAULT_COND_TRIALS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub manifold: ManifoldSpec,
    /// Sampling box for Euclidean experiments; the unit cube when `None`.
    pub region: Option<Region>,
    pub kernel: KernelSpec,
    pub k_values: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub tolerance: TolerancePolicy,
}

impl ExperimentConfig {
    pub fn new(kernel: KernelSpec, k_values: Vec<usize>, trials: usize, seed: u64) -> Result<Self> {
        let cfg = ExperimentConfig {
            manifold: kernel.manifold,
            region: None,
            kernel,
            k_values,
            trials,
            seed,
            tolerance: TolerancePolicy::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel.manifold != self.manifold {
            return Err(Error::InvalidParameter("kernel and experiment use different manifolds".into()));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::InvalidParameter("k values must be nonempty and positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if let (Some(region), ManifoldSpec::Euclidean { n }) = (&self.region, self.manifold) {
            region.validate(n)?;
        }
        Ok(())
    }

    fn sample(&self, k: usize, t: usize) -> Result<SampleSet> {
        self.manifold.sample_uniform(k, trial_seed(self.seed, k, t), self.region.as_ref())
    }
}

/// Seed of trial `t` at sample size `k`.
pub fn trial_seed(seed: u64, k: usize, t: usize) -> u64 {
    derive_seed(derive_seed(seed, k as u64), t as u64)
}

/// Which matrix a rank-law sweep measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SystemKind {
    /// The `k x k` kernel matrix.
    KernelMatrix,
    /// The unfolded `d^2 k x k` tensor system.
    Y,
    /// The `d k x d k` block matrix.
    Z,
}

impl SystemKind {
    /// Known upper bound on the rank at sample size `k`, where one exists.
    ///
    /// Kernel matrices use the kernel's rank class. For Euclidean `R^n`, `Y`
    /// has rank at most `(n+1)(n+2)/2` and `Z` at most `n(n+2)`.
    pub fn rank_bound(&self, kernel: &KernelSpec, k: usize) -> Option<usize> {
        match (self, kernel.manifold) {
            (SystemKind::KernelMatrix, _) => match theoretical_rank(kernel).ok()? {
                RankClass::FiniteRank(r) => Some(r.min(k)),
                RankClass::FullRankAE => Some(k),
            },
            (SystemKind::Y, ManifoldSpec::Euclidean { n }) => Some(((n + 1) * (n + 2) / 2).min(k)),
            (SystemKind::Y, ManifoldSpec::UnitSphere { .. }) => Some(k),
            (SystemKind::Z, ManifoldSpec::Euclidean { n }) => Some((n * (n + 2)).min(n * k)),
            (SystemKind::Z, ManifoldSpec::UnitSphere { .. }) => None,
        }
    }

    /// Column count of the system at sample size `k`.
    pub fn columns(&self, manifold: ManifoldSpec, k: usize) -> usize {
        match self {
            SystemKind::KernelMatrix | SystemKind::Y => k,
            SystemKind::Z => manifold.coord_dim() * k,
        }
    }

    fn matrix(&self, kernel: &KernelSpec, sample: &SampleSet) -> Result<DMatrix<f64>> {
        match self {
            SystemKind::KernelMatrix => Ok(kernel_matrix(kernel, sample, sample)?.entries),
            SystemKind::Y => Ok(assemble_y(&outer_field(sample.manifold, sample)?)),
            SystemKind::Z => Ok(assemble_z(&outer_field(sample.manifold, sample)?)),
        }
    }
}

fn run_trials(cfg: &ExperimentConfig, system: SystemKind, k: usize) -> Result<Vec<RankReport>> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let sample = cfg.sample(k, t)?;
            rank_report(&system.matrix(&cfg.kernel, &sample)?, cfg.tolerance)
        })
        .collect()
}

/// Fraction of trials whose `k x k` kernel matrix has numerical rank `k`.
pub fn fullrank_probability(cfg: &ExperimentConfig, k: usize) -> Result<f64> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let reports = run_trials(cfg, SystemKind::KernelMatrix, k)?;
    Ok(reports.iter().filter(|r| r.numerical_rank == k).count() as f64 / cfg.trials as f64)
}

/// Observed rank distribution at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankLawRow {
    pub k: usize,
    pub trials: usize,
    /// Upper bound from [`SystemKind::rank_bound`].
    pub bound: Option<usize>,
    pub min_rank: usize,
    pub max_rank: usize,
    /// `(rank, count)` pairs in ascending rank order.
    pub rank_counts: Vec<(usize, usize)>,
    /// Trials whose rank equals the bound.
    pub bound_equal_fraction: Option<f64>,
    /// Trials whose rank exceeds the bound.
    pub bound_exceeded: usize,
    /// Non-borderline trials whose rank differs from the bound.
    pub decisive_mismatches: usize,
    pub fullrank_fraction: f64,
    pub borderline_fraction: f64,
    pub mean_cond: f64,
}

impl RankLawRow {
    pub fn is_inconclusive(&self) -> bool {
        self.borderline_fraction > INCONCLUSIVE_BORDERLINE_FRACTION
    }
}

/// Measures the rank of `system` at every configured sample size.
pub fn rank_law_sweep(cfg: &ExperimentConfig, system: SystemKind) -> Result<Vec<RankLawRow>> {
    cfg.validate()?;
    cfg.k_values
        .iter()
        .map(|&k| {
            let reports = run_trials(cfg, system, k)?;
            let bound = system.rank_bound(&cfg.kernel, k);
            let columns = system.columns(cfg.manifold, k);
            let trials = reports.len() as f64;
            let mut counts = BTreeMap::new();
            for r in &reports {
                *counts.entry(r.numerical_rank).or_insert(0usize) += 1;
            }
            let ranks = reports.iter().map(|r| r.numerical_rank);
            Ok(RankLawRow {
                k,
                trials: reports.len(),
                bound,
                min_rank: ranks.clone().min().unwrap_or(0),
                max_rank: ranks.max().unwrap_or(0),
                rank_counts: counts.into_iter().collect(),
                bound_equal_fraction: bound
                    .map(|b| reports.iter().filter(|r| r.numerical_rank == b).count() as f64 / trials),
                bound_exceeded: bound.map_or(0, |b| reports.iter().filter(|r| r.numerical_rank > b).count()),
                decisive_mismatches: bound
                    .map_or(0, |b| reports.iter().filter(|r| !r.borderline && r.numerical_rank != b).count()),
                fullrank_fraction: reports.iter().filter(|r| r.numerical_rank == columns).count() as f64 / trials,
                borderline_fraction: reports.iter().filter(|r| r.borderline).count() as f64 / trials,
                mean_cond: reports.iter().map(|r| r.spectral_ratio).sum::<f64>() / trials,
            })
        })
        .collect()
}

/// Condition statistics for one `(alpha, k)` cell.
///
/// Condition numbers here are the raw spectral ratios `sigma_1 / sigma_min`:
/// for `alpha = 0` at large `k` they sit beyond the rank tolerance, and the
/// tolerance-gated value would be infinite in every trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub k: usize,
    pub alpha: f64,
    pub mean_cond: f64,
    pub min_cond: f64,
    pub max_cond: f64,
    pub mean_log_abs_det: f64,
    pub fullrank_fraction: f64,
    pub borderline_fraction: f64,
}

impl SweepRow {
    pub fn is_inconclusive(&self) -> bool {
        self.borderline_fraction > INCONCLUSIVE_BORDERLINE_FRACTION
    }

    fn from_reports(k: usize, alpha: f64, reports: &[RankReport]) -> Self {
        let n = reports.len() as f64;
        let conds = || reports.iter().map(|r| r.spectral_ratio);
        SweepRow {
            k,
            alpha,
            mean_cond: conds().sum::<f64>() / n,
            min_cond: conds().fold(f64::INFINITY, f64::min),
            max_cond: conds().fold(f64::NEG_INFINITY, f64::max),
            mean_log_abs_det: reports.iter().map(|r| r.log_abs_det.unwrap_or(f64::NAN)).sum::<f64>() / n,
            fullrank_fraction: reports.iter().filter(|r| r.is_full_rank()).count() as f64 / n,
            borderline_fraction: reports.iter().filter(|r| r.borderline).count() as f64 / n,
        }
    }
}

/// Condition numbers of the shifted squared-distance matrix
/// `D = {(d(p_i, p_j) - alpha)^2}` for every `(alpha, k)` pair.
///
/// Every alpha is evaluated on the same samples. Rows are ordered by alpha,
/// then by k, following the input order.
pub fn condition_sweep(
    manifold: ManifoldSpec,
    region: Option<&Region>,
    alphas: &[f64],
    k_values: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() || k_values.is_empty() || k_values.contains(&0) || trials == 0 {
        return Err(Error::InvalidParameter("condition sweep needs alphas, positive k values and trials".into()));
    }
    let kernels =
        alphas.iter().map(|&a| Ok(KernelSpec::new(KernelFamily::shifted(a)?, manifold))).collect::<Result<Vec<_>>>()?;
    let mut cells: Vec<Vec<SweepRow>> = vec![Vec::with_capacity(k_values.len()); alphas.len()];
    for &k in k_values {
        let per_trial: Vec<Vec<RankReport>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let sample = manifold.sample_uniform(k, trial_seed(seed, k, t), region)?;
                kernels
                    .iter()
                    .map(|kernel| {
                        rank_report(&kernel_matrix(kernel, &sample, &sample)?.entries, TolerancePolicy::default())
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        for (a, &alpha) in alphas.iter().enumerate() {
            let reports: Vec<RankReport> = per_trial.iter().map(|r| r[a].clone()).collect();
            cells[a].push(SweepRow::from_reports(k, alpha, &reports));
        }
    }
    Ok(cells.into_iter().flatten().collect())
}

/// Monte Carlo estimate of the shift minimizing `E (d(X, Y) - alpha)^2`,
/// which is `E d(X, Y)`.
pub fn alpha_recommendation(manifold: ManifoldSpec, trials: usize, seed: u64, region: Option<&Region>) -> Result<f64> {
    manifold.expected_distance(trials, seed, region)
}

/// Closed-form `E d(X, Y)` where known: `pi/2` on every sphere (the
/// antipodal map sends `d` to `pi - d`), `(b - a)/3` on an interval `[a, b]`.
pub fn analytic_mean_distance(manifold: ManifoldSpec, region: Option<&Region>) -> Option<f64> {
    match manifold {
        ManifoldSpec::UnitSphere { .. } => Some(FRAC_PI_2),
        ManifoldSpec::Euclidean { n: 1 } => {
            let (lo, hi) = region.map_or((0.0, 1.0), |r| (r.lower[0], r.upper[0]));
            Some((hi - lo) / 3.0)
        }
        ManifoldSpec::Euclidean { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::DotKernel;

    fn cfg(family: KernelFamily, m: ManifoldSpec, k: Vec<usize>, trials: usize) -> ExperimentConfig {
        ExperimentConfig::new(KernelSpec::new(family, m), k, trials, 1).unwrap()
    }

    #[test]
    fn config_validation() {
        let m = ManifoldSpec::sphere(2).unwrap();
        let k = KernelSpec::new(KernelFamily::SquaredDistance, m);
        assert!(ExperimentConfig::new(k, vec![], 1, 0).is_err());
        assert!(ExperimentConfig::new(k, vec![0], 1, 0).is_err());
        assert!(ExperimentConfig::new(k, vec![3], 0, 0).is_err());
        let mut c = ExperimentConfig::new(k, vec![3], 1, 0).unwrap();
        c.manifold = ManifoldSpec::sphere(3).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn sphere_full_rank() {
        let s2 = ManifoldSpec::sphere(2).unwrap();
        let c = cfg(KernelFamily::DotProduct(DotKernel::ArccosSquared), s2, vec![20], 100);
        assert_eq!(fullrank_probability(&c, 20).unwrap(), 1.0);
    }

    #[test]
    fn line_rank_cap() {
        let r1 = ManifoldSpec::euclidean(1).unwrap();
        let c = cfg(KernelFamily::SquaredDistance, r1, vec![3, 5], 100);
        assert_eq!(fullrank_probability(&c, 5).unwrap(), 0.0);
        assert_eq!(fullrank_probability(&c, 3).unwrap(), 1.0);
    }

    #[test]
    fn rank_law_examples() {
        let r3 = ManifoldSpec::euclidean(3).unwrap();
        let rows = rank_law_sweep(&cfg(KernelFamily::SquaredDistance, r3, vec![15], 20), SystemKind::Y).unwrap();
        assert_eq!(rows[0].rank_counts, vec![(10, 20)]);

        let r1 = ManifoldSpec::euclidean(1).unwrap();
        let rows = rank_law_sweep(&cfg(KernelFamily::SquaredDistance, r1, vec![8], 20), SystemKind::Z).unwrap();
        assert_eq!(rows[0].rank_counts, vec![(3, 20)]);

        let r2 = ManifoldSpec::euclidean(2).unwrap();
        let rows =
            rank_law_sweep(&cfg(KernelFamily::SquaredDistance, r2, vec![10], 20), SystemKind::KernelMatrix).unwrap();
        assert_eq!(rows[0].rank_counts, vec![(4, 20)]);
        assert_eq!(rows[0].bound, Some(4));
        assert_eq!(rows[0].bound_equal_fraction, Some(1.0));
        assert_eq!(rows[0].fullrank_fraction, 0.0);
    }

    #[test]
    fn single_point_condition() {
        let s2 = ManifoldSpec::sphere(2).unwrap();
        let rows = condition_sweep(s2, None, &[0.5, 1.0], &[1], 3, 0).unwrap();
        assert_eq!(rows.len(), 2);
        for r in rows {
            assert_eq!(r.mean_cond, 1.0);
            assert!((r.mean_log_abs_det - (r.alpha * r.alpha).ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn sweep_rows_ordered_and_bounded() {
        let s2 = ManifoldSpec::sphere(2).unwrap();
        let rows = condition_sweep(s2, None, &[0.0, FRAC_PI_2], &[10, 20], 5, 3).unwrap();
        let keys: Vec<(f64, usize)> = rows.iter().map(|r| (r.alpha, r.k)).collect();
        assert_eq!(keys, vec![(0.0, 10), (0.0, 20), (FRAC_PI_2, 10), (FRAC_PI_2, 20)]);
        for r in &rows {
            assert!(r.min_cond <= r.mean_cond && r.mean_cond <= r.max_cond);
        }
        assert!(condition_sweep(s2, None, &[], &[10], 5, 3).is_err());
        assert!(condition_sweep(s2, None, &[-0.1], &[10], 5, 3).is_err());
    }

    #[test]
    fn analytic_means() {
        assert_eq!(analytic_mean_distance(ManifoldSpec::sphere(5).unwrap(), None), Some(FRAC_PI_2));
        let r1 = ManifoldSpec::euclidean(1).unwrap();
        assert_eq!(analytic_mean_distance(r1, Some(&Region::cube(1, 0.0, 3.0))), Some(1.0));
        assert_eq!(analytic_mean_distance(ManifoldSpec::euclidean(2).unwrap(), None), None);
    }
}
