//! Distance-kernel matrices and covariance tensor systems on Euclidean space
//! and the unit sphere, with tools to measure their numerical rank and
//! conditioning by seeded Monte Carlo experiment.
//!
//! * [`manifold`]: points, geodesic distance, exponential and log maps,
//!   uniform sampling.
//! * [`kernel`]: kernel families, kernel matrices, the `acos` Taylor series
//!   and a rank oracle.
//! * [`numrank`]: SVD rank reports and minimum-norm least squares.
//! * [`tensor`]: operator fields and the `Y`, `C`, `Z`, `Psi` systems.
//! * [`montecarlo`]: rank-law and condition-number sweeps.
//! * [`report`]: CSV and JSON-lines writers for sweep results.

pub mod error;
pub mod kernel;
pub mod manifold;
pub mod montecarlo;
pub mod numrank;
pub mod report;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use kernel::{
    arccos_series, arccos_taylor_coeffs, eval_kernel, kernel_matrix, theoretical_rank, DotKernel, KernelFamily,
    KernelMatrix, KernelSpec, RankClass,
};
pub use manifold::{ManifoldPoint, ManifoldSpec, Region, SampleSet, TangentVector};
pub use montecarlo::{
    alpha_recommendation, condition_sweep, fullrank_probability, rank_law_sweep, ExperimentConfig, RankLawRow,
    SweepRow, SystemKind,
};
pub use numrank::{rank_report, solve_least_squares, LeastSquares, RankReport, TolerancePolicy};
pub use report::{Field, Record};
pub use tensor::{
    assemble_y, assemble_z, modified_sigma_field, outer_field, recover, recover_cov, sigma_field, trace_system,
    unfold_c, CovField, OperatorField, Recovery, TensorSystem,
};

pub use nalgebra::{DMatrix, DVector};
