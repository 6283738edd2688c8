//! Distance and dot-product kernels, kernel matrices, and a rank oracle for
//! the kernel families whose rank is known in closed form.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{ManifoldPoint, ManifoldSpec, SampleSet};

/// Analytic function `h` applied to the inner product `x . y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DotKernel {
    /// `acos(x . y)`
    Arccos,
    /// `acos(x . y)^2`
    ArccosSquared,
    /// `cos(x . y)`
    Cos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KernelFamily {
    /// `d(p, q)^2`
    SquaredDistance,
    /// `(d(p, q) - alpha)^2`
    ShiftedSquaredDistance { alpha: f64 },
    /// `h(p . q)`
    DotProduct(DotKernel),
}

impl KernelFamily {
    pub fn shifted(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("shift must be finite and >= 0, got {alpha}")));
        }
        Ok(KernelFamily::ShiftedSquaredDistance { alpha })
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::SquaredDistance => f.write_str("sqdist"),
            KernelFamily::ShiftedSquaredDistance { alpha } => write!(f, "shifted:{alpha}"),
            KernelFamily::DotProduct(DotKernel::Arccos) => f.write_str("dot:arccos"),
            KernelFamily::DotProduct(DotKernel::ArccosSquared) => f.write_str("dot:arccos2"),
            KernelFamily::DotProduct(DotKernel::Cos) => f.write_str("dot:cos"),
        }
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    /// Grammar: `sqdist`, `shifted:<alpha>`, `dot:arccos`, `dot:arccos2`, `dot:cos`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqdist" => Ok(KernelFamily::SquaredDistance),
            "dot:arccos" => Ok(KernelFamily::DotProduct(DotKernel::Arccos)),
            "dot:arccos2" => Ok(KernelFamily::DotProduct(DotKernel::ArccosSquared)),
            "dot:cos" => Ok(KernelFamily::DotProduct(DotKernel::Cos)),
            _ => match s.strip_prefix("shifted:") {
                Some(alpha) => KernelFamily::shifted(parse_real(alpha)?),
                None => Err(Error::Parse(format!("unknown kernel `{s}`"))),
            },
        }
    }
}

/// Parses a real number, also accepting `pi`, `pi/<x>` and `<x>*pi`.
pub fn parse_real(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Parse(format!("bad number `{s}`"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    if s == "pi" {
        Ok(PI)
    } else if let Some(den) = s.strip_prefix("pi/") {
        Ok(PI / num(den)?)
    } else if let Some(factor) = s.strip_suffix("*pi") {
        Ok(num(factor)? * PI)
    } else {
        num(s)
    }
}

/// A kernel family member bound to the space it is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub manifold: ManifoldSpec,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, manifold: ManifoldSpec) -> Self {
        KernelSpec { family, manifold }
    }

    /// Kernel value `psi(p, q)`.
    pub fn eval(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<f64> {
        let d = self.manifold.coord_dim();
        for x in [p, q] {
            if x.coords().len() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: x.coords().len() });
            }
        }
        Ok(self.eval_unchecked(p, q))
    }

    fn eval_unchecked(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> f64 {
        match self.family {
            KernelFamily::SquaredDistance => self.manifold.distance_unchecked(p, q).powi(2),
            KernelFamily::ShiftedSquaredDistance { alpha } => (self.manifold.distance_unchecked(p, q) - alpha).powi(2),
            KernelFamily::DotProduct(h) => {
                // A sphere point's inner product with itself is 1, whatever
                // the rounding in its coordinates says.
                let z = if self.manifold.is_sphere() && p == q { 1.0 } else { p.coords().dot(q.coords()) };
                match h {
                    DotKernel::Arccos => z.clamp(-1.0, 1.0).acos(),
                    DotKernel::ArccosSquared => z.clamp(-1.0, 1.0).acos().powi(2),
                    DotKernel::Cos => z.cos(),
                }
            }
        }
    }
}

/// Free-function form of [`KernelSpec::eval`].
pub fn eval_kernel(kernel: &KernelSpec, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<f64> {
    kernel.eval(p, q)
}

/// Point evaluations `psi(rows[i], cols[j])`, without quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub entries: DMatrix<f64>,
    pub kernel: KernelSpec,
    pub row_seed: u64,
    pub col_seed: u64,
}

pub fn kernel_matrix(kernel: &KernelSpec, rows: &SampleSet, cols: &SampleSet) -> Result<KernelMatrix> {
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::EmptySample);
    }
    for s in [rows, cols] {
        if s.manifold != kernel.manifold {
            return Err(Error::SampleMismatch);
        }
    }
    let d = kernel.manifold.coord_dim();
    if let Some(p) = rows.points.iter().chain(&cols.points).find(|p| p.coords().len() != d) {
        return Err(Error::DimensionMismatch { expected: d, actual: p.coords().len() });
    }
    let entries =
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| kernel.eval_unchecked(&rows.points[i], &cols.points[j]));
    Ok(KernelMatrix { entries, kernel: *kernel, row_seed: rows.seed, col_seed: cols.seed })
}

/// Taylor coefficients `c_0..=c_order` of `acos(z)` about `z = 0`.
///
/// `acos(z) = pi/2 - sum_k a_k z^(2k+1) / (2k+1)` with
/// `a_k = (2k)! / (4^k (k!)^2)`. The central binomial ratio obeys
/// `a_k = a_(k-1) (2k - 1) / (2k)`, which stays in range for any order
/// where the raw factorials would overflow.
pub fn arccos_taylor_coeffs(order: usize) -> Vec<f64> {
    let mut coeffs = vec![0.0; order + 1];
    coeffs[0] = FRAC_PI_2;
    let mut a = 1.0;
    let mut k = 0usize;
    while 2 * k < order {
        if k > 0 {
            a *= (2 * k - 1) as f64 / (2 * k) as f64;
        }
        coeffs[2 * k + 1] = -a / (2 * k + 1) as f64;
        k += 1;
    }
    coeffs
}

/// Partial sum of the `acos` series through `z^order` (Horner form).
pub fn arccos_series(z: f64, order: usize) -> f64 {
    arccos_taylor_coeffs(order).iter().rev().fold(0.0, |acc, c| acc * z + c)
}

/// Exact rank class of a kernel, when it is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RankClass {
    /// Every evaluation matrix has rank at most `k`, and `k` is attained.
    FiniteRank(usize),
    /// Evaluation matrices of any size are nonsingular for almost every
    /// choice of points.
    FullRankAE,
}

/// Rank oracle. Refuses combinations whose rank is not settled rather than
/// guessing.
pub fn theoretical_rank(kernel: &KernelSpec) -> Result<RankClass> {
    let m = kernel.manifold;
    let unclassified = || Err(Error::UnclassifiedKernel(format!("{} on {m}", kernel.family)));
    match (kernel.family, m) {
        (KernelFamily::SquaredDistance, ManifoldSpec::Euclidean { n }) => Ok(RankClass::FiniteRank(n + 2)),
        (KernelFamily::ShiftedSquaredDistance { alpha: 0.0 }, ManifoldSpec::Euclidean { n }) => {
            Ok(RankClass::FiniteRank(n + 2))
        }
        // Geodesic d^2 on the sphere is acos(x . y)^2.
        (KernelFamily::SquaredDistance, ManifoldSpec::UnitSphere { .. }) => Ok(RankClass::FullRankAE),
        (KernelFamily::ShiftedSquaredDistance { alpha: 0.0 }, ManifoldSpec::UnitSphere { .. }) => {
            Ok(RankClass::FullRankAE)
        }
        (KernelFamily::DotProduct(DotKernel::Arccos | DotKernel::ArccosSquared), ManifoldSpec::UnitSphere { .. }) => {
            Ok(RankClass::FullRankAE)
        }
        (KernelFamily::DotProduct(DotKernel::Cos), _) => Ok(RankClass::FullRankAE),
        _ => unclassified(),
    }
}
