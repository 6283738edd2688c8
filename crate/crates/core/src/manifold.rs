//! Geometry of the two model spaces: Euclidean `R^n` and the unit sphere `S^n`.
//!
//! Points and tangent vectors are stored in ambient coordinates: `n` numbers
//! for `R^n`, `n + 1` for `S^n`. Sphere tangent vectors therefore carry no
//! per-point frame, and `|log_p(q)|^2` is the squared geodesic distance
//! without any change of basis.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

/// Largest deviation of a sphere point's norm from 1.
pub const SPHERE_NORM_TOL: f64 = 1e-12;
/// Largest inner product between a sphere tangent vector and its base point.
pub const TANGENCY_TOL: f64 = 1e-10;
/// Pairs closer than this to antipodal have no log map.
pub const ANTIPODAL_MARGIN: f64 = 1e-8;

/// One of the two supported spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ManifoldSpec {
    Euclidean { n: usize },
    UnitSphere { n: usize },
}

impl ManifoldSpec {
    pub fn euclidean(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("Euclidean dimension must be positive".into()));
        }
        Ok(ManifoldSpec::Euclidean { n })
    }

    pub fn sphere(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("sphere dimension must be positive".into()));
        }
        Ok(ManifoldSpec::UnitSphere { n })
    }

    /// Intrinsic dimension `n`.
    pub fn dim(&self) -> usize {
        match *self {
            ManifoldSpec::Euclidean { n } | ManifoldSpec::UnitSphere { n } => n,
        }
    }

    /// Length of point and tangent coordinate vectors.
    pub fn coord_dim(&self) -> usize {
        match *self {
            ManifoldSpec::Euclidean { n } => n,
            ManifoldSpec::UnitSphere { n } => n + 1,
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self, ManifoldSpec::UnitSphere { .. })
    }

    /// Validates `coords` and wraps them as a point of this space.
    pub fn point(&self, coords: impl Into<Vec<f64>>) -> Result<ManifoldPoint> {
        let p = ManifoldPoint(DVector::from_vec(coords.into()));
        self.check_point(&p)?;
        Ok(p)
    }

    pub fn check_point(&self, p: &ManifoldPoint) -> Result<()> {
        self.check_len(p.0.len())?;
        if p.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if self.is_sphere() {
            let norm = p.0.norm();
            if (norm - 1.0).abs() > SPHERE_NORM_TOL {
                return Err(Error::NotOnSphere { norm });
            }
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.coord_dim() {
            return Err(Error::DimensionMismatch { expected: self.coord_dim(), actual: len });
        }
        Ok(())
    }

    /// Geodesic distance. On the sphere the inner product is clamped to
    /// `[-1, 1]` before `acos`.
    pub fn distance(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<f64> {
        self.check_len(p.0.len())?;
        self.check_len(q.0.len())?;
        Ok(self.distance_unchecked(p, q))
    }

    pub(crate) fn distance_unchecked(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> f64 {
        match self {
            ManifoldSpec::Euclidean { .. } => (&p.0 - &q.0).norm(),
            // <p, p> can round to just below 1, and acos amplifies that.
            ManifoldSpec::UnitSphere { .. } if p == q => 0.0,
            ManifoldSpec::UnitSphere { .. } => p.0.dot(&q.0).clamp(-1.0, 1.0).acos(),
        }
    }

    /// Inverse exponential map at `p`: the tangent vector at `p` pointing
    /// toward `q` whose length is the geodesic distance.
    pub fn log_map(&self, p: &ManifoldPoint, q: &ManifoldPoint) -> Result<TangentVector> {
        self.check_len(p.0.len())?;
        self.check_len(q.0.len())?;
        let coords = match self {
            ManifoldSpec::Euclidean { .. } => &q.0 - &p.0,
            ManifoldSpec::UnitSphere { .. } => {
                let c = p.0.dot(&q.0).clamp(-1.0, 1.0);
                let theta = self.distance_unchecked(p, q);
                if theta > std::f64::consts::PI - ANTIPODAL_MARGIN {
                    return Err(Error::Antipodal { first: 0, second: 1 });
                }
                // q - cos(theta) p has length sin(theta); rescaling it to
                // length theta is (theta / sin theta)(q - cos(theta) p).
                let dir = &q.0 - &p.0 * c;
                let len = dir.norm();
                if theta == 0.0 || len == 0.0 {
                    DVector::zeros(p.0.len())
                } else {
                    dir * (theta / len)
                }
            }
        };
        Ok(TangentVector { base: p.clone(), coords })
    }

    /// Exponential map: follows the geodesic from `v.base` with initial
    /// velocity `v` for unit time.
    pub fn exp_map(&self, v: &TangentVector) -> Result<ManifoldPoint> {
        self.check_len(v.base.0.len())?;
        self.check_len(v.coords.len())?;
        match self {
            ManifoldSpec::Euclidean { .. } => Ok(ManifoldPoint(&v.base.0 + &v.coords)),
            ManifoldSpec::UnitSphere { .. } => {
                let inner = v.coords.dot(&v.base.0);
                if inner.abs() > TANGENCY_TOL * v.coords.norm().max(1.0) {
                    return Err(Error::NotTangent { inner });
                }
                let t = v.coords.norm();
                if t == 0.0 {
                    return Ok(v.base.clone());
                }
                if t >= std::f64::consts::PI {
                    return Err(Error::OutsideInjectivity { norm: t });
                }
                let q = &v.base.0 * t.cos() + &v.coords * (t.sin() / t);
                let norm = q.norm();
                Ok(ManifoldPoint(q / norm))
            }
        }
    }

    /// Draws `k` independent uniform points.
    ///
    /// Sphere points are normalized standard Gaussian vectors. Euclidean
    /// points are uniform in `region`, the unit cube when `None`.
    pub fn sample_uniform(&self, k: usize, seed: u64, region: Option<&Region>) -> Result<SampleSet> {
        if k == 0 {
            return Err(Error::EmptySample);
        }
        let mut rng = rng::sample_rng(seed);
        let d = self.coord_dim();
        let points = match self {
            ManifoldSpec::UnitSphere { .. } => (0..k).map(|_| sphere_point(&mut rng, d)).collect(),
            ManifoldSpec::Euclidean { n } => {
                let default;
                let region = match region {
                    Some(r) => r,
                    None => {
                        default = Region::unit_cube(*n);
                        &default
                    }
                };
                region.validate(*n)?;
                (0..k)
                    .map(|_| {
                        let coords = DVector::from_fn(d, |i, _| {
                            let u: f64 = rng.random();
                            region.lower[i] + (region.upper[i] - region.lower[i]) * u
                        });
                        ManifoldPoint(coords)
                    })
                    .collect()
            }
        };
        Ok(SampleSet { manifold: *self, points, seed })
    }

    /// Monte Carlo estimate of `E d(X, Y)` for independent uniform `X, Y`.
    ///
    /// Pair `t` is the two-point sample drawn with seed
    /// [`rng::derive_seed`]`(seed, t)`.
    pub fn expected_distance(&self, trials: usize, seed: u64, region: Option<&Region>) -> Result<f64> {
        if trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        let distances: Vec<f64> = (0..trials as u64)
            .into_par_iter()
            .map(|t| {
                let pair = self.sample_uniform(2, rng::derive_seed(seed, t), region)?;
                Ok(self.distance_unchecked(&pair.points[0], &pair.points[1]))
            })
            .collect::<Result<_>>()?;
        Ok(distances.iter().sum::<f64>() / trials as f64)
    }
}

fn sphere_point<R: Rng>(rng: &mut R, d: usize) -> ManifoldPoint {
    loop {
        let g: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        let norm = g.norm();
        if norm > 1e-100 {
            return ManifoldPoint(g / norm);
        }
    }
}

impl fmt::Display for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldSpec::Euclidean { n } => write!(f, "euclid:{n}"),
            ManifoldSpec::UnitSphere { n } => write!(f, "sphere:{n}"),
        }
    }
}

impl FromStr for ManifoldSpec {
    type Err = Error;

    /// Parses `euclid:<n>` or `sphere:<n>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, dim) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("manifold `{s}` must look like euclid:<n> or sphere:<n>")))?;
        let n: usize = dim.parse().map_err(|_| Error::Parse(format!("bad manifold dimension `{dim}`")))?;
        match kind {
            "euclid" => ManifoldSpec::euclidean(n),
            "sphere" => ManifoldSpec::sphere(n),
            other => Err(Error::Parse(format!("unknown manifold kind `{other}`"))),
        }
    }
}

/// A point in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint(pub(crate) DVector<f64>);

impl ManifoldPoint {
    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// A tangent vector attached to its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: ManifoldPoint,
    pub coords: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: ManifoldPoint, coords: impl Into<Vec<f64>>) -> Self {
        TangentVector { base, coords: DVector::from_vec(coords.into()) }
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

/// Axis-aligned box used to sample Euclidean points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn unit_cube(n: usize) -> Self {
        Region::cube(n, 0.0, 1.0)
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        Region { lower: vec![lo; n], upper: vec![hi; n] }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::InvalidRegion(format!("box must have {n} sides")));
        }
        for (lo, hi) in self.lower.iter().zip(&self.upper) {
            if !lo.is_finite() || !hi.is_finite() || hi <= lo {
                return Err(Error::InvalidRegion(format!("degenerate side [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// An ordered sample of points together with the seed that drew it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub manifold: ManifoldSpec,
    pub points: Vec<ManifoldPoint>,
    pub seed: u64,
}

impl SampleSet {
    /// Builds a sample from explicit points, validating each one.
    pub fn from_points(manifold: ManifoldSpec, points: Vec<ManifoldPoint>, seed: u64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySample);
        }
        for p in &points {
            manifold.check_point(p)?;
        }
        Ok(SampleSet { manifold, points, seed })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn s2() -> ManifoldSpec {
        ManifoldSpec::sphere(2).unwrap()
    }

    fn e(i: usize, d: usize, sign: f64) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = sign;
        v
    }

    #[test]
    fn euclidean_distance() {
        let m = ManifoldSpec::euclidean(2).unwrap();
        let p = m.point([0.0, 0.0]).unwrap();
        let q = m.point([3.0, 4.0]).unwrap();
        assert_eq!(m.distance(&p, &q).unwrap(), 5.0);
    }

    #[test]
    fn sphere_distances() {
        let m = s2();
        let e1 = m.point(e(0, 3, 1.0)).unwrap();
        let e2 = m.point(e(1, 3, 1.0)).unwrap();
        let minus_e1 = m.point(e(0, 3, -1.0)).unwrap();
        assert_eq!(m.distance(&e1, &minus_e1).unwrap(), PI);
        assert_eq!(m.distance(&e1, &e2).unwrap(), FRAC_PI_2);
        assert_eq!(m.distance(&e1, &e1).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = s2();
        let p = ManifoldPoint(DVector::from_vec(vec![1.0, 0.0]));
        let q = m.point(e(0, 3, 1.0)).unwrap();
        assert_eq!(m.distance(&p, &q), Err(Error::DimensionMismatch { expected: 3, actual: 2 }));
        assert!(matches!(m.point([0.5, 0.5, 0.0]), Err(Error::NotOnSphere { .. })));
    }

    #[test]
    fn euclidean_log_and_exp() {
        let m = ManifoldSpec::euclidean(2).unwrap();
        let p = m.point([1.0, 1.0]).unwrap();
        let q = m.point([4.0, 5.0]).unwrap();
        let v = m.log_map(&p, &q).unwrap();
        assert_eq!(v.coords.as_slice(), &[3.0, 4.0]);
        assert_eq!(v.norm(), 5.0);
        assert_eq!(m.exp_map(&v).unwrap(), q);
    }

    #[test]
    fn sphere_log_of_orthogonal_pair() {
        let m = s2();
        let e1 = m.point(e(0, 3, 1.0)).unwrap();
        let e2 = m.point(e(1, 3, 1.0)).unwrap();
        let v = m.log_map(&e1, &e2).unwrap();
        assert_relative_eq!(v.coords[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(v.coords[1], FRAC_PI_2, epsilon = 1e-15);
        assert_relative_eq!(v.coords[2], 0.0, epsilon = 1e-15);
        assert_relative_eq!(v.norm(), m.distance(&e1, &e2).unwrap(), epsilon = 1e-15);
        assert!(v.coords.dot(e1.coords()).abs() < TANGENCY_TOL);
    }

    #[test]
    fn sphere_log_of_identical_points_is_zero() {
        let m = s2();
        let e1 = m.point(e(0, 3, 1.0)).unwrap();
        let v = m.log_map(&e1, &e1).unwrap();
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn antipodal_log_is_an_error() {
        let m = s2();
        let e1 = m.point(e(0, 3, 1.0)).unwrap();
        let minus_e1 = m.point(e(0, 3, -1.0)).unwrap();
        assert!(matches!(m.log_map(&e1, &minus_e1), Err(Error::Antipodal { .. })));
    }

    #[test]
    fn sphere_exp_quarter_turn() {
        let m = s2();
        let e1 = m.point(e(0, 3, 1.0)).unwrap();
        let v = TangentVector::new(e1.clone(), [0.0, FRAC_PI_2, 0.0]);
        let q = m.exp_map(&v).unwrap();
        assert_relative_eq!(q.coords()[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(q.coords()[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(m.distance(&e1, &q).unwrap(), FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn exp_of_zero_is_base() {
        for m in [s2(), ManifoldSpec::euclidean(3).unwrap()] {
            let base = m.sample_uniform(1, 3, None).unwrap().points[0].clone();
            let v = TangentVector::new(base.clone(), vec![0.0; m.coord_dim()]);
            assert_eq!(m.exp_map(&v).unwrap(), base);
        }
    }

    #[test]
    fn exp_rejects_non_tangent() {
        let m = s2();
        let e1 = m.point(e(0, 3, 1.0)).unwrap();
        let v = TangentVector::new(e1, [0.1, 0.2, 0.0]);
        assert!(matches!(m.exp_map(&v), Err(Error::NotTangent { .. })));
    }

    #[test]
    fn sampling_is_on_sphere_and_deterministic() {
        let m = s2();
        let a = m.sample_uniform(10, 7, None).unwrap();
        assert_eq!(a.len(), 10);
        for p in &a.points {
            assert!((p.coords().norm() - 1.0).abs() <= SPHERE_NORM_TOL);
        }
        let b = m.sample_uniform(10, 7, None).unwrap();
        assert_eq!(a, b);
        for (p, q) in a.points.iter().zip(&b.points) {
            for (x, y) in p.as_slice().iter().zip(q.as_slice()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn sampling_rejects_bad_input() {
        let m = ManifoldSpec::euclidean(2).unwrap();
        assert_eq!(m.sample_uniform(0, 1, None), Err(Error::EmptySample));
        let flat = Region::cube(2, 1.0, 1.0);
        assert!(matches!(m.sample_uniform(3, 1, Some(&flat)), Err(Error::InvalidRegion(_))));
    }

    #[test]
    fn euclidean_samples_stay_in_box() {
        let m = ManifoldSpec::euclidean(3).unwrap();
        let region = Region::cube(3, -2.0, 5.0);
        let s = m.sample_uniform(200, 11, Some(&region)).unwrap();
        for p in &s.points {
            assert!(p.as_slice().iter().all(|&x| (-2.0..5.0).contains(&x)));
        }
    }

    #[test]
    fn hemisphere_balance() {
        let m = ManifoldSpec::sphere(3).unwrap();
        let k = 4000;
        let s = m.sample_uniform(k, 19, None).unwrap();
        let sigma = (k as f64 * 0.25).sqrt();
        for axis in 0..m.coord_dim() {
            let positive = s.points.iter().filter(|p| p.coords()[axis] > 0.0).count() as f64;
            assert!((positive - 0.5 * k as f64).abs() <= 4.0 * sigma, "axis {axis}: {positive}");
        }
    }

    #[test]
    fn expected_distance_single_trial_matches_pair() {
        let m = s2();
        let est = m.expected_distance(1, 5, None).unwrap();
        let pair = m.sample_uniform(2, rng::derive_seed(5, 0), None).unwrap();
        assert_eq!(est, m.distance(&pair.points[0], &pair.points[1]).unwrap());
        assert!(m.expected_distance(0, 5, None).is_err());
    }

    #[test]
    fn expected_distance_values() {
        let est = s2().expected_distance(100_000, 1, None).unwrap();
        assert!((est - FRAC_PI_2).abs() < 0.02, "{est}");
        let line = ManifoldSpec::euclidean(1).unwrap().expected_distance(100_000, 1, None).unwrap();
        assert!((line - 1.0 / 3.0).abs() < 0.01, "{line}");
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("sphere:2".parse::<ManifoldSpec>().unwrap(), s2());
        assert_eq!("euclid:3".parse::<ManifoldSpec>().unwrap().to_string(), "euclid:3");
        assert!("torus:2".parse::<ManifoldSpec>().is_err());
        assert!("sphere:0".parse::<ManifoldSpec>().is_err());
        assert!("sphere".parse::<ManifoldSpec>().is_err());
    }
}
