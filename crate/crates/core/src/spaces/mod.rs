//! Model geodesic spaces: Euclidean space and small caps of a round sphere.
//!
//! Both kinds are 2-uniformly convex. Euclidean space has modulus `c = 2`; a
//! cap of radius `delta` on a sphere of curvature `kappa` carries the local
//! modulus returned by [`local_convexity_constant`].

mod sphere;

pub use sphere::SphereGeometry;

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};
use crate::vecops::{add, dist, sub};

/// Default tolerance for geometric identities.
pub const GEOMETRY_TOL: f64 = 1e-10;
/// Default tolerance for inequality residuals.
pub const INEQUALITY_TOL: f64 = 1e-9;
/// Allowed relative deviation of a sphere point's norm.
pub const NORM_TOL: f64 = 1e-12;

/// A point given by its ambient coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        Point(coords.into())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(v: [f64; N]) -> Self {
        Point(v.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceKind {
    Euclidean {
        dim: usize,
    },
    /// Cap of intrinsic radius `radius` about `center` on the sphere of
    /// curvature `curvature` embedded in `R^(dim+1)`.
    SphereCap {
        dim: usize,
        curvature: f64,
        center: Point,
        radius: f64,
    },
}

/// A geodesic space together with its uniform convexity data `(p, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpace {
    kind: SpaceKind,
    p: f64,
    c: f64,
    sphere: Option<SphereGeometry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSegment {
    pub a: Point,
    pub b: Point,
}

impl GeodesicSegment {
    pub fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }
}

/// Modulus of 2-uniform convexity of a cap of radius `delta` in a CAT(kappa)
/// space: `4 delta sqrt(kappa) tan(pi/2 - 2 delta sqrt(kappa))`.
pub fn local_convexity_constant(kappa: f64, delta: f64) -> Result<f64> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::param("kappa", "must be a positive finite real"));
    }
    let s = delta * kappa.sqrt();
    if !(s > 0.0 && s < FRAC_PI_4) {
        return Err(Error::param(
            "delta",
            format!("must lie in (0, pi/(4 sqrt(kappa))), got {delta}"),
        ));
    }
    // tan(pi/2 - 2s) = cos(2s)/sin(2s), written to keep full precision for small s
    let two_s = 2.0 * s;
    Ok(2.0 * two_s * two_s.cos() / two_s.sin())
}

impl ModelSpace {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        Ok(Self {
            kind: SpaceKind::Euclidean { dim },
            p: 2.0,
            c: 2.0,
            sphere: None,
        })
    }

    /// A spherical cap. The center is rescaled onto the sphere if it is a
    /// nonzero ambient vector of the wrong length.
    pub fn sphere_cap(dim: usize, curvature: f64, center: Point, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        let geo = SphereGeometry::new(curvature)?;
        let c = local_convexity_constant(curvature, radius)?;
        if center.dim() != dim + 1 {
            return Err(Error::DimensionMismatch {
                expected: dim + 1,
                found: center.dim(),
            });
        }
        if center.0.iter().any(|v| !v.is_finite()) || crate::vecops::norm(&center.0) == 0.0 {
            return Err(Error::param("center", "must be a finite nonzero vector"));
        }
        let center = Point(geo.normalize(&center.0));
        Ok(Self {
            kind: SpaceKind::SphereCap {
                dim,
                curvature,
                center,
                radius,
            },
            p: 2.0,
            c,
            sphere: Some(geo),
        })
    }

    pub fn from_kind(kind: SpaceKind) -> Result<Self> {
        match kind {
            SpaceKind::Euclidean { dim } => Self::euclidean(dim),
            SpaceKind::SphereCap {
                dim,
                curvature,
                center,
                radius,
            } => Self::sphere_cap(dim, curvature, center, radius),
        }
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn is_euclidean(&self) -> bool {
        self.sphere.is_none()
    }

    pub fn sphere(&self) -> Option<&SphereGeometry> {
        self.sphere.as_ref()
    }

    /// Number of ambient coordinates of a point.
    pub fn ambient_dim(&self) -> usize {
        match &self.kind {
            SpaceKind::Euclidean { dim } => *dim,
            SpaceKind::SphereCap { dim, .. } => dim + 1,
        }
    }

    /// Cap center and radius, if this is a cap.
    pub fn cap(&self) -> Option<(&Point, f64)> {
        match &self.kind {
            SpaceKind::SphereCap { center, radius, .. } => Some((center, *radius)),
            SpaceKind::Euclidean { .. } => None,
        }
    }

    /// Verify that `x` is an admissible point of this space.
    pub fn check(&self, x: &Point) -> Result<()> {
        let n = self.ambient_dim();
        if x.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.dim(),
            });
        }
        if x.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("point {:?}", x.0)));
        }
        if let (Some(geo), Some((center, radius))) = (&self.sphere, self.cap()) {
            let defect = geo.norm_defect(&x.0);
            if defect > NORM_TOL {
                return Err(Error::OutsideDomain(format!(
                    "norm defect {defect:e} exceeds {NORM_TOL:e}"
                )));
            }
            let r = geo.distance(&center.0, &x.0);
            if r > radius + GEOMETRY_TOL {
                return Err(Error::OutsideDomain(format!(
                    "distance {r} from cap center exceeds radius {radius}"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.check(x).is_ok()
    }

    /// Distance without domain checks. Callers guarantee admissible inputs.
    pub(crate) fn dist_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.sphere {
            Some(geo) => geo.distance(x, y),
            None => dist(x, y),
        }
    }

    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.dist_raw(&x.0, &y.0))
    }

    pub(crate) fn geodesic_raw(&self, x: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
        match &self.sphere {
            Some(geo) => geo.geodesic(x, y, t),
            None => {
                if t == 0.0 {
                    return Ok(x.to_vec());
                }
                if t == 1.0 {
                    return Ok(y.to_vec());
                }
                Ok(x.iter().zip(y).map(|(a, b)| a + t * (b - a)).collect())
            }
        }
    }

    /// The point `(1-t) x (+) t y`.
    pub fn geodesic(&self, x: &Point, y: &Point, t: f64) -> Result<Point> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::param("t", format!("must lie in [0, 1], got {t}")));
        }
        self.check(x)?;
        self.check(y)?;
        self.geodesic_raw(&x.0, &y.0, t).map(Point)
    }

    pub(crate) fn log_raw(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        match &self.sphere {
            Some(geo) => geo.log(x, y),
            None => Ok(sub(y, x)),
        }
    }

    pub(crate) fn exp_raw(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        match &self.sphere {
            Some(geo) => geo.exp(x, v),
            None => add(x, v),
        }
    }

    /// Tangent vector at `x` pointing to `y`, in ambient coordinates.
    pub fn log_map(&self, x: &Point, y: &Point) -> Result<Vec<f64>> {
        self.check(x)?;
        self.check(y)?;
        self.log_raw(&x.0, &y.0)
    }

    /// Geodesic shooting from `x` along the ambient tangent vector `v`.
    /// The result is checked against the domain.
    pub fn exp_map(&self, x: &Point, v: &[f64]) -> Result<Point> {
        self.check(x)?;
        if v.len() != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                found: v.len(),
            });
        }
        let y = Point(self.exp_raw(&x.0, v));
        self.check(&y)?;
        Ok(y)
    }

    /// Slack in the uniform convexity inequality at `(x, y, z, t)`. Nonnegative
    /// on the whole domain.
    pub fn convexity_residual(&self, x: &Point, y: &Point, z: &Point, t: f64) -> Result<f64> {
        let m = self.geodesic(x, y, t)?;
        self.check(z)?;
        let p = self.p;
        let d = |a: &Point, b: &Point| self.dist_raw(&a.0, &b.0).powf(p);
        Ok((1.0 - t) * d(z, x) + t * d(z, y)
            - 0.5 * self.c * t * (1.0 - t) * d(x, y)
            - d(z, &m))
    }

    /// Sampled perpendicularity test: `gamma` is perpendicular to `eta` at
    /// `p_common` when no sampled point of `eta` is closer to a sampled point of
    /// `gamma` than `p_common` is. `samples` points are taken on each segment,
    /// uniformly in arclength, endpoints included.
    pub fn is_perpendicular(
        &self,
        gamma: &GeodesicSegment,
        eta: &GeodesicSegment,
        p_common: &Point,
        samples: usize,
    ) -> Result<bool> {
        if samples < 2 {
            return Err(Error::param("samples", "need at least 2 points per segment"));
        }
        for s in [gamma, eta] {
            self.check(&s.a)?;
            self.check(&s.b)?;
        }
        self.check(p_common)?;
        for s in [gamma, eta] {
            let gap = self.dist_raw(&s.a.0, &p_common.0) + self.dist_raw(&p_common.0, &s.b.0)
                - self.dist_raw(&s.a.0, &s.b.0);
            if gap > GEOMETRY_TOL {
                return Err(Error::param(
                    "p_common",
                    format!("not on segment (triangle gap {gap:e})"),
                ));
            }
        }
        let pts = |s: &GeodesicSegment| -> Result<Vec<Vec<f64>>> {
            (0..samples)
                .map(|i| self.geodesic_raw(&s.a.0, &s.b.0, i as f64 / (samples - 1) as f64))
                .collect()
        };
        let xs = pts(gamma)?;
        let ys = pts(eta)?;
        Ok(xs.iter().all(|x| {
            let to_p = self.dist_raw(x, &p_common.0);
            ys.iter().all(|y| to_p <= self.dist_raw(x, y) + GEOMETRY_TOL)
        }))
    }
}
