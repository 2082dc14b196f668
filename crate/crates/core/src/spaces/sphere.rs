//! Great-circle primitives on the round sphere of curvature `kappa`.
//!
//! Points are ambient vectors of Euclidean norm `1/sqrt(kappa)`. Nothing here
//! knows about caps; the cap restriction lives in [`super::ModelSpace`].

use crate::error::{Error, Result};
use crate::vecops::{axpy, dot, lincomb, norm, scale, sub};

/// Angles closer than this to `pi` are treated as antipodal.
const ANTIPODAL_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereGeometry {
    curvature: f64,
    radius: f64,
}

impl SphereGeometry {
    pub fn new(curvature: f64) -> Result<Self> {
        if !(curvature.is_finite() && curvature > 0.0) {
            return Err(Error::param("curvature", "must be a positive finite real"));
        }
        Ok(Self {
            curvature,
            radius: 1.0 / curvature.sqrt(),
        })
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    /// Ambient radius `1/sqrt(kappa)`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Relative deviation of `x` from the sphere, `| |x| sqrt(kappa) - 1 |`.
    pub fn norm_defect(&self, x: &[f64]) -> f64 {
        (norm(x) / self.radius - 1.0).abs()
    }

    /// Rescale an ambient vector onto the sphere.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let n = norm(x);
        scale(x, self.radius / n)
    }

    /// Central angle between two points on the sphere.
    ///
    /// Uses `2 atan2(|x - y|, |x + y|)`, which stays accurate for both tiny and
    /// near-straight angles where `acos` of the inner product loses digits.
    pub fn angle(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = norm(&sub(x, y));
        let s: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
        2.0 * d.atan2(norm(&s))
    }

    /// Intrinsic great-circle distance, `(1/sqrt(kappa)) * angle`.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.radius * self.angle(x, y)
    }

    /// Unit tangent at `x` pointing along the great circle toward `y`, together
    /// with the central angle. `None` when the points coincide.
    fn tangent_toward(&self, x: &[f64], y: &[f64]) -> Result<Option<(Vec<f64>, f64)>> {
        let theta = self.angle(x, y);
        if theta == 0.0 {
            return Ok(None);
        }
        if theta > std::f64::consts::PI - ANTIPODAL_GUARD {
            return Err(Error::Antipodal);
        }
        let r2 = self.radius * self.radius;
        let w = axpy(y, -dot(x, y) / r2, x);
        let wn = norm(&w);
        if wn == 0.0 {
            return Ok(None);
        }
        Ok(Some((scale(&w, 1.0 / wn), theta)))
    }

    /// The point `(1-t) x (+) t y` on the minimizing arc.
    pub fn geodesic(&self, x: &[f64], y: &[f64], t: f64) -> Result<Vec<f64>> {
        if t == 0.0 {
            return Ok(x.to_vec());
        }
        if t == 1.0 {
            return Ok(y.to_vec());
        }
        match self.tangent_toward(x, y)? {
            None => Ok(x.to_vec()),
            Some((u, theta)) => {
                let phi = t * theta;
                let p = lincomb(phi.cos(), x, self.radius * phi.sin(), &u);
                Ok(self.normalize(&p))
            }
        }
    }

    /// Riemannian logarithm at `x`: the tangent vector (in ambient coordinates)
    /// whose length equals `d(x, y)`.
    pub fn log(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        match self.tangent_toward(x, y)? {
            None => Ok(vec![0.0; x.len()]),
            Some((u, theta)) => Ok(scale(&u, self.radius * theta)),
        }
    }

    /// Riemannian exponential at `x` of an ambient tangent vector `v`.
    pub fn exp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        // drop any normal component picked up through rounding
        let r2 = self.radius * self.radius;
        let v = axpy(v, -dot(x, v) / r2, x);
        let s = norm(&v);
        if s == 0.0 {
            return x.to_vec();
        }
        let phi = s / self.radius;
        let p = lincomb(phi.cos(), x, self.radius * phi.sin() / s, &v);
        self.normalize(&p)
    }
}
