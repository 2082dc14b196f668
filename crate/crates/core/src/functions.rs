//! Convex sets, radial functions and indicator functions, with projectors and
//! prox mappings.
//!
//! The prox of a radial function moves `x` along the geodesic toward the
//! anchor, so it reduces to a scalar convex problem in the travel distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{bisect, golden_section};
use crate::spaces::{ModelSpace, Point, GEOMETRY_TOL};
use crate::vecops::{dot, lincomb, norm, scale, sub};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexSet {
    Ball { center: Point, radius: f64 },
    /// Geodesic segment `[a, b]`. `a == b` is allowed and describes a point.
    Segment { a: Point, b: Point },
    /// `{ x : <normal, x> <= offset }`, Euclidean only.
    Halfspace { normal: Vec<f64>, offset: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `h(r) = slope * r`
    Linear { slope: f64 },
    /// `h(r) = coefficient * r^exponent`
    Power { exponent: f64, coefficient: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexFunction {
    /// `x -> h(d(x, anchor))`
    Radial { anchor: Point, profile: Profile },
    Indicator { set: ConvexSet },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxParams {
    pub lambda: f64,
    #[serde(default = "default_p")]
    pub p: f64,
}

fn default_p() -> f64 {
    2.0
}

impl ProxParams {
    pub fn new(lambda: f64, p: f64) -> Self {
        Self { lambda, p }
    }

    pub fn validate(&self, space: &ModelSpace) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::param("lambda", "must be positive and finite"));
        }
        if self.p != space.p() {
            return Err(Error::param(
                "p",
                format!("prox exponent {} differs from the space exponent {}", self.p, space.p()),
            ));
        }
        Ok(())
    }
}

/// Brute-force grid minimizer returned by [`prox_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum {
    pub point: Point,
    pub spacing: f64,
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Profile::Linear { slope } => {
                if !(slope.is_finite() && slope > 0.0) {
                    return Err(Error::param("slope", "must be positive and finite"));
                }
            }
            Profile::Power {
                exponent,
                coefficient,
            } => {
                if !(exponent.is_finite() && exponent >= 1.0) {
                    return Err(Error::param("exponent", "must be at least 1"));
                }
                if !(coefficient.is_finite() && coefficient > 0.0) {
                    return Err(Error::param("coefficient", "must be positive and finite"));
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, r: f64) -> f64 {
        match *self {
            Profile::Linear { slope } => slope * r,
            Profile::Power {
                exponent,
                coefficient,
            } => coefficient * r.powf(exponent),
        }
    }

    /// Right derivative on `[0, inf)`.
    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            Profile::Linear { slope } => slope,
            Profile::Power {
                exponent,
                coefficient,
            } => {
                if exponent == 1.0 {
                    coefficient
                } else {
                    coefficient * exponent * r.powf(exponent - 1.0)
                }
            }
        }
    }
}

impl ConvexSet {
    pub fn ball(center: impl Into<Point>, radius: f64) -> Self {
        ConvexSet::Ball {
            center: center.into(),
            radius,
        }
    }

    pub fn segment(a: impl Into<Point>, b: impl Into<Point>) -> Self {
        ConvexSet::Segment {
            a: a.into(),
            b: b.into(),
        }
    }

    pub fn halfspace(normal: impl Into<Vec<f64>>, offset: f64) -> Self {
        ConvexSet::Halfspace {
            normal: normal.into(),
            offset,
        }
    }

    pub fn validate(&self, space: &ModelSpace) -> Result<()> {
        match self {
            ConvexSet::Ball { center, radius } => {
                space.check(center)?;
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::param("radius", "must be positive and finite"));
                }
                if let Some((cap_center, delta)) = space.cap() {
                    let reach = space.dist_raw(&cap_center.0, &center.0) + radius;
                    if reach > delta + GEOMETRY_TOL {
                        return Err(Error::OutsideDomain(format!(
                            "ball reaches {reach} from the cap center, beyond {delta}"
                        )));
                    }
                }
            }
            ConvexSet::Segment { a, b } => {
                space.check(a)?;
                space.check(b)?;
            }
            ConvexSet::Halfspace { normal, offset } => {
                if !space.is_euclidean() {
                    return Err(Error::Unsupported(
                        "halfspaces are only defined in Euclidean space".into(),
                    ));
                }
                if normal.len() != space.ambient_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: space.ambient_dim(),
                        found: normal.len(),
                    });
                }
                if !(norm(normal) > 0.0 && normal.iter().all(|v| v.is_finite())) {
                    return Err(Error::param("normal", "must be a finite nonzero vector"));
                }
                if !offset.is_finite() {
                    return Err(Error::param("offset", "must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Membership up to `tol` in distance.
    pub fn contains(&self, space: &ModelSpace, x: &Point, tol: f64) -> Result<bool> {
        let px = self.project(space, x)?;
        Ok(space.dist_raw(&x.0, &px.0) <= tol)
    }

    /// Metric projection onto the set.
    pub fn project(&self, space: &ModelSpace, x: &Point) -> Result<Point> {
        self.validate(space)?;
        space.check(x)?;
        match self {
            ConvexSet::Ball { center, radius } => {
                let d = space.dist_raw(&center.0, &x.0);
                if d <= *radius {
                    Ok(x.clone())
                } else {
                    space.geodesic_raw(&center.0, &x.0, radius / d).map(Point)
                }
            }
            ConvexSet::Segment { a, b } => match space.sphere() {
                None => Ok(Point(project_euclidean_segment(&a.0, &b.0, &x.0))),
                Some(geo) => project_arc(geo.radius(), space, &a.0, &b.0, &x.0),
            },
            ConvexSet::Halfspace { normal, offset } => {
                let s = dot(normal, &x.0) - offset;
                if s <= 0.0 {
                    Ok(x.clone())
                } else {
                    let nn = dot(normal, normal);
                    Ok(Point(lincomb(1.0, &x.0, -s / nn, normal)))
                }
            }
        }
    }

    pub fn distance_to(&self, space: &ModelSpace, x: &Point) -> Result<f64> {
        let px = self.project(space, x)?;
        Ok(space.dist_raw(&x.0, &px.0))
    }

    /// Distance from `x` beyond which no point of the set lies, used to size
    /// brute-force grids.
    fn reach_from(&self, space: &ModelSpace, x: &Point) -> f64 {
        match self {
            ConvexSet::Ball { center, radius } => space.dist_raw(&x.0, &center.0) + radius,
            ConvexSet::Segment { a, b } => space
                .dist_raw(&x.0, &a.0)
                .max(space.dist_raw(&x.0, &b.0)),
            ConvexSet::Halfspace { normal, offset } => {
                ((dot(normal, &x.0) - offset) / norm(normal)).abs()
            }
        }
    }
}

fn project_euclidean_segment(a: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let ab = sub(b, a);
    let len2 = dot(&ab, &ab);
    if len2 == 0.0 {
        return a.to_vec();
    }
    let t = (dot(&sub(x, a), &ab) / len2).clamp(0.0, 1.0);
    if t == 0.0 {
        return a.to_vec();
    }
    if t == 1.0 {
        return b.to_vec();
    }
    lincomb(1.0, a, t, &ab)
}

/// Projection onto a great-circle arc: project onto the plane of the circle,
/// read off the polar angle, and clamp to the nearer endpoint when it falls
/// outside the arc. Ties go to `a`.
fn project_arc(radius: f64, space: &ModelSpace, a: &[f64], b: &[f64], x: &[f64]) -> Result<Point> {
    let theta_ab = space.dist_raw(a, b) / radius;
    if theta_ab == 0.0 {
        return Ok(Point(a.to_vec()));
    }
    let ahat = scale(a, 1.0 / radius);
    let w = lincomb(1.0, b, -dot(b, &ahat), &ahat);
    let what = scale(&w, 1.0 / norm(&w));
    let (u, v) = (dot(x, &ahat), dot(x, &what));
    let nearer_endpoint = || {
        if space.dist_raw(x, b) < space.dist_raw(x, a) {
            Point(b.to_vec())
        } else {
            Point(a.to_vec())
        }
    };
    if u == 0.0 && v == 0.0 {
        return Ok(Point(a.to_vec()));
    }
    let phi = v.atan2(u);
    if phi <= 0.0 || phi >= theta_ab {
        return Ok(nearer_endpoint());
    }
    let p = lincomb(radius * phi.cos(), &ahat, radius * phi.sin(), &what);
    Ok(Point(space.sphere().expect("sphere").normalize(&p)))
}

impl ConvexFunction {
    pub fn radial(anchor: impl Into<Point>, profile: Profile) -> Self {
        ConvexFunction::Radial {
            anchor: anchor.into(),
            profile,
        }
    }

    pub fn indicator(set: ConvexSet) -> Self {
        ConvexFunction::Indicator { set }
    }

    pub fn validate(&self, space: &ModelSpace) -> Result<()> {
        match self {
            ConvexFunction::Radial { anchor, profile } => {
                space.check(anchor)?;
                profile.validate()
            }
            ConvexFunction::Indicator { set } => set.validate(space),
        }
    }

    /// Function value; `+inf` outside the set for indicators.
    pub fn evaluate(&self, space: &ModelSpace, x: &Point) -> Result<f64> {
        self.validate(space)?;
        space.check(x)?;
        match self {
            ConvexFunction::Radial { anchor, profile } => {
                Ok(profile.value(space.dist_raw(&x.0, &anchor.0)))
            }
            ConvexFunction::Indicator { set } => {
                if set.contains(space, x, GEOMETRY_TOL)? {
                    Ok(0.0)
                } else {
                    Ok(f64::INFINITY)
                }
            }
        }
    }

    /// Smallest value of the function.
    pub fn min_value(&self) -> f64 {
        0.0
    }

    /// `y -> f(y) + d(y, x)^p / (p lambda^(p-1))`
    pub fn prox_objective(
        &self,
        space: &ModelSpace,
        params: &ProxParams,
        x: &Point,
        y: &Point,
    ) -> Result<f64> {
        let f = self.evaluate(space, y)?;
        Ok(f + quad_term(space.dist_raw(&x.0, &y.0), params))
    }

    /// The prox mapping.
    pub fn prox(&self, space: &ModelSpace, params: &ProxParams, x: &Point) -> Result<Point> {
        self.validate(space)?;
        params.validate(space)?;
        space.check(x)?;
        match self {
            ConvexFunction::Indicator { set } => set.project(space, x),
            ConvexFunction::Radial { anchor, profile } => {
                let d = space.dist_raw(&x.0, &anchor.0);
                if d == 0.0 {
                    return Ok(x.clone());
                }
                let s = radial_travel(profile, params, d)?;
                if s >= d {
                    return Ok(anchor.clone());
                }
                space.geodesic_raw(&x.0, &anchor.0, s / d).map(Point)
            }
        }
    }

    /// First-order optimality residual of `y` as a prox of `x`. For radial
    /// functions this is the violated part of the scalar stationarity
    /// condition in the travel distance; for indicators it is the distance
    /// from `y` to the projection.
    pub fn prox_optimality_residual(
        &self,
        space: &ModelSpace,
        params: &ProxParams,
        x: &Point,
        y: &Point,
    ) -> Result<f64> {
        match self {
            ConvexFunction::Indicator { set } => {
                let px = set.project(space, x)?;
                space.distance(&px, y)
            }
            ConvexFunction::Radial { anchor, profile } => {
                let d = space.distance(x, anchor)?;
                let s = space.distance(x, y)?;
                let off_path = s + space.dist_raw(&y.0, &anchor.0) - d;
                let dphi = |s: f64| {
                    -profile.derivative((d - s).max(0.0))
                        + (s / params.lambda).powf(params.p - 1.0)
                };
                // the travel distance is only resolved to rounding, so the
                // residual is the smallest violation over that neighbourhood
                let eta = 4.0 * f64::EPSILON * d.max(1.0);
                let g = |t: f64| {
                    if t >= d {
                        -profile.derivative(0.0) + (d / params.lambda).powf(params.p - 1.0)
                    } else {
                        dphi(t)
                    }
                };
                let (lo, hi) = ((s - eta).max(0.0), (s + eta).min(d));
                let (glo, ghi) = (g(lo), g(hi));
                let r = if d == 0.0
                    || glo * ghi <= 0.0
                    || (lo == 0.0 && glo >= 0.0)
                    || (hi == d && ghi <= 0.0)
                {
                    0.0
                } else {
                    glo.abs().min(ghi.abs())
                };
                Ok(r.max(off_path.max(0.0)))
            }
        }
    }

    /// Points where the function attains its minimum: the anchor, or the set.
    pub fn argmin(&self) -> ArgminSet<'_> {
        match self {
            ConvexFunction::Radial { anchor, .. } => ArgminSet::Point(anchor),
            ConvexFunction::Indicator { set } => ArgminSet::Set(set),
        }
    }

    fn reach_from(&self, space: &ModelSpace, x: &Point) -> f64 {
        match self {
            ConvexFunction::Radial { anchor, .. } => space.dist_raw(&x.0, &anchor.0),
            ConvexFunction::Indicator { set } => set.reach_from(space, x),
        }
    }
}

/// Minimizer set of a library function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArgminSet<'a> {
    Point(&'a Point),
    Set(&'a ConvexSet),
}

fn quad_term(d: f64, params: &ProxParams) -> f64 {
    d.powf(params.p) / (params.p * params.lambda.powf(params.p - 1.0))
}

/// Optimal travel distance toward the anchor for a radial prox at distance `d`.
fn radial_travel(profile: &Profile, params: &ProxParams, d: f64) -> Result<f64> {
    let phi = |s: f64| profile.value((d - s).max(0.0)) + quad_term(s, params);
    let dphi = |s: f64| -profile.derivative((d - s).max(0.0)) + (s / params.lambda).powf(params.p - 1.0);
    let width = 1e-12 * d.min(1.0);
    // at s = d the profile contributes its one-sided slope at 0
    let left_at_d = -profile.derivative(0.0) + (d / params.lambda).powf(params.p - 1.0);
    if left_at_d <= 0.0 {
        return Ok(d);
    }
    let golden = golden_section(phi, 0.0, d, width);
    // the stationary point, when bracketed, is exact where the golden search
    // only resolves the objective to rounding
    if let Some(root) = bisect(dphi, 0.0, d) {
        return Ok(root);
    }
    let mut best = (f64::INFINITY, 0.0);
    for s in [golden, 0.0, d] {
        let v = phi(s);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("prox objective at travel {s}")));
        }
        if v < best.0 || (v == best.0 && s == d) {
            best = (v, s);
        }
    }
    Ok(best.1)
}

/// Brute-force grid minimizer of the prox objective, for testing.
///
/// Euclidean spaces of dimension at most 3 use a cubic grid around `x` with
/// `resolution` cells per axis. Two-dimensional caps use a geodesic polar grid
/// about the cap center with `resolution` rings. Indicators are handled by
/// keeping grid points within half a cell diagonal of the set.
pub fn prox_oracle(
    space: &ModelSpace,
    f: &ConvexFunction,
    params: &ProxParams,
    x: &Point,
    resolution: usize,
) -> Result<GridMinimum> {
    if resolution < 8 {
        return Err(Error::param("resolution", "need at least 8 cells per axis"));
    }
    f.validate(space)?;
    params.validate(space)?;
    space.check(x)?;
    let (grid, spacing): (Vec<Vec<f64>>, f64) = match space.cap() {
        None => {
            let n = space.ambient_dim();
            if n > 3 {
                return Err(Error::Unsupported("grid oracle needs dimension <= 3".into()));
            }
            let reach = 1.05 * f.reach_from(space, x);
            if reach == 0.0 {
                return Ok(GridMinimum {
                    point: x.clone(),
                    spacing: 0.0,
                });
            }
            let h = 2.0 * reach / resolution as f64;
            let m = resolution + 1;
            let total = m.pow(n as u32);
            let grid = (0..total)
                .map(|mut idx| {
                    (0..n)
                        .map(|k| {
                            let i = idx % m;
                            idx /= m;
                            x.0[k] - reach + h * i as f64
                        })
                        .collect()
                })
                .collect();
            (grid, h)
        }
        Some((center, delta)) => {
            if space.ambient_dim() != 3 {
                return Err(Error::Unsupported("grid oracle needs a two-dimensional cap".into()));
            }
            let geo = space.sphere().expect("sphere");
            let (e1, e2) = tangent_frame(&center.0);
            let h = delta / resolution as f64;
            let mut grid = vec![center.0.clone()];
            for i in 1..=resolution {
                let r = h * i as f64;
                let m = (2.0 * std::f64::consts::PI * i as f64).ceil() as usize;
                for j in 0..m {
                    let a = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                    let v = lincomb(r * a.cos(), &e1, r * a.sin(), &e2);
                    grid.push(geo.exp(&center.0, &v));
                }
            }
            (grid, h)
        }
    };
    let keep_tol = 0.5 * spacing * (space.ambient_dim() as f64).sqrt();
    let mut best: Option<(f64, &Vec<f64>)> = None;
    for y in &grid {
        let yp = Point(y.clone());
        if !space.contains(&yp) {
            continue;
        }
        let fy = match f {
            ConvexFunction::Indicator { set } => {
                if set.distance_to(space, &yp)? <= keep_tol {
                    0.0
                } else {
                    continue;
                }
            }
            ConvexFunction::Radial { anchor, profile } => {
                profile.value(space.dist_raw(y, &anchor.0))
            }
        };
        let v = fy + quad_term(space.dist_raw(y, &x.0), params);
        if best.is_none_or(|(bv, _)| v < bv) {
            best = Some((v, y));
        }
    }
    let (_, y) = best.ok_or_else(|| Error::EmptySample("no grid point lies in the set".into()))?;
    Ok(GridMinimum {
        point: Point(y.clone()),
        spacing,
    })
}

/// Orthonormal tangent pair at a point of a 2-sphere (in `R^3`).
pub(crate) fn tangent_frame(c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = scale(c, 1.0 / norm(c));
    let k = (0..3)
        .min_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs()))
        .expect("three coordinates");
    let mut e = vec![0.0; 3];
    e[k] = 1.0;
    let t1 = lincomb(1.0, &e, -dot(&e, &n), &n);
    let t1 = scale(&t1, 1.0 / norm(&t1));
    let t2 = vec![
        n[1] * t1[2] - n[2] * t1[1],
        n[2] * t1[0] - n[0] * t1[2],
        n[0] * t1[1] - n[1] * t1[0],
    ];
    (t1, t2)
}

/// Moreau envelope value `f(prox x) + d(prox x, x)^2 / (2 lambda)`.
pub fn moreau_envelope(space: &ModelSpace, f: &ConvexFunction, lambda: f64, x: &Point) -> Result<f64> {
    if space.p() != 2.0 {
        return Err(Error::Unsupported("envelope needs p = 2".into()));
    }
    let params = ProxParams::new(lambda, 2.0);
    let y = f.prox(space, &params, x)?;
    let fy = f.evaluate(space, &y)?;
    let fy = if fy.is_infinite() { 0.0 } else { fy };
    Ok(fy + space.dist_raw(&x.0, &y.0).powf(2.0) / (2.0 * lambda))
}
