//! Operator expressions and the quantities built from them.

mod fixed_set;

pub use fixed_set::{fixed_point_distance, FixedSetDescriptor, FixedSetTerm};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{ConvexFunction, ConvexSet, ProxParams};
use crate::spaces::{ModelSpace, Point};
use crate::vecops::{norm, scale};

/// Anything that maps points of a space to points of the same space.
pub trait Mapping: Sync {
    fn apply(&self, space: &ModelSpace, x: &Point) -> Result<Point>;
}

impl<F> Mapping for F
where
    F: Fn(&ModelSpace, &Point) -> Result<Point> + Sync,
{
    fn apply(&self, space: &ModelSpace, x: &Point) -> Result<Point> {
        self(space, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedTerm {
    pub op: OperatorExpr,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorExpr {
    Identity,
    Prox {
        f: ConvexFunction,
        params: ProxParams,
    },
    Project {
        set: ConvexSet,
    },
    /// `beta T (+) (1 - beta) Id`, the point at fraction `beta` from `x` to `Tx`.
    Km {
        inner: Box<OperatorExpr>,
        beta: f64,
    },
    /// Applied right to left: the last factor acts first.
    Compose {
        factors: Vec<OperatorExpr>,
    },
    /// Weighted `p`-barycenter of the images under each term.
    Average {
        terms: Vec<WeightedTerm>,
        p: f64,
    },
}

impl OperatorExpr {
    pub fn prox(f: ConvexFunction, params: ProxParams) -> Self {
        OperatorExpr::Prox { f, params }
    }

    pub fn project(set: ConvexSet) -> Self {
        OperatorExpr::Project { set }
    }

    pub fn km(inner: OperatorExpr, beta: f64) -> Self {
        OperatorExpr::Km {
            inner: Box::new(inner),
            beta,
        }
    }

    pub fn compose(factors: Vec<OperatorExpr>) -> Self {
        OperatorExpr::Compose { factors }
    }

    pub fn average(terms: Vec<(OperatorExpr, f64)>, p: f64) -> Self {
        OperatorExpr::Average {
            terms: terms
                .into_iter()
                .map(|(op, weight)| WeightedTerm { op, weight })
                .collect(),
            p,
        }
    }

    pub fn validate(&self, space: &ModelSpace) -> Result<()> {
        match self {
            OperatorExpr::Identity => Ok(()),
            OperatorExpr::Prox { f, params } => {
                f.validate(space)?;
                params.validate(space)
            }
            OperatorExpr::Project { set } => set.validate(space),
            OperatorExpr::Km { inner, beta } => {
                if !(*beta > 0.0 && *beta <= 1.0) {
                    return Err(Error::param("beta", format!("must lie in (0, 1], got {beta}")));
                }
                inner.validate(space)
            }
            OperatorExpr::Compose { factors } => {
                if factors.is_empty() {
                    return Err(Error::param("factors", "composition needs at least one factor"));
                }
                factors.iter().try_for_each(|f| f.validate(space))
            }
            OperatorExpr::Average { terms, p } => {
                if terms.is_empty() {
                    return Err(Error::param("terms", "average needs at least one term"));
                }
                if !(p.is_finite() && *p > 1.0) {
                    return Err(Error::param("p", "must exceed 1"));
                }
                let mut total = 0.0;
                for t in terms {
                    if !(t.weight.is_finite() && t.weight > 0.0) {
                        return Err(Error::param("weight", "weights must be positive"));
                    }
                    total += t.weight;
                    t.op.validate(space)?;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::param("weight", format!("weights sum to {total}, not 1")));
                }
                Ok(())
            }
        }
    }

    fn eval(&self, space: &ModelSpace, x: &Point) -> Result<Point> {
        let y = match self {
            OperatorExpr::Identity => x.clone(),
            OperatorExpr::Prox { f, params } => f.prox(space, params, x)?,
            OperatorExpr::Project { set } => set.project(space, x)?,
            OperatorExpr::Km { inner, beta } => {
                let tx = inner.eval(space, x)?;
                Point(space.geodesic_raw(&x.0, &tx.0, *beta)?)
            }
            OperatorExpr::Compose { factors } => {
                let mut y = x.clone();
                for f in factors.iter().rev() {
                    y = f.eval(space, &y)?;
                }
                y
            }
            OperatorExpr::Average { terms, p } => {
                let images = terms
                    .iter()
                    .map(|t| t.op.eval(space, x))
                    .collect::<Result<Vec<_>>>()?;
                let weights: Vec<f64> = terms.iter().map(|t| t.weight).collect();
                barycenter(space, &images, &weights, *p)?
            }
        };
        space.check(&y)?;
        Ok(y)
    }

    /// Number of nodes in the expression tree.
    pub fn size(&self) -> usize {
        match self {
            OperatorExpr::Identity | OperatorExpr::Prox { .. } | OperatorExpr::Project { .. } => 1,
            OperatorExpr::Km { inner, .. } => 1 + inner.size(),
            OperatorExpr::Compose { factors } => 1 + factors.iter().map(Self::size).sum::<usize>(),
            OperatorExpr::Average { terms, .. } => {
                1 + terms.iter().map(|t| t.op.size()).sum::<usize>()
            }
        }
    }
}

impl Mapping for OperatorExpr {
    /// Evaluate the operator. Every intermediate point is checked against
    /// the space domain and the first escape is reported.
    fn apply(&self, space: &ModelSpace, x: &Point) -> Result<Point> {
        self.validate(space)?;
        space.check(x)?;
        self.eval(space, x)
    }
}

/// `(c/2) [d(Tx,x)^p + d(Ty,y)^p + d(Tx,Ty)^p + d(x,y)^p - d(Tx,y)^p - d(x,Ty)^p]`
pub fn transport_discrepancy<M: Mapping + ?Sized>(
    space: &ModelSpace,
    t: &M,
    x: &Point,
    y: &Point,
) -> Result<f64> {
    space.check(x)?;
    space.check(y)?;
    let tx = t.apply(space, x)?;
    let ty = t.apply(space, y)?;
    let p = space.p();
    let d = |a: &Point, b: &Point| space.dist_raw(&a.0, &b.0).powf(p);
    Ok(0.5
        * space.c()
        * (d(&tx, x) + d(&ty, y) + d(&tx, &ty) + d(x, y) - d(&tx, y) - d(x, &ty)))
}

/// Surrogate residual `(c/2)^(1/p) d(Tx, x)` relative to a nonempty subset
/// of the fixed points; `+inf` for an empty descriptor. A known fixed point
/// is checked before use.
pub fn surrogate<M: Mapping + ?Sized>(
    space: &ModelSpace,
    t: &M,
    x: &Point,
    s: &FixedSetDescriptor,
) -> Result<f64> {
    space.check(x)?;
    match s {
        FixedSetDescriptor::Empty => return Ok(f64::INFINITY),
        FixedSetDescriptor::KnownPoint { point } => {
            let tp = t.apply(space, point)?;
            let residual = space.dist_raw(&tp.0, &point.0);
            if residual > crate::spaces::GEOMETRY_TOL {
                return Err(Error::NotFixed { residual });
            }
        }
        FixedSetDescriptor::KnownSet { .. } | FixedSetDescriptor::Unknown => {}
    }
    let tx = t.apply(space, x)?;
    Ok((0.5 * space.c()).powf(1.0 / space.p()) * space.dist_raw(&tx.0, &x.0))
}

/// Fraction `t` such that the two-point barycenter with weight `omega` on
/// `x1` is `t x1 (+) (1 - t) x2`.
pub fn two_point_weight(omega: f64, p: f64) -> f64 {
    if omega >= 1.0 {
        return 1.0;
    }
    if omega <= 0.0 {
        return 0.0;
    }
    1.0 / (((1.0 - omega) / omega).powf(1.0 / (p - 1.0)) + 1.0)
}

/// Minimizer of `z -> sum_i w_i d(z, x_i)^p`.
///
/// Two points use the closed form. More points start from repeated two-point
/// reductions and then run a reweighted gradient iteration with backtracking.
pub fn barycenter(space: &ModelSpace, points: &[Point], weights: &[f64], p: f64) -> Result<Point> {
    if points.is_empty() {
        return Err(Error::param("points", "need at least one point"));
    }
    if points.len() != weights.len() {
        return Err(Error::param(
            "weights",
            format!("{} weights for {} points", weights.len(), points.len()),
        ));
    }
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::param("p", "must exceed 1"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::param("weights", "must be positive"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::param("weights", format!("sum to {total}, not 1")));
    }
    for x in points {
        space.check(x)?;
    }
    if points.len() == 1 {
        return Ok(points[0].clone());
    }
    let pair = |x1: &[f64], x2: &[f64], w1: f64| -> Result<Vec<f64>> {
        let t = two_point_weight(w1, p);
        space.geodesic_raw(x1, x2, 1.0 - t)
    };
    if points.len() == 2 {
        let z = Point(pair(&points[0].0, &points[1].0, weights[0])?);
        space.check(&z)?;
        return Ok(z);
    }
    let mut z = points[0].0.clone();
    let mut acc = weights[0];
    for (x, w) in points.iter().zip(weights).skip(1) {
        z = pair(&z, &x.0, acc / (acc + w))?;
        acc += w;
    }
    let objective = |z: &[f64]| -> f64 {
        points
            .iter()
            .zip(weights)
            .map(|(x, w)| w * space.dist_raw(z, &x.0).powf(p))
            .sum()
    };
    let mut fz = objective(&z);
    for _ in 0..1000 {
        let mut num = vec![0.0; z.len()];
        let mut den = 0.0;
        for (x, w) in points.iter().zip(weights) {
            let d = space.dist_raw(&z, &x.0);
            if d == 0.0 {
                continue;
            }
            let k = w * d.powf(p - 2.0);
            let v = space.log_raw(&z, &x.0)?;
            num.iter_mut().zip(&v).for_each(|(a, b)| *a += k * b);
            den += k;
        }
        if den == 0.0 {
            break;
        }
        let mut step = scale(&num, 1.0 / den);
        if norm(&step) <= 4.0 * f64::EPSILON * (1.0 + norm(&z)) {
            break;
        }
        // near the minimum the objective changes by the squared step, below
        // rounding, so ties within rounding still accept the step
        let slack = 8.0 * f64::EPSILON * fz.abs();
        let mut accepted = false;
        for _ in 0..60 {
            let cand = space.exp_raw(&z, &step);
            let fc = objective(&cand);
            if fc <= fz + slack {
                accepted = true;
                z = cand;
                fz = fc.min(fz);
                break;
            }
            step = scale(&step, 0.5);
        }
        if !accepted {
            break;
        }
    }
    let z = Point(z);
    space.check(&z)?;
    Ok(z)
}
