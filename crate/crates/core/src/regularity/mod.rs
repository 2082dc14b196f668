//! Sampled verification of firmness, quasi-strict nonexpansiveness and
//! metric subregularity.
//!
//! All estimators draw their points with [`draw_samples`], evaluate them in
//! parallel and reduce in sample order, so results depend only on the seed.

mod sampling;

pub use sampling::{draw_samples, Region, SampleSpec};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{FixedSetDescriptor, Mapping};
use crate::spaces::{ModelSpace, Point, GEOMETRY_TOL};

/// Steps shorter than this are treated as zero when forming ratios.
pub const TINY_STEP: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationEstimate {
    pub alpha: f64,
    pub epsilon: f64,
    pub witness: Option<Point>,
    pub used: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmnessEstimate {
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub witnesses: Vec<Option<Point>>,
    pub used: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiStrictReport {
    pub strict: bool,
    /// Smallest `d(x, xbar) - d(Tx, xbar)` over the samples used.
    pub worst_margin: f64,
    pub used: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubregularityEstimate {
    pub mu: f64,
    pub witness: Point,
    pub exclusion_radius: f64,
    pub used: usize,
    pub excluded_near_fixed: usize,
    pub excluded_tiny_step: usize,
}

fn require_fixed<M: Mapping + ?Sized>(space: &ModelSpace, t: &M, y: &Point) -> Result<()> {
    let ty = t.apply(space, y)?;
    let residual = space.dist_raw(&ty.0, &y.0);
    if residual > GEOMETRY_TOL {
        return Err(Error::NotFixed { residual });
    }
    Ok(())
}

/// Per-sample terms `(d(Tx,y)^p / d(x,y)^p, (c/2) d(Tx,x)^p / d(x,y)^p)`, in
/// sample order, for samples outside the exclusion radius.
fn firmness_terms<M: Mapping + ?Sized>(
    space: &ModelSpace,
    t: &M,
    y: &Point,
    spec: &SampleSpec,
) -> Result<(Vec<(Point, f64, f64)>, usize)> {
    require_fixed(space, t, y)?;
    let samples = draw_samples(space, spec)?;
    let p = space.p();
    let half_c = 0.5 * space.c();
    let rho = spec.exclusion_radius;
    let terms: Vec<Option<(Point, f64, f64)>> = samples
        .into_par_iter()
        .map(|x| -> Result<Option<(Point, f64, f64)>> {
            let dxy = space.dist_raw(&x.0, &y.0);
            if dxy <= rho || dxy == 0.0 {
                return Ok(None);
            }
            let tx = t.apply(space, &x)?;
            let base = dxy.powf(p);
            let a = space.dist_raw(&tx.0, &y.0).powf(p) / base;
            let b = half_c * space.dist_raw(&tx.0, &x.0).powf(p) / base;
            Ok(Some((x, a, b)))
        })
        .collect::<Result<Vec<_>>>()?;
    let excluded = terms.iter().filter(|t| t.is_none()).count();
    let used: Vec<_> = terms.into_iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::EmptySample("every sample fell inside the exclusion radius".into()));
    }
    Ok((used, excluded))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn max_violation(terms: &[(Point, f64, f64)], alpha: f64) -> (f64, Option<Point>) {
    let k = (1.0 - alpha) / alpha;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, (_, a, b)) in terms.iter().enumerate() {
        let v = a + k * b - 1.0;
        if v > best.0 {
            best = (v, i);
        }
    }
    if best.0 > 0.0 {
        (best.0, Some(terms[best.1].0.clone()))
    } else {
        (0.0, None)
    }
}

/// Largest sampled violation of the firmness inequality with constant `alpha`
/// at the fixed point `y`, clamped below at zero.
pub fn estimate_violation<M: Mapping + ?Sized>(
    space: &ModelSpace,
    t: &M,
    y: &Point,
    alpha: f64,
    spec: &SampleSpec,
) -> Result<ViolationEstimate> {
    check_alpha(alpha)?;
    let (terms, excluded) = firmness_terms(space, t, y, spec)?;
    let (epsilon, witness) = max_violation(&terms, alpha);
    Ok(ViolationEstimate {
        alpha,
        epsilon,
        witness,
        used: terms.len(),
        excluded,
    })
}

/// Sampled violation for each constant in `alphas`, on one sample set.
pub fn firmness_frontier<M: Mapping + ?Sized>(
    space: &ModelSpace,
    t: &M,
    y: &Point,
    alphas: &[f64],
    spec: &SampleSpec,
) -> Result<FirmnessEstimate> {
    alphas.iter().try_for_each(|a| check_alpha(*a))?;
    let (terms, excluded) = firmness_terms(space, t, y, spec)?;
    let (epsilons, witnesses) = alphas.iter().map(|a| max_violation(&terms, *a)).unzip();
    Ok(FirmnessEstimate {
        alphas: alphas.to_vec(),
        epsilons,
        witnesses,
        used: terms.len(),
        excluded,
    })
}

/// Checks `d(Tx, xbar) < d(x, xbar)` on samples that are neither within the
/// exclusion radius of `xbar` nor fixed by `T`. With no usable samples the
/// answer is `false`.
pub fn check_quasi_strict<M: Mapping + ?Sized>(
    space: &ModelSpace,
    t: &M,
    xbar: &Point,
    spec: &SampleSpec,
) -> Result<QuasiStrictReport> {
    require_fixed(space, t, xbar)?;
    let samples = draw_samples(space, spec)?;
    let rho = spec.exclusion_radius;
    let margins: Vec<Option<f64>> = samples
        .par_iter()
        .map(|x| -> Result<Option<f64>> {
            let d = space.dist_raw(&x.0, &xbar.0);
            if d < rho {
                return Ok(None);
            }
            let tx = t.apply(space, x)?;
            if space.dist_raw(&tx.0, &x.0) <= TINY_STEP {
                return Ok(None);
            }
            Ok(Some(d - space.dist_raw(&tx.0, &xbar.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let used: Vec<f64> = margins.iter().flatten().copied().collect();
    let worst = used.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(QuasiStrictReport {
        strict: !used.is_empty() && worst > 0.0,
        worst_margin: if used.is_empty() { 0.0 } else { worst },
        used: used.len(),
        excluded: margins.len() - used.len(),
    })
}

/// Largest sampled ratio `d(x, Fix) / d(x, Tx)`.
pub fn estimate_subregularity<M: Mapping + ?Sized>(
    space: &ModelSpace,
    t: &M,
    s: &FixedSetDescriptor,
    spec: &SampleSpec,
) -> Result<SubregularityEstimate> {
    if matches!(s, FixedSetDescriptor::Unknown) {
        return Err(Error::UnknownFixedSet);
    }
    let rho = spec.exclusion_radius;
    if !(rho > 0.0) {
        return Err(Error::param("exclusion_radius", "must be positive"));
    }
    let samples = draw_samples(space, spec)?;
    enum Outcome {
        Near,
        Tiny,
        Ratio(f64),
    }
    let outcomes: Vec<Outcome> = samples
        .par_iter()
        .map(|x| -> Result<Outcome> {
            let dfix = s.distance(space, x)?;
            if dfix < rho {
                return Ok(Outcome::Near);
            }
            let tx = t.apply(space, x)?;
            let step = space.dist_raw(&tx.0, &x.0);
            if step < TINY_STEP {
                return Ok(Outcome::Tiny);
            }
            Ok(Outcome::Ratio(dfix / step))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, usize)> = None;
    let (mut near, mut tiny) = (0, 0);
    for (i, o) in outcomes.iter().enumerate() {
        match o {
            Outcome::Near => near += 1,
            Outcome::Tiny => tiny += 1,
            Outcome::Ratio(r) => {
                if best.is_none_or(|(b, _)| *r > b) {
                    best = Some((*r, i));
                }
            }
        }
    }
    let (mu, idx) =
        best.ok_or_else(|| Error::EmptySample("every sample was excluded".into()))?;
    Ok(SubregularityEstimate {
        mu,
        witness: samples[idx].clone(),
        exclusion_radius: rho,
        used: outcomes.len() - near - tiny,
        excluded_near_fixed: near,
        excluded_tiny_step: tiny,
    })
}

/// True when `d[k+1] <= gamma * d[k] + 1e-12` for every `k`.
pub fn check_gauge_monotone(distances: &[f64], gamma: f64) -> Result<bool> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", "must be finite and nonnegative"));
    }
    check_gauge_monotone_with(distances, |t| gamma * t)
}

/// Gauge check against an arbitrary (for instance tabulated) gauge `theta`.
pub fn check_gauge_monotone_with<F: Fn(f64) -> f64>(distances: &[f64], theta: F) -> Result<bool> {
    if distances.is_empty() {
        return Err(Error::InsufficientTrace("empty distance sequence".into()));
    }
    if distances.iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::param("distances", "must be nonnegative"));
    }
    Ok(distances.windows(2).all(|w| w[1] <= theta(w[0]) + 1e-12))
}

/// `sum_{j >= k} gamma^j t = t gamma^k / (1 - gamma)`.
pub fn tail_sum(gamma: f64, t: f64, k: u32) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::param("gamma", format!("must lie in [0, 1), got {gamma}")));
    }
    if !(t >= 0.0) {
        return Err(Error::param("t", "must be nonnegative"));
    }
    Ok(t * gamma.powf(k as f64) / (1.0 - gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::ConvexSet;
    use crate::operators::OperatorExpr;

    fn plane_box(seed: u64, n: usize) -> SampleSpec {
        SampleSpec::new(
            seed,
            n,
            Region::Box {
                lo: vec![-2.0, -2.0],
                hi: vec![2.0, 2.0],
            },
            1e-6,
        )
    }

    fn rotation(theta: f64) -> impl Fn(&ModelSpace, &Point) -> Result<Point> + Sync {
        move |_: &ModelSpace, x: &Point| {
            let (s, c) = theta.sin_cos();
            Ok(Point(vec![c * x.0[0] - s * x.0[1], s * x.0[0] + c * x.0[1]]))
        }
    }

    #[test]
    fn identity_has_no_violation() {
        let e = ModelSpace::euclidean(2).unwrap();
        let y = Point::from([0.0, 0.0]);
        for a in [0.1, 0.5, 0.9] {
            let v = estimate_violation(&e, &OperatorExpr::Identity, &y, a, &plane_box(1, 500)).unwrap();
            assert_eq!(v.epsilon, 0.0);
        }
    }

    #[test]
    fn projector_is_firm() {
        let e = ModelSpace::euclidean(2).unwrap();
        let t = OperatorExpr::project(ConvexSet::ball([0.0, 0.0], 1.0));
        let y = Point::from([0.3, 0.4]);
        let v = estimate_violation(&e, &t, &y, 0.5, &plane_box(2, 2000)).unwrap();
        assert!(v.epsilon <= 1e-8);
        let f = firmness_frontier(&e, &t, &y, &[0.5, 0.7, 0.9], &plane_box(2, 2000)).unwrap();
        assert!(f.epsilons.iter().all(|e| *e <= 1e-8));
    }

    #[test]
    fn quarter_rotation_violation() {
        // analytic: ((1-a)/a) * 4 sin^2(theta/2) with theta = pi/2, a = 1/2
        let e = ModelSpace::euclidean(2).unwrap();
        let t = rotation(std::f64::consts::FRAC_PI_2);
        let y = Point::from([0.0, 0.0]);
        let v = estimate_violation(&e, &t, &y, 0.5, &plane_box(3, 300)).unwrap();
        assert!((v.epsilon - 2.0).abs() < 1e-12);
        assert!(v.witness.is_some());
    }

    #[test]
    fn quasi_strict_examples() {
        let e = ModelSpace::euclidean(2).unwrap();
        let y = Point::from([0.0, 0.0]);
        let id = check_quasi_strict(&e, &OperatorExpr::Identity, &y, &plane_box(4, 100)).unwrap();
        assert!(!id.strict);
        let rot = check_quasi_strict(&e, &rotation(0.7), &y, &plane_box(4, 100)).unwrap();
        assert!(!rot.strict);
        let not_fixed = check_quasi_strict(&e, &OperatorExpr::Identity, &y, &plane_box(4, 1));
        assert!(not_fixed.is_ok());
        assert!(matches!(
            check_quasi_strict(&e, &rotation(0.7), &Point::from([1.0, 0.0]), &plane_box(4, 10)),
            Err(Error::NotFixed { .. })
        ));
    }

    #[test]
    fn subregularity_examples() {
        let e = ModelSpace::euclidean(2).unwrap();
        let set = ConvexSet::ball([0.0, 0.0], 1.0);
        let fix = FixedSetDescriptor::sets([set.clone()]);
        let p = OperatorExpr::project(set.clone());
        let m = estimate_subregularity(&e, &p, &fix, &plane_box(5, 2000)).unwrap();
        assert!((m.mu - 1.0).abs() < 1e-12);
        let km = OperatorExpr::km(p, 0.5);
        let m = estimate_subregularity(&e, &km, &fix, &plane_box(5, 2000)).unwrap();
        assert!((m.mu - 2.0).abs() < 1e-9);
        let a = m.clone();
        let b = estimate_subregularity(&e, &km, &fix, &plane_box(5, 2000)).unwrap();
        assert_eq!(a.mu.to_bits(), b.mu.to_bits());
    }

    #[test]
    fn orthogonal_lines_subregularity() {
        let e = ModelSpace::euclidean(2).unwrap();
        let a = ConvexSet::segment([-10.0, 0.0], [10.0, 0.0]);
        let b = ConvexSet::segment([0.0, -10.0], [0.0, 10.0]);
        let t = OperatorExpr::compose(vec![OperatorExpr::project(a.clone()), OperatorExpr::project(b.clone())]);
        let fix = FixedSetDescriptor::sets([a, b]);
        let m = estimate_subregularity(&e, &t, &fix, &plane_box(6, 3000)).unwrap();
        assert!((m.mu - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gauge_examples() {
        let d: Vec<f64> = (0..30).map(|k| 0.5f64.powi(k)).collect();
        assert!(check_gauge_monotone(&d, 0.5).unwrap());
        assert!(!check_gauge_monotone(&d, 0.25).unwrap());
        assert!(!check_gauge_monotone(&[1.0, 1.0, 1.0], 0.9).unwrap());
        assert!(check_gauge_monotone(&[], 0.5).is_err());
    }

    #[test]
    fn tail_sums() {
        assert_eq!(tail_sum(0.5, 1.0, 0).unwrap(), 2.0);
        assert!((tail_sum(0.9, 1.0, 1).unwrap() - 9.0).abs() < 1e-12);
        assert!(tail_sum(1.0, 1.0, 0).is_err());
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let s = tail_sum(0.7, 2.0, k).unwrap();
            assert!(s < prev);
            prev = s;
        }
    }
}
