//! The invariant suite behind `geoprox verify`.
//!
//! Every check is seeded and reduced in a fixed order, so the report is
//! byte-identical for a given seed.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use super::experiment::run_experiment;
use super::presets::preset;
use super::{iterate, DEFAULT_MAX_ITER, RATE_SLACK};
use crate::certificates::{
    compose_certificates, km_certificate, prox_certificate, prox_prox_certificate,
};
use crate::error::Result;
use crate::functions::{ConvexFunction, ConvexSet, ProxParams, Profile};
use crate::operators::{
    barycenter, surrogate, transport_discrepancy, two_point_weight, FixedSetDescriptor, Mapping,
    OperatorExpr,
};
use crate::regularity::{check_quasi_strict, draw_samples, estimate_violation, SampleSpec};
use crate::scalar::golden_section;
use crate::spaces::{ModelSpace, Point};

pub const VERIFY_SCHEMA: &str = "geoprox-verify/1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub metrics: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

type Metrics = BTreeMap<String, Value>;

fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else {
        Value::from(super::output::fmt_f64(v))
    }
}

fn north_cap(delta: f64) -> Result<ModelSpace> {
    ModelSpace::sphere_cap(2, 1.0, Point::from([0.0, 0.0, 1.0]), delta)
}

/// Random radial function with its anchor inside the cap.
fn random_radial(rng: &mut ChaCha8Rng, anchor: Point) -> ConvexFunction {
    let profile = if rng.random::<bool>() {
        Profile::Linear {
            slope: rng.random_range(0.2..2.0),
        }
    } else {
        Profile::Power {
            exponent: rng.random_range(1.2..3.0),
            coefficient: rng.random_range(0.2..2.0),
        }
    };
    ConvexFunction::radial(anchor, profile)
}

fn convexity(seed: u64, n: usize) -> Result<(bool, Metrics)> {
    let cap = north_cap(PI / 8.0)?;
    let pts: Vec<Vec<Point>> = (0..3)
        .map(|i| draw_samples(&cap, &SampleSpec::whole_cap(&cap, seed + i, n)?))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_cap = f64::INFINITY;
    for i in 0..n {
        let t = rng.random::<f64>();
        worst_cap = worst_cap.min(cap.convexity_residual(&pts[0][i], &pts[1][i], &pts[2][i], t)?);
    }
    let e = ModelSpace::euclidean(3)?;
    let mut worst_flat = 0.0_f64;
    for _ in 0..n {
        let mut p = || Point((0..3).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>());
        let (x, y, z) = (p(), p(), p());
        let t = rng.random::<f64>();
        worst_flat = worst_flat.max(e.convexity_residual(&x, &y, &z, t)?.abs());
    }
    let mut m = Metrics::new();
    m.insert("c".into(), num(cap.c()));
    m.insert("min_cap_residual".into(), num(worst_cap));
    m.insert("max_abs_flat_residual".into(), num(worst_flat));
    Ok((worst_cap >= -1e-9 && worst_flat <= 1e-12, m))
}

/// Largest sampled violation at `alpha` over random radial proxes on a cap.
fn prox_violation(
    space: &ModelSpace,
    seed: u64,
    funcs: usize,
    samples: usize,
    alpha: f64,
) -> Result<f64> {
    let (_, delta) = space.cap().expect("cap");
    let anchors = draw_samples(space, &SampleSpec::whole_cap(space, seed, funcs)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let mut worst = 0.0_f64;
    for (i, a) in anchors.into_iter().enumerate() {
        let f = random_radial(&mut rng, a.clone());
        let lambda = rng.random_range(0.1..2.0) * delta;
        let t = OperatorExpr::prox(f, ProxParams::new(lambda, 2.0));
        let mut spec = SampleSpec::whole_cap(space, seed + 1 + i as u64, samples)?;
        spec.exclusion_radius = 1e-6 * delta;
        worst = worst.max(estimate_violation(space, &t, &a, alpha, &spec)?.epsilon);
    }
    Ok(worst)
}

fn prox_cert(seed: u64) -> Result<(bool, Metrics)> {
    let mut m = Metrics::new();
    let mut pass = true;
    let mut half = Vec::new();
    for (label, delta) in [("pi_8", PI / 8.0), ("pi_16", PI / 16.0)] {
        let space = north_cap(delta)?;
        let cert = prox_certificate(space.c())?;
        let eps = prox_violation(&space, seed, 10, 300, cert.alpha)?;
        pass &= eps <= cert.epsilon + 1e-8;
        let e_half = prox_violation(&space, seed, 10, 300, 0.5)?;
        half.push(e_half);
        m.insert(format!("{label}.alpha"), num(cert.alpha));
        m.insert(format!("{label}.epsilon_bound"), num(cert.epsilon));
        m.insert(format!("{label}.epsilon_hat"), num(eps));
        m.insert(format!("{label}.epsilon_hat_at_half"), num(e_half));
    }
    pass &= half[1] <= half[0];
    Ok((pass, m))
}

fn quasi_strict(seed: u64) -> Result<(bool, Metrics)> {
    let space = north_cap(PI / 8.0)?;
    let anchors = draw_samples(&space, &SampleSpec::whole_cap(&space, seed, 5)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut pass = true;
    for (i, a) in anchors.into_iter().enumerate() {
        let t = OperatorExpr::prox(random_radial(&mut rng, a.clone()), ProxParams::new(0.2, 2.0));
        let mut spec = SampleSpec::whole_cap(&space, seed + 10 + i as u64, 400)?;
        spec.exclusion_radius = 1e-4;
        let r = check_quasi_strict(&space, &t, &a, &spec)?;
        pass &= r.strict;
        worst = worst.min(r.worst_margin);
    }
    let mut m = Metrics::new();
    m.insert("worst_margin".into(), num(worst));
    Ok((pass, m))
}

fn calculus() -> Result<(bool, Metrics)> {
    let mut worst = 0.0_f64;
    for i in 0..=40 {
        let c = 1.05 + 0.95 * i as f64 / 40.0;
        let direct = prox_prox_certificate(c)?;
        let p = prox_certificate(c)?;
        let fold = compose_certificates(&p, &p, c)?;
        worst = worst
            .max((direct.alpha - fold.alpha).abs())
            .max((direct.epsilon - fold.epsilon).abs());
    }
    let mut m = Metrics::new();
    m.insert("max_gap".into(), num(worst));
    Ok((worst <= 1e-12, m))
}

fn km(seed: u64) -> Result<(bool, Metrics)> {
    let space = north_cap(PI / 8.0)?;
    let center = Point::from([0.0, 0.0, 1.0]);
    let f = ConvexFunction::radial(
        center.clone(),
        Profile::Power {
            exponent: 2.0,
            coefficient: 1.0,
        },
    );
    let prox = OperatorExpr::prox(f, ProxParams::new(0.5, 2.0));
    let base = prox_certificate(space.c())?;
    let xs = draw_samples(&space, &SampleSpec::whole_cap(&space, seed, 300)?)?;
    let mut m = Metrics::new();
    let mut pass = true;
    for beta in [0.25, 0.5, 0.75] {
        let t = OperatorExpr::km(prox.clone(), beta);
        let cert = km_certificate(&base, beta)?;
        let spec = SampleSpec::whole_cap(&space, seed + 1, 300)?;
        let eps = estimate_violation(&space, &t, &center, cert.alpha, &spec)?.epsilon;
        let mut gap = 0.0_f64;
        for x in &xs {
            let a = space.distance(x, &t.apply(&space, x)?)?;
            let b = space.distance(x, &prox.apply(&space, x)?)?;
            gap = gap.max((a - beta * b).abs());
        }
        pass &= eps <= cert.epsilon + 1e-8 && gap <= 1e-10;
        m.insert(format!("beta_{beta}.epsilon_hat"), num(eps));
        m.insert(format!("beta_{beta}.epsilon_bound"), num(cert.epsilon));
        m.insert(format!("beta_{beta}.residual_gap"), num(gap));
    }
    Ok((pass, m))
}

fn two_point() -> Result<(bool, Metrics)> {
    let space = north_cap(PI / 8.0)?;
    let x1 = Point::from([(PI / 10.0).sin(), 0.0, (PI / 10.0).cos()]);
    let x2 = Point::from([-(PI / 12.0).sin(), 0.0, (PI / 12.0).cos()]);
    let mut worst = 0.0_f64;
    for p in [2.0, 3.0, 4.0] {
        for i in 1..=9 {
            let w = i as f64 / 10.0;
            // fraction of the way from x1 to x2 minimizing the weighted sum
            let s = golden_section(|s| w * s.powf(p) + (1.0 - w) * (1.0 - s).powf(p), 0.0, 1.0, 1e-12);
            worst = worst.max((two_point_weight(w, p) - (1.0 - s)).abs());
            let z = barycenter(&space, &[x1.clone(), x2.clone()], &[w, 1.0 - w], p)?;
            let d = space.distance(&x1, &x2)?;
            worst = worst.max((space.distance(&x1, &z)? - s * d).abs() / d);
        }
    }
    let mut m = Metrics::new();
    m.insert("max_gap".into(), num(worst));
    Ok((worst <= 1e-6, m))
}

fn rates(seed: u64) -> Result<(bool, Metrics)> {
    let mut m = Metrics::new();
    let mut pass = true;
    let runs = [
        ("two_halfspaces(pi/6)", Some((PI / 6.0).cos().powi(2))),
        ("two_halfspaces(pi/4)", Some(0.5)),
        ("two_halfspaces(pi/3)", Some(0.25)),
        ("cyclic_projections(3)", None),
        ("alg1_prox_chain", None),
        ("alg2_projected_gradient", None),
        ("sphere_fermat_weber", None),
    ];
    for (name, expected) in runs {
        let mut cfg = preset(name)?;
        if let Some(s) = cfg.sampling.as_mut() {
            s.count = s.count.min(3_000);
        }
        let out = run_experiment(&cfg.resolve()?, Some(seed))?;
        let r = &out.report;
        let fitted = r.rate.as_ref().map_or(f64::NAN, |x| x.fitted_rate);
        let mut ok = r.pass && out.trace.converged();
        if let Some(e) = expected {
            ok &= (fitted - e).abs() <= RATE_SLACK * e;
        }
        pass &= ok;
        m.insert(format!("{name}.fitted_rate"), num(fitted));
        m.insert(format!("{name}.iterations"), Value::from(r.iterations));
        m.insert(format!("{name}.pass"), Value::from(ok));
    }
    Ok((pass, m))
}

fn intersection() -> Result<(bool, Metrics)> {
    let e = ModelSpace::euclidean(2)?;
    let a = ConvexSet::ball([0.0, 0.0], 1.0);
    let b = ConvexSet::ball([1.5, 0.0], 1.0);
    let t = OperatorExpr::compose(vec![OperatorExpr::project(a.clone()), OperatorExpr::project(b.clone())]);
    let tr = iterate(&e, &t, &Point::from([0.75, 3.0]), 1e-14, DEFAULT_MAX_ITER)?;
    let x = tr.last();
    let gap = a.distance_to(&e, x)?.max(b.distance_to(&e, x)?);
    let mut m = Metrics::new();
    m.insert("max_set_distance".into(), num(gap));
    Ok((gap <= 1e-6, m))
}

fn surrogate_check(seed: u64) -> Result<(bool, Metrics)> {
    let mut worst_s = 0.0_f64;
    let mut worst_psi = 0.0_f64;
    for name in ["alg1_prox_chain", "alg2_projected_gradient", "sphere_fermat_weber"] {
        let exp = preset(name)?.resolve()?;
        let fix = exp.fixed_set.clone().expect("presets know their fixed set");
        let FixedSetDescriptor::KnownPoint { point: y } = &fix else {
            continue;
        };
        let (p, half_c) = (exp.space.p(), 0.5 * exp.space.c());
        let xs = draw_samples(&exp.space, &SampleSpec::whole_cap(&exp.space, seed, 200)?)?;
        for x in &xs {
            let d = exp.space.distance(x, &exp.operator.apply(&exp.space, x)?)?;
            let s = surrogate(&exp.space, &exp.operator, x, &fix)?;
            let psi = transport_discrepancy(&exp.space, &exp.operator, x, y)?;
            worst_s = worst_s.max((s - psi.max(0.0).powf(1.0 / p)).abs());
            worst_psi = worst_psi.max((psi - half_c * d.powf(p)).abs());
        }
    }
    let mut m = Metrics::new();
    m.insert("max_surrogate_gap".into(), num(worst_s));
    m.insert("max_discrepancy_gap".into(), num(worst_psi));
    Ok((worst_s <= 1e-10 && worst_psi <= 1e-9, m))
}

/// Run every suite. Failures inside a suite are reported, not raised.
pub fn verify(seed: u64) -> VerifyReport {
    let suites: Vec<(&str, Box<dyn Fn() -> Result<(bool, Metrics)>>)> = vec![
        ("convexity", Box::new(move || convexity(seed, 20_000))),
        ("prox_certificate", Box::new(move || prox_cert(seed))),
        ("quasi_strict", Box::new(move || quasi_strict(seed))),
        ("composition_calculus", Box::new(calculus)),
        ("km_relaxation", Box::new(move || km(seed))),
        ("two_point_barycenter", Box::new(two_point)),
        ("linear_rates", Box::new(move || rates(seed))),
        ("fixed_point_intersection", Box::new(intersection)),
        ("surrogate_consistency", Box::new(move || surrogate_check(seed))),
    ];
    let checks: Vec<CheckResult> = suites
        .into_iter()
        .map(|(name, f)| match f() {
            Ok((pass, metrics)) => CheckResult {
                name: name.into(),
                pass,
                metrics,
            },
            Err(e) => CheckResult {
                name: name.into(),
                pass: false,
                metrics: BTreeMap::from([("error".to_string(), Value::from(e.to_string()))]),
            },
        })
        .collect();
    VerifyReport {
        schema: VERIFY_SCHEMA.into(),
        seed,
        pass: checks.iter().all(|c| c.pass),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        assert!(calculus().unwrap().0);
        assert!(two_point().unwrap().0);
        assert!(intersection().unwrap().0);
        let (ok, m) = convexity(1, 2_000).unwrap();
        assert!(ok, "{m:?}");
    }
}
