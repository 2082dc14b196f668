//! Acceptance criteria at full scale. Runs without the libtest harness so
//! every criterion prints one PASS/FAIL line; the process fails if any does.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use geoprox::certificates::{
    compose_certificates, km_certificate, prox_certificate, prox_prox_certificate,
};
use geoprox::harness::experiment::run_experiment;
use geoprox::harness::presets::preset;
use geoprox::harness::{iterate, Verdict};
use geoprox::operators::{surrogate, transport_discrepancy, two_point_weight};
use geoprox::regularity::{
    check_gauge_monotone, check_quasi_strict, draw_samples, estimate_violation, SampleSpec,
};
use geoprox::{
    ConvexFunction, ConvexSet, Mapping, ModelSpace, OperatorExpr, Point,
    Profile, ProxParams, RateValidity, Result,
};

const SEED: u64 = 20_240_601;

type Outcome = Result<(bool, String)>;

fn north(delta: f64) -> ModelSpace {
    ModelSpace::sphere_cap(2, 1.0, Point::from([0.0, 0.0, 1.0]), delta).unwrap()
}

fn random_radial(rng: &mut ChaCha8Rng, anchor: Point) -> ConvexFunction {
    let profile = if rng.random::<bool>() {
        Profile::Linear { slope: rng.random_range(0.2..2.0) }
    } else {
        Profile::Power {
            exponent: rng.random_range(1.2..3.0),
            coefficient: rng.random_range(0.2..2.0),
        }
    };
    ConvexFunction::radial(anchor, profile)
}

/// Random proxes with minimizers spread over the cap, paired with those
/// minimizers.
fn random_proxes(space: &ModelSpace, seed: u64, n: usize) -> Result<Vec<(OperatorExpr, Point)>> {
    let (_, delta) = space.cap().expect("cap");
    let anchors = draw_samples(space, &SampleSpec::whole_cap(space, seed, n)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    Ok(anchors
        .into_iter()
        .map(|a| {
            let f = random_radial(&mut rng, a.clone());
            let lambda = rng.random_range(0.1..2.0) * delta;
            (OperatorExpr::prox(f, ProxParams::new(lambda, 2.0)), a)
        })
        .collect())
}

fn worst_violation(space: &ModelSpace, ops: &[(OperatorExpr, Point)], alpha: f64, per: usize, seed: u64) -> Result<f64> {
    let (_, delta) = space.cap().expect("cap");
    let mut worst = 0.0_f64;
    for (i, (t, y)) in ops.iter().enumerate() {
        let mut spec = SampleSpec::whole_cap(space, seed + 1 + i as u64, per)?;
        spec.exclusion_radius = 1e-6 * delta;
        worst = worst.max(estimate_violation(space, t, y, alpha, &spec)?.epsilon);
    }
    Ok(worst)
}

fn c1_convexity() -> Outcome {
    let n = 100_000;
    let cap = north(PI / 8.0);
    let pts: Vec<Vec<Point>> = (0..3)
        .map(|i| draw_samples(&cap, &SampleSpec::whole_cap(&cap, SEED + i, n)?))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
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
    let c_ok = (cap.c() - PI / 2.0).abs() < 1e-12;
    Ok((
        c_ok && worst_cap >= -1e-9 && worst_flat <= 1e-12,
        format!("c={:.10} min cap residual {worst_cap:.3e}, max |flat residual| {worst_flat:.3e}", cap.c()),
    ))
}

fn c2_prox_certificate() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    let mut half = Vec::new();
    for delta in [PI / 8.0, PI / 16.0] {
        let space = north(delta);
        let cert = prox_certificate(space.c())?;
        let ops = random_proxes(&space, SEED, 100)?;
        let eps = worst_violation(&space, &ops, cert.alpha, 100, SEED)?;
        let e_half = worst_violation(&space, &ops, 0.5, 100, SEED)?;
        pass &= eps <= cert.epsilon + 1e-8 && e_half <= cert.epsilon + 1e-8;
        half.push(e_half);
        notes.push(format!(
            "delta={delta:.4}: eps_hat {eps:.10e} <= {:.10e}, eps_hat(1/2) {e_half:.3e}",
            cert.epsilon
        ));
    }
    pass &= half[1] <= half[0];
    Ok((pass, notes.join("; ")))
}

fn c3_quasi_strict() -> Outcome {
    let space = north(PI / 8.0);
    let ops = random_proxes(&space, SEED + 7, 20)?;
    let mut worst = f64::INFINITY;
    let mut used = 0;
    let mut pass = true;
    for (i, (t, a)) in ops.iter().enumerate() {
        let mut spec = SampleSpec::whole_cap(&space, SEED + 100 + i as u64, 500)?;
        spec.exclusion_radius = 1e-4;
        let r = check_quasi_strict(&space, t, a, &spec)?;
        pass &= r.strict;
        used += r.used;
        worst = worst.min(r.worst_margin);
    }
    Ok((pass && worst > 0.0, format!("{used} samples, worst margin {worst:.3e}")))
}

fn c4_composition() -> Outcome {
    // below c = 1.05 epsilon exceeds 400 and one ulp of it is already near
    // 1e-13, so the absolute comparison stops being meaningful there
    let (mut gap, mut rel) = (0.0_f64, 0.0_f64);
    for i in 0..=100 {
        let c = 1.01 + 0.99 * i as f64 / 100.0;
        let direct = prox_prox_certificate(c)?;
        let p = prox_certificate(c)?;
        let fold = compose_certificates(&p, &p, c)?;
        let da = (direct.alpha - fold.alpha).abs();
        let de = (direct.epsilon - fold.epsilon).abs();
        rel = rel.max(da / direct.alpha).max(de / direct.epsilon.max(1.0));
        if c >= 1.05 {
            gap = gap.max(da).max(de);
        }
    }
    let space = north(PI / 8.0);
    let cert = prox_prox_certificate(space.c())?;
    let anchors = draw_samples(&space, &SampleSpec::whole_cap(&space, SEED + 11, 40)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 11);
    let (_, delta) = space.cap().expect("cap");
    let ops: Vec<(OperatorExpr, Point)> = anchors
        .into_iter()
        .map(|a| {
            let mut prox = || {
                let lambda = rng.random_range(0.1..2.0) * delta;
                OperatorExpr::prox(random_radial(&mut rng, a.clone()), ProxParams::new(lambda, 2.0))
            };
            (OperatorExpr::compose(vec![prox(), prox()]), a.clone())
        })
        .collect();
    let eps = worst_violation(&space, &ops, cert.alpha, 250, SEED + 11)?;
    Ok((
        gap <= 1e-12 && rel <= 1e-14 && eps <= cert.epsilon + 1e-8,
        format!("fold gap {gap:.3e} on [1.05, 2], relative {rel:.1e} on [1.01, 2]; prox o prox eps_hat {eps:.3e} <= {:.3e}", cert.epsilon),
    ))
}

fn c5_km() -> Outcome {
    let space = north(PI / 8.0);
    let base = prox_certificate(space.c())?;
    let ops = random_proxes(&space, SEED + 21, 40)?;
    let xs = draw_samples(&space, &SampleSpec::whole_cap(&space, SEED + 22, 250)?)?;
    let mut pass = true;
    let mut notes = Vec::new();
    for beta in [0.25, 0.5, 0.75] {
        let cert = km_certificate(&base, beta)?;
        let relaxed: Vec<(OperatorExpr, Point)> =
            ops.iter().map(|(t, y)| (OperatorExpr::km(t.clone(), beta), y.clone())).collect();
        let eps = worst_violation(&space, &relaxed, cert.alpha, 250, SEED + 23)?;
        let mut gap = 0.0_f64;
        for ((t, _), (tb, _)) in ops.iter().zip(&relaxed) {
            for x in &xs {
                let a = space.distance(x, &tb.apply(&space, x)?)?;
                let b = space.distance(x, &t.apply(&space, x)?)?;
                gap = gap.max((a - beta * b).abs());
            }
        }
        pass &= eps <= cert.epsilon + 1e-8 && gap <= 1e-10;
        notes.push(format!("beta={beta}: eps_hat {eps:.3e} <= {:.3e}, identity gap {gap:.1e}", cert.epsilon));
    }
    Ok((pass, notes.join("; ")))
}

fn c6_two_point() -> Outcome {
    let mut worst = 0.0_f64;
    for p in [2.0, 3.0, 4.0] {
        for i in 1..=9 {
            let w = i as f64 / 10.0;
            // minimize w s^p + (1-w)(1-s)^p over the fraction s travelled from x1
            let (mut a, mut b) = (0.0_f64, 1.0_f64);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            let f = |s: f64| w * s.powf(p) + (1.0 - w) * (1.0 - s).powf(p);
            while b - a > 1e-12 {
                let (c, d) = (b - g * (b - a), a + g * (b - a));
                if f(c) < f(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let oracle = 1.0 - 0.5 * (a + b);
            worst = worst.max((two_point_weight(w, p) - oracle).abs());
        }
    }
    Ok((worst <= 1e-6, format!("max |t_formula - t_oracle| {worst:.3e}")))
}

fn c7_linear_rate() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (label, theta) in [("pi/6", PI / 6.0), ("pi/4", PI / 4.0), ("pi/3", PI / 3.0)] {
        let exp = preset(&format!("two_halfspaces({label})"))?.resolve()?;
        let out = run_experiment(&exp, Some(SEED))?;
        let r = &out.report;
        let cert = r.certificate.as_ref().expect("calculus certificate");
        let rate = r.rate.as_ref().expect("rate report");
        let pred = rate.prediction.as_ref().expect("prediction");
        let want = theta.cos().powf(2.0);
        let ok = (cert.alpha - 2.0 / 3.0).abs() < 1e-12
            && cert.epsilon == 0.0
            && pred.validity == RateValidity::Valid
            && (rate.fitted_rate - want).abs() <= 0.02 * want
            && rate.fitted_rate <= pred.gamma
            && rate.verdict == Verdict::Pass;
        pass &= ok;
        notes.push(format!(
            "theta={label}: fitted {:.6} vs cos^2 {want:.6}, gamma {:.4} (mu {:.4})",
            rate.fitted_rate, pred.gamma, pred.mu
        ));
    }
    Ok((pass, notes.join("; ")))
}

fn c8_intersection() -> Outcome {
    let mut worst = 0.0_f64;
    let e = ModelSpace::euclidean(2)?;
    let cap = north(PI / 8.0);
    let q = |a: f64, phi: f64| Point::from([a.sin() * phi.cos(), a.sin() * phi.sin(), a.cos()]);
    let cases: Vec<(ModelSpace, ConvexSet, ConvexSet, Point)> = vec![
        (e.clone(), ConvexSet::ball([0.0, 0.0], 1.0), ConvexSet::ball([1.5, 0.0], 1.0), Point::from([0.75, 3.0])),
        (
            e.clone(),
            ConvexSet::halfspace([1.0, 1.0], 0.0),
            ConvexSet::ball([0.5, 0.0], 0.8),
            Point::from([2.0, 2.0]),
        ),
        (
            cap.clone(),
            ConvexSet::Ball { center: q(0.15, 0.0), radius: 0.15 },
            ConvexSet::Ball { center: q(0.15, PI), radius: 0.16 },
            q(0.3, PI / 2.0),
        ),
        (
            cap.clone(),
            ConvexSet::Segment { a: q(0.3, 0.0), b: q(0.3, PI) },
            ConvexSet::Ball { center: q(0.1, PI / 2.0), radius: 0.12 },
            q(0.35, -PI / 2.0),
        ),
    ];
    for (space, a, b, x0) in &cases {
        let t = OperatorExpr::compose(vec![OperatorExpr::project(a.clone()), OperatorExpr::project(b.clone())]);
        let tr = iterate(space, &t, x0, 1e-15, 100_000)?;
        let x = tr.last();
        worst = worst.max(a.distance_to(space, x)?).max(b.distance_to(space, x)?);
    }
    Ok((worst <= 1e-6, format!("{} pairs, max distance to a set {worst:.3e}", cases.len())))
}

fn c9_surrogate() -> Outcome {
    let names = [
        "two_halfspaces(pi/4)",
        "cyclic_projections(3)",
        "alg1_prox_chain",
        "alg2_projected_gradient",
        "sphere_fermat_weber",
    ];
    let (mut ws, mut wp) = (0.0_f64, 0.0_f64);
    for name in names {
        let cfg = preset(name)?;
        let exp = cfg.resolve()?;
        let fix = exp.fixed_set.clone().expect("presets know their fixed set");
        let region = if exp.space.cap().is_some() {
            SampleSpec::whole_cap(&exp.space, SEED, 1000)?
        } else {
            let mut s = exp.sampling.clone().expect("euclidean presets sample a region");
            s.seed = SEED;
            s.count = 1000;
            s
        };
        let xs = draw_samples(&exp.space, &region)?;
        let (p, half_c) = (exp.space.p(), 0.5 * exp.space.c());
        for x in &xs {
            let d = exp.space.distance(x, &exp.operator.apply(&exp.space, x)?)?;
            let s = surrogate(&exp.space, &exp.operator, x, &fix)?;
            ws = ws.max((s - half_c.powf(1.0 / p) * d).abs());
            let y = fix.nearest_point(&exp.space, x)?;
            let psi = transport_discrepancy(&exp.space, &exp.operator, x, &y)?;
            wp = wp.max((psi - half_c * d.powf(p)).abs());
        }
    }
    Ok((
        ws <= 1e-10 && wp <= 1e-9,
        format!("{} operators x 1000 samples: surrogate gap {ws:.3e}, discrepancy gap {wp:.3e}", names.len()),
    ))
}

fn c10_gauge() -> Outcome {
    let names = [
        "two_halfspaces(pi/6)",
        "two_halfspaces(pi/4)",
        "two_halfspaces(pi/3)",
        "cyclic_projections(2)",
        "cyclic_projections(3)",
        "alg1_prox_chain",
        "alg2_projected_gradient",
        "sphere_fermat_weber",
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for name in names {
        let exp = preset(name)?.resolve()?;
        let out = run_experiment(&exp, Some(SEED))?;
        if !out.trace.converged() {
            pass = false;
            notes.push(format!("{name}: did not converge"));
            continue;
        }
        let rate = out.report.rate.as_ref().expect("rate report");
        let (d, _) = out.trace.analysis_distances(&exp.space);
        let gauge = check_gauge_monotone(&d, rate.fitted_rate)?;
        let apriori = rate.apriori.as_ref();
        let ok = gauge && rate.gauge_monotone && apriori.is_some_and(|a| a.holds);
        pass &= ok;
        notes.push(format!(
            "{name}: rate {:.4} gauge {} a-priori excess {:.1e}",
            rate.fitted_rate,
            gauge,
            apriori.map_or(f64::NAN, |a| a.worst_excess)
        ));
    }
    Ok((pass, notes.join("; ")))
}

fn c11_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_geoprox");
    let run = || Command::new(bin).args(["verify", "--seed", "7"]).output();
    let a = run().expect("spawn geoprox");
    let b = run().expect("spawn geoprox");
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    let codes = (a.status.code(), b.status.code());
    Ok((
        same && codes == (Some(0), Some(0)),
        format!("{} bytes, identical {same}, exit codes {codes:?}", a.stdout.len()),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("uniform convexity residual", c1_convexity),
        ("prox certificate", c2_prox_certificate),
        ("quasi strict nonexpansiveness", c3_quasi_strict),
        ("composition calculus", c4_composition),
        ("KM relaxation", c5_km),
        ("two-point barycenter", c6_two_point),
        ("linear rate on two halfspaces", c7_linear_rate),
        ("fixed-point intersection", c8_intersection),
        ("surrogate consistency", c9_surrogate),
        ("gauge machinery", c10_gauge),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name} ({:.1}s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
