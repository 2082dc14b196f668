//! Ready-to-run experiments with analytic or precomputed fixed sets.
//!
//! Starting points sit within half the cap radius of the fixed set and on
//! the side where the per-step contraction approaches its limit from below.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::config::{
    CertificateSpec, ExperimentConfig, FixedSetSpec, FixedTermSpec, OperatorSpec, Ref, StopSpec,
    TermSpec, SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::functions::{ConvexFunction, ConvexSet, Profile};
use crate::regularity::{Region, SampleSpec};
use crate::spaces::{ModelSpace, Point, SpaceKind};

pub const PRESET_NAMES: [&str; 5] = [
    "two_halfspaces",
    "cyclic_projections",
    "alg1_prox_chain",
    "alg2_projected_gradient",
    "sphere_fermat_weber",
];

/// Build a preset from `name` or `name(arg, ...)`. Arguments accept plain
/// numbers and products or quotients with `pi`, such as `pi/4` or `2*pi/3`.
pub fn preset(spec: &str) -> Result<ExperimentConfig> {
    let spec = spec.trim();
    let (name, args) = match spec.find('(') {
        Some(i) => {
            let inner = spec[i + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::config("preset", format!("unbalanced parentheses in \"{spec}\"")))?;
            let args = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner.split(',').map(parse_number).collect::<Result<Vec<_>>>()?
            };
            (spec[..i].trim(), args)
        }
        None => (spec, Vec::new()),
    };
    let arity = |max: usize| -> Result<()> {
        if args.len() > max {
            return Err(Error::config("preset", format!("{name} takes at most {max} arguments")));
        }
        Ok(())
    };
    match name {
        "two_halfspaces" => {
            arity(1)?;
            two_halfspaces(args.first().copied().unwrap_or(PI / 4.0))
        }
        "cyclic_projections" => {
            arity(1)?;
            let n = args.first().copied().unwrap_or(3.0);
            if n.fract() != 0.0 || n < 2.0 {
                return Err(Error::config("preset", "cyclic_projections needs an integer N >= 2"));
            }
            cyclic_projections(n as usize)
        }
        "alg1_prox_chain" => {
            arity(0)?;
            alg1_prox_chain()
        }
        "alg2_projected_gradient" => {
            arity(1)?;
            alg2_projected_gradient(args.first().copied().unwrap_or(0.5))
        }
        "sphere_fermat_weber" => {
            arity(3)?;
            let kappa = args.first().copied().unwrap_or(1.0);
            let delta = args.get(1).copied().unwrap_or(PI / 8.0);
            let n = args.get(2).copied().unwrap_or(3.0);
            if n.fract() != 0.0 || n < 3.0 {
                return Err(Error::config("preset", "sphere_fermat_weber needs at least 3 anchors"));
            }
            sphere_fermat_weber(kappa, delta, n as usize)
        }
        _ => Err(Error::config(
            "preset",
            format!("unknown preset \"{name}\"; expected one of {}", PRESET_NAMES.join(", ")),
        )),
    }
}

fn parse_number(text: &str) -> Result<f64> {
    let text = text.trim();
    let bad = || Error::config("preset", format!("cannot parse \"{text}\" as a number"));
    let factor = |t: &str| -> Result<f64> {
        match t.trim() {
            "pi" | "π" => Ok(PI),
            s => s.parse::<f64>().map_err(|_| bad()),
        }
    };
    let mut value = None;
    let mut op = '*';
    let mut start = 0;
    for (i, ch) in text.char_indices().chain(std::iter::once((text.len(), '*'))) {
        if ch == '*' || ch == '/' {
            let f = factor(&text[start..i])?;
            value = Some(match (value, op) {
                (None, _) => f,
                (Some(v), '*') => v * f,
                (Some(v), _) => v / f,
            });
            op = ch;
            start = i + ch.len_utf8();
        }
    }
    value.filter(|v: &f64| v.is_finite()).ok_or_else(bad)
}

fn base(space: SpaceKind, operator: OperatorSpec, x0: Vec<f64>) -> ExperimentConfig {
    ExperimentConfig {
        schema: SCHEMA_VERSION.into(),
        name: None,
        space,
        sets: BTreeMap::new(),
        functions: BTreeMap::new(),
        operator,
        initial_point: Point(x0),
        stop: StopSpec::default(),
        sampling: None,
        fixed_set: None,
        certificate: CertificateSpec::Calculus,
        output: None,
    }
}

fn named<T>(n: &str) -> Ref<T> {
    Ref::Name(n.into())
}

fn project(n: &str) -> OperatorSpec {
    OperatorSpec::Project { set: named(n) }
}

fn prox(n: &str, lambda: f64) -> OperatorSpec {
    OperatorSpec::Prox {
        f: named(n),
        lambda,
        p: None,
    }
}

/// Point at geodesic distance `r` from the north pole in direction `phi`, on
/// the sphere of curvature `kappa`.
fn cap_point(kappa: f64, r: f64, phi: f64) -> Vec<f64> {
    let rad = 1.0 / kappa.sqrt();
    let t = r * kappa.sqrt();
    vec![rad * t.sin() * phi.cos(), rad * t.sin() * phi.sin(), rad * t.cos()]
}

fn cap_space(kappa: f64, delta: f64) -> SpaceKind {
    SpaceKind::SphereCap {
        dim: 2,
        curvature: kappa,
        center: Point(cap_point(kappa, 0.0, 0.0)),
        radius: delta,
    }
}

fn whole_cap(kappa: f64, delta: f64, count: usize) -> SampleSpec {
    SampleSpec::new(
        0,
        count,
        Region::Cap {
            center: Point(cap_point(kappa, 0.0, 0.0)),
            radius: delta,
        },
        1e-6 * delta,
    )
}

/// Alternating projections between two halfspaces of R^3 meeting at angle
/// `theta`. From the start chosen here every cycle contracts the distance to
/// the wedge by exactly `cos(theta)^2`.
pub fn two_halfspaces(theta: f64) -> Result<ExperimentConfig> {
    if !(theta > 0.0 && theta <= PI / 2.0) {
        return Err(Error::config("preset", "two_halfspaces needs an angle in (0, pi/2]"));
    }
    let mut c = base(
        SpaceKind::Euclidean { dim: 3 },
        OperatorSpec::Compose {
            factors: vec![project("A"), project("B")],
        },
        vec![-1.0, 0.0, 0.5],
    );
    c.name = Some(format!("two_halfspaces({theta})"));
    c.sets.insert("A".into(), ConvexSet::halfspace([0.0, -1.0, 0.0], 0.0));
    c.sets
        .insert("B".into(), ConvexSet::halfspace([-theta.sin(), theta.cos(), 0.0], 0.0));
    c.fixed_set = Some(FixedSetSpec::KnownSet {
        terms: vec![
            FixedTermSpec::Set { set: named("A") },
            FixedTermSpec::Set { set: named("B") },
        ],
    });
    c.sampling = Some(SampleSpec::new(
        0,
        20_000,
        Region::Box {
            lo: vec![-1.0; 3],
            hi: vec![1.0; 3],
        },
        1e-6,
    ));
    Ok(c)
}

/// Cyclic projections onto `n` unit disks whose boundaries pass through the
/// origin. For `n >= 3` the intersection is the origin alone.
pub fn cyclic_projections(n: usize) -> Result<ExperimentConfig> {
    if !(2..=64).contains(&n) {
        return Err(Error::config("preset", "cyclic_projections needs 2 <= N <= 64"));
    }
    let spacing = 2.0 * PI / n.max(3) as f64;
    let names: Vec<String> = (0..n).map(|i| format!("C{i}")).collect();
    let mut c = base(
        SpaceKind::Euclidean { dim: 2 },
        OperatorSpec::Compose {
            factors: names.iter().rev().map(|s| project(s)).collect(),
        },
        vec![-0.3, -0.2],
    );
    c.name = Some(format!("cyclic_projections({n})"));
    for (i, s) in names.iter().enumerate() {
        let phi = spacing * i as f64;
        c.sets.insert(s.clone(), ConvexSet::ball([phi.cos(), phi.sin()], 1.0));
    }
    c.fixed_set = Some(FixedSetSpec::KnownSet {
        terms: names.iter().map(|s| FixedTermSpec::Set { set: named(s) }).collect(),
    });
    c.sampling = Some(SampleSpec::new(
        0,
        5_000,
        Region::Ball {
            center: Point(vec![0.0, 0.0]),
            radius: 0.5,
        },
        1e-6,
    ));
    Ok(c)
}

/// Proximal splitting on the cap: the prox of a quadratic centred at the
/// pole, then the projection onto a meridian arc through the pole.
pub fn alg1_prox_chain() -> Result<ExperimentConfig> {
    let (kappa, delta) = (1.0, PI / 8.0);
    let mut c = base(
        cap_space(kappa, delta),
        OperatorSpec::Compose {
            factors: vec![prox("arc", 1.0), prox("g", 1.0)],
        },
        cap_point(kappa, 0.5 * delta, 0.5),
    );
    c.name = Some("alg1_prox_chain".into());
    let seg = ConvexSet::segment(cap_point(kappa, 0.9 * delta, 0.0), cap_point(kappa, 0.9 * delta, PI));
    c.sets.insert("L".into(), seg.clone());
    c.functions.insert("arc".into(), ConvexFunction::indicator(seg));
    c.functions.insert(
        "g".into(),
        ConvexFunction::radial(
            cap_point(kappa, 0.0, 0.0),
            Profile::Power {
                exponent: 2.0,
                coefficient: 0.5,
            },
        ),
    );
    c.fixed_set = Some(FixedSetSpec::KnownPoint {
        point: Point(cap_point(kappa, 0.0, 0.0)),
    });
    c.sampling = Some(whole_cap(kappa, delta, 10_000));
    Ok(c)
}

/// Metric projected gradients: a relaxed prox step on a quadratic, then the
/// projection onto a ball that contains its minimizer.
pub fn alg2_projected_gradient(beta: f64) -> Result<ExperimentConfig> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::config("preset", "alg2_projected_gradient needs beta in (0, 1]"));
    }
    let (kappa, delta) = (1.0, PI / 8.0);
    let anchor = cap_point(kappa, 0.2 * delta, 0.0);
    let mut c = base(
        cap_space(kappa, delta),
        OperatorSpec::Compose {
            factors: vec![
                project("C"),
                OperatorSpec::Km {
                    inner: Box::new(prox("g", 1.0)),
                    beta,
                },
            ],
        },
        cap_point(kappa, 0.4 * delta, PI),
    );
    c.name = Some(format!("alg2_projected_gradient({beta})"));
    c.sets.insert(
        "C".into(),
        ConvexSet::ball(cap_point(kappa, 0.0, 0.0), 0.5 * delta),
    );
    c.functions.insert(
        "g".into(),
        ConvexFunction::radial(
            anchor.clone(),
            Profile::Power {
                exponent: 2.0,
                coefficient: 0.5,
            },
        ),
    );
    c.fixed_set = Some(FixedSetSpec::KnownPoint { point: Point(anchor) });
    c.sampling = Some(whole_cap(kappa, delta, 10_000));
    Ok(c)
}

/// Averaged proxes of distance functions to `n` anchors placed symmetrically
/// at `0.6 delta` from the pole. The fixed point is the weighted geometric
/// median, computed by a grid search refined with Weiszfeld steps.
pub fn sphere_fermat_weber(kappa: f64, delta: f64, n: usize) -> Result<ExperimentConfig> {
    let space = ModelSpace::from_kind(cap_space(kappa, delta)).map_err(|e| Error::config("preset", e.to_string()))?;
    if !(3..=32).contains(&n) {
        return Err(Error::config("preset", "sphere_fermat_weber needs 3 to 32 anchors"));
    }
    let anchors: Vec<Point> = (0..n)
        .map(|i| Point(cap_point(kappa, 0.6 * delta, 2.0 * PI * i as f64 / n as f64)))
        .collect();
    let weights = vec![1.0 / n as f64; n];
    let lambda = 0.25 * 0.6 * delta;
    let terms = (0..n)
        .map(|i| TermSpec {
            op: prox(&format!("f{i}"), lambda),
            weight: weights[i],
        })
        .collect();
    let mut c = base(
        cap_space(kappa, delta),
        OperatorSpec::Average { terms, p: 2.0 },
        cap_point(kappa, 0.3 * delta, PI / n as f64),
    );
    c.name = Some(format!("sphere_fermat_weber({kappa}, {delta}, {n})"));
    for (i, a) in anchors.iter().enumerate() {
        c.functions.insert(
            format!("f{i}"),
            ConvexFunction::radial(a.clone(), Profile::Linear { slope: 1.0 }),
        );
    }
    let median = geometric_median(&space, &anchors, &weights)?;
    c.fixed_set = Some(FixedSetSpec::KnownPoint { point: median });
    c.sampling = Some(whole_cap(kappa, delta, 4_000));
    c.certificate = CertificateSpec::Empirical { alphas: None };
    Ok(c)
}

/// Minimizer of `sum w_i d(x, a_i)` over a two-dimensional cap.
pub fn geometric_median(space: &ModelSpace, anchors: &[Point], weights: &[f64]) -> Result<Point> {
    let (center, delta) = space
        .cap()
        .ok_or_else(|| Error::Unsupported("geometric median grid needs a cap".into()))?;
    let objective = |x: &Point| -> f64 {
        anchors
            .iter()
            .zip(weights)
            .map(|(a, w)| w * space.dist_raw(&x.0, &a.0))
            .sum()
    };
    let rings = 120;
    let mut best = (objective(center), center.clone());
    let (frame_u, frame_v) = crate::functions::tangent_frame(&center.0);
    for i in 1..=rings {
        let r = delta * i as f64 / rings as f64;
        let m = (2.0 * PI * i as f64).ceil() as usize;
        for j in 0..m {
            let phi = 2.0 * PI * j as f64 / m as f64;
            let dir: Vec<f64> = frame_u
                .iter()
                .zip(&frame_v)
                .map(|(u, v)| r * (phi.cos() * u + phi.sin() * v))
                .collect();
            let x = space.exp_map(center, &dir)?;
            let v = objective(&x);
            if v < best.0 {
                best = (v, x);
            }
        }
    }
    let mut x = best.1;
    for _ in 0..10_000 {
        let mut num = vec![0.0; x.dim()];
        let mut den = 0.0;
        for (a, w) in anchors.iter().zip(weights) {
            let d = space.dist_raw(&x.0, &a.0);
            if d < 1e-15 {
                return Ok(x);
            }
            let l = space.log_map(&x, a)?;
            for (n, li) in num.iter_mut().zip(&l) {
                *n += w * li / d;
            }
            den += w / d;
        }
        let step: Vec<f64> = num.iter().map(|v| v / den).collect();
        let len = step.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = space.exp_map(&x, &step)?;
        if len < 1e-17 {
            break;
        }
    }
    Ok(x)
}
