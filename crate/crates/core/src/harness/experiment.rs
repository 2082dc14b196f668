//! Running a resolved experiment: iteration, certificate, modulus estimate
//! and rate verdicts in one report.

use serde::{Deserialize, Serialize};

use super::config::{CertificateSpec, Experiment, ExperimentConfig};
use super::{analyze, iterate, IterationTrace, RateReport, StopReason};
use crate::certificates::{derive_certificate, rate_from_certificate, Certificate, RatePrediction};
use crate::error::{Error, Result};
use crate::operators::FixedSetDescriptor;
use crate::regularity::{
    estimate_subregularity, firmness_frontier, Region, SampleSpec, SubregularityEstimate,
};
use crate::spaces::{ModelSpace, Point};

pub const REPORT_SCHEMA: &str = "geoprox-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub iterations: usize,
    pub stop: StopReason,
    pub final_point: Point,
    pub final_residual: f64,
    pub certificate: Option<Certificate>,
    pub certificate_note: Option<String>,
    pub subregularity: Option<SubregularityEstimate>,
    /// Modulus with respect to the surrogate, `mu_hat * (2/c)^(1/p)`, which is
    /// what the rate formula takes.
    pub mu_surrogate: Option<f64>,
    pub rate: Option<RateReport>,
    pub rate_note: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: IterationTrace,
    pub report: RunReport,
}

impl RunOutcome {
    pub fn escaped(&self) -> bool {
        matches!(self.report.stop, StopReason::DomainEscape { .. })
    }
}

const DEFAULT_ALPHAS: [f64; 19] = [
    0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85,
    0.9, 0.95,
];

/// Sampling used for modulus and empirical certificate estimates. Without an
/// explicit spec: the whole cap, or a Euclidean ball around the nearest fixed
/// point reaching 1.5 times past the start.
pub(crate) fn sampling_for(exp: &Experiment, fix: &FixedSetDescriptor, seed: Option<u64>) -> Result<Option<SampleSpec>> {
    let mut spec = match &exp.sampling {
        Some(s) => s.clone(),
        None => {
            if exp.space.cap().is_some() {
                SampleSpec::whole_cap(&exp.space, 0, 10_000)?
            } else {
                let y = fix.nearest_point(&exp.space, &exp.x0)?;
                let r = exp.space.dist_raw(&y.0, &exp.x0.0);
                if r == 0.0 {
                    return Ok(None);
                }
                SampleSpec::new(
                    0,
                    10_000,
                    Region::Ball {
                        center: y,
                        radius: 1.5 * r,
                    },
                    1e-6 * r,
                )
            }
        }
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    Ok(Some(spec))
}

fn surrogate_modulus(space: &ModelSpace, mu: f64) -> f64 {
    mu * (2.0 / space.c()).powf(1.0 / space.p())
}

/// Sampled certificate: the constant on the grid whose violation gives the
/// smallest predicted rate.
fn empirical_certificate(
    exp: &Experiment,
    fix: &FixedSetDescriptor,
    spec: &SampleSpec,
    alphas: &[f64],
    mu_s: Option<f64>,
) -> Result<Certificate> {
    let y = fix.nearest_point(&exp.space, &exp.x0)?;
    let f = firmness_frontier(&exp.space, &exp.operator, &y, alphas, spec)?;
    let (p, c) = (exp.space.p(), exp.space.c());
    let score = |a: f64, e: f64| -> f64 {
        match mu_s {
            Some(mu) => 1.0 + e - (1.0 - a) / a / mu.powf(p),
            None => e,
        }
    };
    let mut best: Option<(f64, usize)> = None;
    for (i, (a, e)) in f.alphas.iter().zip(&f.epsilons).enumerate() {
        let s = score(*a, *e);
        // prefer predictions inside the valid range
        let s = if s > 0.0 { s } else { f64::INFINITY };
        if best.is_none_or(|(b, _)| s < b) {
            best = Some((s, i));
        }
    }
    let i = best.map_or(0, |b| b.1);
    Certificate::new(
        f.alphas[i],
        f.epsilons[i],
        p,
        c,
        format!("empirical(seed={}, samples={})", spec.seed, f.used),
    )
}

/// Run an experiment. `seed` overrides the sampling seed.
pub fn run_experiment(exp: &Experiment, seed: Option<u64>) -> Result<RunOutcome> {
    let space = &exp.space;
    let mut trace = iterate(space, &exp.operator, &exp.x0, exp.stop.tol, exp.stop.max_iter)?;
    let known = exp
        .fixed_set
        .as_ref()
        .filter(|d| !matches!(d, FixedSetDescriptor::Unknown | FixedSetDescriptor::Empty));
    if let Some(d) = known {
        trace.attach_fixed_set(space, d)?;
    }
    let escaped = matches!(trace.stop, StopReason::DomainEscape { .. });

    let spec = match known {
        Some(d) => sampling_for(exp, d, seed)?,
        None => None,
    };
    let used_seed = spec.as_ref().map_or(seed.unwrap_or(0), |s| s.seed);

    let mut subregularity = None;
    let mut mu_s = None;
    if let (Some(d), Some(s)) = (known, &spec) {
        let mut s = s.clone();
        if s.exclusion_radius == 0.0 {
            s.exclusion_radius = 1e-9;
        }
        let est = estimate_subregularity(space, &exp.operator, d, &s)?;
        mu_s = Some(surrogate_modulus(space, est.mu));
        subregularity = Some(est);
    }

    let mut certificate_note = None;
    let certificate = match &exp.certificate {
        CertificateSpec::Calculus => match derive_certificate(&exp.operator, space.c(), space.p()) {
            Ok(c) => Some(c),
            Err(e) => {
                certificate_note = Some(e.to_string());
                None
            }
        },
        CertificateSpec::Explicit { alpha, epsilon } => {
            Some(Certificate::new(*alpha, *epsilon, space.p(), space.c(), "explicit")?)
        }
        CertificateSpec::Empirical { alphas } => match (known, &spec) {
            (Some(d), Some(s)) => {
                let grid = alphas.as_deref().unwrap_or(&DEFAULT_ALPHAS);
                Some(empirical_certificate(exp, d, s, grid, mu_s)?)
            }
            _ => {
                certificate_note = Some("empirical certificates need a known fixed set".into());
                None
            }
        },
    };

    let prediction: Option<RatePrediction> = match (&certificate, mu_s) {
        (Some(c), Some(mu)) => Some(rate_from_certificate(c, mu)?),
        _ => None,
    };

    let mut rate_note = None;
    let rate = match analyze(space, &trace, prediction.as_ref()) {
        Ok(mut r) => {
            // the limit constant is the calculus at c = 2
            if space.cap().is_some() && matches!(exp.certificate, CertificateSpec::Calculus) {
                if let (Ok(limit), Some(est)) =
                    (derive_certificate(&exp.operator, 2.0, space.p()), &subregularity)
                {
                    r = r.with_asymptotic(&rate_from_certificate(&limit, est.mu)?);
                }
            }
            if let Some(c) = &certificate {
                if trace.converged() {
                    r = r.with_apriori(space, &trace, c);
                }
            }
            if known.is_some() && trace.converged() {
                r = r.with_necessity(space, &trace);
            }
            Some(r)
        }
        Err(Error::InsufficientTrace(m)) => {
            rate_note = Some(m);
            None
        }
        Err(e) => return Err(e),
    };

    let pass = !escaped && rate.as_ref().is_none_or(|r| r.all_pass());
    let report = RunReport {
        schema: REPORT_SCHEMA.into(),
        config: exp.config.clone(),
        seed: used_seed,
        iterations: trace.len() - 1,
        stop: trace.stop,
        final_point: trace.last().clone(),
        final_residual: *trace.residuals.last().expect("nonempty trace"),
        certificate,
        certificate_note,
        subregularity,
        mu_surrogate: mu_s,
        rate,
        rate_note,
        pass,
    };
    Ok(RunOutcome { trace, report })
}
