//! Fixed-point iteration, rate analysis, preset experiments, config ingestion
//! and the command-line front end.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod output;
pub mod presets;
pub mod verify;

use serde::{Deserialize, Serialize};

use crate::certificates::{apriori_constant, Certificate, RatePrediction};
use crate::error::{Error, Result};
use crate::operators::{FixedSetDescriptor, Mapping};
use crate::regularity::check_gauge_monotone;
use crate::spaces::{ModelSpace, Point};

/// Distances at or below this are treated as converged when forming ratios.
pub const RATIO_FLOOR: f64 = 1e-11;
/// Relative slack on the finite rate prediction.
pub const RATE_SLACK: f64 = 0.02;
/// Relative slack on the asymptotic rate prediction and the necessity bound.
pub const ASYMPTOTIC_SLACK: f64 = 0.05;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StopReason {
    ResidualBelow { tol: f64 },
    MaxIter,
    /// The image of iterate `index` left the domain.
    DomainEscape { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iterates: Vec<Point>,
    /// `d(x_k, T x_k)`, NaN for an iterate whose image escaped.
    pub residuals: Vec<f64>,
    /// `d(x_k, Fix T)` when a fixed-set descriptor is attached.
    pub dist_to_fix: Option<Vec<f64>>,
    pub stop: StopReason,
}

/// Run `x_{k+1} = T x_k` until `d(x_k, T x_k) <= tol` or `max_iter` steps.
/// Leaving the domain ends the trace rather than failing.
pub fn iterate<M: Mapping + ?Sized>(
    space: &ModelSpace,
    t: &M,
    x0: &Point,
    tol: f64,
    max_iter: usize,
) -> Result<IterationTrace> {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::param("tol", "must be finite and nonnegative"));
    }
    space.check(x0)?;
    let mut iterates = Vec::new();
    let mut residuals = Vec::new();
    let mut x = x0.clone();
    let stop = loop {
        let k = iterates.len();
        let tx = match t.apply(space, &x) {
            Ok(tx) => tx,
            Err(e) if e.is_domain_escape() => {
                iterates.push(x);
                residuals.push(f64::NAN);
                break StopReason::DomainEscape { index: k };
            }
            Err(e) => return Err(e),
        };
        let r = space.dist_raw(&x.0, &tx.0);
        if !r.is_finite() {
            return Err(Error::NonFinite(format!("residual at iterate {k}")));
        }
        iterates.push(x);
        residuals.push(r);
        if r <= tol {
            break StopReason::ResidualBelow { tol };
        }
        if k >= max_iter {
            break StopReason::MaxIter;
        }
        x = tx;
    };
    Ok(IterationTrace {
        iterates,
        residuals,
        dist_to_fix: None,
        stop,
    })
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn converged(&self) -> bool {
        matches!(self.stop, StopReason::ResidualBelow { .. })
    }

    pub fn last(&self) -> &Point {
        self.iterates.last().expect("traces hold at least one iterate")
    }

    /// Fill `dist_to_fix` from a descriptor.
    pub fn attach_fixed_set(&mut self, space: &ModelSpace, s: &FixedSetDescriptor) -> Result<()> {
        let d = self
            .iterates
            .iter()
            .map(|x| s.distance(space, x))
            .collect::<Result<Vec<_>>>()?;
        self.dist_to_fix = Some(d);
        Ok(())
    }

    /// Distances used for rate analysis and whether they fall back to the
    /// distance to the final iterate.
    pub fn analysis_distances(&self, space: &ModelSpace) -> (Vec<f64>, bool) {
        match &self.dist_to_fix {
            Some(d) => (d.clone(), false),
            None => {
                let last = self.last();
                let d = self.iterates.iter().map(|x| space.dist_raw(&x.0, &last.0)).collect();
                (d, true)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// No prediction, or the prediction is outside its valid range.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriCheck {
    pub a: f64,
    pub t0: f64,
    pub holds: bool,
    /// Largest `d(x_k, x*) - a s_k(t0)` over the trace.
    pub worst_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityCheck {
    /// Largest `d(x_k, Fix) / d(x_k, T x_k)` along the trace.
    pub mu_trace: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// `ratios[k] = d_{k+1} / d_k`, absent once `d_k` is below the floor.
    pub ratios: Vec<Option<f64>>,
    pub fitted_rate: f64,
    pub prediction: Option<RatePrediction>,
    pub verdict: Verdict,
    pub asymptotic: Option<RatePrediction>,
    pub asymptotic_verdict: Verdict,
    pub gauge_monotone: bool,
    pub apriori: Option<AprioriCheck>,
    pub necessity: Option<NecessityCheck>,
    /// Distances were measured to the final iterate, not to a known fixed set.
    pub dist_caveat: bool,
}

impl RateReport {
    /// PASS/FAIL lines that were actually checked all passed.
    pub fn all_pass(&self) -> bool {
        self.verdict != Verdict::Fail
            && self.asymptotic_verdict != Verdict::Fail
            && self.gauge_monotone
            && self.apriori.as_ref().is_none_or(|a| a.holds)
            && self.necessity.as_ref().is_none_or(|n| n.holds)
    }
}

fn ratios_of(d: &[f64]) -> Vec<Option<f64>> {
    d.windows(2)
        .map(|w| (w[0] > RATIO_FLOOR).then(|| w[1] / w[0]))
        .collect()
}

/// Geometric mean of the last half of the defined ratios.
pub fn fitted_rate(ratios: &[Option<f64>]) -> f64 {
    let r: Vec<f64> = ratios.iter().flatten().copied().collect();
    if r.is_empty() {
        return 0.0;
    }
    let tail = &r[r.len() / 2..];
    if tail.iter().any(|v| *v <= 0.0) {
        return 0.0;
    }
    (tail.iter().map(|v| v.ln()).sum::<f64>() / tail.len() as f64).exp()
}

fn verdict_for(fitted: f64, prediction: Option<&RatePrediction>, slack: f64) -> Verdict {
    match prediction {
        Some(p) if p.is_valid() => {
            if fitted <= p.gamma * (1.0 + slack) {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        }
        _ => Verdict::NotApplicable,
    }
}

/// Ratios, fitted rate, comparison with `prediction` and the gauge check at
/// the fitted rate.
pub fn analyze(
    space: &ModelSpace,
    trace: &IterationTrace,
    prediction: Option<&RatePrediction>,
) -> Result<RateReport> {
    // one-step convergence is still analysable
    let needed = if trace.converged() { 2 } else { 3 };
    if trace.len() < needed {
        return Err(Error::InsufficientTrace(format!(
            "need at least {needed} iterates, got {}",
            trace.len()
        )));
    }
    let (d, caveat) = trace.analysis_distances(space);
    let d = finite_prefix(&d);
    let ratios = ratios_of(d);
    let fitted = fitted_rate(&ratios);
    Ok(RateReport {
        ratios,
        fitted_rate: fitted,
        prediction: prediction.cloned(),
        verdict: verdict_for(fitted, prediction, RATE_SLACK),
        asymptotic: None,
        asymptotic_verdict: Verdict::NotApplicable,
        gauge_monotone: check_gauge_monotone(d, fitted)?,
        apriori: None,
        necessity: None,
        dist_caveat: caveat,
    })
}

fn finite_prefix(d: &[f64]) -> &[f64] {
    let n = d.iter().position(|v| !v.is_finite()).unwrap_or(d.len());
    &d[..n]
}

impl RateReport {
    pub fn with_asymptotic(mut self, prediction: &RatePrediction) -> Self {
        self.asymptotic_verdict = verdict_for(self.fitted_rate, Some(prediction), ASYMPTOTIC_SLACK);
        self.asymptotic = Some(prediction.clone());
        self
    }

    /// Checks `d(x_k, x*) <= a s_k(t0)` with `x*` the final iterate,
    /// `s_k(t) = t gamma^k / (1 - gamma)` at the fitted rate.
    pub fn with_apriori(mut self, space: &ModelSpace, trace: &IterationTrace, cert: &Certificate) -> Self {
        let (d, _) = trace.analysis_distances(space);
        let gamma = self.fitted_rate;
        if gamma >= 1.0 || d.is_empty() {
            return self;
        }
        let a = apriori_constant(cert);
        let t0 = d[0];
        let star = trace.last();
        let mut worst = f64::NEG_INFINITY;
        for (k, x) in trace.iterates.iter().enumerate() {
            let s_k = t0 * gamma.powf(k as f64) / (1.0 - gamma);
            worst = worst.max(space.dist_raw(&x.0, &star.0) - a * s_k);
        }
        self.apriori = Some(AprioriCheck {
            a,
            t0,
            holds: worst <= 1e-12,
            worst_excess: worst,
        });
        self
    }

    /// Checks that the modulus seen along the trace respects `1/(1 - gamma)`.
    pub fn with_necessity(mut self, space: &ModelSpace, trace: &IterationTrace) -> Self {
        let (d, _) = trace.analysis_distances(space);
        let gamma = self.fitted_rate;
        if gamma >= 1.0 {
            return self;
        }
        let mu = d
            .iter()
            .zip(&trace.residuals)
            .filter(|(dk, rk)| **dk > RATIO_FLOOR && **rk > crate::regularity::TINY_STEP)
            .map(|(dk, rk)| dk / rk)
            .fold(0.0, f64::max);
        let bound = 1.0 / (1.0 - gamma);
        self.necessity = Some(NecessityCheck {
            mu_trace: mu,
            bound,
            holds: mu <= bound * (1.0 + ASYMPTOTIC_SLACK),
        });
        self
    }
}
