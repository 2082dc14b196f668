//! Closed-form firmness certificates and the linear rates they predict.
//!
//! A [`Certificate`] records a constant `alpha` and violation `epsilon` such
//! that, at fixed points `y`,
//!
//! ```text
//! d(Tx, y)^p + ((1 - alpha)/alpha) (c/2) d(Tx, x)^p <= (1 + epsilon) d(x, y)^p.
//! ```
//!
//! The functions here only transform constants. Whether a certificate holds
//! for a concrete operator is checked by sampling in [`crate::regularity`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::ConvexFunction;
use crate::operators::OperatorExpr;
use crate::spaces::local_convexity_constant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Scope {
    AtFixedPoints,
    /// Limit constant as the neighbourhood shrinks; `delta` is the cap radius
    /// at which the finite companion certificate was evaluated.
    Asymptotic { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub alpha: f64,
    pub epsilon: f64,
    pub p: f64,
    pub c: f64,
    pub scope: Scope,
    pub provenance: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateValidity {
    Valid,
    BelowLowerBound,
    AtOrAboveOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    /// `max(gamma_p, 0)^(1/p)`
    pub gamma: f64,
    /// `1 + epsilon - tau / mu^p`
    pub gamma_p: f64,
    pub mu: f64,
    pub tau: f64,
    pub validity: RateValidity,
    #[serde(with = "crate::json_float")]
    pub mu_lower: f64,
    #[serde(with = "crate::json_float")]
    pub mu_upper: f64,
}

impl RatePrediction {
    pub fn is_valid(&self) -> bool {
        self.validity == RateValidity::Valid
    }
}

/// Finite certificate at `c_delta` together with its limit as `delta -> 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCertificate {
    pub finite: Certificate,
    pub limit: Certificate,
}

/// The folded composition constant for cyclic projections, next to the
/// closed-form value `(N-1)/N` that is commonly quoted for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclicCertificate {
    pub folded: Certificate,
    pub stated_alpha: f64,
}

/// Operators whose asymptotic constant has a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AsymptoticBuilder {
    Prox,
    ProxProx,
    /// `prox o T0` where `T0` has limit constant `alpha0` and violation
    /// `epsilon0` on the chosen neighbourhood.
    ProxAfter { alpha0: f64, epsilon0: f64 },
    Km { beta: f64, p: f64 },
    ProjectedGradient { beta: f64, p: f64 },
}

impl Certificate {
    pub fn new(alpha: f64, epsilon: f64, p: f64, c: f64, provenance: impl Into<String>) -> Result<Self> {
        let cert = Self {
            alpha,
            epsilon,
            p,
            c,
            scope: Scope::AtFixedPoints,
            provenance: provenance.into(),
        };
        cert.validate()?;
        Ok(cert)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon", "must be finite and nonnegative"));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::param("p", "must exceed 1"));
        }
        if !(self.c > 0.0 && self.c <= 2.0) {
            return Err(Error::param("c", format!("must lie in (0, 2], got {}", self.c)));
        }
        Ok(())
    }

    /// `(1 - alpha) / alpha`
    pub fn tau(&self) -> f64 {
        (1.0 - self.alpha) / self.alpha
    }
}

fn check_c_prox(c: f64) -> Result<()> {
    if !(c > 1.0 && c <= 2.0) {
        return Err(Error::param("c", format!("must lie in (1, 2], got {c}")));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::param("beta", format!("must lie in (0, 1], got {beta}")));
    }
    Ok(())
}

/// Certificate of a prox mapping on a space with modulus `c` (and `p = 2`).
pub fn prox_certificate(c: f64) -> Result<Certificate> {
    check_c_prox(c)?;
    let k = c * (c - 1.0);
    Certificate::new(
        k / (k + 2.0),
        (2.0 - c) / (c - 1.0),
        2.0,
        c,
        format!("prox(c={c})"),
    )
}

/// Certificate of `T1 o T0` from certificates of the factors.
pub fn compose_certificates(c0: &Certificate, c1: &Certificate, c: f64) -> Result<Certificate> {
    if c0.p != c1.p {
        return Err(Error::param("p", format!("factors disagree: {} vs {}", c0.p, c1.p)));
    }
    if !(c > 0.0 && c <= 2.0) {
        return Err(Error::param("c", format!("must lie in (0, 2], got {c}")));
    }
    let (a0, a1) = (c0.alpha, c1.alpha);
    let num = a0 + a1 - 2.0 * a0 * a1;
    let alpha = num / (0.5 * c * (1.0 - a0 - a1 + a0 * a1) + num);
    let epsilon = c0.epsilon + c1.epsilon + c0.epsilon * c1.epsilon;
    let scope = match (c0.scope, c1.scope) {
        (Scope::Asymptotic { delta: d0 }, Scope::Asymptotic { delta: d1 }) => {
            Scope::Asymptotic { delta: d0.min(d1) }
        }
        _ => Scope::AtFixedPoints,
    };
    Ok(Certificate {
        alpha,
        epsilon,
        p: c0.p,
        c,
        scope,
        provenance: format!("compose({}, {})", c1.provenance, c0.provenance),
    })
}

/// Left fold of [`compose_certificates`] over factors listed in the order
/// they are applied.
pub fn compose_all(certs: &[Certificate], c: f64) -> Result<Certificate> {
    let (first, rest) = certs
        .split_first()
        .ok_or_else(|| Error::param("certs", "need at least one certificate"))?;
    rest.iter()
        .try_fold(first.clone(), |acc, next| compose_certificates(&acc, next, c))
}

/// Certificate of the composition of two prox mappings.
pub fn prox_prox_certificate(c: f64) -> Result<Certificate> {
    check_c_prox(c)?;
    let cm1 = c - 1.0;
    Certificate::new(
        2.0 * cm1 / (2.0 * c - 1.0),
        1.0 / (cm1 * cm1) - 1.0,
        2.0,
        c,
        format!("prox_prox(c={c})"),
    )
}

/// Certificate of the relaxation `beta T (+) (1 - beta) Id`.
pub fn km_certificate(inner: &Certificate, beta: f64) -> Result<Certificate> {
    check_beta(beta)?;
    let a = inner.alpha;
    let bp = beta.powf(inner.p - 1.0);
    Ok(Certificate {
        alpha: a * bp / (a * bp - a * beta + 1.0),
        epsilon: inner.epsilon * beta,
        p: inner.p,
        c: inner.c,
        scope: inner.scope,
        provenance: format!("km({}, beta={beta})", inner.provenance),
    })
}

/// Certificate of a finite weighted barycenter of operators.
pub fn average_certificate(certs: &[Certificate]) -> Result<Certificate> {
    let first = certs
        .first()
        .ok_or_else(|| Error::param("certs", "need at least one certificate"))?;
    if certs.iter().any(|k| k.p != first.p || k.c != first.c) {
        return Err(Error::param("certs", "certificates must share p and c"));
    }
    let alpha = certs.iter().map(|k| k.alpha).fold(f64::MIN, f64::max);
    let epsilon = certs.iter().map(|k| k.epsilon).fold(f64::MIN, f64::max);
    let names: Vec<&str> = certs.iter().map(|k| k.provenance.as_str()).collect();
    Ok(Certificate {
        alpha,
        epsilon,
        p: first.p,
        c: first.c,
        scope: first.scope,
        provenance: format!("average({})", names.join(", ")),
    })
}

/// Certificate of the projected gradient step `P_C o (beta prox (+) (1-beta) Id)`.
pub fn projected_gradient_certificate(beta: f64, c: f64, p: f64) -> Result<Certificate> {
    let prox = prox_certificate(c)?;
    let mut inner = prox.clone();
    inner.p = p;
    let km = km_certificate(&inner, beta)?;
    Ok(Certificate {
        alpha: 1.0 / (0.5 * c * (1.0 - km.alpha) + 1.0),
        epsilon: prox.epsilon * beta,
        p,
        c,
        scope: Scope::AtFixedPoints,
        provenance: format!("projected_gradient(c={c}, beta={beta})"),
    })
}

/// Printed closed form for `prox o KM(prox, beta)`, kept separately so it can
/// be compared against the generic fold.
pub fn prox_km_prox_certificate(c: f64, beta: f64, p: f64) -> Result<Certificate> {
    let prox = prox_certificate(c)?;
    let mut inner = prox.clone();
    inner.p = p;
    let ab = km_certificate(&inner, beta)?.alpha;
    let ac = prox.alpha;
    let num = ab + ac - 2.0 * ab * ac;
    let ec = prox.epsilon;
    Ok(Certificate {
        alpha: num / (0.5 * c * (1.0 - ab - ac + ab * ac) + num),
        epsilon: (1.0 + beta) * ec + beta * ec * ec,
        p,
        c,
        scope: Scope::AtFixedPoints,
        provenance: format!("prox_km_prox(c={c}, beta={beta})"),
    })
}

/// Folded certificate of `N` cyclic projections in a space with `c = 2`.
pub fn cyclic_projections_certificate(n: usize) -> Result<CyclicCertificate> {
    if n < 2 {
        return Err(Error::param("n", "need at least two sets"));
    }
    let proj = Certificate::new(0.5, 0.0, 2.0, 2.0, "projector")?;
    let certs = vec![proj; n];
    let mut folded = compose_all(&certs, 2.0)?;
    folded.provenance = format!("cyclic_projections(n={n})");
    Ok(CyclicCertificate {
        folded,
        stated_alpha: (n as f64 - 1.0) / n as f64,
    })
}

/// Finite certificate at `c_delta` and its limit as the cap shrinks.
pub fn asymptotic_certificate(
    builder: AsymptoticBuilder,
    kappa: f64,
    delta: f64,
) -> Result<AsymptoticCertificate> {
    let c = local_convexity_constant(kappa, delta)?;
    let (finite, limit_alpha, p) = match builder {
        AsymptoticBuilder::Prox => (prox_certificate(c)?, 0.5, 2.0),
        AsymptoticBuilder::ProxProx => (prox_prox_certificate(c)?, 2.0 / 3.0, 2.0),
        AsymptoticBuilder::ProxAfter { alpha0, epsilon0 } => {
            let t0 = Certificate::new(alpha0, epsilon0, 2.0, c, format!("t0(alpha={alpha0})"))?;
            let finite = compose_certificates(&t0, &prox_certificate(c)?, c)?;
            (finite, 1.0 / (2.0 - alpha0), 2.0)
        }
        AsymptoticBuilder::Km { beta, p } => {
            let mut inner = prox_certificate(c)?;
            inner.p = p;
            (km_certificate(&inner, beta)?, km_limit(beta, p), p)
        }
        AsymptoticBuilder::ProjectedGradient { beta, p } => {
            check_beta(beta)?;
            (
                projected_gradient_certificate(beta, c, p)?,
                1.0 / (2.0 - km_limit(beta, p)),
                p,
            )
        }
    };
    let limit = Certificate {
        alpha: limit_alpha,
        epsilon: 0.0,
        p,
        c: 2.0,
        scope: Scope::Asymptotic { delta },
        provenance: format!("limit of {}", finite.provenance),
    };
    limit.validate()?;
    Ok(AsymptoticCertificate { finite, limit })
}

fn km_limit(beta: f64, p: f64) -> f64 {
    let bp = beta.powf(p - 1.0);
    bp / (bp - beta + 2.0)
}

/// Linear rate `gamma = (1 + epsilon - tau / mu^p)^(1/p)` predicted from a
/// certificate and a subregularity modulus `mu`.
pub fn rate_from_certificate(cert: &Certificate, mu: f64) -> Result<RatePrediction> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::param("mu", "must be positive and finite"));
    }
    let p = cert.p;
    let tau = cert.tau();
    let gamma_p = 1.0 + cert.epsilon - tau / mu.powf(p);
    let validity = if gamma_p <= 0.0 {
        RateValidity::BelowLowerBound
    } else if gamma_p >= 1.0 {
        RateValidity::AtOrAboveOne
    } else {
        RateValidity::Valid
    };
    let mu_lower = (tau / (1.0 + cert.epsilon)).powf(1.0 / p);
    let mu_upper = if cert.epsilon == 0.0 {
        f64::INFINITY
    } else {
        (tau / cert.epsilon).powf(1.0 / p)
    };
    Ok(RatePrediction {
        gamma: gamma_p.max(0.0).powf(1.0 / p),
        gamma_p,
        mu,
        tau,
        validity,
        mu_lower,
        mu_upper,
    })
}

/// Constant `a` of the a-priori estimate `d(x_k, x*) <= a * s_k(t0)`.
pub fn apriori_constant(cert: &Certificate) -> f64 {
    let a = cert.alpha;
    (2.0 * a * (1.0 + cert.epsilon) / (cert.c * (1.0 - a))).powf(1.0 / cert.p)
}

/// Certificate of an operator expression from the calculus, for a space with
/// modulus `c` and exponent `p`.
///
/// Projectors get `(1/2, 0)`, proxes the prox certificate, relaxations and
/// averages their rules. A projector applied after a relaxed prox uses the
/// projected-gradient rule; other compositions fold in application order.
pub fn derive_certificate(expr: &OperatorExpr, c: f64, p: f64) -> Result<Certificate> {
    match expr {
        OperatorExpr::Identity => Err(Error::Unsupported(
            "the identity has no finite firmness constant".into(),
        )),
        OperatorExpr::Project { .. } => Certificate::new(0.5, 0.0, p, c, "projector"),
        OperatorExpr::Prox { .. } => {
            if c == 2.0 {
                Certificate::new(0.5, 0.0, p, c, "prox(c=2)")
            } else {
                let mut k = prox_certificate(c)?;
                k.p = p;
                Ok(k)
            }
        }
        OperatorExpr::Km { inner, beta } => km_certificate(&derive_certificate(inner, c, p)?, *beta),
        OperatorExpr::Compose { factors } => {
            let factors: Vec<&OperatorExpr> = factors
                .iter()
                .filter(|f| !matches!(f, OperatorExpr::Identity))
                .collect();
            if let [OperatorExpr::Project { .. }, OperatorExpr::Km { inner, beta }] = factors.as_slice() {
                if matches!(**inner, OperatorExpr::Prox { .. }) {
                    return projected_gradient_certificate(*beta, c, p);
                }
            }
            let certs = factors
                .iter()
                .rev()
                .map(|f| derive_certificate(f, c, p))
                .collect::<Result<Vec<_>>>()?;
            compose_all(&certs, c)
        }
        OperatorExpr::Average { terms, .. } => {
            let certs = terms
                .iter()
                .map(|t| derive_certificate(&t.op, c, p))
                .collect::<Result<Vec<_>>>()?;
            average_certificate(&certs)
        }
    }
}

/// True when every prox in the expression is of an indicator, so the whole
/// operator is built from projectors.
pub fn is_projection_only(expr: &OperatorExpr) -> bool {
    match expr {
        OperatorExpr::Identity | OperatorExpr::Project { .. } => true,
        OperatorExpr::Prox { f, .. } => matches!(f, ConvexFunction::Indicator { .. }),
        OperatorExpr::Km { inner, .. } => is_projection_only(inner),
        OperatorExpr::Compose { factors } => factors.iter().all(is_projection_only),
        OperatorExpr::Average { terms, .. } => terms.iter().all(|t| is_projection_only(&t.op)),
    }
}
