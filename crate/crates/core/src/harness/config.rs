//! Experiment configuration: JSON ingestion, name resolution and validation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{ConvexFunction, ConvexSet, ProxParams};
use crate::operators::{FixedSetDescriptor, FixedSetTerm, OperatorExpr};
use crate::regularity::SampleSpec;
use crate::spaces::{ModelSpace, Point, SpaceKind};

use super::{DEFAULT_MAX_ITER, DEFAULT_TOL};

pub const SCHEMA_VERSION: &str = "geoprox-config/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub space: SpaceKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sets: BTreeMap<String, ConvexSet>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub functions: BTreeMap<String, ConvexFunction>,
    pub operator: OperatorSpec,
    pub initial_point: Point,
    #[serde(default)]
    pub stop: StopSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SampleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_set: Option<FixedSetSpec>,
    #[serde(default)]
    pub certificate: CertificateSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

impl Default for StopSpec {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "default_trace")]
    pub trace: String,
    #[serde(default = "default_report")]
    pub report: String,
}

fn default_trace() -> String {
    "trace.csv".into()
}

fn default_report() -> String {
    "report.json".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            trace: default_trace(),
            report: default_report(),
        }
    }
}

/// A library entry given by name or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ref<T> {
    Name(String),
    Inline(T),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Identity,
    Prox {
        f: Ref<ConvexFunction>,
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
    },
    Project {
        set: Ref<ConvexSet>,
    },
    Km {
        inner: Box<OperatorSpec>,
        beta: f64,
    },
    /// Applied right to left.
    Compose {
        factors: Vec<OperatorSpec>,
    },
    Average {
        terms: Vec<TermSpec>,
        #[serde(default = "default_p")]
        p: f64,
    },
}

fn default_p() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub op: OperatorSpec,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FixedSetSpec {
    KnownPoint { point: Point },
    KnownSet { terms: Vec<FixedTermSpec> },
    Unknown,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FixedTermSpec {
    Set { set: Ref<ConvexSet> },
    Argmin { f: Ref<ConvexFunction> },
}

/// Where the firmness certificate used for rate prediction comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CertificateSpec {
    /// Derived from the operator expression.
    #[default]
    Calculus,
    Explicit { alpha: f64, epsilon: f64 },
    /// Sampled violation over a grid of constants; the constant giving the
    /// smallest predicted rate is kept.
    Empirical {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alphas: Option<Vec<f64>>,
    },
}

/// A validated, name-resolved experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub space: ModelSpace,
    pub operator: OperatorExpr,
    pub x0: Point,
    pub fixed_set: Option<FixedSetDescriptor>,
    pub sampling: Option<SampleSpec>,
    pub stop: StopSpec,
    pub certificate: CertificateSpec,
}

impl ExperimentConfig {
    /// Parse JSON text. Errors carry the field path and source position.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::config(
                if path == "." { "<root>".to_string() } else { path },
                format!("line {} column {}: {}", inner.line(), inner.column(), inner),
            )
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    /// Resolve names and validate every part against the space.
    pub fn resolve(&self) -> Result<Experiment> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::config(
                "schema",
                format!("expected \"{SCHEMA_VERSION}\", found \"{}\"", self.schema),
            ));
        }
        let space = ModelSpace::from_kind(self.space.clone()).map_err(|e| at("space", e))?;
        for (name, set) in &self.sets {
            set.validate(&space).map_err(|e| at(&format!("sets.{name}"), e))?;
        }
        for (name, f) in &self.functions {
            f.validate(&space).map_err(|e| at(&format!("functions.{name}"), e))?;
        }
        let operator = self.resolve_op(&space, &self.operator, "operator")?;
        operator.validate(&space).map_err(|e| at("operator", e))?;
        space
            .check(&self.initial_point)
            .map_err(|e| at("initial_point", e))?;
        let fixed_set = match &self.fixed_set {
            None => None,
            Some(spec) => {
                let d = self.resolve_fixed(spec)?;
                d.validate(&space).map_err(|e| at("fixed_set", e))?;
                Some(d)
            }
        };
        if let Some(s) = &self.sampling {
            s.validate(&space).map_err(|e| at("sampling", e))?;
        }
        if !(self.stop.tol >= 0.0 && self.stop.tol.is_finite()) {
            return Err(Error::config("stop.tol", "must be finite and nonnegative"));
        }
        match &self.certificate {
            CertificateSpec::Explicit { alpha, epsilon } => {
                crate::certificates::Certificate::new(*alpha, *epsilon, space.p(), space.c(), "explicit")
                    .map_err(|e| at("certificate", e))?;
            }
            CertificateSpec::Empirical { alphas: Some(a) } => {
                if a.is_empty() || a.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
                    return Err(Error::config("certificate.alphas", "need values in (0, 1)"));
                }
            }
            _ => {}
        }
        Ok(Experiment {
            config: self.clone(),
            space,
            operator,
            x0: self.initial_point.clone(),
            fixed_set,
            sampling: self.sampling.clone(),
            stop: self.stop,
            certificate: self.certificate.clone(),
        })
    }

    fn set(&self, r: &Ref<ConvexSet>, path: &str) -> Result<ConvexSet> {
        match r {
            Ref::Inline(s) => Ok(s.clone()),
            Ref::Name(n) => self
                .sets
                .get(n)
                .cloned()
                .ok_or_else(|| Error::config(path, format!("unknown set \"{n}\""))),
        }
    }

    fn function(&self, r: &Ref<ConvexFunction>, path: &str) -> Result<ConvexFunction> {
        match r {
            Ref::Inline(f) => Ok(f.clone()),
            Ref::Name(n) => self
                .functions
                .get(n)
                .cloned()
                .ok_or_else(|| Error::config(path, format!("unknown function \"{n}\""))),
        }
    }

    fn resolve_op(&self, space: &ModelSpace, op: &OperatorSpec, path: &str) -> Result<OperatorExpr> {
        let out = match op {
            OperatorSpec::Identity => OperatorExpr::Identity,
            OperatorSpec::Prox { f, lambda, p } => {
                let f = self.function(f, &format!("{path}.f"))?;
                f.validate(space).map_err(|e| at(&format!("{path}.f"), e))?;
                OperatorExpr::prox(f, ProxParams::new(*lambda, p.unwrap_or(space.p())))
            }
            OperatorSpec::Project { set } => {
                let s = self.set(set, &format!("{path}.set"))?;
                s.validate(space).map_err(|e| at(&format!("{path}.set"), e))?;
                OperatorExpr::project(s)
            }
            OperatorSpec::Km { inner, beta } => {
                OperatorExpr::km(self.resolve_op(space, inner, &format!("{path}.inner"))?, *beta)
            }
            OperatorSpec::Compose { factors } => OperatorExpr::compose(
                factors
                    .iter()
                    .enumerate()
                    .map(|(i, f)| self.resolve_op(space, f, &format!("{path}.factors[{i}]")))
                    .collect::<Result<_>>()?,
            ),
            OperatorSpec::Average { terms, p } => OperatorExpr::average(
                terms
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        Ok((self.resolve_op(space, &t.op, &format!("{path}.terms[{i}].op"))?, t.weight))
                    })
                    .collect::<Result<_>>()?,
                *p,
            ),
        };
        out.validate(space).map_err(|e| at(path, e))?;
        Ok(out)
    }

    fn resolve_fixed(&self, spec: &FixedSetSpec) -> Result<FixedSetDescriptor> {
        Ok(match spec {
            FixedSetSpec::KnownPoint { point } => FixedSetDescriptor::KnownPoint { point: point.clone() },
            FixedSetSpec::KnownSet { terms } => FixedSetDescriptor::KnownSet {
                terms: terms
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        let path = format!("fixed_set.terms[{i}]");
                        Ok(match t {
                            FixedTermSpec::Set { set } => FixedSetTerm::Set {
                                set: self.set(set, &path)?,
                            },
                            FixedTermSpec::Argmin { f } => FixedSetTerm::Argmin {
                                f: self.function(f, &path)?,
                            },
                        })
                    })
                    .collect::<Result<_>>()?,
            },
            FixedSetSpec::Unknown => FixedSetDescriptor::Unknown,
            FixedSetSpec::Empty => FixedSetDescriptor::Empty,
        })
    }
}

/// Attach a config path to a library error, keeping config errors as they are.
fn at(path: &str, e: Error) -> Error {
    match e {
        Error::Config { .. } => e,
        other => Error::config(path, other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": "geoprox-config/1",
        "space": {"kind": "euclidean", "dim": 2},
        "sets": {"A": {"type": "ball", "center": [0, 0], "radius": 1}},
        "operator": {"type": "project", "set": "A"},
        "initial_point": [3, 4]
    }"#;

    #[test]
    fn minimal_config_resolves() {
        let c = ExperimentConfig::from_json_str(MINIMAL).unwrap();
        assert_eq!(c.stop, StopSpec::default());
        assert_eq!(c.certificate, CertificateSpec::Calculus);
        let e = c.resolve().unwrap();
        assert_eq!(e.operator, OperatorExpr::project(ConvexSet::ball([0.0, 0.0], 1.0)));
        // echo round-trips
        assert_eq!(ExperimentConfig::from_json_str(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn unknown_field_reports_path_and_line() {
        let bad = MINIMAL.replace("\"radius\": 1", "\"radius\": 1, \"colour\": 2");
        match ExperimentConfig::from_json_str(&bad) {
            Err(Error::Config { path, reason }) => {
                assert!(path.starts_with("sets.A"), "{path}");
                assert!(reason.contains("line 4"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_carry_paths() {
        let bad = MINIMAL.replace("\"set\": \"A\"", "\"set\": \"B\"");
        let c = ExperimentConfig::from_json_str(&bad).unwrap();
        assert!(matches!(c.resolve(), Err(Error::Config { path, .. }) if path == "operator.set"));
        let bad = MINIMAL.replace("geoprox-config/1", "geoprox-config/0");
        let c = ExperimentConfig::from_json_str(&bad).unwrap();
        assert!(matches!(c.resolve(), Err(Error::Config { path, .. }) if path == "schema"));
        let bad = MINIMAL.replace("[3, 4]", "[3, 4, 5]");
        let c = ExperimentConfig::from_json_str(&bad).unwrap();
        assert!(matches!(c.resolve(), Err(Error::Config { path, .. }) if path == "initial_point"));
    }
}
