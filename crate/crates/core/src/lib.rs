//! Proximal fixed-point algorithms on uniformly convex model spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`spaces`]: Euclidean space and small spherical caps with exact geodesics.
//! * [`functions`]: radial functions and indicators of convex sets with their
//!   prox mappings and projectors.
//! * [`operators`]: operator expressions built from proxes, projectors,
//!   relaxations, compositions and barycentric averages.
//! * [`certificates`]: closed-form firmness constants and predicted rates.
//! * [`regularity`]: sampled estimation of violations and subregularity moduli.
//! * [`harness`]: iteration, rate analysis, presets, config files and the CLI.

pub mod certificates;
pub mod error;
pub mod functions;
pub mod harness;
pub mod json_float;
pub mod operators;
pub mod regularity;
mod scalar;
pub mod spaces;
mod vecops;

pub use certificates::{Certificate, RatePrediction, RateValidity, Scope};
pub use error::{Error, Result};
pub use functions::{ConvexFunction, ConvexSet, Profile, ProxParams};
pub use operators::{FixedSetDescriptor, FixedSetTerm, Mapping, OperatorExpr};
pub use spaces::{GeodesicSegment, ModelSpace, Point, SpaceKind};
