//! C ABI over `geoprox`.
//!
//! Spaces and operators are opaque handles created by `gp_*_new`/`gp_*_from_json`
//! and released with the matching `gp_*_free`. Every fallible call returns a
//! [`GpStatus`]; on failure `gp_last_error` holds a message for the calling
//! thread. Strings returned through out-parameters are owned by the caller and
//! must be released with [`gp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use geoprox::certificates::{derive_certificate, rate_from_certificate};
use geoprox::harness::config::ExperimentConfig;
use geoprox::harness::experiment::run_experiment;
use geoprox::harness::output::to_json;
use geoprox::harness::verify::verify;
use geoprox::operators::barycenter;
use geoprox::spaces::local_convexity_constant;
use geoprox::{Certificate, Error, Mapping, ModelSpace, OperatorExpr, Point, RateValidity, SpaceKind};

/// Result codes. The first four match the exit codes of the command-line tool.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpStatus {
    Ok = 0,
    VerificationFailed = 1,
    Config = 2,
    DomainEscape = 3,
    InvalidArgument = 4,
    Unsupported = 5,
    Numeric = 6,
    Internal = 7,
}

/// Validity of a predicted rate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpRateValidity {
    Valid = 0,
    BelowLowerBound = 1,
    AtOrAboveOne = 2,
}

/// A model space: Euclidean space or a spherical cap.
pub struct GpSpace {
    space: ModelSpace,
}

/// An operator bound to the space it was built for.
pub struct GpOperator {
    space: ModelSpace,
    op: OperatorExpr,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

struct Failure(GpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config { .. } => GpStatus::Config,
            Error::OutsideDomain(_) | Error::Antipodal => GpStatus::DomainEscape,
            Error::Unsupported(_) => GpStatus::Unsupported,
            Error::NonFinite(_) | Error::InsufficientTrace(_) => GpStatus::Numeric,
            _ => GpStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(GpStatus::InvalidArgument, msg.to_string())
}

/// Run `f`, recording failures and containing panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GpStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(invalid(&format!("{name} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| invalid(&format!("{name} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(invalid(&format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| invalid(&format!("{name} is null")))
}

unsafe fn space_arg<'a>(s: *const GpSpace) -> Result<&'a ModelSpace, Failure> {
    s.as_ref()
        .map(|s| &s.space)
        .ok_or_else(|| invalid("space is null"))
}

fn point_of(space: &ModelSpace, coords: &[f64]) -> Result<Point, Failure> {
    let p = Point::new(coords.to_vec());
    space.check(&p)?;
    Ok(p)
}

fn write_point(p: &Point, out: *mut f64) {
    // SAFETY: callers pass a buffer of the ambient dimension.
    unsafe { ptr::copy_nonoverlapping(p.0.as_ptr(), out, p.0.len()) }
}

fn into_c_string(s: String, out: *mut *mut c_char) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(GpStatus::Internal, "interior NUL".into()))?;
    // SAFETY: `out` was checked non-null by the caller.
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn gp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Euclidean space of dimension `dim`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gp_space_euclidean(dim: usize, out: *mut *mut GpSpace) -> GpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let space = ModelSpace::euclidean(dim)?;
        *out = Box::into_raw(Box::new(GpSpace { space }));
        Ok(())
    })
}

/// Cap of intrinsic radius `radius` about `center` (length `dim + 1`) on the
/// sphere of curvature `curvature`.
///
/// # Safety
/// `center` must point to `dim + 1` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gp_space_sphere_cap(
    dim: usize,
    curvature: f64,
    center: *const f64,
    radius: f64,
    out: *mut *mut GpSpace,
) -> GpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let c = slice_arg(center, dim + 1, "center")?;
        let space = ModelSpace::sphere_cap(dim, curvature, Point::new(c.to_vec()), radius)?;
        *out = Box::into_raw(Box::new(GpSpace { space }));
        Ok(())
    })
}

/// Space from its JSON description, as in the `space` field of a config.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gp_space_from_json(json: *const c_char, out: *mut *mut GpSpace) -> GpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let kind: SpaceKind = serde_json::from_str(str_arg(json, "json")?)
            .map_err(|e| Failure(GpStatus::Config, format!("space: {e}")))?;
        let space = ModelSpace::from_kind(kind)?;
        *out = Box::into_raw(Box::new(GpSpace { space }));
        Ok(())
    })
}

/// # Safety
/// `space` must come from a `gp_space_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn gp_space_free(space: *mut GpSpace) {
    if !space.is_null() {
        drop(Box::from_raw(space));
    }
}

/// Length of coordinate vectors for points of `space`, or 0 for null.
///
/// # Safety
/// `space` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gp_space_ambient_dim(space: *const GpSpace) -> usize {
    space.as_ref().map_or(0, |s| s.space.ambient_dim())
}

/// Uniform convexity modulus `c` of the space.
///
/// # Safety
/// `space` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gp_space_modulus(space: *const GpSpace, out: *mut f64) -> GpStatus {
    guard(|| {
        *out_arg(out, "out")? = space_arg(space)?.c();
        Ok(())
    })
}

/// Geodesic distance between two points of ambient length.
///
/// # Safety
/// `x` and `y` must point to `gp_space_ambient_dim(space)` values.
#[no_mangle]
pub unsafe extern "C" fn gp_distance(
    space: *const GpSpace,
    x: *const f64,
    y: *const f64,
    out: *mut f64,
) -> GpStatus {
    guard(|| {
        let s = space_arg(space)?;
        let n = s.ambient_dim();
        let (x, y) = (
            point_of(s, slice_arg(x, n, "x")?)?,
            point_of(s, slice_arg(y, n, "y")?)?,
        );
        *out_arg(out, "out")? = s.distance(&x, &y)?;
        Ok(())
    })
}

/// Point at fraction `t` along the geodesic from `x` to `y`.
///
/// # Safety
/// `x`, `y` and `out` must each hold `gp_space_ambient_dim(space)` values.
#[no_mangle]
pub unsafe extern "C" fn gp_geodesic(
    space: *const GpSpace,
    x: *const f64,
    y: *const f64,
    t: f64,
    out: *mut f64,
) -> GpStatus {
    guard(|| {
        let s = space_arg(space)?;
        let n = s.ambient_dim();
        let (x, y) = (
            point_of(s, slice_arg(x, n, "x")?)?,
            point_of(s, slice_arg(y, n, "y")?)?,
        );
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        write_point(&s.geodesic(&x, &y, t)?, out);
        Ok(())
    })
}

/// Convexity modulus of a cap of radius `delta` on the sphere of curvature
/// `kappa`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gp_local_convexity_constant(kappa: f64, delta: f64, out: *mut f64) -> GpStatus {
    guard(|| {
        *out_arg(out, "out")? = local_convexity_constant(kappa, delta)?;
        Ok(())
    })
}

/// Operator from JSON with sets and functions given inline, for example
/// `{"type": "project", "set": {"type": "ball", "center": [0, 0], "radius": 1}}`.
///
/// # Safety
/// `space` must be live; `json` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn gp_operator_from_json(
    space: *const GpSpace,
    json: *const c_char,
    out: *mut *mut GpOperator,
) -> GpStatus {
    guard(|| {
        let s = space_arg(space)?;
        let out = out_arg(out, "out")?;
        let op: OperatorExpr = serde_json::from_str(str_arg(json, "json")?)
            .map_err(|e| Failure(GpStatus::Config, format!("operator: {e}")))?;
        op.validate(s)?;
        *out = Box::into_raw(Box::new(GpOperator { space: s.clone(), op }));
        Ok(())
    })
}

/// # Safety
/// `op` must come from [`gp_operator_from_json`] or be null.
#[no_mangle]
pub unsafe extern "C" fn gp_operator_free(op: *mut GpOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Apply the operator to `x`.
///
/// # Safety
/// `x` and `out` must hold the ambient dimension of the operator's space.
#[no_mangle]
pub unsafe extern "C" fn gp_operator_apply(op: *const GpOperator, x: *const f64, out: *mut f64) -> GpStatus {
    guard(|| {
        let o = op.as_ref().ok_or_else(|| invalid("op is null"))?;
        let x = point_of(&o.space, slice_arg(x, o.space.ambient_dim(), "x")?)?;
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        write_point(&o.op.apply(&o.space, &x)?, out);
        Ok(())
    })
}

/// Firmness constants `(alpha, epsilon)` of the operator from the calculus.
///
/// # Safety
/// `op` must be live; outputs valid.
#[no_mangle]
pub unsafe extern "C" fn gp_operator_certificate(
    op: *const GpOperator,
    alpha: *mut f64,
    epsilon: *mut f64,
) -> GpStatus {
    guard(|| {
        let o = op.as_ref().ok_or_else(|| invalid("op is null"))?;
        let cert = derive_certificate(&o.op, o.space.c(), o.space.p())?;
        *out_arg(alpha, "alpha")? = cert.alpha;
        *out_arg(epsilon, "epsilon")? = cert.epsilon;
        Ok(())
    })
}

/// Linear rate predicted by `(alpha, epsilon)` and modulus `mu` in a space
/// with exponent `p` and modulus `c`.
///
/// # Safety
/// Outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn gp_rate(
    alpha: f64,
    epsilon: f64,
    p: f64,
    c: f64,
    mu: f64,
    gamma: *mut f64,
    validity: *mut GpRateValidity,
) -> GpStatus {
    guard(|| {
        let cert = Certificate::new(alpha, epsilon, p, c, "ffi")?;
        let r = rate_from_certificate(&cert, mu)?;
        *out_arg(gamma, "gamma")? = r.gamma;
        *out_arg(validity, "validity")? = match r.validity {
            RateValidity::Valid => GpRateValidity::Valid,
            RateValidity::BelowLowerBound => GpRateValidity::BelowLowerBound,
            RateValidity::AtOrAboveOne => GpRateValidity::AtOrAboveOne,
        };
        Ok(())
    })
}

/// Weighted `p`-barycenter of `count` points stored row by row in `points`.
///
/// # Safety
/// `points` must hold `count * ambient_dim` values, `weights` `count`
/// values and `out` `ambient_dim` values.
#[no_mangle]
pub unsafe extern "C" fn gp_barycenter(
    space: *const GpSpace,
    points: *const f64,
    count: usize,
    weights: *const f64,
    p: f64,
    out: *mut f64,
) -> GpStatus {
    guard(|| {
        let s = space_arg(space)?;
        let n = s.ambient_dim();
        let flat = slice_arg(points, count * n, "points")?;
        let pts = flat
            .chunks(n.max(1))
            .map(|c| point_of(s, c))
            .collect::<Result<Vec<_>, _>>()?;
        let w = slice_arg(weights, count, "weights")?;
        if out.is_null() {
            return Err(invalid("out is null"));
        }
        write_point(&barycenter(s, &pts, w, p)?, out);
        Ok(())
    })
}

/// Run an experiment config (JSON text) and return the report JSON. A
/// negative `seed` keeps the seed of the config. Returns
/// `GP_STATUS_VERIFICATION_FAILED` or `GP_STATUS_DOMAIN_ESCAPE` with the
/// report still written when the run completes but does not pass.
///
/// # Safety
/// `config` NUL-terminated; `report` valid.
#[no_mangle]
pub unsafe extern "C" fn gp_run_config(config: *const c_char, seed: i64, report: *mut *mut c_char) -> GpStatus {
    let mut status = GpStatus::Ok;
    let outer = guard(|| {
        let text = str_arg(config, "config")?;
        if report.is_null() {
            return Err(invalid("report is null"));
        }
        let exp = ExperimentConfig::from_json_str(text)?.resolve()?;
        let out = run_experiment(&exp, u64::try_from(seed).ok())?;
        into_c_string(to_json(&out.report), report)?;
        if out.escaped() {
            status = GpStatus::DomainEscape;
            set_error("an iterate left the domain");
        } else if !out.report.pass {
            status = GpStatus::VerificationFailed;
            set_error("verification failed");
        }
        Ok(())
    });
    if outer == GpStatus::Ok {
        status
    } else {
        outer
    }
}

/// Run the invariant suites and return the report JSON.
///
/// # Safety
/// `report` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gp_verify(seed: u64, report: *mut *mut c_char) -> GpStatus {
    let mut pass = true;
    let outer = guard(|| {
        if report.is_null() {
            return Err(invalid("report is null"));
        }
        let r = verify(seed);
        pass = r.pass;
        into_c_string(to_json(&r), report)
    });
    match (outer, pass) {
        (GpStatus::Ok, false) => {
            set_error("verification failed");
            GpStatus::VerificationFailed
        }
        (s, _) => s,
    }
}
