use std::ffi::{CStr, CString};
use std::ptr;

use geoprox_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(gp_last_error()) }.to_string_lossy().into_owned()
}

fn take(s: *mut std::ffi::c_char) -> String {
    let out = unsafe { CStr::from_ptr(s) }.to_string_lossy().into_owned();
    unsafe { gp_string_free(s) };
    out
}

fn euclidean(dim: usize) -> *mut GpSpace {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { gp_space_euclidean(dim, &mut s) }, GpStatus::Ok);
    s
}

#[test]
fn distance_and_geodesic() {
    let s = euclidean(2);
    let (x, y) = ([0.0, 0.0], [3.0, 4.0]);
    let mut d = 0.0;
    assert_eq!(unsafe { gp_distance(s, x.as_ptr(), y.as_ptr(), &mut d) }, GpStatus::Ok);
    assert_eq!(d, 5.0);
    let mut m = [0.0; 2];
    assert_eq!(unsafe { gp_geodesic(s, x.as_ptr(), y.as_ptr(), 0.5, m.as_mut_ptr()) }, GpStatus::Ok);
    assert_eq!(m, [1.5, 2.0]);
    assert_eq!(unsafe { gp_space_ambient_dim(s) }, 2);
    let mut c = 0.0;
    assert_eq!(unsafe { gp_space_modulus(s, &mut c) }, GpStatus::Ok);
    assert_eq!(c, 2.0);
    unsafe { gp_space_free(s) };
}

#[test]
fn cap_constant_and_domain_escape() {
    let mut c = 0.0;
    let delta = std::f64::consts::PI / 8.0;
    assert_eq!(unsafe { gp_local_convexity_constant(1.0, delta, &mut c) }, GpStatus::Ok);
    assert!((c - std::f64::consts::FRAC_PI_2).abs() < 1e-12);

    let mut s = ptr::null_mut();
    let center = [0.0, 0.0, 1.0];
    assert_eq!(unsafe { gp_space_sphere_cap(2, 1.0, center.as_ptr(), delta, &mut s) }, GpStatus::Ok);
    let inside = [0.0, 0.0, 1.0];
    let outside = [1.0, 0.0, 0.0];
    let mut d = 0.0;
    let st = unsafe { gp_distance(s, inside.as_ptr(), outside.as_ptr(), &mut d) };
    assert_eq!(st, GpStatus::DomainEscape, "{}", last_error());
    assert!(!last_error().is_empty());
    unsafe { gp_space_free(s) };
}

#[test]
fn operator_apply_and_certificate() {
    let s = euclidean(2);
    let json = CString::new(r#"{"type": "project", "set": {"type": "ball", "center": [0, 0], "radius": 1}}"#).unwrap();
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { gp_operator_from_json(s, json.as_ptr(), &mut op) }, GpStatus::Ok, "{}", last_error());
    let x = [3.0, 4.0];
    let mut y = [0.0; 2];
    assert_eq!(unsafe { gp_operator_apply(op, x.as_ptr(), y.as_mut_ptr()) }, GpStatus::Ok);
    assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);
    let (mut a, mut e) = (0.0, 0.0);
    assert_eq!(unsafe { gp_operator_certificate(op, &mut a, &mut e) }, GpStatus::Ok);
    assert_eq!((a, e), (0.5, 0.0));
    unsafe { gp_operator_free(op) };

    let bad = CString::new(r#"{"type": "project", "set": "nowhere"}"#).unwrap();
    let mut op = ptr::null_mut();
    assert_ne!(unsafe { gp_operator_from_json(s, bad.as_ptr(), &mut op) }, GpStatus::Ok);
    assert!(op.is_null());
    unsafe { gp_space_free(s) };
}

#[test]
fn rate_and_barycenter() {
    let mut g = 0.0;
    let mut v = GpRateValidity::AtOrAboveOne;
    assert_eq!(unsafe { gp_rate(0.5, 0.0, 2.0, 2.0, 2.0, &mut g, &mut v) }, GpStatus::Ok);
    assert!((g - 0.75f64.sqrt()).abs() < 1e-12);
    assert_eq!(v, GpRateValidity::Valid);
    assert_eq!(unsafe { gp_rate(1.5, 0.0, 2.0, 2.0, 2.0, &mut g, &mut v) }, GpStatus::InvalidArgument);

    let s = euclidean(1);
    let pts = [0.0, 1.0];
    let w = [0.9, 0.1];
    let mut z = [0.0];
    assert_eq!(unsafe { gp_barycenter(s, pts.as_ptr(), 2, w.as_ptr(), 3.0, z.as_mut_ptr()) }, GpStatus::Ok);
    assert!((z[0] - 0.25).abs() < 1e-9);
    unsafe { gp_space_free(s) };
}

#[test]
fn space_from_json_reports_config_errors() {
    let good = CString::new(r#"{"kind": "euclidean", "dim": 3}"#).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { gp_space_from_json(good.as_ptr(), &mut s) }, GpStatus::Ok);
    assert_eq!(unsafe { gp_space_ambient_dim(s) }, 3);
    unsafe { gp_space_free(s) };
    let bad = CString::new(r#"{"kind": "torus"}"#).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { gp_space_from_json(bad.as_ptr(), &mut s) }, GpStatus::Config);
    assert!(last_error().contains("space"));
}

#[test]
fn run_config_matches_core() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/two_balls.json")).unwrap();
    let cfg = CString::new(text).unwrap();
    let mut a = ptr::null_mut();
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { gp_run_config(cfg.as_ptr(), 4, &mut a) }, GpStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { gp_run_config(cfg.as_ptr(), 4, &mut b) }, GpStatus::Ok);
    let (a, b) = (take(a), take(b));
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["schema"], "geoprox-report/1");
    assert_eq!(v["seed"], 4);

    let broken = CString::new("{\"schema\": \"geoprox-config/1\"}").unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { gp_run_config(broken.as_ptr(), -1, &mut r) }, GpStatus::Config);
    assert!(r.is_null());
}

#[test]
fn null_arguments_are_rejected() {
    let mut d = 0.0;
    let x = [0.0];
    assert_eq!(
        unsafe { gp_distance(ptr::null(), x.as_ptr(), x.as_ptr(), &mut d) },
        GpStatus::InvalidArgument
    );
    assert_eq!(unsafe { gp_space_euclidean(2, ptr::null_mut()) }, GpStatus::InvalidArgument);
    assert_eq!(unsafe { gp_space_ambient_dim(ptr::null()) }, 0);
    unsafe {
        gp_space_free(ptr::null_mut());
        gp_operator_free(ptr::null_mut());
        gp_string_free(ptr::null_mut());
    }
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(gp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
