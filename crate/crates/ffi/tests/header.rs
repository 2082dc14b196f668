use std::path::{Path, PathBuf};
use std::process::Command;

fn crate_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn header() -> String {
    std::fs::read_to_string(crate_dir().join("include/geoprox.h")).expect("generated header")
}

#[test]
fn header_declares_the_api() {
    let h = header();
    for sym in [
        "typedef struct GpSpace GpSpace;",
        "typedef struct GpOperator GpOperator;",
        "GP_STATUS_OK = 0",
        "GP_STATUS_DOMAIN_ESCAPE = 3",
        "gp_last_error(void)",
        "gp_space_sphere_cap(",
        "gp_operator_from_json(",
        "gp_run_config(",
        "gp_verify(",
    ] {
        assert!(h.contains(sym), "missing {sym}");
    }
}

fn target_dir() -> PathBuf {
    // tests/<name>-<hash> lives in target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = target_dir().join("libgeoprox_ffi.a");
    if !lib.exists() {
        panic!("{} not built", lib.display());
    }
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <math.h>
#include <stdio.h>
#include "geoprox.h"

int main(void) {
    GpSpace *s = NULL;
    if (gp_space_euclidean(2, &s) != GP_STATUS_OK) return 10;
    double x[2] = {3.0, 4.0}, y[2];
    GpOperator *op = NULL;
    const char *json = "{\"type\": \"project\", \"set\": {\"type\": \"ball\", \"center\": [0, 0], \"radius\": 1}}";
    if (gp_operator_from_json(s, json, &op) != GP_STATUS_OK) return 11;
    if (gp_operator_apply(op, x, y) != GP_STATUS_OK) return 12;
    if (fabs(y[0] - 0.6) > 1e-12 || fabs(y[1] - 0.8) > 1e-12) return 13;
    if (gp_space_euclidean(0, NULL) != GP_STATUS_INVALID_ARGUMENT) return 14;
    printf("%s\n", gp_last_error());
    gp_operator_free(op);
    gp_space_free(s);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = tmp.path().join("smoke");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler");
    assert!(status.success(), "compile failed");
    let out = Command::new(&exe).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!out.stdout.is_empty());
}
