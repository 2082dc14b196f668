//! CSV and JSON emission. Floats use the shortest round-trip decimal form so
//! identical runs produce identical bytes.

use serde::Serialize;

use super::IterationTrace;
use crate::spaces::ModelSpace;

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        ryu::Buffer::new().format_finite(v).to_string()
    }
}

/// Columns `k, x0..x{n-1}, residual, dist_to_fix, ratio`. The distance column
/// falls back to the distance to the final iterate when no fixed set is known;
/// the ratio is blank on the first row and once distances hit the floor.
pub fn trace_csv(space: &ModelSpace, trace: &IterationTrace) -> String {
    let n = trace.iterates.first().map_or(0, |x| x.dim());
    let mut out = String::from("k");
    for i in 0..n {
        out.push_str(&format!(",x{i}"));
    }
    out.push_str(",residual,dist_to_fix,ratio\n");
    let (d, _) = trace.analysis_distances(space);
    for (k, x) in trace.iterates.iter().enumerate() {
        out.push_str(&k.to_string());
        for v in &x.0 {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push(',');
        out.push_str(&fmt_f64(trace.residuals[k]));
        out.push(',');
        out.push_str(&fmt_f64(d[k]));
        out.push(',');
        if k > 0 && d[k - 1] > super::RATIO_FLOOR && d[k].is_finite() {
            out.push_str(&fmt_f64(d[k] / d[k - 1]));
        }
        out.push('\n');
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}
