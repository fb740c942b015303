//! Stable text artifacts: every float is rounded to 9 significant digits so
//! identical runs give byte-identical files.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::pipeline::scan::{AlphaBetaReport, ScanReport};

pub const SIGNIFICANT_DIGITS: usize = 9;

/// `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses")
}

/// Shortest text of [`round_sig`]`(x)`; exponent form outside `[1e-4, 1e9)`.
pub fn fmt_sig(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        "0".into()
    } else if (1e-4..1e9).contains(&r.abs()) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            if let Some(num) = serde_json::Number::from_f64(x) {
                *n = num;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded.
pub fn to_json_rounded<S: Serialize>(value: &S) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

/// Columns `parameter,prediction,ground_truth_known,ground_truth`; the last
/// is empty where the truth is unknown.
pub fn scan_csv(report: &ScanReport) -> String {
    let mut out = String::from("parameter,prediction,ground_truth_known,ground_truth\n");
    for ((p, pred), truth) in report.grid.iter().zip(&report.predictions).zip(&report.ground_truth) {
        let truth_text = truth.map(|t| t.to_string()).unwrap_or_default();
        writeln!(out, "{},{pred},{},{truth_text}", fmt_sig(*p), truth.is_some()).expect("write to String");
    }
    out
}

/// One row per grid point of the α–β map.
pub fn alpha_beta_csv(report: &AlphaBetaReport) -> String {
    let mut out = String::from("alpha,beta,output,prediction,vrho_detected\n");
    for p in &report.points {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_sig(p.alpha),
            fmt_sig(p.beta),
            fmt_sig(p.output),
            p.prediction,
            p.vrho_detected
        )
        .expect("write to String");
    }
    out
}
