//! CSV report layouts. Every report starts with a `# seed=<n> version=<v>` line.

use std::fmt::Write as _;

use crate::io::fmt_f64;
use crate::stats::sweep::SweepResult;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn header_line(seed: u64) -> String {
    format!("# seed={seed} version={TOOL_VERSION}\n")
}

pub fn sweep_csv(result: &SweepResult, seed: u64) -> String {
    let mut out = header_line(seed);
    out.push_str("gender,variance,components,ks\n");
    for c in &result.cells {
        let ks = match &c.ks {
            Ok(v) => fmt_f64(*v),
            Err(_) => "nan".to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{}",
            c.gender,
            c.retained_variance_target,
            c.n_components,
            ks
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub scenario: String,
    pub strategy: String,
    pub gender: String,
    pub eer: f64,
    pub cllr: f64,
    pub cllr_min: f64,
    pub n_genuine: usize,
    pub n_impostor: usize,
}

pub fn metrics_csv(rows: &[MetricsRow], seed: u64) -> String {
    let mut out = header_line(seed);
    out.push_str("scenario,strategy,gender,eer,cllr,cllr_min,n_genuine,n_impostor\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.scenario,
            r.strategy,
            r.gender,
            fmt_f64(r.eer),
            fmt_f64(r.cllr),
            fmt_f64(r.cllr_min),
            r.n_genuine,
            r.n_impostor
        );
    }
    out
}

pub fn ecdf_csv(points: &[(f64, f64)], seed: u64) -> String {
    let mut out = header_line(seed);
    out.push_str("x,F\n");
    for (x, f) in points {
        let _ = writeln!(out, "{},{}", fmt_f64(*x), fmt_f64(*f));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct KsRow {
    pub gender: String,
    pub n_a: usize,
    pub n_b: usize,
    pub ks: f64,
}

pub fn ks_csv(rows: &[KsRow], seed: u64) -> String {
    let mut out = header_line(seed);
    out.push_str("gender,n_a,n_b,ks\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.gender, r.n_a, r.n_b, fmt_f64(r.ks));
    }
    out
}
