//! Result rows and their CSV/JSON encodings.

use std::cmp::Ordering;

use serde::Serialize;

pub const CSV_HEADER: &str = "experiment,n,t,metric,lhs,rhs,slack,pass";

/// One checked inequality `lhs ≤ rhs`, or a recorded value when
/// `lhs = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub experiment: String,
    pub n: usize,
    pub t: f64,
    pub metric: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub slack: f64,
    pub pass: bool,
}

impl Row {
    /// `lhs ≤ rhs` up to `tol`.
    pub fn check(experiment: &str, n: usize, t: f64, metric: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let slack = rhs - lhs;
        Self::with_pass(experiment, n, t, metric, lhs, rhs, slack >= -tol)
    }

    /// A measured value with nothing to compare against.
    pub fn record(experiment: &str, n: usize, t: f64, metric: impl Into<String>, value: f64) -> Self {
        Self::with_pass(experiment, n, t, metric, value, value, true)
    }

    /// `lhs`, `rhs` and an externally decided verdict.
    pub fn with_pass(experiment: &str, n: usize, t: f64, metric: impl Into<String>, lhs: f64, rhs: f64, pass: bool) -> Self {
        Self { experiment: experiment.to_string(), n, t, metric: metric.into(), lhs, rhs, slack: rhs - lhs, pass }
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.experiment
            .cmp(&other.experiment)
            .then(self.n.cmp(&other.n))
            .then(self.t.total_cmp(&other.t))
            .then(self.metric.cmp(&other.metric))
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            csv_field(&self.experiment),
            self.n,
            fmt_sig(self.t),
            csv_field(&self.metric),
            fmt_sig(self.lhs),
            fmt_sig(self.rhs),
            fmt_sig(self.slack),
            self.pass
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Twelve significant digits in the style of C's `%.12g`.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(mut rows: Vec<Row>) -> Self {
        rows.sort_by(Row::key_cmp);
        Self { rows }
    }

    pub fn extend(&mut self, other: Table) {
        self.rows.extend(other.rows);
        self.rows.sort_by(Row::key_cmp);
    }

    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn find(&self, experiment: &str, n: usize, metric: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.experiment == experiment && r.n == n && r.metric == metric)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.to_csv_line());
            out.push('\n');
        }
        out
    }

    /// JSON array of row objects with the CSV column names. Non-finite
    /// numbers become `null`.
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(&self.rows)
    }
}
