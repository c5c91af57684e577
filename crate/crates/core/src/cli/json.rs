//! Report document. Written by hand so that every number carries 17
//! significant digits in a fixed, locale-independent layout.

use std::fmt::Write;

use crate::report::CheckReport;

pub const REPORT_VERSION: u32 = 1;

/// A finished run: the fixture name (if any) and one report per check in
/// configuration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub fixture: Option<String>,
    pub checks: Vec<CheckReport>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(CheckReport::pass)
    }

    pub fn to_json(&self) -> String {
        let mut out = String::new();
        write_report(&mut out, self, "");
        out.push('\n');
        out
    }
}

/// `{:.16e}`, or `null` for values JSON cannot hold.
pub fn number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".into()
    }
}

pub fn string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn write_report(out: &mut String, r: &Report, indent: &str) {
    let fixture = r.fixture.as_deref().map_or_else(|| "null".to_string(), string);
    let _ = writeln!(out, "{{");
    let _ = writeln!(out, "{indent}  \"version\": {REPORT_VERSION},");
    let _ = writeln!(out, "{indent}  \"fixture\": {fixture},");
    if r.checks.is_empty() {
        let _ = writeln!(out, "{indent}  \"checks\": [],");
    } else {
        let _ = writeln!(out, "{indent}  \"checks\": [");
        for (i, c) in r.checks.iter().enumerate() {
            let sep = if i + 1 < r.checks.len() { "," } else { "" };
            let _ = writeln!(out, "{indent}    {}{sep}", check(c));
        }
        let _ = writeln!(out, "{indent}  ],");
    }
    let _ = writeln!(out, "{indent}  \"pass\": {}", r.pass());
    let _ = write!(out, "{indent}}}");
}

fn check(c: &CheckReport) -> String {
    let notes: Vec<String> = c.notes.iter().map(|n| string(n)).collect();
    format!(
        "{{\"name\": {}, \"max_residual\": {}, \"tolerance\": {}, \"pass\": {}, \"samples\": {}, \"notes\": [{}]}}",
        string(&c.name),
        number(c.max_residual),
        number(c.tolerance),
        c.pass(),
        c.samples,
        notes.join(", ")
    )
}

/// Several reports as one JSON array.
pub fn reports_to_json(reports: &[Report]) -> String {
    let mut out = String::from("[\n");
    for (i, r) in reports.iter().enumerate() {
        out.push_str("  ");
        write_report(&mut out, r, "  ");
        out.push_str(if i + 1 < reports.len() { ",\n" } else { "\n" });
    }
    out.push_str("]\n");
    out
}
