use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::elements::ElementPair;
use crate::error::Result;
use crate::optimize::Scheme;

pub const CSV_HEADER: &str = "h,e_u_L2,eoc_u,e_y_L2,eoc_y,e_y_Linf,eoc_yinf,e_z_L2,eoc_z";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// A named pass/fail outcome with the measured value and its threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
}

impl Check {
    pub fn at_least(name: impl Into<String>, value: Option<f64>, threshold: f64) -> Self {
        let passed = value.is_some_and(|v| v >= threshold);
        Check { name: name.into(), passed, value, threshold: Some(threshold) }
    }

    pub fn at_most(name: impl Into<String>, value: Option<f64>, threshold: f64) -> Self {
        let passed = value.is_some_and(|v| v <= threshold);
        Check { name: name.into(), passed, value, threshold: Some(threshold) }
    }

    pub fn within(name: impl Into<String>, value: Option<f64>, lo: f64, hi: f64) -> Self {
        let passed = value.is_some_and(|v| (lo..=hi).contains(&v));
        Check { name: format!("{} in [{lo}, {hi}]", name.into()), passed, value, threshold: None }
    }

    pub fn flag(name: impl Into<String>, passed: bool) -> Self {
        Check { name: name.into(), passed, value: None, threshold: None }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// Mesh level `n`.
    pub n: usize,
    pub h: f64,
    #[serde(rename = "e_u_L2")]
    pub e_u_l2: Option<f64>,
    pub eoc_u: Option<f64>,
    #[serde(rename = "e_y_L2")]
    pub e_y_l2: Option<f64>,
    pub eoc_y: Option<f64>,
    #[serde(rename = "e_y_Linf")]
    pub e_y_linf: Option<f64>,
    pub eoc_yinf: Option<f64>,
    #[serde(rename = "e_z_L2")]
    pub e_z_l2: Option<f64>,
    pub eoc_z: Option<f64>,
    /// H¹ seminorm velocity error; only reported in JSON.
    #[serde(rename = "e_y_H1")]
    pub e_y_h1: Option<f64>,
    pub eoc_y_h1: Option<f64>,
    /// Set when this level failed.
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub study: String,
    pub pair: ElementPair,
    pub scheme: Option<Scheme>,
    pub rows: Vec<ConvergenceRow>,
    pub checks: Vec<Check>,
}

/// `log(e_prev/e) / log(h_prev/h)` when both errors are positive.
pub fn eoc(e_prev: Option<f64>, e: Option<f64>, h_prev: f64, h: f64) -> Option<f64> {
    match (e_prev, e) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).ln() / (h_prev / h).ln()),
        _ => None,
    }
}

impl ConvergenceTable {
    pub fn new(study: impl Into<String>, pair: ElementPair, scheme: Option<Scheme>) -> Self {
        ConvergenceTable { study: study.into(), pair, scheme, rows: vec![], checks: vec![] }
    }

    /// Appends a row and fills in its EOC columns from the previous row.
    pub fn push(&mut self, mut row: ConvergenceRow) {
        if let Some(prev) = self.rows.last() {
            let (hp, h) = (prev.h, row.h);
            row.eoc_u = eoc(prev.e_u_l2, row.e_u_l2, hp, h);
            row.eoc_y = eoc(prev.e_y_l2, row.e_y_l2, hp, h);
            row.eoc_yinf = eoc(prev.e_y_linf, row.e_y_linf, hp, h);
            row.eoc_z = eoc(prev.e_z_l2, row.e_z_l2, hp, h);
            row.eoc_y_h1 = eoc(prev.e_y_h1, row.e_y_h1, hp, h);
        }
        self.rows.push(row);
    }

    /// All EOC values of one column, skipping gaps.
    pub fn eocs(&self, column: impl Fn(&ConvergenceRow) -> Option<f64>) -> Vec<f64> {
        self.rows.iter().filter_map(column).collect()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Something that can be written as CSV or JSON and carries checks.
pub trait Report {
    fn to_csv(&self) -> String;
    fn to_json(&self) -> Result<String>;
    fn checks(&self) -> &[Check];

    fn all_passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }

    /// One `PASS`/`FAIL` line per check.
    fn summary(&self) -> String {
        let mut s = String::new();
        for c in self.checks() {
            let _ = write!(s, "{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
            if let Some(v) = c.value {
                let _ = write!(s, " (value {v:.6e}");
                if let Some(t) = c.threshold {
                    let _ = write!(s, ", threshold {t:e}");
                }
                s.push(')');
            }
            s.push('\n');
        }
        s
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// JSON with every float written to 17 significant digits.
pub(crate) fn to_json_17<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }
}

impl Report for ConvergenceTable {
    fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let cols = [
                fmt_opt(Some(r.h)),
                fmt_opt(r.e_u_l2),
                fmt_opt(r.eoc_u),
                fmt_opt(r.e_y_l2),
                fmt_opt(r.eoc_y),
                fmt_opt(r.e_y_linf),
                fmt_opt(r.eoc_yinf),
                fmt_opt(r.e_z_l2),
                fmt_opt(r.eoc_z),
            ];
            s.push_str(&cols.join(","));
            s.push('\n');
        }
        s
    }

    fn to_json(&self) -> Result<String> {
        to_json_17(self)
    }

    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// Results of the derivative consistency checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub checks: Vec<Check>,
}

fn checks_csv(checks: &[Check]) -> String {
    let mut s = String::from("name,passed,value,threshold\n");
    for c in checks {
        let _ = writeln!(s, "\"{}\",{},{},{}", c.name.replace('"', "\"\""), c.passed, fmt_opt(c.value), fmt_opt(c.threshold));
    }
    s
}

impl Report for DiagnosticReport {
    fn to_csv(&self) -> String {
        checks_csv(&self.checks)
    }

    fn to_json(&self) -> Result<String> {
        to_json_17(self)
    }

    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfSupLevel {
    pub n: usize,
    pub h: f64,
    pub beta: f64,
    /// Smallest eigenvalue before removing the constant pressure mode.
    pub lambda_constant_mode: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfSupReport {
    pub pair: ElementPair,
    pub levels: Vec<InfSupLevel>,
    pub checks: Vec<Check>,
}

impl Report for InfSupReport {
    fn to_csv(&self) -> String {
        let mut s = String::from("n,h,beta,lambda_constant_mode\n");
        for l in &self.levels {
            let _ = writeln!(s, "{},{:.16e},{:.16e},{:.16e}", l.n, l.h, l.beta, l.lambda_constant_mode);
        }
        s
    }

    fn to_json(&self) -> Result<String> {
        to_json_17(self)
    }

    fn checks(&self) -> &[Check] {
        &self.checks
    }
}

/// Writes `report` to `path` in the requested format.
pub fn emit_report(report: &dyn Report, format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json()?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, e: f64) -> ConvergenceRow {
        ConvergenceRow { n, h: 1.0 / n as f64, e_y_l2: Some(e), ..Default::default() }
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = ConvergenceTable::new("empty", ElementPair::TaylorHood, None);
        assert_eq!(t.to_csv(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn eoc_of_halving_error() {
        let mut t = ConvergenceTable::new("t", ElementPair::Mini, None);
        t.push(ConvergenceRow { h: 0.1, e_u_l2: Some(0.4), ..Default::default() });
        t.push(ConvergenceRow { h: 0.05, e_u_l2: Some(0.2), ..Default::default() });
        assert!((t.rows[1].eoc_u.unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(t.rows[0].eoc_u, None);
        let csv = t.to_csv();
        let line = csv.lines().nth(2).unwrap();
        assert_eq!(line.split(',').count(), 9);
        assert!(line.starts_with("5.0000000000000003e-2,2.0000000000000001e-1,1.0000000000000000e0,,"));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut t = ConvergenceTable::new("rt", ElementPair::TaylorHood, Some(Scheme::Semidiscrete));
        t.push(row(8, 0.1234567890123456789));
        t.push(row(16, std::f64::consts::PI * 1e-7));
        t.push(ConvergenceRow { n: 32, h: 1.0 / 32.0, note: Some("failed".into()), ..Default::default() });
        t.checks.push(Check::at_least("eoc", Some(1.0 / 3.0), 0.9));
        let s = t.to_json().unwrap();
        assert!(s.contains("\"e_y_L2\":1.2345678901234568e-1"));
        assert_eq!(ConvergenceTable::from_json(&s).unwrap(), t);
    }

    #[test]
    fn emit_to_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = ConvergenceTable::new("f", ElementPair::TaylorHood, None);
        t.push(row(4, 1.0));
        emit_report(&t, Format::Csv, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), t.to_csv());
        assert!(emit_report(&t, Format::Json, &dir.path().join("missing/dir/t.json")).is_err());
    }

    #[test]
    fn check_constructors() {
        assert!(Check::at_least("a", Some(1.0), 0.9).passed);
        assert!(!Check::at_least("a", None, 0.9).passed);
        assert!(Check::within("b", Some(2.0), 1.8, 2.2).passed);
        assert!(!Check::at_most("c", Some(1.0), 0.5).passed);
    }
}
