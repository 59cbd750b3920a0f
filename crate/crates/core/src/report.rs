//! Self-describing run reports and their CSV/JSON encodings.

use serde::Serialize;
use serde_json::Value;

use crate::channel::csv_err;
use crate::contention::CurveReport;
use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "urc-toolkit";
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Format with 12 significant digits, `%.12g` style.
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
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mantissa), exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (11 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_sig(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.into())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

impl CurveReport {
    /// `users,value,ci_low,ci_high`, one row per point.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["users", "value", "ci_low", "ci_high"]);
        for p in &self.points {
            t.push(vec![p.users.into(), p.value.into(), p.ci_low.into(), p.ci_high.into()]);
        }
        t
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub tool: String,
    pub toolkit_version: String,
    pub command: String,
    pub rng: String,
    pub seed: u64,
    /// The full configuration that produced this report.
    pub inputs: Value,
    pub results: Value,
    /// Timing metadata; the only field that differs between reruns.
    pub elapsed_s: f64,
    #[serde(skip)]
    pub table: Option<Table>,
    /// Additional files requested by the configuration (path, contents).
    #[serde(skip)]
    pub extra_files: Vec<(String, Vec<u8>)>,
}

/// Pretty-printed JSON with a trailing newline.
pub fn emit_json(report: &SimReport) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(report)
        .map_err(|e| Error::UnsupportedFormat(format!("report not serializable: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

/// CSV with a header row, LF line endings and 12 significant digits.
pub fn emit_csv(report: &SimReport) -> Result<Vec<u8>> {
    let table = report.table.as_ref().ok_or_else(|| {
        Error::UnsupportedFormat(format!("`{}` results are not tabular", report.command))
    })?;
    table_to_csv(table)
}

pub fn table_to_csv(table: &Table) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contention::{CurveMeta, CurvePoint};

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(2e6), "2000000");
        assert_eq!(fmt_sig(1.5), "1.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(-123456.789), "-123456.789");
        assert_eq!(fmt_sig(1e-6), "1e-06");
        assert_eq!(fmt_sig(6.4e4), "64000");
        assert_eq!(fmt_sig(1.234e15), "1.234e+15");
        assert_eq!(fmt_sig(0.0001), "0.0001");
        assert_eq!(fmt_sig(std::f64::consts::PI), "3.14159265359");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
    }

    fn curve(n: u32) -> CurveReport {
        CurveReport {
            metric: "m".into(),
            unit: "s".into(),
            points: (1..=n)
                .map(|k| CurvePoint {
                    users: k,
                    value: k as f64,
                    ci_low: k as f64 - 0.5,
                    ci_high: k as f64 + 0.5,
                    censored_fraction: 0.0,
                    value_censored: false,
                })
                .collect(),
            meta: CurveMeta { seed: 0, rng: String::new(), samples_per_point: vec![] },
        }
    }

    fn report(table: Option<Table>) -> SimReport {
        SimReport {
            tool: TOOL_NAME.into(),
            toolkit_version: TOOLKIT_VERSION.into(),
            command: "urcs".into(),
            rng: String::new(),
            seed: 0,
            inputs: Value::Null,
            results: Value::Null,
            elapsed_s: 0.0,
            table,
            extra_files: vec![],
        }
    }

    #[test]
    fn curve_csv_lines() {
        let out = emit_csv(&report(Some(curve(3).to_table()))).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("users,value,ci_low,ci_high\n1,1,0.5,1.5\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn empty_curve_is_header_only() {
        let out = emit_csv(&report(Some(curve(0).to_table()))).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "users,value,ci_low,ci_high\n");
    }

    #[test]
    fn non_tabular_rejected() {
        assert!(matches!(emit_csv(&report(None)), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn quoting() {
        let mut t = Table::new(&["name", "x"]);
        t.push(vec!["a,b".into(), Cell::Empty]);
        let out = String::from_utf8(table_to_csv(&t).unwrap()).unwrap();
        assert_eq!(out, "name,x\n\"a,b\",\n");
    }
}
