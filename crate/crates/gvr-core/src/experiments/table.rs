//! Result tables and their CSV form.
//!
//! Numbers are written with 9 significant digits, '.' as decimal mark and '\n' line endings.
//! The first line carries the spec hash; timings live in a separate sidecar so reruns of an
//! analytic spec produce byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GvrError, Result};

pub const HASH_PREFIX: &str = "# spec_hash=";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(i) => Some(*i as f64),
            Cell::Num(x) => Some(*x),
            Cell::Text(t) => t.parse().ok(),
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(t) => Some(t),
            _ => None,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => fmt_sig9(*x),
            Cell::Text(t) => t.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// `%.9g`-style formatting with trailing zeros trimmed; -0 prints as 0.
pub fn fmt_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mant.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.to_string()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub artifact_version: String,
    pub wall_clock_seconds: f64,
    /// Seeds driving the statistical parts, in the order trials consumed them.
    pub seeds: Vec<u64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub spec_hash: String,
    pub meta: TableMeta,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        ResultTable {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            spec_hash: String::new(),
            meta: TableMeta { artifact_version: env!("CARGO_PKG_VERSION").into(), ..TableMeta::default() },
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column, skipping cells that do not parse.
    pub fn numbers(&self, name: &str) -> Vec<f64> {
        match self.column(name) {
            Some(k) => self.rows.iter().filter_map(|r| r[k].as_f64()).collect(),
            None => Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
        format!("{HASH_PREFIX}{}\n{body}", self.spec_hash)
    }

    pub fn from_csv(name: &str, text: &str) -> Result<Self> {
        let first = text.lines().next().unwrap_or_default();
        let hash = first
            .strip_prefix(HASH_PREFIX)
            .ok_or_else(|| GvrError::Schema { path: name.into(), msg: "missing spec hash line".into() })?;
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let columns: Vec<String> = rd
            .headers()
            .map_err(|e| GvrError::Schema { path: name.into(), msg: e.to_string() })?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| GvrError::Schema { path: name.into(), msg: e.to_string() })?;
            rows.push(
                rec.iter()
                    .map(|f| match f.parse::<i64>() {
                        Ok(i) => Cell::Int(i),
                        Err(_) => f.parse::<f64>().map(Cell::Num).unwrap_or_else(|_| Cell::Text(f.into())),
                    })
                    .collect(),
            );
        }
        Ok(ResultTable {
            name: name.into(),
            columns,
            rows,
            spec_hash: hash.trim().into(),
            meta: TableMeta::default(),
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
        ResultTable::from_csv(name, &std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellMismatch {
    pub row: usize,
    pub column: String,
    pub expected: String,
    pub got: String,
}

/// Cell-by-cell comparison; refuses tables produced from different specs.
pub fn compare_tables(expected: &ResultTable, got: &ResultTable, tol: f64) -> Result<Vec<CellMismatch>> {
    if expected.spec_hash != got.spec_hash {
        return Err(GvrError::Parameter(format!(
            "spec hash mismatch ({} vs {}); refusing to compare",
            expected.spec_hash, got.spec_hash
        )));
    }
    if expected.columns != got.columns {
        return Err(GvrError::Parameter("column schemas differ".into()));
    }
    let mut out = Vec::new();
    let width = expected.columns.len();
    for r in 0..expected.rows.len().max(got.rows.len()) {
        for c in 0..width {
            let (e, g) = (expected.rows.get(r).map(|x| &x[c]), got.rows.get(r).map(|x| &x[c]));
            let same = match (e, g) {
                (Some(e), Some(g)) => match (e.as_f64(), g.as_f64()) {
                    (Some(a), Some(b)) => (a - b).abs() <= tol || (a.is_nan() && b.is_nan()),
                    _ => e.render() == g.render(),
                },
                _ => false,
            };
            if !same {
                out.push(CellMismatch {
                    row: r,
                    column: expected.columns[c].clone(),
                    expected: e.map(Cell::render).unwrap_or_default(),
                    got: g.map(Cell::render).unwrap_or_default(),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig9(7.4), "7.4");
        assert_eq!(fmt_sig9(-1.6951997654321), "-1.69519977");
        assert_eq!(fmt_sig9(659.4999999999), "659.5");
        assert_eq!(fmt_sig9(123456789.4), "123456789");
        assert_eq!(fmt_sig9(1.5e12), "1.5e12");
        assert_eq!(fmt_sig9(2.5e-7), "2.5e-7");
        assert_eq!(fmt_sig9(-0.0), "0");
        assert_eq!(fmt_sig9(-1e-300 * 1e-300), "0");
        assert_eq!(fmt_sig9(0.1 + 0.2), "0.3");
    }

    #[test]
    fn csv_roundtrip_and_hash_refusal() {
        let mut t = ResultTable::new("x", &["action", "q"]);
        t.spec_hash = "abc".into();
        t.push(vec!["(0,1)".into(), 1.25.into()]);
        t.push(vec!["(2,2)".into(), Cell::Int(3)]);
        let csv = t.to_csv();
        assert!(csv.starts_with("# spec_hash=abc\naction,q\n\"(0,1)\",1.25\n"));
        assert!(!csv.contains('\r'));
        let back = ResultTable::from_csv("x", &csv).unwrap();
        assert_eq!(back.rows[0][0].as_str(), Some("(0,1)"));
        assert!(compare_tables(&t, &back, 0.0).unwrap().is_empty());
        let mut other = back.clone();
        other.spec_hash = "def".into();
        assert!(compare_tables(&t, &other, 0.0).is_err());
        other.spec_hash = "abc".into();
        other.rows[0][1] = Cell::Num(1.5);
        assert_eq!(compare_tables(&t, &other, 0.1).unwrap().len(), 1);
    }
}
