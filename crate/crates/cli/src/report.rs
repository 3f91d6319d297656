//! Run reports, invariant checks and CSV emission.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// Fixed float rule for every CSV: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// One asserted invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
    pub detail: String,
}

impl Check {
    pub fn at_most(
        name: impl Into<String>,
        value: f64,
        bound: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            pass: value <= bound,
            value,
            bound,
            detail: detail.into(),
        }
    }

    pub fn at_least(
        name: impl Into<String>,
        value: f64,
        bound: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            pass: value >= bound,
            value,
            bound,
            detail: detail.into(),
        }
    }

    /// Strict upper bound.
    pub fn below(
        name: impl Into<String>,
        value: f64,
        bound: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            pass: value < bound,
            value,
            bound,
            detail: detail.into(),
        }
    }

    pub fn flag(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            value: if pass { 1.0 } else { 0.0 },
            bound: 1.0,
            detail: detail.into(),
        }
    }
}

/// Outcome of one pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct Section {
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub results: Value,
    pub artifacts: Vec<PathBuf>,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

impl Section {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: true,
            checks: Vec::new(),
            results: Value::Null,
            artifacts: Vec::new(),
            wall_seconds: 0.0,
            error: None,
        }
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn finish(&mut self) {
        self.passed = self.error.is_none() && self.checks.iter().all(|c| c.pass);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub subcommand: String,
    pub passed: bool,
    pub config: serde_json::Map<String, Value>,
    pub warnings: Vec<String>,
    pub workers: usize,
    pub sections: Vec<Section>,
    pub artifacts: Vec<PathBuf>,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn failed_checks(&self) -> Vec<String> {
        let mut out = Vec::new();
        for s in &self.sections {
            if let Some(e) = &s.error {
                out.push(format!("{}: error: {e}", s.name));
            }
            for c in s.checks.iter().filter(|c| !c.pass) {
                out.push(format!(
                    "{}: {} (value {}, bound {})",
                    s.name, c.name, c.value, c.bound
                ));
            }
        }
        out
    }
}

/// CSV file built row by row; floats go through [`fmt_f64`].
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

pub enum Cell {
    F(f64),
    U(usize),
    S(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::U(x as usize)
    }
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(
            cells
                .into_iter()
                .map(|c| match c {
                    Cell::F(x) => fmt_f64(x),
                    Cell::U(u) => u.to_string(),
                    Cell::S(s) => s,
                })
                .collect(),
        );
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "{}", self.header.join(","))?;
        for r in &self.rows {
            writeln!(f, "{}", r.join(","))?;
        }
        f.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Csv::new(&["a", "b", "c"]);
        c.row(vec![1usize.into(), 0.25.into(), "x".into()]);
        let p = dir.path().join("t.csv");
        c.write(&p).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "a,b,c\n1,2.5000000000000000e-1,x\n"
        );
    }

    #[test]
    fn section_verdict() {
        let mut s = Section::new("x");
        s.check(Check::at_most("a", 1.0, 2.0, ""));
        s.finish();
        assert!(s.passed);
        s.check(Check::at_least("b", 1.0, 2.0, ""));
        s.finish();
        assert!(!s.passed);
    }
}
