use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        })
    }
}

impl Status {
    pub fn from_bool(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    /// Human-readable acceptance rule.
    pub tolerance: String,
    pub metrics: Vec<(String, f64)>,
    /// Error text when the check could not run.
    pub message: Option<String>,
}

impl CheckResult {
    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Float(v) => fmt_float(*v),
            Value::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(v) => Some(*v),
            Value::Text(_) => None,
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u32> for Value {
    fn from(v: u32) -> Self {
        Value::Int(v as i64)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Long-format table with a fixed column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width of table {}",
            self.name
        );
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Value::render))?;
        }
        w.flush()?;
        Ok(())
    }

    /// `(min, max, mean)` of every numeric column.
    pub fn column_stats(&self) -> Vec<(String, ColumnStats)> {
        stats_of(
            &self.columns,
            self.rows
                .iter()
                .map(|r| r.iter().map(Value::as_f64).collect()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStats {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

fn stats_of(
    columns: &[String],
    rows: impl Iterator<Item = Vec<Option<f64>>>,
) -> Vec<(String, ColumnStats)> {
    let mut acc: Vec<Option<(usize, f64, f64, f64)>> =
        vec![Some((0, f64::INFINITY, f64::NEG_INFINITY, 0.0)); columns.len()];
    for row in rows {
        for (a, v) in acc.iter_mut().zip(row) {
            *a = match (*a, v) {
                (Some((n, lo, hi, s)), Some(v)) => Some((n + 1, lo.min(v), hi.max(v), s + v)),
                _ => None,
            };
        }
    }
    columns
        .iter()
        .zip(acc)
        .filter_map(|(c, a)| {
            let (count, min, max, sum) = a?;
            (count > 0).then(|| {
                (
                    c.clone(),
                    ColumnStats {
                        count,
                        min,
                        max,
                        mean: sum / count as f64,
                    },
                )
            })
        })
        .collect()
}

/// Reads a CSV written by [`Table::write_csv`] back and recomputes the
/// numeric column statistics.
pub fn csv_column_stats(path: &Path) -> Result<Vec<(String, ColumnStats)>> {
    let mut r = csv::Reader::from_path(path)?;
    let columns: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| {
            rec.map(|rec| {
                rec.iter()
                    .map(|s| s.parse::<f64>().ok())
                    .collect::<Vec<_>>()
            })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(stats_of(&columns, rows.into_iter()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: String,
    pub checks: Vec<CheckResult>,
    pub tables: Vec<Table>,
    /// Seconds; reported in the summary only.
    pub wall_clock: f64,
    pub config_hash: String,
}

impl SuiteResult {
    pub fn count(&self, status: Status) -> usize {
        self.checks.iter().filter(|c| c.status == status).count()
    }

    /// Fail if any check fails, else inconclusive if any is, else pass.
    pub fn status(&self) -> Status {
        if self.count(Status::Fail) > 0 {
            Status::Fail
        } else if self.count(Status::Inconclusive) > 0 {
            Status::Inconclusive
        } else {
            Status::Pass
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Long-format check table: one row per metric, or one row with empty
    /// metric fields for checks without metrics.
    pub fn checks_table(&self) -> Table {
        let mut t = Table::new(
            "checks",
            &["check", "status", "tolerance", "metric", "value", "message"],
        );
        for c in &self.checks {
            let msg: Value = c.message.clone().unwrap_or_default().into();
            if c.metrics.is_empty() {
                t.push(vec![
                    c.name.as_str().into(),
                    c.status.to_string().into(),
                    c.tolerance.as_str().into(),
                    "".into(),
                    "".into(),
                    msg.clone(),
                ]);
            }
            for (k, v) in &c.metrics {
                t.push(vec![
                    c.name.as_str().into(),
                    c.status.to_string().into(),
                    c.tolerance.as_str().into(),
                    k.as_str().into(),
                    (*v).into(),
                    msg.clone(),
                ]);
            }
        }
        t
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("suite: {}\n", self.suite));
        s.push_str(&format!("config_hash: {}\n", self.config_hash));
        s.push_str(&format!(
            "status: {} ({} pass, {} fail, {} inconclusive)\n",
            self.status(),
            self.count(Status::Pass),
            self.count(Status::Fail),
            self.count(Status::Inconclusive)
        ));
        s.push_str(&format!("wall_clock_s: {:.3}\n", self.wall_clock));
        s.push_str("checks:\n");
        for c in &self.checks {
            s.push_str(&format!(
                "  [{}] {} (tolerance: {})\n",
                c.status, c.name, c.tolerance
            ));
            for (k, v) in &c.metrics {
                s.push_str(&format!("      {k} = {}\n", fmt_float(*v)));
            }
            if let Some(m) = &c.message {
                s.push_str(&format!("      error: {m}\n"));
            }
        }
        for t in &self.tables {
            s.push_str(&format!("table {} ({} rows):\n", t.name, t.rows.len()));
            for (c, st) in t.column_stats() {
                s.push_str(&format!(
                    "  {c}: min {} max {} mean {}\n",
                    fmt_float(st.min),
                    fmt_float(st.max),
                    fmt_float(st.mean)
                ));
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    SummaryText,
}

/// Writes `<suite>_<table>.csv` for every table plus `<suite>_checks.csv`,
/// or `<suite>_summary.txt`. Returns the paths written.
pub fn emit_report(result: &SuiteResult, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Csv => {
            let checks = result.checks_table();
            for t in result.tables.iter().chain(std::iter::once(&checks)) {
                if t.name.is_empty() || t.name.contains(['/', '\\']) {
                    return Err(Error::Configuration(format!(
                        "invalid table name `{}`",
                        t.name
                    )));
                }
                let path = dir.join(format!("{}_{}.csv", result.suite, t.name));
                t.write_csv(fs::File::create(&path)?)?;
                written.push(path);
            }
        }
        ReportFormat::SummaryText => {
            let path = dir.join(format!("{}_summary.txt", result.suite));
            fs::write(&path, result.summary_text())?;
            written.push(path);
        }
    }
    Ok(written)
}
