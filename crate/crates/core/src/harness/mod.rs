//! Experiment runner: parameter grids in, CSV rows out.
//!
//! Grid points run in a rayon pool and rows are sorted by grid key before
//! writing, so the CSV body does not depend on the thread count.

mod config;
mod run;

pub use config::{Experiment, ExperimentConfig, Family};
pub use run::{
    run, run_approx_g3, run_oversampling, run_roundtrip, run_sample_ratio, single_lattice,
    ROUNDTRIP_TOLERANCE,
};

use std::io::Write;

use serde_json::{Map, Value};

use crate::error::Result;

/// Sort key of a row: `(d, R, s, seed)`.
pub type GridKey = (usize, u64, u64, u64);

/// Header plus string-formatted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub experiment: Experiment,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    keys: Vec<GridKey>,
}

impl Table {
    pub(crate) fn new(experiment: Experiment, header: Vec<&'static str>) -> Self {
        Table {
            experiment,
            header,
            rows: Vec::new(),
            keys: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, key: GridKey, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.keys.push(key);
        self.rows.push(row);
    }

    pub(crate) fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.rows.len()).collect();
        idx.sort_by_key(|&i| self.keys[i]);
        self.rows = idx.iter().map(|&i| self.rows[i].clone()).collect();
        self.keys = idx.iter().map(|&i| self.keys[i]).collect();
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Column index by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|&h| h == name)
    }

    /// Values of one column.
    pub fn values(&self, name: &str) -> Vec<&str> {
        match self.column(name) {
            Some(c) => self.rows.iter().map(|r| r[c].as_str()).collect(),
            None => Vec::new(),
        }
    }

    /// Rows whose `bound_ok` or `pass` column is `false`.
    pub fn failures(&self) -> usize {
        ["bound_ok", "pass"]
            .iter()
            .filter_map(|c| self.column(c))
            .map(|c| self.rows.iter().filter(|r| r[c] == "false").count())
            .sum()
    }

    /// CSV with `#` provenance lines.
    pub fn write_csv<W: Write>(&self, w: W, provenance: &Provenance) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        for line in provenance.lines(self.experiment) {
            writeln!(w, "# {line}")?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            csv.write_record(row).map_err(csv_err)?;
        }
        csv.flush()?;
        Ok(())
    }

    /// JSON object with provenance and one object per row; numeric-looking
    /// cells are emitted as numbers.
    pub fn to_json(&self, provenance: &Provenance) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut obj = Map::new();
                for (h, cell) in self.header.iter().zip(r) {
                    obj.insert(h.to_string(), cell_value(cell));
                }
                Value::Object(obj)
            })
            .collect();
        let mut top = Map::new();
        top.insert("experiment".into(), Value::String(self.experiment.as_str().into()));
        top.insert("version".into(), Value::String(provenance.version.clone()));
        top.insert("config".into(), Value::String(provenance.config_hash.clone()));
        if let Some(t) = provenance.timestamp {
            top.insert("timestamp".into(), Value::from(t));
        }
        top.insert("rows".into(), Value::Array(rows));
        Value::Object(top)
    }
}

fn cell_value(cell: &str) -> Value {
    match cell {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Ok(i) = cell.parse::<i64>() {
        return Value::from(i);
    }
    if let Ok(x) = cell.parse::<f64>() {
        if x.is_finite() {
            return Value::from(x);
        }
    }
    Value::String(cell.to_string())
}

fn csv_err(e: csv::Error) -> crate::Error {
    crate::Error::Io(std::io::Error::other(e))
}

/// Header comments written ahead of the CSV body.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
    /// Seconds since the Unix epoch; `None` suppresses the line.
    pub timestamp: Option<u64>,
}

impl Provenance {
    pub fn new(config: &ExperimentConfig, timestamp: bool) -> Self {
        let timestamp = timestamp.then(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            timestamp,
        }
    }

    fn lines(&self, experiment: Experiment) -> Vec<String> {
        let mut out = vec![
            format!("mr1l {}", self.version),
            format!("experiment {experiment}"),
            format!("config {}", self.config_hash),
        ];
        if let Some(t) = self.timestamp {
            out.push(format!("generated {t}"));
        }
        out
    }
}

#[cfg(test)]
mod tests;
