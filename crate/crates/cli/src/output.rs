//! Tables written as CSV (header row, `{:.16e}` floats) or as a JSON array
//! of records with the same field names.

use std::fs;
use std::path::{Path, PathBuf};

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::config::Format;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format!("{:.16e}", x + 0.0),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Num(x) if x.is_finite() => s.serialize_f64(*x),
            Cell::Num(x) => s.serialize_str(&x.to_string()),
            Cell::Int(i) => s.serialize_i64(*i),
            Cell::Text(t) => s.serialize_str(t),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| Cell::Num(x)).collect());
    }

    /// Writes `<dir>/<stem>.<ext>` and returns the path.
    pub fn write(&self, dir: &Path, stem: &str, format: Format) -> Result<PathBuf, CliError> {
        let path = dir.join(format!("{stem}.{}", format.extension()));
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e))?;
                w.write_record(&self.columns).map_err(|e| CliError::io(&path, e))?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv)).map_err(|e| CliError::io(&path, e))?;
                }
                w.flush().map_err(|e| CliError::io(&path, e))?;
            }
            Format::Json => {
                let mut text = serde_json::to_string_pretty(&Records(self)).map_err(|e| CliError::io(&path, e))?;
                text.push('\n');
                fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
            }
        }
        Ok(path)
    }
}

struct Records<'a>(&'a Table);

struct Record<'a>(&'a [String], &'a [Cell]);

impl Serialize for Records<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.rows.len()))?;
        for row in &self.0.rows {
            seq.serialize_element(&Record(&self.0.columns, row))?;
        }
        seq.end()
    }
}

impl Serialize for Record<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0.iter().zip(self.1) {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: String,
    pub config_sha256: String,
    pub overrides: Vec<String>,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("run-manifest.json");
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::io(&path, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_agree() {
        let dir = std::env::temp_dir().join(format!("nonmarkov-output-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let mut t = Table::new(&["t", "x", "name"]);
        t.push(vec![Cell::Num(0.1), Cell::Int(3), Cell::Text("a".into())]);
        t.push(vec![Cell::Num(1.0 / 3.0), Cell::Int(-1), Cell::Text("b".into())]);
        let csv_path = t.write(&dir, "table", Format::Csv).unwrap();
        let text = fs::read_to_string(&csv_path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,x,name");
        let second: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
        assert_eq!(second[0].parse::<f64>().unwrap(), 1.0 / 3.0);

        let json_path = t.write(&dir, "table", Format::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(v[1]["t"].as_f64().unwrap(), 1.0 / 3.0);
        assert_eq!(v[0]["name"], "a");
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn hash_is_hex() {
        let h = sha256_hex(b"abc");
        assert_eq!(h, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
