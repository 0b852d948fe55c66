//! Table and summary writers. CSV bodies depend only on the scenario, so
//! re-running it reproduces them byte for byte; wall time and timestamps go
//! to `summary.json` only.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::CliError;
use crate::options::Format;

pub const SCHEMA_LINE: &str = "# schema=1";

/// A rectangular table; `Null` cells become empty CSV fields.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub struct Output {
    pub dir: PathBuf,
    pub format: Format,
    pub artifacts: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path, format: Format) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            format,
            artifacts: Vec::new(),
        })
    }

    fn open(&mut self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok((path, BufWriter::new(file)))
    }

    /// Writes `stem.csv` or `stem.json` depending on the format.
    pub fn table(&mut self, stem: &str, table: &Table) -> Result<(), CliError> {
        match self.format {
            Format::Csv => {
                let (path, mut w) = self.open(&format!("{stem}.csv"))?;
                writeln!(w, "{SCHEMA_LINE}").map_err(|e| CliError::io(&path, e))?;
                let mut csv = csv::Writer::from_writer(w);
                csv.write_record(&table.columns)?;
                for row in &table.rows {
                    csv.write_record(row.iter().map(cell_text))?;
                }
                csv.flush().map_err(|e| CliError::io(&path, e))?;
            }
            Format::Json => {
                let records: Vec<Value> = table
                    .rows
                    .iter()
                    .map(|row| {
                        let map: Map<String, Value> = table
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| (c.to_string(), v.clone()))
                            .collect();
                        Value::Object(map)
                    })
                    .collect();
                let doc = serde_json::json!({ "schema": 1, "records": records });
                self.json_value(&format!("{stem}.json"), &doc)?;
            }
        }
        Ok(())
    }

    pub fn json_value(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let (path, mut w) = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(&path, e.into()))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))
    }
}
