//! File emission and the run manifest.

use std::path::PathBuf;

use baflow::Table;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, Global, Units};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

pub struct Output {
    dir: PathBuf,
    pub format: Format,
    pub units: Units,
    files: Vec<FileEntry>,
}

impl Output {
    pub fn new(global: &Global) -> CliResult<Self> {
        std::fs::create_dir_all(&global.output_dir).map_err(|e| CliError::io(global.output_dir.display(), e))?;
        Ok(Self {
            dir: global.output_dir.clone(),
            format: global.format,
            units: global.units,
            files: Vec::new(),
        })
    }

    /// Converts a value in nats to the reporting unit.
    pub fn nats(&self, v: f64) -> f64 {
        v * self.units.factor()
    }

    pub fn write_bytes(&mut self, name: &str, data: &[u8]) -> CliResult<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, data).map_err(|e| CliError::io(path.display(), e))?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry {
            path: name.to_string(),
            bytes: data.len(),
            sha256: hex::encode(Sha256::digest(data)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Validation(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes `<stem>.csv` or `<stem>.json` depending on the format; columns
    /// listed in `nat_columns` are converted to the reporting unit.
    pub fn write_table(&mut self, stem: &str, table: &Table, nat_columns: &[&str]) -> CliResult<String> {
        let mut t = table.clone();
        t.scale_columns(nat_columns, self.units.factor());
        match self.format {
            Format::Csv => {
                let name = format!("{stem}.csv");
                let data = table_csv(&t)?;
                self.write_bytes(&name, &data)?;
                Ok(name)
            }
            Format::Json => {
                let name = format!("{stem}.json");
                self.write_json(&name, &t)?;
                Ok(name)
            }
        }
    }

    /// Writes `<slug>.manifest.json` listing every emitted file and the
    /// effective inputs. Carries no timestamps or absolute paths.
    pub fn finish(mut self, command: &str, global: &Global, inputs: Value, summary: Value) -> CliResult<PathBuf> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = json!({
            "command": command,
            "version": baflow_version(),
            "inputs": {
                "global": global,
                "params": inputs,
            },
            "summary": summary,
            "files": self.files,
        });
        let name = format!("{}.manifest.json", command.replace(' ', "-"));
        self.write_bytes(&name, (serde_json::to_string_pretty(&manifest).expect("json value") + "\n").as_bytes())?;
        Ok(self.dir.join(name))
    }
}

pub fn baflow_version() -> Value {
    json!({ "baflow": baflow::VERSION, "baflow-cli": env!("CARGO_PKG_VERSION") })
}

fn table_csv(t: &Table) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(&t.columns).map_err(err)?;
    for row in &t.rows {
        w.write_record(row.iter().map(|v| format!("{v}"))).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}
