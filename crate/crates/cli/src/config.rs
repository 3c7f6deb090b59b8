//! Layering of command parameters: built-in defaults, then the JSON config
//! file, then command-line flags.
//!
//! A config file is an object holding the global keys (`output_dir`, `seed`,
//! `format`, `units`, `jobs`) and an optional `params` object whose keys are
//! the snake_case names of the command's flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const OUTPUT_DIR_ENV: &str = "BAFLOW_OUTPUT_DIR";
pub const FALLBACK_OUTPUT_DIR: &str = "baflow-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    /// Multiplier taking a value in nats to the reporting unit.
    pub fn factor(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => std::f64::consts::LOG2_E,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, clap::Args)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalArgs {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory [default: $BAFLOW_OUTPUT_DIR, else ./baflow-out].
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Seed for randomized suites and default initial conditions [default: 42].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Format of tabular outputs [default: csv].
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Units for reported free energies and rates [default: nats].
    #[arg(long, global = true, value_enum)]
    pub units: Option<Units>,
    /// Worker threads for sweeps [default: all cores].
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Global {
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub seed: u64,
    pub format: Format,
    pub units: Units,
    #[serde(skip)]
    pub jobs: Option<usize>,
}

pub struct Loaded {
    pub global: Global,
    pub params: Option<Value>,
}

fn read_config(path: &Path) -> CliResult<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::Validation(format!("{}: config must be a JSON object", path.display()))),
        Err(e) => Err(CliError::Validation(format!("{}: {e}", path.display()))),
    }
}

pub fn load(flags: &GlobalArgs) -> CliResult<Loaded> {
    let (file_global, params) = match &flags.config {
        Some(path) => {
            let mut m = read_config(path)?;
            let params = m.remove("params");
            (Value::Object(m), params)
        }
        None => (Value::Object(Map::new()), None),
    };
    let merged: GlobalArgs = layer(flags, Some(&file_global), "config")?;
    let output_dir = merged
        .output_dir
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_DIR));
    Ok(Loaded {
        global: Global {
            output_dir,
            seed: merged.seed.unwrap_or(42),
            format: merged.format.unwrap_or_default(),
            units: merged.units.unwrap_or_default(),
            jobs: merged.jobs,
        },
        params,
    })
}

/// Flags over file over defaults. All fields of `P` are optional, so the
/// serialized default lists every accepted key with a null value.
pub fn layer<P>(flags: &P, file: Option<&Value>, what: &str) -> CliResult<P>
where
    P: Serialize + DeserializeOwned + Default,
{
    let encode = |v: &P| serde_json::to_value(v).map_err(|e| CliError::Validation(e.to_string()));
    let Value::Object(mut base) = encode(&P::default())? else {
        return Err(CliError::Validation(format!("{what}: parameters are not an object")));
    };
    if let Some(file) = file {
        let Value::Object(f) = file else {
            return Err(CliError::Validation(format!("{what}: expected a JSON object")));
        };
        for (k, v) in f {
            if !base.contains_key(k) {
                return Err(CliError::Validation(format!("{what}: unknown key '{k}'")));
            }
            base.insert(k.clone(), v.clone());
        }
    }
    if let Value::Object(over) = encode(flags)? {
        for (k, v) in over {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Validation(format!("{what}: {e}")))
}

/// The effective parameters with unset entries dropped, for the manifest.
pub fn explicit<P: Serialize>(p: &P) -> Value {
    match serde_json::to_value(p) {
        Ok(Value::Object(m)) => Value::Object(m.into_iter().filter(|(_, v)| !v.is_null()).collect()),
        Ok(other) => other,
        Err(_) => Value::Null,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Default, Serialize, Deserialize)]
    #[serde(default)]
    struct P {
        a: Option<f64>,
        b: Option<Vec<f64>>,
    }

    #[test]
    fn flags_win_over_file() {
        let file = serde_json::json!({ "a": 1.0, "b": [1.0, 2.0] });
        let flags = P { a: Some(5.0), b: None };
        let p = layer(&flags, Some(&file), "t").unwrap();
        assert_eq!(p.a, Some(5.0));
        assert_eq!(p.b, Some(vec![1.0, 2.0]));
        assert_eq!(explicit(&P::default()), serde_json::json!({}));
    }

    #[test]
    fn unknown_and_mistyped_keys_are_validation_errors() {
        let bad = serde_json::json!({ "c": 1 });
        assert!(matches!(layer(&P::default(), Some(&bad), "t"), Err(CliError::Validation(_))));
        let typed = serde_json::json!({ "a": "x" });
        assert!(matches!(layer(&P::default(), Some(&typed), "t"), Err(CliError::Validation(_))));
    }
}
