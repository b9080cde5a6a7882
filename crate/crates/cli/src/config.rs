//! Settings files. A file is one JSON object holding the common keys
//! (`seed`, `threads`, `format`, `out`) next to the keys of the subcommand it
//! is used with; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{CommonArgs, Failure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Common {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

const COMMON_KEYS: [&str; 4] = ["seed", "threads", "format", "out"];

pub fn read_object(path: &Path) -> Result<Map<String, Value>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(Failure::Usage(format!(
            "config {} must hold a JSON object",
            path.display()
        ))),
        Err(e) => Err(Failure::Usage(format!("config {}: {e}", path.display()))),
    }
}

/// Splits a settings file into the common part and the subcommand part,
/// then lets command-line flags override the common part.
pub fn load<T: DeserializeOwned + Default>(args: &CommonArgs) -> Result<(Common, T), Failure> {
    let (file_common, specific) = match &args.config {
        Some(path) => {
            let mut map = read_object(path)?;
            let mut common = Map::new();
            for key in COMMON_KEYS {
                if let Some(v) = map.remove(key) {
                    common.insert(key.to_string(), v);
                }
            }
            let common: Common = from_map(common)?;
            let specific: T = from_map(map)?;
            (common, specific)
        }
        None => (Common::default(), T::default()),
    };
    let common = Common {
        seed: args.seed.or(file_common.seed),
        threads: args.threads.or(file_common.threads),
        format: args.format.or(file_common.format),
        out: args.out.clone().or(file_common.out),
    };
    Ok((common, specific))
}

fn from_map<T: DeserializeOwned>(map: Map<String, Value>) -> Result<T, Failure> {
    serde_json::from_value(Value::Object(map)).map_err(|e| Failure::Usage(format!("config: {e}")))
}

/// The effective settings as one JSON object, in the file layout.
pub fn dump<T: Serialize>(common: &Common, specific: &T) -> Result<String, Failure> {
    let mut map = match serde_json::to_value(common).map_err(|e| Failure::Runtime(e.to_string()))? {
        Value::Object(m) => m,
        _ => unreachable!("common settings serialize to an object"),
    };
    match serde_json::to_value(specific).map_err(|e| Failure::Runtime(e.to_string()))? {
        Value::Object(m) => map.extend(m),
        _ => unreachable!("settings serialize to an object"),
    }
    serde_json::to_string_pretty(&Value::Object(map)).map_err(|e| Failure::Runtime(e.to_string()))
}
