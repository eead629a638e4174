//! JSON config files. Keys are long flag names (`train-fraction` or
//! `train_fraction`); a value from the file replaces defaults and environment
//! values but never a flag given on the command line.

use std::collections::BTreeSet;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgMatches, Command};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub fn load(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config `{}`: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::Usage(format!(
            "config `{}` must hold a JSON object",
            path.display()
        ))),
        Err(e) => Err(CliError::Usage(format!("config `{}`: {e}", path.display()))),
    }
}

/// Maps a config key to the clap id of the matching argument of `cmd`.
fn resolve_id(cmd: &Command, key: &str) -> Option<String> {
    let dashed = key.replace('_', "-");
    cmd.get_arguments()
        .find(|a| a.get_long() == Some(dashed.as_str()) || a.get_id().as_str() == key)
        .map(|a| a.get_id().to_string())
}

/// Overlays the keys of `file` that belong to `cmd` onto `args`, records the
/// keys it consumed in `used` and returns the merged value.
pub fn overlay<T: Serialize + DeserializeOwned>(
    args: &T,
    cmd: &Command,
    matches: &ArgMatches,
    file: &Map<String, Value>,
    used: &mut BTreeSet<String>,
) -> Result<T, CliError> {
    let mut value = serde_json::to_value(args).expect("argument structs serialize");
    let fields = value.as_object_mut().expect("argument structs are objects");
    for (key, v) in file {
        let Some(id) = resolve_id(cmd, key) else {
            continue;
        };
        if !fields.contains_key(&id) {
            continue;
        }
        used.insert(key.clone());
        if matches.value_source(&id) != Some(ValueSource::CommandLine) {
            fields.insert(id, v.clone());
        }
    }
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("config: {e}")))
}

pub fn reject_unused(file: &Map<String, Value>, used: &BTreeSet<String>) -> Result<(), CliError> {
    match file.keys().find(|k| !used.contains(*k)) {
        Some(k) => Err(CliError::Usage(format!(
            "config key `{k}` matches no flag of this command"
        ))),
        None => Ok(()),
    }
}
