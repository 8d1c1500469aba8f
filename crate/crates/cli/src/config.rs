use std::fs;

use serde_json::{Map, Value};

use syk_core::harness::ExperimentConfig;
use syk_core::Error;

use crate::Global;

pub const EXIT_SCHEMA: u8 = 2;
pub const EXIT_RESOURCE: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;
const EXIT_OTHER: u8 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn schema(message: String) -> Self {
        Self {
            code: EXIT_SCHEMA,
            kind: "schema",
            message,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Argument(_) | Error::Dimension(_) | Error::Unsupported(_) | Error::Json(_) => {
                EXIT_SCHEMA
            }
            Error::Resource(_) => EXIT_RESOURCE,
            Error::Validation(_) => EXIT_VALIDATION,
            Error::Io(_) => EXIT_OTHER,
        };
        Self {
            code,
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

/// Sets `a.b.c = value` inside a JSON object, creating objects on the way.
fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::schema(format!("override {assignment:?} is not KEY=VALUE")))?;
    // bare words such as `gaussian` are taken as strings
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::schema(format!("override path {path:?} crosses a non-object")))?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    Err(CliError::schema(format!("empty override path in {assignment:?}")))
}

/// Reads `--config`, applies `--set`, `--seed` and `--parallel-width`, and
/// validates the result.
pub fn load_experiment(global: &Global) -> Result<ExperimentConfig, CliError> {
    let mut doc = match &global.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::schema(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::schema(format!("config {}: {e}", path.display())))?
        }
        None => Value::Object(Map::new()),
    };
    for assignment in &global.overrides {
        apply_override(&mut doc, assignment)?;
    }
    if let Some(seed) = global.seed {
        apply_override(&mut doc, &format!("seed={seed}"))?;
    }
    if let Some(width) = global.parallel_width {
        apply_override(&mut doc, &format!("parallel_width={width}"))?;
    }
    let cfg: ExperimentConfig = serde_json::from_value(doc)
        .map_err(|e| CliError::schema(format!("config does not match the schema: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// The configuration as hashed: everything except the worker count.
pub fn hashable(cfg: &ExperimentConfig) -> Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("parallel_width");
    }
    v
}
