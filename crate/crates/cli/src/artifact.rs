use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use syk_core::Error;

use crate::config::CliError;

/// Reproducibility stamp carried by every output file.
pub struct Meta {
    pub tool: String,
    pub command: &'static str,
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl Meta {
    /// `params` is hashed through its canonical JSON encoding (sorted keys).
    pub fn new(command: &'static str, params: &Value, seed: Option<u64>) -> Self {
        let canonical = json!({ "command": command, "params": params }).to_string();
        Self {
            tool: format!("syk-lab {}", env!("CARGO_PKG_VERSION")),
            command,
            config_hash: hex::encode(Sha256::digest(canonical.as_bytes())),
            seed,
        }
    }

    fn seed_text(&self) -> String {
        self.seed.map_or_else(|| "none".into(), |s| s.to_string())
    }

    fn header(&self) -> String {
        format!(
            "# tool={} command={} config_hash={} seed={}\n",
            self.tool.replace(' ', "/"),
            self.command,
            self.config_hash,
            self.seed_text()
        )
    }
}

pub struct Artifacts {
    dir: PathBuf,
    meta: Meta,
}

impl Artifacts {
    pub fn new(dir: &Path, meta: Meta) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(Error::from)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            meta,
        })
    }

    /// Writes the stamp line followed by `body`.
    pub fn csv(&self, name: &str, body: &str) -> Result<(), CliError> {
        let text = self.meta.header() + body;
        fs::write(self.dir.join(name), text).map_err(Error::from)?;
        Ok(())
    }

    /// Writes `value` with a `meta` member added.
    pub fn json(&self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut value = value.clone();
        if let Some(obj) = value.as_object_mut() {
            obj.insert(
                "meta".into(),
                json!({
                    "tool": self.meta.tool,
                    "command": self.meta.command,
                    "config_hash": self.meta.config_hash,
                    "seed": self.meta.seed,
                }),
            );
        }
        let text = serde_json::to_string_pretty(&value).map_err(Error::from)? + "\n";
        fs::write(self.dir.join(name), text).map_err(Error::from)?;
        Ok(())
    }
}
