use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    /// SHA-256 of the compact JSON encoding of `config`.
    pub config_sha256: String,
    pub config: &'a RunConfig,
}

pub fn config_hash(config: &RunConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(bytes))
}

impl<'a> Manifest<'a> {
    pub fn new(config: &'a RunConfig) -> Self {
        Self {
            tool: "inaragg",
            version: inaragg_core::VERSION,
            command: config.command(),
            seed: config.seed(),
            config_sha256: config_hash(config),
            config,
        }
    }

    /// Writes to `explicit`, else next to `output`, else to stderr.
    pub fn write(&self, explicit: Option<&Path>, output: Option<&Path>) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self)?;
        let target: Option<PathBuf> = explicit.map(Path::to_path_buf).or_else(|| {
            output.map(|o| {
                let mut name = o.as_os_str().to_owned();
                name.push(".manifest.json");
                PathBuf::from(name)
            })
        });
        match target {
            Some(path) => std::fs::write(&path, text + "\n").map_err(CliError::io(path)),
            None => writeln!(std::io::stderr(), "{text}").map_err(CliError::io("<stderr>")),
        }
    }
}
