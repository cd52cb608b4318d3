//! Provenance record written next to every command's primary output.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub rng_seed: Option<u64>,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub wall_seconds: f64,
    /// Named phase durations in seconds.
    pub timings: BTreeMap<String, f64>,
}

pub fn sha256_file(path: impl AsRef<Path>) -> io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Accumulates a [`RunManifest`] over the course of a command.
#[derive(Debug)]
pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    inputs: Vec<InputDigest>,
    rng_seed: Option<u64>,
    started: DateTime<Utc>,
    clock: Instant,
    timings: BTreeMap<String, f64>,
}

impl ManifestBuilder {
    pub fn new(command: impl Into<String>, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            config,
            inputs: Vec::new(),
            rng_seed: None,
            started: Utc::now(),
            clock: Instant::now(),
            timings: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: impl AsRef<Path>) -> io::Result<&mut Self> {
        let path = path.as_ref();
        let sha256 = sha256_file(path)?;
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256 });
        Ok(self)
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.rng_seed = Some(seed);
        self
    }

    /// Run `f`, recording its duration under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.timings.entry(phase.to_string()).or_default() += start.elapsed().as_secs_f64();
        out
    }

    pub fn finish(&self) -> RunManifest {
        RunManifest {
            command: self.command.clone(),
            config: self.config.clone(),
            inputs: self.inputs.clone(),
            rng_seed: self.rng_seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: self.started.to_rfc3339_opts(SecondsFormat::Millis, true),
            finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            wall_seconds: self.clock.elapsed().as_secs_f64(),
            timings: self.timings.clone(),
        }
    }
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// `<output>.manifest.json` beside a primary output file.
    pub fn path_for(output: impl AsRef<Path>) -> PathBuf {
        let mut name = output.as_ref().as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write_beside(&self, output: impl AsRef<Path>) -> io::Result<PathBuf> {
        let path = Self::path_for(output);
        std::fs::write(&path, self.to_json())?;
        Ok(path)
    }
}
