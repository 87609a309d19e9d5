//! Reproducibility manifests written next to every CSV output.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

/// Snapshot written as `<output>.manifest.json`: the tool version, the
/// exact invocation, the effective seed/sample counts, and the full
/// configuration needed to regenerate the paired CSV bit-for-bit.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub command: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    /// Set when bound outputs substitute expectations for a stochastic
    /// delay model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub approximate: Option<bool>,
    pub outputs: Vec<String>,
    pub created_unix_ms: u128,
}

impl Manifest {
    pub fn new() -> Self {
        Manifest {
            version: env!("CARGO_PKG_VERSION"),
            command: std::env::args().collect(),
            seed: None,
            samples: None,
            config: None,
            approximate: None,
            outputs: Vec::new(),
            created_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn samples(mut self, samples: usize) -> Self {
        self.samples = Some(samples);
        self
    }

    pub fn config(mut self, config: serde_json::Value) -> Self {
        self.config = Some(config);
        self
    }

    pub fn approximate(mut self, approximate: bool) -> Self {
        if approximate {
            self.approximate = Some(true);
        }
        self
    }

    pub fn outputs(mut self, outputs: Vec<String>) -> Self {
        self.outputs = outputs;
        self
    }

    /// Writes `<csv_path>.manifest.json`.
    pub fn write_for(&self, csv_path: &Path) -> std::io::Result<()> {
        let mut path = csv_path.as_os_str().to_owned();
        path.push(".manifest.json");
        let body = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, body)
    }
}
