use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::updater::Mode;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum WeightSource {
    Seed {
        seed: u64,
    },
    File {
        path: String,
    },
    /// Oracle runs read no weights.
    Unused,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Pfm,
    Png16,
    Both,
}

impl OutputFormat {
    pub fn pfm(self) -> bool {
        matches!(self, OutputFormat::Pfm | OutputFormat::Both)
    }

    pub fn png16(self) -> bool {
        matches!(self, OutputFormat::Png16 | OutputFormat::Both)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputPaths {
    pub left: String,
    pub right: String,
    pub depth: Option<String>,
    pub gt: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub phase: String,
    pub mean_disparity: f64,
    /// Full-resolution EPE, present when ground truth was given.
    pub epe: Option<f64>,
}

/// Everything needed to rerun one inference bit for bit. Output paths are
/// relative to the output directory, and nothing time-dependent is stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: EngineConfig,
    pub mode: Mode,
    pub inputs: InputPaths,
    pub weights: WeightSource,
    pub format: OutputFormat,
    pub save_iters: bool,
    pub outputs: Vec<String>,
    pub iterations: Vec<IterationRecord>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

pub(crate) fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}
