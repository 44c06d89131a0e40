use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// Everything needed to reproduce a run. Written next to the primary output
/// as `<output>.manifest.json`; the outputs themselves carry no timestamps.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Value,
    pub seed: u64,
    pub version: String,
    /// Named random streams derived from `seed`.
    pub substreams: Vec<&'static str>,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn path_for(output: &Path) -> PathBuf {
        let mut s = output.as_os_str().to_owned();
        s.push(".manifest.json");
        PathBuf::from(s)
    }
}

pub fn version() -> String {
    format!("hypernb {}", env!("CARGO_PKG_VERSION"))
}
