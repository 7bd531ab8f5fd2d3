use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

/// Record of one invocation. Rerunning `args` reproduces every verdict.
#[derive(Debug, Default, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub parameters: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, String>,
    pub error: Option<String>,
    pub exit_code: u8,
    pub elapsed_ms: f64,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            args: std::env::args().skip(1).collect(),
            ..Default::default()
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn param(&mut self, name: &str, value: f64) {
        self.parameters.insert(name.into(), value);
    }

    pub fn tolerance(&mut self, name: &str, value: f64) {
        self.tolerances.insert(name.into(), value);
    }

    pub fn verdict(&mut self, name: &str, value: impl ToString) {
        self.verdicts.insert(name.into(), value.to_string());
    }
}
