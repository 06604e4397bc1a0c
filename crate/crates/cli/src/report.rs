use std::path::{Path, PathBuf};

use choquet_core::rational::{fmt_q, to_f64, Q};
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// Directory used for reports when `--out` is absent.
pub const OUT_DIR_ENV: &str = "CHOQUET_OUT_DIR";

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub config: Value,
    pub results: Value,
    pub warnings: Vec<String>,
    /// Last so that everything above it is byte-comparable between runs.
    pub timing_ms: u128,
}

impl Report {
    pub fn new(command: &str, config: Value) -> Self {
        Report {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            results: Value::Null,
            warnings: Vec::new(),
            timing_ms: 0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Where the report goes: `--out`, else `$CHOQUET_OUT_DIR/<command>.json`, else nowhere.
    pub fn destination(&self, out: Option<&Path>) -> Option<PathBuf> {
        out.map(Path::to_path_buf).or_else(|| {
            std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(format!("{}.json", self.command)))
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(path, self.to_json() + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

/// Exact value plus a decimal rendering for reading.
pub fn rat(x: &Q) -> Value {
    json!({ "exact": fmt_q(x), "decimal": to_f64(x) })
}
