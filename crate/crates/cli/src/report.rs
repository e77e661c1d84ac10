//! Run reports: a JSON record with the config echo and a sorted metrics map.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub type Metrics = BTreeMap<String, Value>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    /// Command name plus a hash of the config echo.
    pub experiment_id: String,
    /// Seconds since the Unix epoch; the only field that differs between reruns.
    pub timestamp: u64,
    pub config: ExperimentConfig,
    pub metrics: Metrics,
    pub artifacts: Vec<PathBuf>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3)
    })
}

impl ReportRecord {
    pub fn new(config: ExperimentConfig, metrics: Metrics, artifacts: Vec<PathBuf>) -> Self {
        let echo = serde_json::to_vec(&config).expect("config serializes");
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            experiment_id: format!("{}-{:016x}", config.command.name(), fnv1a(&echo)),
            timestamp,
            config,
            metrics,
            artifacts,
        }
    }

    /// Metrics serialized on their own, for byte-level comparisons between runs.
    pub fn metrics_json(&self) -> String {
        serde_json::to_string(&self.metrics).expect("metrics serialize")
    }

    pub fn default_path(&self) -> PathBuf {
        self.config
            .out
            .join(format!("{}-report.json", self.config.command.name()))
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Output {
            path: dir.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Output {
        path: path.display().to_string(),
        source,
    })
}

pub fn emit_report(rec: &ReportRecord, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(rec).expect("report serializes");
    text.push('\n');
    write_text(path, &text)
}

pub fn load_report(path: &Path) -> Result<ReportRecord, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Output {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::validation("report", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CommandConfig, VerifyConfig};

    fn minimal() -> ReportRecord {
        let cfg = ExperimentConfig {
            seed: 7,
            out: PathBuf::from("results"),
            command: CommandConfig::Verify(VerifyConfig {}),
        };
        let mut m = Metrics::new();
        m.insert("b".into(), Value::from(0.1 + 0.2));
        m.insert("a".into(), Value::from(3));
        ReportRecord::new(cfg, m, vec![])
    }

    #[test]
    fn minimal_record_round_trips() {
        let rec = minimal();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        emit_report(&rec, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["config"]["command"], "verify");
        assert_eq!(load_report(&path).unwrap(), rec);
    }

    #[test]
    fn keys_are_sorted_and_id_is_stable() {
        let rec = minimal();
        assert_eq!(rec.metrics_json(), "{\"a\":3,\"b\":0.30000000000000004}");
        assert_eq!(rec.experiment_id, minimal().experiment_id);
        assert!(rec.experiment_id.starts_with("verify-"));
    }
}
