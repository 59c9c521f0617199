//! End-to-end experiment orchestration: an initial round over a dataset plus
//! correction rounds over the failures, with transcripts as the single
//! source of truth for metrics and resumption.

mod metrics;
mod report;
mod runner;
mod transcript;

pub use metrics::{compute_metrics, metrics_from_aggregates, MetricsTable, RoundAggregate, RoundMetrics};
pub use report::{parse_report_csv, render_csv, render_markdown, CsvRow};
pub use runner::{
    load_any_dataset, resume_experiment, run_experiment, run_from_config, AnyDataset, RoundResult,
    RunOptions, RunOutcome,
};
pub use transcript::{
    read_transcript, repair_transcript, FailureRecord, TranscriptRecord, TranscriptWriter,
    UsageRecord, Verdict,
};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bwgen::GenError;
use crate::crt::CrtError;
use crate::gateway::{Gateway, GatewayConfig, GatewayError, HttpBackend, MockBackend, MockRule, PricingTable, ScriptKey};
use crate::prompting::{builtin_strategy, Strategy, StrategySource};

#[derive(Error, Debug)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("gateway: {0}")]
    Gateway(#[from] GatewayError),
    #[error("transcript does not match the scripted backend: {0}")]
    ReplayMismatch(String),
}

impl From<GenError> for HarnessError {
    fn from(e: GenError) -> HarnessError {
        HarnessError::Dataset(e.to_string())
    }
}

impl From<CrtError> for HarnessError {
    fn from(e: CrtError) -> HarnessError {
        HarnessError::Dataset(e.to_string())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMode {
    ErrorFeedback,
    Repeat,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMode {
    Rule,
    Llm,
}

/// One scripted mock behavior, as written in config files.
#[derive(Clone, Default, Debug, Serialize, Deserialize)]
pub struct ScriptEntry {
    /// Substring of the user message this rule answers; absent = match all.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub responses: Vec<String>,
    /// Files whose contents are appended to `responses`, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub response_files: Vec<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default, rename = "script", skip_serializing_if = "Vec::is_empty")]
    pub scripts: Vec<ScriptEntry>,
}

fn default_api_key_env() -> String {
    "OPENAI_API_KEY".to_string()
}

impl Default for BackendConfig {
    fn default() -> BackendConfig {
        BackendConfig {
            kind: "mock".into(),
            base_url: None,
            api_key_env: default_api_key_env(),
            scripts: Vec::new(),
        }
    }
}

/// Experiment description as read from a TOML file. Modes left unset are
/// resolved per dataset kind when the run starts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub model: String,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correction_mode: Option<CorrectionMode>,
    #[serde(default = "default_extraction")]
    pub extraction_mode: ExtractionMode,
    /// Model used by the llm extraction mode.
    #[serde(default = "default_summarizer")]
    pub summarizer_model: String,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub backend: BackendConfig,
    /// Pricing override file; the built-in table is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pricing_file: Option<PathBuf>,
}

fn default_strategy() -> String {
    "none".to_string()
}

fn default_extraction() -> ExtractionMode {
    ExtractionMode::Rule
}

fn default_summarizer() -> String {
    "4o".to_string()
}

fn default_concurrency() -> usize {
    4
}

/// The config after defaults are resolved against the dataset kind; this is
/// what gets hashed into the run id and stored beside the transcript.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub dataset: PathBuf,
    pub dataset_kind: String,
    pub dataset_size: usize,
    pub model: String,
    pub strategy: String,
    pub rounds: u32,
    pub correction_mode: CorrectionMode,
    pub extraction_mode: ExtractionMode,
    pub summarizer_model: String,
    pub concurrency: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub backend: BackendConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pricing_file: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_file(path: &Path) -> Result<ExperimentConfig, HarnessError> {
        let text = fs::read_to_string(path)?;
        let config: ExperimentConfig = toml::from_str(&text)?;
        Ok(config)
    }

    /// Applies per-kind defaults and checks the cross-field rules. Growth
    /// puzzles have no validator feedback, so they only support repetition:
    /// four correction rounds by default for planning, two for puzzles.
    pub fn resolve(&self, dataset_kind: &str, dataset_size: usize) -> Result<ResolvedConfig, HarnessError> {
        let (default_rounds, default_mode) = match dataset_kind {
            "bw" => (4, CorrectionMode::ErrorFeedback),
            "crt" => (2, CorrectionMode::Repeat),
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown dataset kind {other:?}"
                )))
            }
        };
        let correction_mode = self.correction_mode.unwrap_or(default_mode);
        if dataset_kind == "crt" && correction_mode == CorrectionMode::ErrorFeedback {
            return Err(HarnessError::Config(
                "error_feedback requires a planning dataset; growth puzzles support only repeat".into(),
            ));
        }
        if self.concurrency == 0 {
            return Err(HarnessError::Config("concurrency must be positive".into()));
        }
        match self.backend.kind.as_str() {
            "mock" | "http" => {}
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown backend kind {other:?}"
                )))
            }
        }
        Ok(ResolvedConfig {
            dataset: self.dataset.clone(),
            dataset_kind: dataset_kind.to_string(),
            dataset_size,
            model: self.model.clone(),
            strategy: self.strategy.clone(),
            rounds: self.rounds.unwrap_or(default_rounds),
            correction_mode,
            extraction_mode: self.extraction_mode,
            summarizer_model: self.summarizer_model.clone(),
            concurrency: self.concurrency,
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            backend: self.backend.clone(),
            pricing_file: self.pricing_file.clone(),
        })
    }
}

impl ResolvedConfig {
    /// Twelve hex digits identifying the experiment; prefixes every
    /// transcript line. Disk locations and the concurrency cap are excluded:
    /// they change where and how fast a run executes, never what it records,
    /// so the same experiment keeps its identity (and its byte-identical
    /// transcript) across directories and thread counts.
    pub fn run_id(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(map) = &mut value {
            map.remove("dataset");
            map.remove("output_dir");
            map.remove("pricing_file");
            map.remove("concurrency");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn resolve_strategy(&self, config_dir: &Path) -> Result<Option<Strategy>, HarnessError> {
        resolve_strategy_ref(&self.strategy, config_dir)
    }

    pub fn build_pricing(&self, config_dir: &Path) -> Result<PricingTable, HarnessError> {
        match &self.pricing_file {
            None => Ok(PricingTable::builtin()),
            Some(path) => {
                let path = config_dir.join(path);
                Ok(PricingTable::from_toml(&fs::read_to_string(path)?)?)
            }
        }
    }

    /// Builds the gateway this config describes. Mock backends cache and
    /// skip the raw log; HTTP backends log raw exchanges and do not cache.
    pub fn build_gateway(&self, config_dir: &Path) -> Result<Gateway, HarnessError> {
        let pricing = self.build_pricing(config_dir)?;
        match self.backend.kind.as_str() {
            "mock" => {
                let mut rules = Vec::new();
                for entry in &self.backend.scripts {
                    let mut responses = entry.responses.clone();
                    for file in &entry.response_files {
                        responses.push(fs::read_to_string(config_dir.join(file))?);
                    }
                    let key = match &entry.contains {
                        Some(needle) => ScriptKey::UserContains(needle.clone()),
                        None => ScriptKey::Any,
                    };
                    rules.push(MockRule::new(key, responses));
                }
                let config = GatewayConfig {
                    concurrency: self.concurrency,
                    cache: true,
                    ..GatewayConfig::default()
                };
                Ok(Gateway::new(Box::new(MockBackend::new(rules)), pricing, config))
            }
            "http" => {
                let base = self.backend.base_url.as_deref().ok_or_else(|| {
                    HarnessError::Config("http backend needs base_url".into())
                })?;
                let backend = HttpBackend::from_env(base, &self.backend.api_key_env)
                    .map_err(|e| HarnessError::Config(format!("api key: {e:?}")))?;
                let config = GatewayConfig {
                    concurrency: self.concurrency,
                    cache: false,
                    ..GatewayConfig::default()
                };
                fs::create_dir_all(&self.output_dir)?;
                let gateway = Gateway::new(Box::new(backend), pricing, config)
                    .with_raw_log(&self.output_dir.join("raw_exchanges.jsonl"))?;
                Ok(gateway)
            }
            other => Err(HarnessError::Config(format!("unknown backend kind {other:?}"))),
        }
    }
}

/// Interprets a strategy reference: "none", a built-in name, or a file path.
pub fn resolve_strategy_ref(reference: &str, config_dir: &Path) -> Result<Option<Strategy>, HarnessError> {
    if reference == "none" || reference.is_empty() {
        return Ok(None);
    }
    if let Some(strategy) = builtin_strategy(reference) {
        return Ok(Some(strategy));
    }
    let path = config_dir.join(reference);
    if !path.exists() {
        return Err(HarnessError::Config(format!(
            "strategy {reference:?} is neither a built-in name nor a file"
        )));
    }
    let body = fs::read_to_string(&path)?;
    let source = if reference.contains("generated") {
        StrategySource::Generated
    } else {
        StrategySource::Handwritten
    };
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| reference.to_string());
    Strategy::new(&id, source, &body)
        .map(Some)
        .map_err(|e| HarnessError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(kind: &str) -> ResolvedConfig {
        let config: ExperimentConfig = toml::from_str(
            "dataset = \"ds\"\nmodel = \"o1-mini\"\noutput_dir = \"out\"\n",
        )
        .unwrap();
        config.resolve(kind, 10).unwrap()
    }

    #[test]
    fn defaults_depend_on_dataset_kind() {
        let bw = minimal("bw");
        assert_eq!(bw.rounds, 4);
        assert_eq!(bw.correction_mode, CorrectionMode::ErrorFeedback);
        let crt = minimal("crt");
        assert_eq!(crt.rounds, 2);
        assert_eq!(crt.correction_mode, CorrectionMode::Repeat);
        assert_eq!(crt.extraction_mode, ExtractionMode::Rule);
        assert_eq!(crt.concurrency, 4);
    }

    #[test]
    fn error_feedback_on_puzzles_is_rejected() {
        let config: ExperimentConfig = toml::from_str(
            "dataset = \"ds\"\nmodel = \"o1\"\noutput_dir = \"out\"\ncorrection_mode = \"error_feedback\"\n",
        )
        .unwrap();
        assert!(config.resolve("bw", 1).is_ok());
        assert!(matches!(config.resolve("crt", 1), Err(HarnessError::Config(_))));
    }

    #[test]
    fn run_ids_are_stable_and_config_sensitive() {
        let a = minimal("bw");
        let b = minimal("bw");
        assert_eq!(a.run_id(), b.run_id());
        assert_eq!(a.run_id().len(), 12);
        let mut c = minimal("bw");
        c.seed = 99;
        assert_ne!(a.run_id(), c.run_id());
    }

    #[test]
    fn strategy_references_resolve() {
        let dir = tempfile::tempdir().unwrap();
        assert!(resolve_strategy_ref("none", dir.path()).unwrap().is_none());
        let builtin = resolve_strategy_ref("bw-handwritten", dir.path()).unwrap().unwrap();
        assert_eq!(builtin.source, StrategySource::Handwritten);
        std::fs::write(dir.path().join("custom_generated.txt"), "Always think ahead.").unwrap();
        let custom = resolve_strategy_ref("custom_generated.txt", dir.path()).unwrap().unwrap();
        assert_eq!(custom.source, StrategySource::Generated);
        assert_eq!(custom.body, "Always think ahead.");
        assert!(resolve_strategy_ref("missing.txt", dir.path()).is_err());
    }

    #[test]
    fn unknown_kinds_and_backends_are_rejected()  {
        let config: ExperimentConfig =
            toml::from_str("dataset = \"d\"\nmodel = \"o1\"\noutput_dir = \"o\"\n").unwrap();
        assert!(config.resolve("chess", 1).is_err());
        let mut bad = config.clone();
        bad.backend.kind = "telepathy".into();
        assert!(bad.resolve("bw", 1).is_err());
    }
}
