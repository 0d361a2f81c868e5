//! Run configuration and its reproducibility hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use triage_core::dataset::DatasetConfig;
use triage_core::gbdt::GbdtConfig;
use triage_core::impute::ImputeConfig;
use triage_core::pipeline::PreprocessConfig;
use triage_core::synth::SynthConfig;

use crate::error::CliError;

/// Files replacing the compiled-in scoring tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFiles {
    pub tags: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Stages {
    pub preprocess: bool,
    pub impute: bool,
    pub dataset: bool,
    pub train: bool,
    pub evaluate: bool,
    pub analyze: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Stages { preprocess: true, impute: true, dataset: true, train: true, evaluate: true, analyze: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub gbdt: GbdtConfig,
    /// Weight samples by inverse class frequency of the training split.
    pub class_weighting: bool,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings { gbdt: GbdtConfig::multiclass(4), class_weighting: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    /// Feature columns (by schema name) fed to correlation and PCA.
    pub features: Vec<String>,
    /// Number of top features kept in the importance export.
    pub importance_top_k: usize,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        let features = ["resp_rate", "spo2", "heart_rate", "sbp", "dbp", "temperature", "age", "bmi", "map"];
        AnalysisSettings { features: features.iter().map(|s| s.to_string()).collect(), importance_top_k: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Raw vitals CSV. Without it, `run` generates synthetic input.
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub matrix: Option<MatrixFiles>,
    pub stages: Stages,
    pub synth: SynthConfig,
    pub preprocess: PreprocessConfig,
    pub impute: ImputeConfig,
    pub dataset: DatasetConfig,
    pub train: TrainSettings,
    pub analysis: AnalysisSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            input: None,
            output_dir: PathBuf::from("out"),
            matrix: None,
            stages: Stages::default(),
            synth: SynthConfig::default(),
            preprocess: PreprocessConfig::default(),
            impute: ImputeConfig::default(),
            dataset: DatasetConfig::default(),
            train: TrainSettings::default(),
            analysis: AnalysisSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input("config", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::input("config", format!("{}: {e}", path.display())))
    }

    /// Applies the `--seed` override and propagates the run seed to the
    /// learners so one number controls every random choice.
    pub fn effective(mut self, seed: Option<u64>) -> Result<RunConfig, CliError> {
        if let Some(s) = seed {
            self.seed = s;
        }
        self.train.gbdt.seed = self.seed;
        self.impute.regressor.seed = self.seed;
        self.impute.validate().map_err(|e| CliError::input("config", e.to_string()))?;
        self.train.gbdt.validate().map_err(|e| CliError::input("config", e.to_string()))?;
        if self.train.gbdt.n_classes != 4 {
            return Err(CliError::input("config", "train.gbdt.n_classes must be 4"));
        }
        Ok(self)
    }

    /// SHA-256 of the configuration with file locations removed, so moving
    /// a run to another directory keeps its hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.input = None;
        c.output_dir = PathBuf::new();
        c.matrix = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
