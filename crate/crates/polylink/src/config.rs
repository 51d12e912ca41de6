//! Flat run configuration: one TOML file of top-level typed keys, fully
//! defaulted, with the effective config serializable back out so every run's
//! settings are diffable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{Regime, SplitSpec};
use crate::error::{Error, Result};
use crate::ingest::{IngestPaths, IngestSchema};
use crate::model::Mode;
use crate::trainer::{Optimizer, TrainConfig};

/// How feature support is counted: over the deduplicated training-positive
/// pairs, or over every unordered drug pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportCounting {
    TrainPositives,
    AllPairs,
}

impl SupportCounting {
    pub fn as_str(self) -> &'static str {
        match self {
            SupportCounting::TrainPositives => "train_positives",
            SupportCounting::AllPairs => "all_pairs",
        }
    }

    pub fn parse(s: &str) -> Result<SupportCounting> {
        match s {
            "train_positives" => Ok(SupportCounting::TrainPositives),
            "all_pairs" => Ok(SupportCounting::AllPairs),
            other => Err(Error::Config(format!("unknown support_counting '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    // dataset files
    pub ppi_file: PathBuf,
    pub targets_file: PathBuf,
    pub combo_file: PathBuf,
    pub mono_file: PathBuf,
    pub delimiter: String,
    // column mapping
    pub ppi_gene_a_col: String,
    pub ppi_gene_b_col: String,
    pub target_drug_col: String,
    pub target_gene_col: String,
    pub combo_drug_a_col: String,
    pub combo_drug_b_col: String,
    pub combo_effect_col: String,
    pub combo_effect_name_col: String,
    pub mono_drug_col: String,
    pub mono_effect_col: String,
    pub mono_effect_name_col: String,
    // splits
    pub train_fraction: f64,
    pub valid_fraction: f64,
    pub test_fraction: f64,
    // experiment
    pub regime: String,
    pub mode: String,
    // features
    pub min_support: usize,
    pub support_counting: String,
    // training
    pub dim: usize,
    pub negatives_per_positive: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: String,
    pub max_epochs: usize,
    pub patience: usize,
    pub l2: f64,
    // evaluation
    pub ap_k: usize,
    pub include_baseline: bool,
    pub explain_top_n: usize,
    // run control
    pub seed: u64,
    pub threads: usize,
    pub deterministic: bool,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let schema = IngestSchema::default();
        RunConfig {
            ppi_file: "data/bio-decagon-ppi.csv".into(),
            targets_file: "data/bio-decagon-targets.csv".into(),
            combo_file: "data/bio-decagon-combo.csv".into(),
            mono_file: "data/bio-decagon-mono.csv".into(),
            delimiter: schema.delimiter.to_string(),
            ppi_gene_a_col: schema.ppi_col_a,
            ppi_gene_b_col: schema.ppi_col_b,
            target_drug_col: schema.targets_col_drug,
            target_gene_col: schema.targets_col_protein,
            combo_drug_a_col: schema.combo_col_drug_a,
            combo_drug_b_col: schema.combo_col_drug_b,
            combo_effect_col: schema.combo_col_effect,
            combo_effect_name_col: schema.combo_col_effect_name,
            mono_drug_col: schema.mono_col_drug,
            mono_effect_col: schema.mono_col_effect,
            mono_effect_name_col: schema.mono_col_effect_name,
            train_fraction: 0.8,
            valid_fraction: 0.1,
            test_fraction: 0.1,
            regime: Regime::Full.as_str().to_string(),
            mode: Mode::Combined.as_str().to_string(),
            min_support: 10,
            support_counting: SupportCounting::TrainPositives.as_str().to_string(),
            dim: 100,
            negatives_per_positive: 10,
            batch_size: 128,
            learning_rate: 0.1,
            optimizer: Optimizer::AdaGrad.as_str().to_string(),
            max_epochs: 60,
            patience: 5,
            l2: 1e-4,
            ap_k: 50,
            include_baseline: false,
            explain_top_n: 5,
            seed: 17,
            threads: 1,
            deterministic: false,
            out_dir: "out".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The effective config as TOML — also the documented default table when
    /// rendered from `RunConfig::default()`.
    pub fn render(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.split_spec().validate()?;
        Regime::parse(&self.regime)?;
        Mode::parse(&self.mode)?;
        Optimizer::parse(&self.optimizer)?;
        SupportCounting::parse(&self.support_counting)?;
        if self.delimiter.as_bytes().len() != 1 {
            return Err(Error::Config("delimiter must be a single byte".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.deterministic && self.threads != 1 {
            return Err(Error::Config("deterministic mode requires threads = 1".into()));
        }
        if self.ap_k == 0 {
            return Err(Error::Config("ap_k must be at least 1".into()));
        }
        self.train_config().validate()?;
        Ok(())
    }

    pub fn ingest_paths(&self) -> IngestPaths {
        IngestPaths {
            ppi: self.ppi_file.clone(),
            targets: self.targets_file.clone(),
            combo: self.combo_file.clone(),
            mono: self.mono_file.clone(),
        }
    }

    pub fn ingest_schema(&self) -> IngestSchema {
        IngestSchema {
            delimiter: self.delimiter.as_bytes()[0] as char,
            ppi_col_a: self.ppi_gene_a_col.clone(),
            ppi_col_b: self.ppi_gene_b_col.clone(),
            targets_col_drug: self.target_drug_col.clone(),
            targets_col_protein: self.target_gene_col.clone(),
            combo_col_drug_a: self.combo_drug_a_col.clone(),
            combo_col_drug_b: self.combo_drug_b_col.clone(),
            combo_col_effect: self.combo_effect_col.clone(),
            combo_col_effect_name: self.combo_effect_name_col.clone(),
            mono_col_drug: self.mono_drug_col.clone(),
            mono_col_effect: self.mono_effect_col.clone(),
            mono_col_effect_name: self.mono_effect_name_col.clone(),
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train: self.train_fraction,
            valid: self.valid_fraction,
            test: self.test_fraction,
            seed: self.seed,
        }
    }

    pub fn regime(&self) -> Regime {
        Regime::parse(&self.regime).expect("validated")
    }

    pub fn mode(&self) -> Mode {
        Mode::parse(&self.mode).expect("validated")
    }

    pub fn support_counting(&self) -> SupportCounting {
        SupportCounting::parse(&self.support_counting).expect("validated")
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            negatives_per_positive: self.negatives_per_positive,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            optimizer: Optimizer::parse(&self.optimizer).unwrap_or(Optimizer::AdaGrad),
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            mode: Mode::parse(&self.mode).unwrap_or(Mode::Combined),
            l2: self.l2,
        }
    }

    /// SHA-256 of the effective config rendering.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.render().as_bytes()))
    }
}
