//! Episodic meta-training: configuration, episode sampling, the focal
//! objective, batched updates, inductive inference, and cross-validation.

pub mod adam;
pub mod episode;
pub mod trainer;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::FallbackMode;
use crate::model::ModelConfig;

pub use adam::{Optimizer, OptimizerKind};
pub use episode::{CopulaScope, Episode, QueryInput, SplitCopula};
pub use trainer::{
    cross_validate, evaluate_single_split, focal_loss, focal_loss_gradient, infer_one, meta_update,
    stratified_folds, train, train_subset, write_loss_trace, CvOutcome, TrainOutcome,
};

/// Training configuration. Field names double as the config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Support subjects per class per episode.
    pub q: usize,
    /// Episodes per iteration (batch size B).
    pub episodes_per_iteration: usize,
    pub iterations: usize,
    /// Neighbor budget of the KNN sparsification.
    pub knn_k: usize,
    /// Distance threshold for edge retention.
    pub tau: f64,
    pub learning_rate: f64,
    /// Dropout rate on attention coefficients during training.
    pub dropout: f64,
    pub focal_gamma: f64,
    /// Shrinkage intensity; unset means the Ledoit-Wolf estimate
    /// (config value "auto").
    pub lambda: Option<f64>,
    pub seed: u64,
    /// Append the one-hot support-label channel to node features.
    pub label_channel: bool,
    pub fold_count: usize,
    /// Support redraws averaged per query at inference (R).
    pub infer_ensemble: usize,
    pub optimizer: OptimizerKind,
    /// Where rank statistics are computed: per episode or over the split.
    pub copula_scope: CopulaScope,
    pub fallback: FallbackMode,
    pub head_dim_1: usize,
    pub heads_1: usize,
    pub head_dim_2: usize,
    pub heads_2: usize,
    pub classifier_hidden: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            q: 10,
            episodes_per_iteration: 32,
            iterations: 1200,
            knn_k: 6,
            tau: 1.0,
            learning_rate: 0.01,
            dropout: 0.2,
            focal_gamma: 2.0,
            lambda: Some(0.85),
            seed: 42,
            label_channel: true,
            fold_count: 5,
            infer_ensemble: 5,
            optimizer: OptimizerKind::Adam,
            copula_scope: CopulaScope::Episode,
            fallback: FallbackMode::On,
            head_dim_1: 16,
            heads_1: 4,
            head_dim_2: 32,
            heads_2: 2,
            classifier_hidden: 32,
        }
    }
}

/// Shrinkage setting in config files: a number in `[0,1]` or "auto" for
/// the Ledoit-Wolf estimate.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LambdaSetting {
    Fixed(f64),
    Named(String),
}

/// Optional overlay parsed from the flat key-value config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigOverlay {
    q: Option<usize>,
    episodes_per_iteration: Option<usize>,
    iterations: Option<usize>,
    knn_k: Option<usize>,
    tau: Option<f64>,
    learning_rate: Option<f64>,
    dropout: Option<f64>,
    focal_gamma: Option<f64>,
    lambda: Option<LambdaSetting>,
    seed: Option<u64>,
    label_channel: Option<bool>,
    fold_count: Option<usize>,
    infer_ensemble: Option<usize>,
    optimizer: Option<OptimizerKind>,
    copula_scope: Option<CopulaScope>,
    fallback: Option<FallbackMode>,
    head_dim_1: Option<usize>,
    heads_1: Option<usize>,
    head_dim_2: Option<usize>,
    heads_2: Option<usize>,
    classifier_hidden: Option<usize>,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("q", self.q),
            ("episodes_per_iteration", self.episodes_per_iteration),
            ("knn_k", self.knn_k),
            ("infer_ensemble", self.infer_ensemble),
            ("head_dim_1", self.head_dim_1),
            ("heads_1", self.heads_1),
            ("head_dim_2", self.head_dim_2),
            ("heads_2", self.heads_2),
            ("classifier_hidden", self.classifier_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config("tau must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        if !(self.focal_gamma >= 0.0) {
            return Err(Error::Config("focal_gamma must be >= 0".into()));
        }
        if let Some(l) = self.lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::Config("lambda must be in [0, 1]".into()));
            }
        }
        if self.fold_count < 2 {
            return Err(Error::Config("fold_count must be >= 2".into()));
        }
        Ok(())
    }

    /// Derive the model architecture for a dataset.
    pub fn model_config(&self, dataset: &Dataset) -> Result<ModelConfig> {
        let config = ModelConfig {
            num_classes: dataset.num_classes(),
            feature_dim: dataset.num_features(),
            partition: dataset.partition.clone(),
            label_channel: self.label_channel,
            head_dim_1: self.head_dim_1,
            heads_1: self.heads_1,
            head_dim_2: self.head_dim_2,
            heads_2: self.heads_2,
            classifier_hidden: self.classifier_hidden,
        };
        config.validate()?;
        Ok(config)
    }

    /// Overlay values from a flat TOML key-value file; file values win.
    pub fn apply_file(&mut self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_toml(&text)
    }

    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let overlay: ConfigOverlay =
            toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))?;
        // Stage on a copy so a failed validation leaves self untouched.
        let mut staged = self.clone();
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = overlay.$field { staged.$field = v; })*
            };
        }
        apply!(
            q,
            episodes_per_iteration,
            iterations,
            knn_k,
            tau,
            learning_rate,
            dropout,
            focal_gamma,
            seed,
            label_channel,
            fold_count,
            infer_ensemble,
            optimizer,
            copula_scope,
            fallback,
            head_dim_1,
            heads_1,
            head_dim_2,
            heads_2,
            classifier_hidden
        );
        match overlay.lambda {
            None => {}
            Some(LambdaSetting::Fixed(v)) => staged.lambda = Some(v),
            Some(LambdaSetting::Named(name)) if name == "auto" => staged.lambda = None,
            Some(LambdaSetting::Named(name)) => {
                return Err(Error::Config(format!(
                    "lambda must be a number in [0,1] or \"auto\", got \"{name}\""
                )))
            }
        }
        staged.validate()?;
        *self = staged;
        Ok(())
    }

    /// Set a single field from string key/value (CLI overrides, FFI).
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        let line = format!("{key} = {}", toml_value(key, value));
        self.apply_toml(&line)
    }
}

fn toml_value(key: &str, value: &str) -> String {
    match key {
        "optimizer" | "copula_scope" | "fallback" => format!("\"{value}\""),
        "lambda" if value == "auto" => "\"auto\"".to_string(),
        _ => value.to_string(),
    }
}
