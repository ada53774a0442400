//! Sweep configuration: JSON-serializable description of the full
//! dataset x model x mechanism x epsilon x run factorial.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{AnalogueKind, SyntheticKind};
use crate::dp::Mechanism;
use crate::error::{Error, Result};
use crate::models::{IforestParams, ModelKind};
use crate::shap::BackgroundSelection;

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetRef {
    /// CSV on disk; `descriptor` names an entry of the descriptor manifest to
    /// validate against.
    Csv {
        name: String,
        path: PathBuf,
        label_column: String,
        #[serde(default)]
        descriptor: Option<String>,
    },
    /// Deterministic synthetic benchmark.
    Synthetic {
        name: String,
        kind: SyntheticKind,
        n_normal: usize,
        n_anomalies: usize,
        d: usize,
        gen_seed: u64,
    },
    /// Desk-scale analogue of one of the public benchmarks.
    Analogue { kind: AnalogueKind, gen_seed: u64 },
}

impl DatasetRef {
    pub fn name(&self) -> String {
        match self {
            DatasetRef::Csv { name, .. } | DatasetRef::Synthetic { name, .. } => name.clone(),
            DatasetRef::Analogue { kind, .. } => kind.name().to_string(),
        }
    }
}

/// How per-feature sensitivities are chosen before noise calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SensitivityMode {
    /// Empirical per-feature range of the clean training rows (default).
    EmpiricalRange,
    /// One fixed value for every feature (a global domain-bound surrogate).
    Fixed { value: f64 },
    /// Explicit per-feature vector.
    FixedVector { values: Vec<f64> },
}

impl Default for SensitivityMode {
    fn default() -> Self {
        SensitivityMode::EmpiricalRange
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapSettings {
    /// Background points subsampled from the explained model's training data.
    #[serde(default = "default_background_size")]
    pub background_size: usize,
    #[serde(default = "default_background_selection")]
    pub background_selection: BackgroundSelection,
    /// Sampled coalitions when d exceeds the enumeration limit.
    #[serde(default = "default_n_coalitions")]
    pub n_coalitions: usize,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    /// Explained points per arm (prefix of the evaluation subsample); `None`
    /// explains every evaluation point.
    #[serde(default)]
    pub max_points: Option<usize>,
}

fn default_background_size() -> usize {
    100
}
fn default_background_selection() -> BackgroundSelection {
    BackgroundSelection::RandomSubsample
}
fn default_n_coalitions() -> usize {
    2048
}
fn default_ridge() -> f64 {
    1e-8
}

impl Default for ShapSettings {
    fn default() -> Self {
        Self {
            background_size: default_background_size(),
            background_selection: default_background_selection(),
            n_coalitions: default_n_coalitions(),
            ridge: default_ridge(),
            max_points: None,
        }
    }
}

/// Hyperparameter policy: fixed parameters, or a grid tuned once per
/// (dataset, model) on a held-out tuning subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TuningConfig {
    Fixed {
        #[serde(default)]
        iforest: IforestParams,
        #[serde(default = "default_lof_k")]
        lof_k: usize,
    },
    Grid {
        #[serde(default = "default_grid_estimators")]
        iforest_n_estimators: Vec<usize>,
        #[serde(default)]
        iforest_max_features: Vec<usize>,
        #[serde(default = "default_grid_k")]
        lof_k: Vec<usize>,
        #[serde(default = "default_n_folds")]
        n_folds: usize,
        /// Rows carved out for tuning, stratified by label.
        #[serde(default = "default_tuning_subset")]
        subset_size: usize,
    },
}

fn default_lof_k() -> usize {
    20
}
fn default_grid_estimators() -> Vec<usize> {
    vec![50, 100, 200]
}
fn default_grid_k() -> Vec<usize> {
    vec![10, 20, 40]
}
fn default_n_folds() -> usize {
    3
}
fn default_tuning_subset() -> usize {
    600
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig::Fixed {
            iforest: IforestParams::default(),
            lof_k: default_lof_k(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub datasets: Vec<DatasetRef>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default = "default_mechanisms")]
    pub mechanisms: Vec<Mechanism>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Standardize features before noise injection and fitting.
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub sensitivity: SensitivityMode,
    #[serde(default)]
    pub shap: ShapSettings,
    /// Evaluation points (stratified by label); `None` evaluates every row
    /// outside the tuning subset.
    #[serde(default = "default_eval_subsample")]
    pub eval_subsample: Option<usize>,
    #[serde(default)]
    pub tuning: TuningConfig,
}

fn default_models() -> Vec<ModelKind> {
    vec![ModelKind::Iforest, ModelKind::Lof]
}
fn default_mechanisms() -> Vec<Mechanism> {
    vec![Mechanism::Laplace, Mechanism::Gaussian]
}
fn default_epsilons() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 5.0]
}
fn default_runs() -> usize {
    5
}
fn default_true() -> bool {
    true
}
fn default_delta() -> f64 {
    1e-5
}
fn default_eval_subsample() -> Option<usize> {
    Some(1000)
}

impl SweepConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let config: SweepConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::InvalidParameter("no datasets configured".into()));
        }
        if self.models.is_empty() {
            return Err(Error::InvalidParameter("no models configured".into()));
        }
        if self.mechanisms.is_empty() {
            return Err(Error::InvalidParameter("no mechanisms configured".into()));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidParameter(
                "epsilons must be a non-empty list of positive reals".into(),
            ));
        }
        if self.runs == 0 {
            return Err(Error::InvalidParameter("runs must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be in (0, 1), got {}",
                self.delta
            )));
        }
        if let SensitivityMode::Fixed { value } = &self.sensitivity {
            if !(*value >= 0.0) {
                return Err(Error::InvalidParameter(
                    "fixed sensitivity must be nonnegative".into(),
                ));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for ds in &self.datasets {
            if !names.insert(ds.name()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate dataset name {:?}",
                    ds.name()
                )));
            }
        }
        Ok(())
    }

    /// Number of factorial cells (baselines not included).
    pub fn cell_count(&self) -> usize {
        self.datasets.len()
            * self.models.len()
            * self.mechanisms.len()
            * self.epsilons.len()
            * self.runs
    }
}
