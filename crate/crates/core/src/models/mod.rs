//! Anomaly detectors (isolation forest, LOF), decision thresholding, and
//! hyperparameter grid search.

pub mod iforest;
pub mod lof;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics;
use crate::seeds;

pub use iforest::{fit_iforest, fit_iforest_matrix, IforestParams, IsolationForestModel};
pub use lof::{fit_lof, fit_lof_matrix, LofModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Iforest,
    Lof,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Iforest => "iforest",
            ModelKind::Lof => "lof",
        }
    }
}

/// A fitted detector exposing a pure scoring function over points, oriented
/// so that higher scores are more anomalous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScorer {
    pub model: FittedModel,
    /// Both wrapped models already emit higher-is-anomalous scores; the flag
    /// records the orientation for artifact consumers.
    pub higher_is_anomalous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedModel {
    Iforest(IsolationForestModel),
    Lof(LofModel),
}

impl AnomalyScorer {
    pub fn iforest(model: IsolationForestModel) -> Self {
        Self {
            model: FittedModel::Iforest(model),
            higher_is_anomalous: true,
        }
    }

    pub fn lof(model: LofModel) -> Self {
        Self {
            model: FittedModel::Lof(model),
            higher_is_anomalous: true,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match &self.model {
            FittedModel::Iforest(_) => ModelKind::Iforest,
            FittedModel::Lof(_) => ModelKind::Lof,
        }
    }

    pub fn score(&self, point: &ArrayView1<'_, f64>) -> f64 {
        match &self.model {
            FittedModel::Iforest(m) => m.score(point),
            FittedModel::Lof(m) => m.score(point),
        }
    }

    pub fn scores(&self, points: &ArrayView2<'_, f64>) -> Vec<f64> {
        match &self.model {
            FittedModel::Iforest(m) => m.scores(points),
            FittedModel::Lof(m) => m.scores(points),
        }
    }

    /// Digest of the serialized model, used to tie attributions to the model
    /// that produced them.
    pub fn model_tag(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("model serializes");
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        hex::encode(hasher.finalize())[..16].to_string()
    }
}

/// Parameters for either model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    Iforest(IforestParams),
    Lof { k: usize },
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Iforest(_) => ModelKind::Iforest,
            ModelParams::Lof { .. } => ModelKind::Lof,
        }
    }

    /// Ordering key for tie-breaks: smaller models win (fewer trees, then
    /// fewer candidate features; smaller k).
    fn size_key(&self) -> (usize, usize) {
        match self {
            ModelParams::Iforest(p) => (p.n_estimators, p.max_features.unwrap_or(usize::MAX)),
            ModelParams::Lof { k } => (*k, 0),
        }
    }
}

/// Fits the requested model on the dataset's feature matrix.
pub fn fit_model(data: &Dataset, params: &ModelParams, seed: u64) -> Result<AnomalyScorer> {
    fit_model_matrix(&data.features(), params, seed)
}

pub fn fit_model_matrix(
    features: &ArrayView2<'_, f64>,
    params: &ModelParams,
    seed: u64,
) -> Result<AnomalyScorer> {
    match params {
        ModelParams::Iforest(p) => Ok(AnomalyScorer::iforest(fit_iforest_matrix(
            features, p, seed,
        )?)),
        ModelParams::Lof { k } => Ok(AnomalyScorer::lof(fit_lof_matrix(features, *k)?)),
    }
}

/// Score threshold at the (1 - contamination) quantile of training scores
/// (linear interpolation between order statistics). Scores strictly above the
/// threshold become anomaly decisions.
pub fn decision_threshold(training_scores: &[f64], contamination: f64) -> Result<f64> {
    if training_scores.is_empty() {
        return Err(Error::InvalidParameter("no training scores".into()));
    }
    if !(0.0..1.0).contains(&contamination) {
        return Err(Error::InvalidParameter(format!(
            "contamination must be in [0, 1), got {contamination}"
        )));
    }
    let mut sorted = training_scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(metrics::quantile_sorted(&sorted, 1.0 - contamination))
}

pub fn decisions(scores: &[f64], threshold: f64) -> Vec<bool> {
    scores.iter().map(|&s| s > threshold).collect()
}

/// One candidate's cross-validation record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCandidate {
    pub params: ModelParams,
    pub fold_aucs: Vec<f64>,
    pub mean_auc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub best: ModelParams,
    pub candidates: Vec<GridCandidate>,
}

/// Exhaustive grid search with stratified n-fold cross-validation on a tuning
/// subset. Each fold's model is fit on the remaining folds' rows (features
/// only) and scored against the held-out fold's labels by AUC. Ties on mean
/// AUC go to the smaller model.
pub fn grid_search(
    data: &Dataset,
    grid: &[ModelParams],
    tuning_labels: &[bool],
    n_folds: usize,
    seed: u64,
) -> Result<GridSearchOutcome> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if tuning_labels.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            found: tuning_labels.len(),
        });
    }
    if n_folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "n_folds must be >= 2, got {n_folds}"
        )));
    }
    let folds = stratified_folds(tuning_labels, n_folds, seed);
    for fold in &folds {
        let anomalies = fold.iter().filter(|&&i| tuning_labels[i]).count();
        if anomalies == 0 || anomalies == fold.len() {
            return Err(Error::SingleClass(format!(
                "fold of size {} has {anomalies} anomalies",
                fold.len()
            )));
        }
    }

    // Candidates visited in ascending size order so the first strict winner
    // is also the smallest among ties.
    let mut ordered: Vec<ModelParams> = grid.to_vec();
    ordered.sort_by_key(ModelParams::size_key);

    let features = data.features();
    let mut candidates = Vec::with_capacity(ordered.len());
    let mut best: Option<(f64, ModelParams)> = None;
    for params in ordered {
        let mut fold_aucs = Vec::with_capacity(n_folds);
        for held_out in &folds {
            let train_rows: Vec<usize> = (0..data.n())
                .filter(|i| !held_out.contains(i))
                .collect();
            let train = features.select(ndarray::Axis(0), &train_rows);
            let scorer = fit_model_matrix(
                &train.view(),
                &params,
                seeds::mix(&[seed, fold_aucs.len() as u64]),
            )?;
            let held = features.select(ndarray::Axis(0), held_out);
            let scores = scorer.scores(&held.view());
            let labels: Vec<bool> = held_out.iter().map(|&i| tuning_labels[i]).collect();
            fold_aucs.push(metrics::auc(&scores, &labels)?);
        }
        let mean_auc = fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64;
        if best.as_ref().map_or(true, |(b, _)| mean_auc > *b) {
            best = Some((mean_auc, params.clone()));
        }
        candidates.push(GridCandidate {
            params,
            fold_aucs,
            mean_auc,
        });
    }
    Ok(GridSearchOutcome {
        best: best.expect("grid is nonempty").1,
        candidates,
    })
}

/// Seeded stratified folds: anomalies and normals are shuffled separately and
/// dealt round-robin, so every fold holds both classes whenever counts allow.
fn stratified_folds(labels: &[bool], n_folds: usize, seed: u64) -> Vec<Vec<usize>> {
    use rand::seq::SliceRandom;
    let mut rng = seeds::rng(seeds::mix(&[seed, 0xf01d]));
    let mut anomalies: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut normals: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    anomalies.shuffle(&mut rng);
    normals.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); n_folds];
    for (pos, idx) in anomalies.into_iter().chain(normals).enumerate() {
        folds[pos % n_folds].push(idx);
    }
    for fold in folds.iter_mut() {
        fold.sort_unstable();
    }
    folds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticKind};

    #[test]
    fn threshold_flags_contamination_fraction() {
        let scores: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let thr = decision_threshold(&scores, 0.10).unwrap();
        let flagged = decisions(&scores, thr).iter().filter(|&&b| b).count();
        assert!((9..=11).contains(&flagged), "flagged {flagged}");
    }

    #[test]
    fn scorer_round_trips_through_json() {
        let data = gen_synthetic(SyntheticKind::GlobalOutliers, 200, 10, 2, 3).unwrap();
        for params in [
            ModelParams::Iforest(IforestParams {
                n_estimators: 10,
                ..Default::default()
            }),
            ModelParams::Lof { k: 5 },
        ] {
            let scorer = fit_model(&data, &params, 42).unwrap();
            let json = serde_json::to_string(&scorer).unwrap();
            let back: AnomalyScorer = serde_json::from_str(&json).unwrap();
            let probe = data.features();
            for i in (0..data.n()).step_by(37) {
                assert_eq!(scorer.score(&probe.row(i)), back.score(&probe.row(i)));
            }
            assert_eq!(scorer.model_tag(), back.model_tag());
        }
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let data = gen_synthetic(SyntheticKind::LocalOutliers, 300, 30, 2, 5).unwrap();
        let grid = vec![ModelParams::Lof { k: 7 }];
        let out = grid_search(&data, &grid, data.labels().unwrap(), 3, 1).unwrap();
        assert_eq!(out.best, ModelParams::Lof { k: 7 });
    }

    #[test]
    fn duplicate_candidate_does_not_change_winner() {
        let data = gen_synthetic(SyntheticKind::LocalOutliers, 300, 30, 2, 5).unwrap();
        let labels = data.labels().unwrap();
        let grid_a = vec![ModelParams::Lof { k: 5 }, ModelParams::Lof { k: 25 }];
        let grid_b = vec![
            ModelParams::Lof { k: 5 },
            ModelParams::Lof { k: 25 },
            ModelParams::Lof { k: 25 },
        ];
        let a = grid_search(&data, &grid_a, labels, 3, 1).unwrap();
        let b = grid_search(&data, &grid_b, labels, 3, 1).unwrap();
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn winner_has_top_cv_auc() {
        let data = gen_synthetic(SyntheticKind::LocalOutliers, 600, 40, 2, 11).unwrap();
        let grid = vec![
            ModelParams::Lof { k: 2 },
            ModelParams::Lof { k: 20 },
            ModelParams::Lof { k: 200 },
        ];
        let out = grid_search(&data, &grid, data.labels().unwrap(), 3, 7).unwrap();
        let best_mean = out
            .candidates
            .iter()
            .find(|c| c.params == out.best)
            .unwrap()
            .mean_auc;
        for cand in &out.candidates {
            assert!(best_mean >= cand.mean_auc);
        }
    }

    #[test]
    fn empty_grid_is_an_error() {
        let data = gen_synthetic(SyntheticKind::LocalOutliers, 300, 30, 2, 5).unwrap();
        assert!(matches!(
            grid_search(&data, &[], data.labels().unwrap(), 3, 1),
            Err(Error::EmptyGrid)
        ));
    }

    #[test]
    fn single_class_fold_is_an_error() {
        // Two anomalies cannot stratify across five folds.
        let data = gen_synthetic(SyntheticKind::GlobalOutliers, 50, 2, 2, 5).unwrap();
        let grid = vec![ModelParams::Lof { k: 3 }];
        assert!(matches!(
            grid_search(&data, &grid, data.labels().unwrap(), 5, 1),
            Err(Error::SingleClass(_))
        ));
    }
}
