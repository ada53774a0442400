//! Sweep orchestration: baseline arms on clean data, privatized cells, and
//! the assembled report.
//!
//! Every stage is a pure function of (config, seeds), so any cell can be
//! recomputed in isolation and two sweeps with the same base seed produce
//! identical reports.

use std::collections::BTreeMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    gen_analogue, gen_synthetic, load_csv, standardize, Dataset, DescriptorManifest, Standardizer,
};
use crate::dp::{estimate_sensitivity, noise_scale, privatize, Mechanism, NoiseSpec};
use crate::error::{Error, Result};
use crate::metrics::{
    self, CosineZeroFlags, MetricReport, PrecisionByClass, ShapLengthConfig,
};
use crate::models::{
    decision_threshold, decisions, fit_model_matrix, grid_search, AnomalyScorer, IforestParams,
    ModelKind, ModelParams,
};
use crate::runner::config::{DatasetRef, SensitivityMode, SweepConfig, TuningConfig};
use crate::seeds;
use crate::shap::{
    explain_points, AttributionMatrix, BackgroundSelection, BackgroundSet, ExplainConfig,
    KernelShapConfig,
};

/// A dataset after ingestion, optional standardization, and split selection.
/// Shared read-only by every arm and cell of the sweep.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub name: String,
    /// Working data (standardized when configured).
    pub data: Dataset,
    pub standardizer: Option<Standardizer>,
    /// Rows reserved for hyperparameter tuning (empty under fixed tuning).
    pub tune_indices: Vec<usize>,
    /// Rows every model is fit on (all rows outside the tuning subset).
    pub fit_indices: Vec<usize>,
    /// Evaluation rows (subset of fit rows), label-stratified and shuffled.
    pub eval_indices: Vec<usize>,
    /// Explained rows: a prefix of `eval_indices`.
    pub shap_indices: Vec<usize>,
    pub contamination: f64,
    /// Realized per-feature sensitivity for noise calibration.
    pub sensitivity: Vec<f64>,
}

impl PreparedDataset {
    pub fn fit_matrix(&self) -> Array2<f64> {
        self.data.features().select(ndarray::Axis(0), &self.fit_indices)
    }

    pub fn eval_matrix(&self) -> Array2<f64> {
        self.data.features().select(ndarray::Axis(0), &self.eval_indices)
    }

    pub fn eval_labels(&self) -> Vec<bool> {
        let labels = self.data.labels().expect("prepared datasets are labeled");
        self.eval_indices.iter().map(|&i| labels[i]).collect()
    }
}

/// Clean-data arm for one (dataset, model): fitted scorer, decisions on the
/// evaluation points, and attributions of the explained points.
#[derive(Debug, Clone)]
pub struct BaselineArm {
    pub params: ModelParams,
    pub scorer: AnomalyScorer,
    pub threshold: f64,
    pub eval_scores: Vec<f64>,
    pub eval_decisions: Vec<bool>,
    pub attributions: AttributionMatrix,
    pub metrics: MetricReport,
    pub train_digest: String,
    pub background_digest: String,
    pub tuning_table: Option<Vec<(ModelParams, f64)>>,
}

/// Serializable summary of a baseline arm for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub params: ModelParams,
    pub threshold: f64,
    pub metrics: MetricReport,
    pub model_tag: String,
    pub train_digest: String,
    pub background_digest: String,
    pub attributions: AttributionMatrix,
    /// Min-max normalized feature values of the explained points, for
    /// summary-plot emission (rows align with `attributions.rows`).
    pub explained_values_norm: Vec<Vec<f64>>,
    pub tuning_table: Option<Vec<(ModelParams, f64)>>,
}

/// Provenance trail of one privatized cell; the digests let tests verify the
/// DP arm fit on noisy data and both arms scored the same clean points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellProvenance {
    pub cell_seed: u64,
    pub noise_scales: Vec<f64>,
    /// Digest of the matrix the DP model was fit on (the noisy data).
    pub fit_digest: String,
    /// Digest of the clean training data the noise was applied to.
    pub parent_digest: String,
    pub eval_digest: String,
    pub threshold: f64,
    pub model_tag: String,
    pub background_digest: String,
    /// The classical Gaussian calibration assumes epsilon <= 1; flagged when
    /// applied beyond that.
    pub gaussian_outside_classical_guarantee: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub metrics: Option<MetricReport>,
    pub provenance: Option<CellProvenance>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub crate_version: String,
    pub base_seed: u64,
    pub delta: f64,
    pub standardize: bool,
    pub sensitivity: BTreeMap<String, Vec<f64>>,
    pub baseline_thresholds: BTreeMap<String, f64>,
    pub eval_counts: BTreeMap<String, usize>,
    pub explained_counts: BTreeMap<String, usize>,
    pub contamination: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

/// Full factorial record: baselines per (dataset, model) and one cell per
/// (dataset, model, mechanism, epsilon, run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub baselines: BTreeMap<String, BaselineRecord>,
    pub cells: BTreeMap<String, CellRecord>,
    pub environment: Environment,
}

impl SweepReport {
    pub fn error_count(&self) -> usize {
        self.cells.values().filter(|c| c.error.is_some()).count()
    }

    pub fn baseline_key(dataset: &str, model: ModelKind) -> String {
        format!("{dataset}/{}", model.name())
    }

    pub fn cell_key(
        dataset: &str,
        model: ModelKind,
        mechanism: Mechanism,
        epsilon: f64,
        run: usize,
    ) -> String {
        format!(
            "{dataset}/{}/{}/eps={epsilon}/run={run}",
            model.name(),
            mechanism.name()
        )
    }
}

/// Ingests one dataset reference and fixes every split the sweep will use.
pub fn prepare(config: &SweepConfig, dataset: &DatasetRef) -> Result<PreparedDataset> {
    let raw = match dataset {
        DatasetRef::Csv {
            name,
            path,
            label_column,
            descriptor,
        } => {
            let manifest = DescriptorManifest::builtin();
            let desc = match descriptor {
                Some(key) => Some(manifest.get(key)?.clone()),
                None => None,
            };
            let mut data = load_csv(path, Some(label_column), desc.as_ref())?;
            if data.provenance() != name.as_str() {
                data = data.with_features(data.features().to_owned(), name.clone())?;
            }
            data
        }
        DatasetRef::Synthetic {
            kind,
            n_normal,
            n_anomalies,
            d,
            gen_seed,
            ..
        } => gen_synthetic(*kind, *n_normal, *n_anomalies, *d, *gen_seed)?,
        DatasetRef::Analogue { kind, gen_seed } => gen_analogue(*kind, *gen_seed),
    };
    let name = dataset.name();
    if raw.labels().is_none() {
        return Err(Error::InvalidParameter(format!(
            "dataset {name:?} has no labels; the sweep needs them for evaluation"
        )));
    }

    let (data, standardizer) = if config.standardize {
        let (d, s) = standardize(&raw);
        (d, Some(s))
    } else {
        (raw, None)
    };
    let labels = data.labels().unwrap().to_vec();
    let n = data.n();
    let contamination = data.contamination().unwrap();

    // Tuning subset (stratified) is carved out first; everything else is fit
    // territory.
    let tune_indices = match &config.tuning {
        TuningConfig::Fixed { .. } => Vec::new(),
        TuningConfig::Grid { subset_size, .. } => stratified_sample(
            &labels,
            (*subset_size).min(n / 2),
            seeds::mix_tagged(config.seed, &[&name, "tune"]),
            None,
        ),
    };
    let in_tune: Vec<bool> = {
        let mut mask = vec![false; n];
        for &i in &tune_indices {
            mask[i] = true;
        }
        mask
    };
    let fit_indices: Vec<usize> = (0..n).filter(|&i| !in_tune[i]).collect();

    let eval_target = config
        .eval_subsample
        .map(|m| m.min(fit_indices.len()))
        .unwrap_or(fit_indices.len());
    let eval_indices = stratified_sample(
        &labels,
        eval_target,
        seeds::mix_tagged(config.seed, &[&name, "eval"]),
        Some(&fit_indices),
    );
    let eval_anomalies = eval_indices.iter().filter(|&&i| labels[i]).count();
    if eval_anomalies == 0 || eval_anomalies == eval_indices.len() {
        return Err(Error::SingleClass(format!(
            "evaluation subsample of {name:?} has {eval_anomalies} anomalies"
        )));
    }

    let shap_count = config
        .shap
        .max_points
        .map(|m| m.min(eval_indices.len()))
        .unwrap_or(eval_indices.len());
    let shap_indices = eval_indices[..shap_count].to_vec();

    // Sensitivity is estimated on the clean training rows.
    let fit_view = data.features().select(ndarray::Axis(0), &fit_indices);
    let sensitivity = match &config.sensitivity {
        SensitivityMode::EmpiricalRange => {
            let fit_ds = Dataset::new(
                fit_view,
                None,
                data.feature_names().to_vec(),
                "fit rows",
            )?;
            estimate_sensitivity(&fit_ds)
        }
        SensitivityMode::Fixed { value } => vec![*value; data.d()],
        SensitivityMode::FixedVector { values } => {
            if values.len() != data.d() {
                return Err(Error::DimensionMismatch {
                    expected: data.d(),
                    found: values.len(),
                });
            }
            values.clone()
        }
    };

    Ok(PreparedDataset {
        name,
        data,
        standardizer,
        tune_indices,
        fit_indices,
        eval_indices,
        shap_indices,
        contamination,
        sensitivity,
    })
}

/// Stratified seeded sample of `target` indices (anomaly share preserved,
/// at least one anomaly), shuffled so any prefix mixes both classes. `from`
/// restricts the pool.
fn stratified_sample(
    labels: &[bool],
    target: usize,
    seed: u64,
    from: Option<&[usize]>,
) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let pool: Vec<usize> = match from {
        Some(f) => f.to_vec(),
        None => (0..labels.len()).collect(),
    };
    if target >= pool.len() {
        let mut all = pool;
        let mut rng = seeds::rng(seeds::mix(&[seed, 1]));
        all.shuffle(&mut rng);
        return all;
    }
    let mut rng = seeds::rng(seed);
    let mut anomalies: Vec<usize> = pool.iter().cloned().filter(|&i| labels[i]).collect();
    let mut normals: Vec<usize> = pool.iter().cloned().filter(|&i| !labels[i]).collect();
    anomalies.shuffle(&mut rng);
    normals.shuffle(&mut rng);
    let frac = anomalies.len() as f64 / pool.len() as f64;
    let n_anom = ((target as f64 * frac).round() as usize)
        .clamp(1.min(anomalies.len()), anomalies.len())
        .min(target);
    let n_norm = (target - n_anom).min(normals.len());
    let mut out: Vec<usize> = anomalies[..n_anom]
        .iter()
        .chain(normals[..n_norm].iter())
        .cloned()
        .collect();
    out.shuffle(&mut rng);
    out
}

fn resolve_params(config: &SweepConfig, model: ModelKind) -> ModelParams {
    match (&config.tuning, model) {
        (TuningConfig::Fixed { iforest, .. }, ModelKind::Iforest) => {
            ModelParams::Iforest(*iforest)
        }
        (TuningConfig::Fixed { lof_k, .. }, ModelKind::Lof) => ModelParams::Lof { k: *lof_k },
        (TuningConfig::Grid { .. }, _) => unreachable!("grid tuning resolves via grid_search"),
    }
}

fn tuned_params(
    config: &SweepConfig,
    prepared: &PreparedDataset,
    model: ModelKind,
) -> Result<(ModelParams, Option<Vec<(ModelParams, f64)>>)> {
    match &config.tuning {
        TuningConfig::Fixed { .. } => Ok((resolve_params(config, model), None)),
        TuningConfig::Grid {
            iforest_n_estimators,
            iforest_max_features,
            lof_k,
            n_folds,
            ..
        } => {
            let grid: Vec<ModelParams> = match model {
                ModelKind::Iforest => {
                    let mf: Vec<Option<usize>> = if iforest_max_features.is_empty() {
                        vec![None]
                    } else {
                        iforest_max_features.iter().map(|&m| Some(m)).collect()
                    };
                    iforest_n_estimators
                        .iter()
                        .flat_map(|&n| {
                            mf.iter().map(move |&max_features| {
                                ModelParams::Iforest(IforestParams {
                                    n_estimators: n,
                                    max_features,
                                    ..Default::default()
                                })
                            })
                        })
                        .collect()
                }
                ModelKind::Lof => lof_k.iter().map(|&k| ModelParams::Lof { k }).collect(),
            };
            let tune_data = prepared
                .data
                .select_rows(&prepared.tune_indices, "tuning subset")?;
            let tune_labels = tune_data.labels().unwrap().to_vec();
            let outcome = grid_search(
                &tune_data,
                &grid,
                &tune_labels,
                *n_folds,
                seeds::mix_tagged(config.seed, &[&prepared.name, model.name(), "tune"]),
            )?;
            let table = outcome
                .candidates
                .iter()
                .map(|c| (c.params.clone(), c.mean_auc))
                .collect();
            Ok((outcome.best, Some(table)))
        }
    }
}

/// Fits, thresholds, scores, and explains one model on the clean data.
pub fn run_baseline(
    config: &SweepConfig,
    prepared: &PreparedDataset,
    model: ModelKind,
) -> Result<BaselineArm> {
    let (params, tuning_table) = tuned_params(config, prepared, model)?;
    let fit = prepared.fit_matrix();
    let fit_seed = seeds::mix_tagged(config.seed, &[&prepared.name, model.name(), "baseline"]);
    let scorer = fit_model_matrix(&fit.view(), &params, fit_seed)?;

    let train_scores = scorer.scores(&fit.view());
    let threshold = decision_threshold(&train_scores, prepared.contamination)?;

    let eval = prepared.eval_matrix();
    let eval_scores = scorer.scores(&eval.view());
    let eval_decisions = decisions(&eval_scores, threshold);
    let eval_labels = prepared.eval_labels();
    let auc = metrics::auc(&eval_scores, &eval_labels)?;
    let precision = metrics::precision(&eval_decisions, &eval_labels)?;

    let background = background_set(
        config,
        &fit.view(),
        seeds::mix(&[fit_seed, 0xb9]),
    )?;
    let attributions = explain_points(
        &scorer,
        &prepared.data.features(),
        &prepared.shap_indices,
        &background,
        &ExplainConfig {
            kernel: KernelShapConfig {
                n_coalitions: config.shap.n_coalitions,
                ridge: config.shap.ridge,
                seed: seeds::mix(&[fit_seed, 0x5ba9]),
            },
        },
    )?;
    let shaplength_mean = metrics::shap_length_mean(&attributions, &ShapLengthConfig::default());

    // Self-comparison: drift metrics of the baseline against itself are zero.
    let zeros = vec![0.0; attributions.rows.len()];
    let report = MetricReport {
        auc,
        precision,
        fidelity: 1.0,
        shapgap_l2_mean: 0.0,
        shapgap_cos_mean: 0.0,
        shaplength_mean,
        per_point_l2: zeros.clone(),
        per_point_cos: zeros,
        cosine_zero_flags: CosineZeroFlags::default(),
    };
    report.validate()?;

    let train_ds = Dataset::new(fit, None, prepared.data.feature_names().to_vec(), "fit")?;
    Ok(BaselineArm {
        params,
        threshold,
        eval_scores,
        eval_decisions,
        metrics: report,
        train_digest: train_ds.digest(),
        background_digest: background.digest(),
        attributions,
        scorer,
        tuning_table,
    })
}

fn background_set(
    config: &SweepConfig,
    train: &ndarray::ArrayView2<'_, f64>,
    seed: u64,
) -> Result<BackgroundSet> {
    match config.shap.background_selection {
        BackgroundSelection::RandomSubsample => {
            BackgroundSet::random_subsample(train, config.shap.background_size, seed)
        }
        BackgroundSelection::KmeansCentroids => {
            BackgroundSet::kmeans_centroids(train, config.shap.background_size, seed)
        }
    }
}

/// Privatizes the training data, refits, and compares against the baseline
/// arm on the same clean evaluation points.
pub fn run_cell(
    config: &SweepConfig,
    prepared: &PreparedDataset,
    baseline: &BaselineArm,
    model: ModelKind,
    mechanism: Mechanism,
    epsilon: f64,
    run: usize,
) -> Result<(MetricReport, CellProvenance)> {
    let cell_seed = seeds::mix_tagged(
        config.seed,
        &[
            &prepared.name,
            model.name(),
            mechanism.name(),
            &format!("eps={epsilon}"),
            &format!("run={run}"),
        ],
    );
    let clean_fit = prepared.fit_matrix();
    let clean_ds = Dataset::new(
        clean_fit,
        None,
        prepared.data.feature_names().to_vec(),
        "clean fit rows",
    )?;
    let spec = NoiseSpec {
        mechanism,
        epsilon,
        delta: config.delta,
        sensitivity: prepared.sensitivity.clone(),
        seed: cell_seed,
    };
    let noise_scales: Vec<f64> = spec
        .sensitivity
        .iter()
        .map(|&s| noise_scale(&spec, s))
        .collect::<Result<_>>()?;
    let privatized = privatize(&clean_ds, &spec)?;

    let dp_scorer = fit_model_matrix(
        &privatized.data.features(),
        &baseline.params,
        seeds::mix(&[cell_seed, 0xf17]),
    )?;
    let train_scores = dp_scorer.scores(&privatized.data.features());
    let threshold = decision_threshold(&train_scores, prepared.contamination)?;

    // Both arms score and explain the SAME clean evaluation points.
    let eval = prepared.eval_matrix();
    let eval_scores = dp_scorer.scores(&eval.view());
    let eval_decisions = decisions(&eval_scores, threshold);
    let eval_labels = prepared.eval_labels();
    let auc = metrics::auc(&eval_scores, &eval_labels)?;
    let precision: PrecisionByClass = metrics::precision(&eval_decisions, &eval_labels)?;
    let fidelity = metrics::fidelity(&eval_decisions, &baseline.eval_decisions)?;

    let background = background_set(
        config,
        &privatized.data.features(),
        seeds::mix(&[cell_seed, 0xb9]),
    )?;
    let attributions = explain_points(
        &dp_scorer,
        &prepared.data.features(),
        &prepared.shap_indices,
        &background,
        &ExplainConfig {
            kernel: KernelShapConfig {
                n_coalitions: config.shap.n_coalitions,
                ridge: config.shap.ridge,
                seed: seeds::mix(&[cell_seed, 0x5ba9]),
            },
        },
    )?;

    let (l2_mean, per_point_l2) = metrics::shapgap_euclidean(&baseline.attributions, &attributions)?;
    let (cos_mean, per_point_cos, cosine_zero_flags) =
        metrics::shapgap_cosine(&baseline.attributions, &attributions)?;
    let shaplength_mean = metrics::shap_length_mean(&attributions, &ShapLengthConfig::default());

    let report = MetricReport {
        auc,
        precision,
        fidelity,
        shapgap_l2_mean: l2_mean,
        shapgap_cos_mean: cos_mean,
        shaplength_mean,
        per_point_l2,
        per_point_cos,
        cosine_zero_flags,
    };
    report.validate()?;

    let eval_ds = Dataset::new(eval, None, prepared.data.feature_names().to_vec(), "eval")?;
    let provenance = CellProvenance {
        cell_seed,
        noise_scales,
        fit_digest: privatized.data.digest(),
        parent_digest: privatized.parent_hash.clone(),
        eval_digest: eval_ds.digest(),
        threshold,
        model_tag: dp_scorer.model_tag(),
        background_digest: background.digest(),
        gaussian_outside_classical_guarantee: mechanism == Mechanism::Gaussian && epsilon > 1.0,
    };
    Ok((report, provenance))
}

/// Progress sink invoked once per finished cell (may arrive in any order).
pub type CellSink<'a> = &'a (dyn Fn(&str, &CellRecord) + Sync);

pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    run_sweep_with(config, None)
}

pub fn run_sweep_with(config: &SweepConfig, sink: Option<CellSink<'_>>) -> Result<SweepReport> {
    config.validate()?;

    let prepared: Vec<PreparedDataset> = config
        .datasets
        .iter()
        .map(|ds| prepare(config, ds))
        .collect::<Result<_>>()?;

    let mut baselines = BTreeMap::new();
    let mut baseline_arms: BTreeMap<String, (usize, BaselineArm)> = BTreeMap::new();
    for (ds_idx, prep) in prepared.iter().enumerate() {
        for &model in &config.models {
            let arm = run_baseline(config, prep, model)?;
            let key = SweepReport::baseline_key(&prep.name, model);
            baselines.insert(key.clone(), baseline_record(prep, &arm));
            baseline_arms.insert(key, (ds_idx, arm));
        }
    }

    // One task per factorial cell; records collect into a BTreeMap so report
    // assembly is order-independent.
    let mut tasks = Vec::new();
    for prep in &prepared {
        for &model in &config.models {
            for &mechanism in &config.mechanisms {
                for &epsilon in &config.epsilons {
                    for run in 0..config.runs {
                        tasks.push((prep.name.clone(), model, mechanism, epsilon, run));
                    }
                }
            }
        }
    }
    let cells: BTreeMap<String, CellRecord> = tasks
        .par_iter()
        .map(|(name, model, mechanism, epsilon, run)| {
            let key = SweepReport::cell_key(name, *model, *mechanism, *epsilon, *run);
            let bkey = SweepReport::baseline_key(name, *model);
            let (ds_idx, arm) = &baseline_arms[&bkey];
            let record = match run_cell(
                config,
                &prepared[*ds_idx],
                arm,
                *model,
                *mechanism,
                *epsilon,
                *run,
            ) {
                Ok((metrics, provenance)) => CellRecord {
                    metrics: Some(metrics),
                    provenance: Some(provenance),
                    error: None,
                },
                Err(e) => CellRecord {
                    metrics: None,
                    provenance: None,
                    error: Some(e.to_string()),
                },
            };
            if let Some(sink) = sink {
                sink(&key, &record);
            }
            (key, record)
        })
        .collect();

    let mut notes = vec![
        "explainer: kernel-shap for both model families (enumeration at d <= 12)".to_string(),
        format!(
            "sensitivity mode: {}",
            serde_json::to_string(&config.sensitivity)?
        ),
    ];
    if config.mechanisms.contains(&Mechanism::Gaussian)
        && config.epsilons.iter().any(|&e| e > 1.0)
    {
        notes.push(
            "gaussian cells with epsilon > 1 use the classical calibration outside its \
             guarantee range"
                .to_string(),
        );
    }
    let environment = Environment {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        base_seed: config.seed,
        delta: config.delta,
        standardize: config.standardize,
        sensitivity: prepared
            .iter()
            .map(|p| (p.name.clone(), p.sensitivity.clone()))
            .collect(),
        baseline_thresholds: baseline_arms
            .iter()
            .map(|(k, (_, arm))| (k.clone(), arm.threshold))
            .collect(),
        eval_counts: prepared
            .iter()
            .map(|p| (p.name.clone(), p.eval_indices.len()))
            .collect(),
        explained_counts: prepared
            .iter()
            .map(|p| (p.name.clone(), p.shap_indices.len()))
            .collect(),
        contamination: prepared
            .iter()
            .map(|p| (p.name.clone(), p.contamination))
            .collect(),
        notes,
    };

    Ok(SweepReport {
        config: config.clone(),
        baselines,
        cells,
        environment,
    })
}

fn baseline_record(prepared: &PreparedDataset, arm: &BaselineArm) -> BaselineRecord {
    // Min-max normalization of the explained points' feature values, for
    // summary-plot coloring.
    let d = prepared.data.d();
    let rows = &prepared.shap_indices;
    let features = prepared.data.features();
    let mut mins = vec![f64::INFINITY; d];
    let mut maxs = vec![f64::NEG_INFINITY; d];
    for &i in rows {
        for j in 0..d {
            mins[j] = mins[j].min(features[[i, j]]);
            maxs[j] = maxs[j].max(features[[i, j]]);
        }
    }
    let explained_values_norm: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| {
            (0..d)
                .map(|j| {
                    if maxs[j] > mins[j] {
                        (features[[i, j]] - mins[j]) / (maxs[j] - mins[j])
                    } else {
                        0.5
                    }
                })
                .collect()
        })
        .collect();
    BaselineRecord {
        params: arm.params.clone(),
        threshold: arm.threshold,
        metrics: arm.metrics.clone(),
        model_tag: arm.scorer.model_tag(),
        train_digest: arm.train_digest.clone(),
        background_digest: arm.background_digest.clone(),
        attributions: arm.attributions.clone(),
        explained_values_norm,
        tuning_table: arm.tuning_table.clone(),
    }
}
