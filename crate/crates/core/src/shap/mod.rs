//! Model-agnostic Shapley-value attribution of anomaly scores.
//!
//! [`exact_shapley`] enumerates every coalition and is the oracle for small
//! dimensionality; [`kernel_shap`] solves the Shapley-kernel weighted
//! least-squares problem, enumerating all coalitions up to d = 12 and
//! switching to paired coalition sampling beyond that. Coalition values use
//! the marginal (interventional) expectation over a background set.

mod exact;
mod kernel;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::AnomalyScorer;
use crate::seeds;

pub use exact::exact_shapley;
pub use kernel::{kernel_shap, KernelShapConfig};

/// Dimensionality bound for full coalition enumeration (4094 non-trivial
/// coalitions at d = 12).
pub const ENUMERATION_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundSelection {
    RandomSubsample,
    KmeansCentroids,
}

/// Reference points defining "feature absent" in coalition evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSet {
    pub points: Array2<f64>,
    pub selection: BackgroundSelection,
    pub seed: u64,
}

impl BackgroundSet {
    /// Seeded random subsample of `m` training rows (all rows when m >= n).
    pub fn random_subsample(train: &ArrayView2<'_, f64>, m: usize, seed: u64) -> Result<Self> {
        let n = train.nrows();
        if m == 0 {
            return Err(Error::InvalidParameter("background size must be >= 1".into()));
        }
        let m = m.min(n);
        let mut rng = seeds::rng(seeds::mix(&[seed, 0xb6, n as u64]));
        let mut indices: Vec<usize> = (0..n).collect();
        for i in 0..m {
            let j = rand::Rng::gen_range(&mut rng, i..n);
            indices.swap(i, j);
        }
        indices.truncate(m);
        indices.sort_unstable();
        Ok(Self {
            points: train.select(ndarray::Axis(0), &indices),
            selection: BackgroundSelection::RandomSubsample,
            seed,
        })
    }

    /// Lloyd k-means centroids as a compact background summary.
    pub fn kmeans_centroids(train: &ArrayView2<'_, f64>, m: usize, seed: u64) -> Result<Self> {
        let n = train.nrows();
        if m == 0 {
            return Err(Error::InvalidParameter("background size must be >= 1".into()));
        }
        if m >= n {
            return Ok(Self {
                points: train.to_owned(),
                selection: BackgroundSelection::KmeansCentroids,
                seed,
            });
        }
        let d = train.ncols();
        let mut rng = seeds::rng(seeds::mix(&[seed, 0x4b6d]));
        let mut centroid_rows: Vec<usize> = (0..n).collect();
        for i in 0..m {
            let j = rand::Rng::gen_range(&mut rng, i..n);
            centroid_rows.swap(i, j);
        }
        let mut centroids = train.select(ndarray::Axis(0), &centroid_rows[..m]);

        let mut assignment = vec![0usize; n];
        for _ in 0..50 {
            let mut moved = false;
            for i in 0..n {
                let mut best = (f64::INFINITY, 0usize);
                for (c, row) in centroids.outer_iter().enumerate() {
                    let dist: f64 = row
                        .iter()
                        .zip(train.row(i))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    if dist < best.0 {
                        best = (dist, c);
                    }
                }
                if assignment[i] != best.1 {
                    assignment[i] = best.1;
                    moved = true;
                }
            }
            let mut sums = Array2::<f64>::zeros((m, d));
            let mut counts = vec![0usize; m];
            for i in 0..n {
                counts[assignment[i]] += 1;
                for j in 0..d {
                    sums[[assignment[i], j]] += train[[i, j]];
                }
            }
            for c in 0..m {
                if counts[c] == 0 {
                    // Reseed an empty cluster on a random row.
                    let r = rand::Rng::gen_range(&mut rng, 0..n);
                    for j in 0..d {
                        sums[[c, j]] = train[[r, j]];
                    }
                    counts[c] = 1;
                }
                for j in 0..d {
                    sums[[c, j]] /= counts[c] as f64;
                }
            }
            centroids = sums;
            if !moved {
                break;
            }
        }
        Ok(Self {
            points: centroids,
            selection: BackgroundSelection::KmeansCentroids,
            seed,
        })
    }

    pub fn m(&self) -> usize {
        self.points.nrows()
    }

    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for v in self.points.iter() {
            hasher.update(v.to_le_bytes());
        }
        hex::encode(hasher.finalize())[..16].to_string()
    }
}

/// Per-point SHAP vector plus the expected score over the background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub point_id: usize,
    pub model_tag: String,
}

impl Attribution {
    /// Additivity residual `base + sum(phi) - score` for a known score.
    pub fn additivity_residual(&self, score: f64) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>() - score
    }
}

/// Attributions for a set of explained points, tied to one model and one
/// background set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix {
    pub rows: Vec<Attribution>,
    pub model_tag: String,
    pub background_digest: String,
}

impl AttributionMatrix {
    pub fn d(&self) -> usize {
        self.rows.first().map_or(0, |r| r.phi.len())
    }

    /// Mean absolute attribution per feature; the global importance ranking.
    pub fn mean_abs_phi(&self) -> Vec<f64> {
        let d = self.d();
        let mut out = vec![0.0; d];
        for row in &self.rows {
            for (j, v) in row.phi.iter().enumerate() {
                out[j] += v.abs();
            }
        }
        for v in out.iter_mut() {
            *v /= self.rows.len().max(1) as f64;
        }
        out
    }

    /// Feature indices sorted by descending mean |phi| (ties by index).
    pub fn feature_ranking(&self) -> Vec<usize> {
        let importance = self.mean_abs_phi();
        let mut order: Vec<usize> = (0..importance.len()).collect();
        order.sort_by(|&a, &b| {
            importance[b]
                .partial_cmp(&importance[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        order
    }

    /// CSV: `point_id,base,<phi per feature>` with shortest round-trip floats.
    pub fn write_csv(&self, path: &std::path::Path, feature_names: Option<&[String]>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let d = self.d();
        let mut header = vec!["point_id".to_string(), "base".to_string()];
        match feature_names {
            Some(names) => header.extend(names.iter().map(|n| format!("phi_{n}"))),
            None => header.extend((0..d).map(|j| format!("phi_{j}"))),
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![row.point_id.to_string(), format!("{}", row.base_value)];
            record.extend(row.phi.iter().map(|v| format!("{v}")));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean coalition value over the background: features inside the coalition
/// come from the explained point, the rest from each background row.
pub(crate) struct CoalitionGame<'a, F: Fn(&[f64]) -> f64 + Sync> {
    pub score_fn: &'a F,
    pub point: &'a [f64],
    pub background: &'a BackgroundSet,
}

impl<F: Fn(&[f64]) -> f64 + Sync> CoalitionGame<'_, F> {
    pub fn value(&self, members: &[bool]) -> f64 {
        let d = self.point.len();
        let mut composite = vec![0.0; d];
        let mut total = 0.0;
        for bg in self.background.points.outer_iter() {
            for j in 0..d {
                composite[j] = if members[j] { self.point[j] } else { bg[j] };
            }
            total += (self.score_fn)(&composite);
        }
        total / self.background.m() as f64
    }
}

/// Settings shared by every per-point explanation in a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub kernel: KernelShapConfig,
}

/// Explains the selected rows (all rows when `rows` is `None`) of a dataset
/// under the given scorer. Explanations run in parallel; each point's
/// coalition sampler derives its stream from (seed, point_id).
pub fn explain_dataset(
    scorer: &AnomalyScorer,
    data: &Dataset,
    background: &BackgroundSet,
    config: &ExplainConfig,
    rows: Option<&[usize]>,
) -> Result<AttributionMatrix> {
    let ids: Vec<usize> = match rows {
        Some(r) => r.to_vec(),
        None => (0..data.n()).collect(),
    };
    explain_points(scorer, &data.features(), &ids, background, config)
}

/// Explains `ids` rows of `points` (row index doubles as point id).
pub fn explain_points(
    scorer: &AnomalyScorer,
    points: &ArrayView2<'_, f64>,
    ids: &[usize],
    background: &BackgroundSet,
    config: &ExplainConfig,
) -> Result<AttributionMatrix> {
    if points.ncols() != background.d() {
        return Err(Error::DimensionMismatch {
            expected: background.d(),
            found: points.ncols(),
        });
    }
    let model_tag = scorer.model_tag();
    let score_fn = |p: &[f64]| scorer.score(&ArrayView1::from(p));
    let rows: Result<Vec<Attribution>> = ids
        .par_iter()
        .map(|&id| {
            let point: Vec<f64> = points.row(id).to_vec();
            let per_point = KernelShapConfig {
                seed: seeds::mix(&[config.kernel.seed, id as u64]),
                ..config.kernel
            };
            let mut attribution = kernel_shap(&score_fn, &point, background, &per_point)?;
            attribution.point_id = id;
            attribution.model_tag = model_tag.clone();
            Ok(attribution)
        })
        .collect();
    Ok(AttributionMatrix {
        rows: rows?,
        model_tag,
        background_digest: background.digest(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticKind};
    use crate::models::{fit_iforest, IforestParams};

    #[test]
    fn background_subsample_is_seeded_and_bounded() {
        let data = gen_synthetic(SyntheticKind::GlobalOutliers, 200, 10, 3, 1).unwrap();
        let a = BackgroundSet::random_subsample(&data.features(), 50, 9).unwrap();
        let b = BackgroundSet::random_subsample(&data.features(), 50, 9).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.m(), 50);
        let all = BackgroundSet::random_subsample(&data.features(), 10_000, 9).unwrap();
        assert_eq!(all.m(), 210);
    }

    #[test]
    fn kmeans_centroids_summarize_clusters() {
        let data = gen_synthetic(SyntheticKind::LocalOutliers, 400, 20, 2, 3).unwrap();
        let bg = BackgroundSet::kmeans_centroids(&data.features(), 4, 5).unwrap();
        assert_eq!(bg.m(), 4);
        // Centroids live inside the data's bounding box.
        for j in 0..2 {
            let col = data.features().column(j).to_owned();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for c in bg.points.column(j) {
                assert!(*c >= lo && *c <= hi);
            }
        }
    }

    #[test]
    fn explain_dataset_is_deterministic_and_additive() {
        let data = gen_synthetic(SyntheticKind::GlobalOutliers, 300, 15, 6, 8).unwrap();
        let model = fit_iforest(
            &data,
            &IforestParams {
                n_estimators: 30,
                ..Default::default()
            },
            4,
        )
        .unwrap();
        let scorer = AnomalyScorer::iforest(model);
        let background = BackgroundSet::random_subsample(&data.features(), 25, 2).unwrap();
        let config = ExplainConfig {
            kernel: KernelShapConfig::with_seed(7),
        };
        let ids: Vec<usize> = (0..100).collect();
        let a = explain_dataset(&scorer, &data, &background, &config, Some(&ids)).unwrap();
        let b = explain_dataset(&scorer, &data, &background, &config, Some(&ids)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 100);
        for row in &a.rows {
            let score = scorer.score(&data.features().row(row.point_id));
            assert!(
                row.additivity_residual(score).abs() < 1e-6,
                "additivity residual {}",
                row.additivity_residual(score)
            );
        }
    }

    #[test]
    fn planted_dominant_feature_ranks_first() {
        // Outlierness is carried entirely by feature 0.
        let mut data = gen_synthetic(SyntheticKind::GlobalOutliers, 400, 20, 4, 12)
            .unwrap()
            .features()
            .to_owned();
        let n = data.nrows();
        let labels: Vec<bool> = (0..n).map(|i| i >= 400).collect();
        for i in 0..n {
            for j in 0..4 {
                if labels[i] {
                    data[[i, j]] = if j == 0 { 9.0 + data[[i, j]] * 0.01 } else { data[[i, j]] * 0.05 };
                } else {
                    data[[i, j]] *= if j == 0 { 0.05 } else { 0.05 };
                }
            }
        }
        let dataset = Dataset::new(
            data,
            Some(labels),
            (0..4).map(|j| format!("f{j}")).collect(),
            "planted",
        )
        .unwrap();
        let model = fit_iforest(
            &dataset,
            &IforestParams {
                n_estimators: 50,
                ..Default::default()
            },
            3,
        )
        .unwrap();
        let scorer = AnomalyScorer::iforest(model);
        let background = BackgroundSet::random_subsample(&dataset.features(), 40, 6).unwrap();
        let ids: Vec<usize> = (380..420).collect();
        let attrs = explain_dataset(
            &scorer,
            &dataset,
            &background,
            &ExplainConfig {
                kernel: KernelShapConfig::with_seed(1),
            },
            Some(&ids),
        )
        .unwrap();
        assert_eq!(attrs.feature_ranking()[0], 0, "feature 0 carries the signal");
    }

    #[test]
    fn attribution_csv_round_trip() {
        let matrix = AttributionMatrix {
            rows: vec![Attribution {
                phi: vec![0.25, -0.5],
                base_value: 0.125,
                point_id: 3,
                model_tag: "m".into(),
            }],
            model_tag: "m".into(),
            background_digest: "bg".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("attr.csv");
        matrix.write_csv(&path, None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("point_id,base,phi_0,phi_1"));
        assert!(text.contains("3,0.125,0.25,-0.5"));
    }
}
