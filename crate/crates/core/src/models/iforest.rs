//! Isolation forest built from scratch.
//!
//! Trees are grown on seeded subsamples, splitting a uniformly chosen feature
//! (from a random candidate subset) at a uniform value between the node's min
//! and max. The anomaly score is `2^(-E[h(x)] / c(psi))` where `h(x)` is the
//! leaf depth plus the expected-path adjustment `c(leaf_size)` for unsplit
//! leaves.
//!
//! Subsample selection runs over a canonical (value-sorted) row order, so a
//! fitted forest, and therefore every score, is invariant to permutations of
//! the training rows.

use ndarray::{ArrayView1, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seeds;

const EULER_MASCHERONI: f64 = 0.5772156649;

/// Expected path length of an unsuccessful BST search over `m` points;
/// normalizes isolation depths. `c(1) = 0` and `c(2) = 1` are pinned to avoid
/// `ln(0)` and to match the exact harmonic number at m = 2.
pub fn avg_path_length(m: usize) -> f64 {
    match m {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = m as f64;
            2.0 * ((m - 1.0).ln() + EULER_MASCHERONI) - 2.0 * (m - 1.0) / m
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        size: usize,
        depth: usize,
    },
}

/// One randomized isolation tree as a flat node arena (index 0 is the root).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<Node>,
    pub height_limit: usize,
}

impl IsolationTree {
    /// Depth of the leaf reached by `point` plus the leaf-size adjustment.
    pub fn path_length(&self, point: &ArrayView1<'_, f64>) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    idx = if point[*feature] < *value { *left } else { *right };
                }
                Node::Leaf { size, depth } => {
                    return *depth as f64 + avg_path_length(*size);
                }
            }
        }
    }

    pub fn max_leaf_depth(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { depth, .. } => Some(*depth),
                Node::Split { .. } => None,
            })
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IforestParams {
    #[serde(default = "default_n_estimators")]
    pub n_estimators: usize,
    /// Candidate features per split; defaults to all features.
    #[serde(default)]
    pub max_features: Option<usize>,
    /// Rows per tree; defaults to `min(256, n)`.
    #[serde(default)]
    pub subsample_size: Option<usize>,
    /// Maximum leaf depth; defaults to `ceil(log2(subsample_size))`.
    #[serde(default)]
    pub height_limit: Option<usize>,
}

fn default_n_estimators() -> usize {
    100
}

impl Default for IforestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_features: None,
            subsample_size: None,
            height_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForestModel {
    pub trees: Vec<IsolationTree>,
    pub subsample_size: usize,
    pub n_estimators: usize,
    pub max_features: usize,
    /// Path-length normalizer `c(subsample_size)`.
    pub c_norm: f64,
    pub seed: u64,
}

impl IsolationForestModel {
    /// Anomaly score in (0, 1); higher means more anomalous.
    pub fn score(&self, point: &ArrayView1<'_, f64>) -> f64 {
        let mean_path: f64 = self
            .trees
            .iter()
            .map(|t| t.path_length(point))
            .sum::<f64>()
            / self.trees.len() as f64;
        2f64.powf(-mean_path / self.c_norm)
    }

    pub fn scores(&self, points: &ArrayView2<'_, f64>) -> Vec<f64> {
        let rows: Vec<ArrayView1<'_, f64>> = points.outer_iter().collect();
        rows.par_iter().map(|r| self.score(r)).collect()
    }
}

/// Fits an isolation forest on the dataset's features. Labels are never read.
pub fn fit_iforest(
    data: &Dataset,
    params: &IforestParams,
    seed: u64,
) -> Result<IsolationForestModel> {
    fit_iforest_matrix(&data.features(), params, seed)
}

pub fn fit_iforest_matrix(
    features: &ArrayView2<'_, f64>,
    params: &IforestParams,
    seed: u64,
) -> Result<IsolationForestModel> {
    let (n, d) = features.dim();
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("empty training matrix".into()));
    }
    let psi = params.subsample_size.unwrap_or_else(|| n.min(256));
    if psi < 2 {
        return Err(Error::InvalidParameter(format!(
            "subsample_size must be >= 2, got {psi}"
        )));
    }
    if psi > n {
        return Err(Error::InvalidParameter(format!(
            "subsample_size {psi} exceeds {n} training rows"
        )));
    }
    let max_features = params.max_features.unwrap_or(d);
    if max_features == 0 || max_features > d {
        return Err(Error::InvalidParameter(format!(
            "max_features must be in 1..={d}, got {max_features}"
        )));
    }
    let height_limit = params
        .height_limit
        .unwrap_or_else(|| (psi as f64).log2().ceil() as usize);

    // Canonical row order: sort indices by row content so subsampling sees
    // the same multiset of points no matter how the input rows are permuted.
    let mut canonical: Vec<usize> = (0..n).collect();
    canonical.sort_by(|&a, &b| {
        for j in 0..d {
            match features[[a, j]].partial_cmp(&features[[b, j]]) {
                Some(std::cmp::Ordering::Equal) | None => continue,
                Some(ord) => return ord,
            }
        }
        std::cmp::Ordering::Equal
    });

    let trees: Vec<IsolationTree> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeds::rng(seeds::mix(&[seed, t as u64]));
            // Partial Fisher-Yates over the canonical order.
            let mut pool: Vec<usize> = canonical.clone();
            for i in 0..psi {
                let j = rng.gen_range(i..pool.len());
                pool.swap(i, j);
            }
            pool.truncate(psi);
            let mut builder = TreeBuilder {
                features: features.reborrow(),
                d,
                max_features,
                height_limit,
                nodes: Vec::new(),
                rng,
            };
            builder.grow(pool, 0);
            IsolationTree {
                nodes: builder.nodes,
                height_limit,
            }
        })
        .collect();

    Ok(IsolationForestModel {
        trees,
        subsample_size: psi,
        n_estimators: params.n_estimators,
        max_features,
        c_norm: avg_path_length(psi),
        seed,
    })
}

struct TreeBuilder<'a> {
    features: ArrayView2<'a, f64>,
    d: usize,
    max_features: usize,
    height_limit: usize,
    nodes: Vec<Node>,
    rng: rand_chacha::ChaCha8Rng,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        if depth >= self.height_limit || rows.len() <= 1 {
            return self.leaf(rows.len(), depth);
        }
        // Candidate subset: max_features distinct features, then keep those
        // with positive spread over this node's rows.
        let mut feats: Vec<usize> = (0..self.d).collect();
        for i in 0..self.max_features {
            let j = self.rng.gen_range(i..feats.len());
            feats.swap(i, j);
        }
        feats.truncate(self.max_features);

        let mut spread: Vec<(usize, f64, f64)> = Vec::new();
        for &f in &feats {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &r in &rows {
                let v = self.features[[r, f]];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi > lo {
                spread.push((f, lo, hi));
            }
        }
        if spread.is_empty() {
            return self.leaf(rows.len(), depth);
        }
        let (feature, lo, hi) = spread[self.rng.gen_range(0..spread.len())];
        let mut u: f64 = self.rng.gen();
        if u == 0.0 {
            u = 0.5;
        }
        let value = lo + u * (hi - lo);

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.features[[r, feature]] < value);

        let idx = self.nodes.len();
        self.nodes.push(Node::Leaf { size: 0, depth }); // placeholder
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[idx] = Node::Split {
            feature,
            value,
            left,
            right,
        };
        idx
    }

    fn leaf(&mut self, size: usize, depth: usize) -> usize {
        self.nodes.push(Node::Leaf { size, depth });
        self.nodes.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticKind};
    use ndarray::{Array2, Axis};

    #[test]
    fn path_normalizer_special_cases() {
        assert_eq!(avg_path_length(1), 0.0);
        assert_eq!(avg_path_length(2), 1.0);
        assert!((avg_path_length(256) - 10.244770920116851).abs() < 1e-12);
    }

    #[test]
    fn leaf_depths_respect_height_limit() {
        let data = gen_synthetic(SyntheticKind::GlobalOutliers, 240, 16, 3, 2).unwrap();
        let params = IforestParams {
            n_estimators: 100,
            subsample_size: Some(256),
            ..Default::default()
        };
        let model = fit_iforest(&data, &params, 5).unwrap();
        assert_eq!(model.trees.len(), 100);
        for tree in &model.trees {
            assert!(tree.max_leaf_depth() <= 8, "ceil(log2 256) = 8");
        }
    }

    #[test]
    fn identical_rows_collapse_to_single_leaf() {
        let features = Array2::from_elem((64, 3), 1.5);
        let params = IforestParams {
            n_estimators: 10,
            subsample_size: Some(32),
            ..Default::default()
        };
        let model = fit_iforest_matrix(&features.view(), &params, 1).unwrap();
        for tree in &model.trees {
            assert_eq!(tree.nodes.len(), 1);
            assert!(matches!(tree.nodes[0], Node::Leaf { size: 32, depth: 0 }));
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let data = gen_synthetic(SyntheticKind::GlobalOutliers, 400, 20, 4, 9).unwrap();
        let params = IforestParams::default();
        let a = fit_iforest(&data, &params, 77).unwrap();
        let b = fit_iforest(&data, &params, 77).unwrap();
        let sa = a.scores(&data.features());
        let sb = b.scores(&data.features());
        assert_eq!(sa, sb);
        assert_eq!(a.trees, b.trees);
    }

    #[test]
    fn scores_are_invariant_to_row_permutation() {
        let data = gen_synthetic(SyntheticKind::GlobalOutliers, 300, 15, 3, 31).unwrap();
        let params = IforestParams {
            n_estimators: 25,
            ..Default::default()
        };
        let model = fit_iforest(&data, &params, 123).unwrap();

        let n = data.n();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.reverse();
        perm.swap(0, n / 2);
        let permuted = data.features().select(Axis(0), &perm);
        let model_perm = fit_iforest_matrix(&permuted.view(), &params, 123).unwrap();

        let probe = data.features();
        for i in (0..n).step_by(17) {
            let a = model.score(&probe.row(i));
            let b = model_perm.score(&probe.row(i));
            assert_eq!(a, b, "score changed under row permutation at row {i}");
        }
    }

    #[test]
    fn score_formula_fixed_point() {
        // A forest of single leaves of size psi yields E[h] = c(psi) for any
        // point, so the score is exactly 0.5.
        let features = Array2::from_elem((32, 2), 3.0);
        let params = IforestParams {
            n_estimators: 7,
            subsample_size: Some(32),
            ..Default::default()
        };
        let model = fit_iforest_matrix(&features.view(), &params, 4).unwrap();
        let point = ndarray::array![0.0, 0.0];
        assert!((model.score(&point.view()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn anomalies_score_above_normals_on_global_benchmark() {
        let data = gen_synthetic(SyntheticKind::GlobalOutliers, 1000, 50, 2, 7).unwrap();
        let model = fit_iforest(&data, &IforestParams::default(), 3).unwrap();
        let scores = model.scores(&data.features());
        let labels = data.labels().unwrap();
        let mean = |anom: bool| {
            let vals: Vec<f64> = scores
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == anom)
                .map(|(&s, _)| s)
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        assert!(mean(true) > mean(false));
    }

    #[test]
    fn extreme_point_scores_high() {
        // Tight cluster plus one far corner point: isolation at depth ~1.
        let mut features = Array2::zeros((257, 2));
        let mut rng = crate::seeds::rng(11);
        for i in 0..256 {
            for j in 0..2 {
                features[[i, j]] = rand_distr::Distribution::sample(
                    &rand_distr::StandardNormal,
                    &mut rng,
                );
            }
        }
        features[[256, 0]] = 120.0;
        features[[256, 1]] = 120.0;
        let params = IforestParams {
            n_estimators: 100,
            subsample_size: Some(256),
            ..Default::default()
        };
        let model = fit_iforest_matrix(&features.view(), &params, 6).unwrap();
        let score = model.score(&features.row(256));
        assert!(score > 0.9, "far corner scored {score}");
    }

    #[test]
    fn scores_stay_in_open_unit_interval() {
        let data = gen_synthetic(SyntheticKind::LocalOutliers, 600, 30, 3, 13).unwrap();
        let model = fit_iforest(&data, &IforestParams::default(), 8).unwrap();
        for s in model.scores(&data.features()) {
            assert!(s > 0.0 && s < 1.0);
        }
    }

    #[test]
    fn rejects_oversized_subsample() {
        let data = gen_synthetic(SyntheticKind::GlobalOutliers, 100, 10, 2, 1).unwrap();
        let params = IforestParams {
            subsample_size: Some(500),
            ..Default::default()
        };
        assert!(fit_iforest(&data, &params, 0).is_err());
    }
}
