//! Local outlier factor with exact Euclidean k-NN, used in novelty
//! orientation: the fitted model scores arbitrary query points against its
//! training set, which lets the same model score clean and perturbed points.
//!
//! Scores are returned so that higher means more anomalous (LOF >> 1 is
//! anomalous, ~1 is normal).

use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LofModel {
    pub training_points: Array2<f64>,
    pub k: usize,
    /// Distance to the k-th nearest neighbor, per training point.
    pub k_distances: Vec<f64>,
    /// Local reachability density, per training point. Entries whose raw
    /// reachability sum was zero (all-duplicate neighborhoods) are capped at
    /// the maximum finite density, or 1.0 when no finite density exists.
    pub lrd: Vec<f64>,
}

fn euclidean(a: &ArrayView1<'_, f64>, b: &ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// k smallest (distance, index) pairs among training rows, excluding
/// `skip` (the query itself during fitting); ties break by row index.
fn k_nearest(
    train: &ArrayView2<'_, f64>,
    query: &ArrayView1<'_, f64>,
    k: usize,
    skip: Option<usize>,
) -> Vec<(f64, usize)> {
    let mut dists: Vec<(f64, usize)> = (0..train.nrows())
        .filter(|&i| Some(i) != skip)
        .map(|i| (euclidean(&train.row(i), query), i))
        .collect();
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    dists.truncate(k);
    dists
}

/// Fits LOF structures: exact k-NN, k-distances, and local reachability
/// densities for every training point.
pub fn fit_lof(data: &Dataset, k: usize) -> Result<LofModel> {
    fit_lof_matrix(&data.features(), k)
}

pub fn fit_lof_matrix(features: &ArrayView2<'_, f64>, k: usize) -> Result<LofModel> {
    let n = features.nrows();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 1 <= k < n, got k={k}, n={n}"
        )));
    }
    let neighbors: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| k_nearest(features, &features.row(i), k, Some(i)))
        .collect();
    let k_distances: Vec<f64> = neighbors.iter().map(|nb| nb[k - 1].0).collect();

    let raw_sums: Vec<f64> = (0..n)
        .map(|i| {
            neighbors[i]
                .iter()
                .map(|&(dist, j)| dist.max(k_distances[j]))
                .sum::<f64>()
        })
        .collect();
    let mut lrd: Vec<f64> = raw_sums
        .iter()
        .map(|&s| if s > 0.0 { k as f64 / s } else { f64::INFINITY })
        .collect();
    let max_finite = lrd
        .iter()
        .cloned()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let cap = if max_finite.is_finite() { max_finite } else { 1.0 };
    for v in lrd.iter_mut() {
        if !v.is_finite() {
            *v = cap;
        }
    }

    Ok(LofModel {
        training_points: features.to_owned(),
        k,
        k_distances,
        lrd,
    })
}

impl LofModel {
    /// Novelty-style LOF of a query point: the mean density of its k nearest
    /// training neighbors divided by the query's own reachability density.
    pub fn score(&self, point: &ArrayView1<'_, f64>) -> f64 {
        let train = self.training_points.view();
        let neighbors = k_nearest(&train, point, self.k, None);
        let reach_sum: f64 = neighbors
            .iter()
            .map(|&(dist, j)| dist.max(self.k_distances[j]))
            .sum();
        let cap = self
            .lrd
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            .max(1.0);
        let lrd_query = if reach_sum > 0.0 {
            self.k as f64 / reach_sum
        } else {
            cap
        };
        let mean_neighbor_lrd: f64 = neighbors
            .iter()
            .map(|&(_, j)| self.lrd[j])
            .sum::<f64>()
            / self.k as f64;
        mean_neighbor_lrd / lrd_query
    }

    pub fn scores(&self, points: &ArrayView2<'_, f64>) -> Vec<f64> {
        let rows: Vec<ArrayView1<'_, f64>> = points.outer_iter().collect();
        rows.par_iter().map(|r| self.score(r)).collect()
    }

    pub fn d(&self) -> usize {
        self.training_points.ncols()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticKind};
    use ndarray::array;

    #[test]
    fn collinear_points_have_inverse_spacing_density() {
        let features = array![[0.0], [2.0], [4.0]];
        let model = fit_lof_matrix(&features.view(), 1).unwrap();
        for &lrd in &model.lrd {
            assert!((lrd - 0.5).abs() < 1e-12, "lrd = {lrd}, spacing = 2");
        }
    }

    #[test]
    fn duplicate_pair_is_capped_not_infinite() {
        let features = array![[1.0, 1.0], [1.0, 1.0]];
        let model = fit_lof_matrix(&features.view(), 1).unwrap();
        for &lrd in &model.lrd {
            assert!(lrd.is_finite() && lrd > 0.0);
        }
        let lof = model.score(&array![1.0, 1.0].view());
        assert!((lof - 1.0).abs() < 1e-12, "identical data scores LOF 1");
    }

    #[test]
    fn fit_is_deterministic() {
        let data = gen_synthetic(SyntheticKind::LocalOutliers, 400, 20, 3, 5).unwrap();
        let a = fit_lof(&data, 10).unwrap();
        let b = fit_lof(&data, 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_interior_query_scores_near_one() {
        let mut rows = Vec::new();
        for x in 0..10 {
            for y in 0..10 {
                rows.push([x as f64, y as f64]);
            }
        }
        let features =
            Array2::from_shape_vec((100, 2), rows.iter().flatten().cloned().collect()).unwrap();
        let model = fit_lof_matrix(&features.view(), 4).unwrap();
        let lof = model.score(&array![5.0, 5.0].view());
        assert!((0.9..=1.1).contains(&lof), "grid-interior LOF = {lof}");
    }

    #[test]
    fn far_query_scores_high() {
        let data = gen_synthetic(SyntheticKind::LocalOutliers, 500, 25, 2, 9).unwrap();
        let model = fit_lof(&data, 10).unwrap();
        let lof = model.score(&array![500.0, 500.0].view());
        assert!(lof > 2.0, "far query LOF = {lof}");
    }

    #[test]
    fn rejects_k_out_of_range() {
        let features = array![[0.0], [1.0], [2.0]];
        assert!(fit_lof_matrix(&features.view(), 0).is_err());
        assert!(fit_lof_matrix(&features.view(), 3).is_err());
    }

    #[test]
    fn scores_are_positive_and_finite() {
        let data = gen_synthetic(SyntheticKind::GlobalOutliers, 300, 15, 3, 2).unwrap();
        let model = fit_lof(&data, 20).unwrap();
        for s in model.scores(&data.features()) {
            assert!(s.is_finite() && s > 0.0);
        }
    }

    /// Brute-force transliteration of the reachability-density definitions,
    /// kept independent of the fitted structures.
    fn brute_force_lof(train: &Array2<f64>, query: &[f64], k: usize) -> f64 {
        let n = train.nrows();
        let dist = |a: &[f64], b: &[f64]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        let row = |i: usize| -> Vec<f64> { train.row(i).to_vec() };
        let knn = |p: &[f64], skip: Option<usize>| -> Vec<(f64, usize)> {
            let mut all: Vec<(f64, usize)> = (0..n)
                .filter(|&i| Some(i) != skip)
                .map(|i| (dist(p, &row(i)), i))
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            all.truncate(k);
            all
        };
        let k_dist: Vec<f64> = (0..n).map(|i| knn(&row(i), Some(i))[k - 1].0).collect();
        let lrd = |p: &[f64], skip: Option<usize>| -> f64 {
            let sum: f64 = knn(p, skip)
                .iter()
                .map(|&(d0, j)| d0.max(k_dist[j]))
                .sum();
            k as f64 / sum
        };
        let neighbors = knn(query, None);
        let mean_lrd: f64 = neighbors
            .iter()
            .map(|&(_, j)| lrd(&row(j), Some(j)))
            .sum::<f64>()
            / k as f64;
        mean_lrd / lrd(query, None)
    }

    #[test]
    fn matches_brute_force_on_random_data() {
        let data = gen_synthetic(SyntheticKind::LocalOutliers, 120, 12, 2, 77).unwrap();
        let train = data.features().to_owned();
        for k in [1, 3, 7] {
            let model = fit_lof_matrix(&train.view(), k).unwrap();
            for q in [[0.1, 0.2], [8.0, 1.0], [2.0, 2.0]] {
                let got = model.score(&ndarray::ArrayView1::from(&q));
                let want = brute_force_lof(&train, &q, k);
                assert!(
                    (got - want).abs() < 1e-9,
                    "k={k} query={q:?}: {got} vs brute-force {want}"
                );
            }
        }
    }
}
