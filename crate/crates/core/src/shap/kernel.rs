//! Kernel SHAP: Shapley values via kernel-weighted least squares over
//! coalition indicator vectors, with the additivity constraint enforced
//! exactly by variable elimination.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

use super::{Attribution, BackgroundSet, CoalitionGame, ENUMERATION_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelShapConfig {
    /// Sampled coalitions when d exceeds the enumeration limit.
    pub n_coalitions: usize,
    /// Ridge term added to the normal equations.
    pub ridge: f64,
    pub seed: u64,
}

impl Default for KernelShapConfig {
    fn default() -> Self {
        Self {
            n_coalitions: 2048,
            ridge: 1e-8,
            seed: 0,
        }
    }
}

impl KernelShapConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

/// Shapley kernel mass of one coalition of size `s` out of `d` features:
/// `(d-1) / (C(d,s) * s * (d-s))`.
fn kernel_weight(d: usize, s: usize) -> f64 {
    (d as f64 - 1.0) / (binomial(d, s) * s as f64 * (d - s) as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Kernel SHAP attribution of `score_fn` at `point` against a background set.
///
/// All `2^d - 2` non-trivial coalitions are used when `d <= 12`; otherwise
/// `n_coalitions` coalitions are drawn in complement pairs from the kernel
/// size distribution and weighted by their sample counts. Additivity
/// (`base + sum(phi) = score(point)`) holds exactly by construction.
pub fn kernel_shap<F: Fn(&[f64]) -> f64 + Sync>(
    score_fn: &F,
    point: &[f64],
    background: &BackgroundSet,
    config: &KernelShapConfig,
) -> Result<Attribution> {
    let d = point.len();
    if d == 0 {
        return Err(Error::InvalidParameter("empty point".into()));
    }
    if background.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: background.d(),
        });
    }
    let game = CoalitionGame {
        score_fn,
        point,
        background,
    };
    let base = game.value(&vec![false; d]);
    let fx = score_fn(point);
    let total = fx - base;

    if d == 1 {
        return Ok(Attribution {
            phi: vec![total],
            base_value: base,
            point_id: 0,
            model_tag: String::new(),
        });
    }

    let coalitions: Vec<(Vec<bool>, f64)> = if d <= ENUMERATION_LIMIT {
        enumerate_coalitions(d)
    } else {
        sample_coalitions(d, config)
    };

    let values: Vec<f64> = coalitions
        .par_iter()
        .map(|(members, _)| game.value(members))
        .collect();

    // Eliminate phi[d-1] through the additivity constraint, then solve the
    // (d-1)-dimensional weighted normal equations.
    let unknowns = d - 1;
    let mut m = vec![0.0; unknowns * unknowns];
    let mut rhs = vec![0.0; unknowns];
    let weight_sum: f64 = coalitions.iter().map(|(_, w)| w).sum();
    let mut design_row = vec![0.0; unknowns];
    for ((members, weight), value) in coalitions.iter().zip(&values) {
        let w = weight / weight_sum;
        let z_last = if members[d - 1] { 1.0 } else { 0.0 };
        for j in 0..unknowns {
            let z_j = if members[j] { 1.0 } else { 0.0 };
            design_row[j] = z_j - z_last;
        }
        let target = value - base - z_last * total;
        for r in 0..unknowns {
            if design_row[r] == 0.0 {
                continue;
            }
            for c in 0..unknowns {
                m[r * unknowns + c] += w * design_row[r] * design_row[c];
            }
            rhs[r] += w * design_row[r] * target;
        }
    }
    for r in 0..unknowns {
        m[r * unknowns + r] += config.ridge;
    }
    let beta = solve_lu(&mut m, &mut rhs, unknowns).ok_or(Error::SingularSystem)?;

    let mut phi = beta;
    let sum_head: f64 = phi.iter().sum();
    phi.push(total - sum_head);

    Ok(Attribution {
        phi,
        base_value: base,
        point_id: 0,
        model_tag: String::new(),
    })
}

/// Every coalition mask except the empty and full sets, with exact kernel
/// weights.
fn enumerate_coalitions(d: usize) -> Vec<(Vec<bool>, f64)> {
    let n_masks = 1usize << d;
    let size_weight: Vec<f64> = (0..=d)
        .map(|s| {
            if s == 0 || s == d {
                0.0
            } else {
                kernel_weight(d, s)
            }
        })
        .collect();
    (1..n_masks - 1)
        .map(|mask| {
            let members: Vec<bool> = (0..d).map(|j| mask >> j & 1 == 1).collect();
            let s = (mask as u32).count_ones() as usize;
            (members, size_weight[s])
        })
        .collect()
}

/// Paired coalition sampling: sizes follow the aggregate kernel mass
/// `(d-1)/(s(d-s))`, subsets are uniform within a size, and each draw also
/// contributes its complement. Duplicate draws accumulate weight, which keeps
/// the (deterministic) regression consistent with the kernel distribution.
fn sample_coalitions(d: usize, config: &KernelShapConfig) -> Vec<(Vec<bool>, f64)> {
    let mut size_mass: Vec<f64> = (1..d).map(|s| (d as f64 - 1.0) / ((s * (d - s)) as f64)).collect();
    let total_mass: f64 = size_mass.iter().sum();
    for w in size_mass.iter_mut() {
        *w /= total_mass;
    }
    let mut cumulative = Vec::with_capacity(size_mass.len());
    let mut acc = 0.0;
    for w in &size_mass {
        acc += w;
        cumulative.push(acc);
    }

    let mut rng = seeds::rng(seeds::mix(&[config.seed, d as u64, 0x5a]));
    let mut counts: BTreeMap<Vec<bool>, f64> = BTreeMap::new();
    let pairs = (config.n_coalitions / 2).max(d);
    let mut indices: Vec<usize> = (0..d).collect();
    for _ in 0..pairs {
        let u: f64 = rng.gen();
        let s = cumulative.iter().position(|c| u <= *c).unwrap_or(d - 2) + 1;
        for i in 0..s {
            let j = rng.gen_range(i..d);
            indices.swap(i, j);
        }
        let mut members = vec![false; d];
        for &idx in &indices[..s] {
            members[idx] = true;
        }
        let complement: Vec<bool> = members.iter().map(|b| !b).collect();
        *counts.entry(members).or_insert(0.0) += 1.0;
        *counts.entry(complement).or_insert(0.0) += 1.0;
    }
    counts.into_iter().collect()
}

/// In-place LU solve with partial pivoting; `None` when a pivot vanishes.
fn solve_lu(m: &mut [f64], rhs: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = m[col * n + col].abs();
        for r in col + 1..n {
            let v = m[r * n + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val < 1e-300 {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                m.swap(col * n + c, pivot_row * n + c);
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = m[col * n + col];
        for r in col + 1..n {
            let factor = m[r * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                m[r * n + c] -= factor * m[col * n + c];
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for c in col + 1..n {
            acc -= m[col * n + c] * x[c];
        }
        x[col] = acc / m[col * n + col];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shap::exact_shapley;
    use crate::shap::BackgroundSelection;
    use ndarray::Array2;

    fn background(points: Array2<f64>) -> BackgroundSet {
        BackgroundSet {
            points,
            selection: BackgroundSelection::RandomSubsample,
            seed: 0,
        }
    }

    fn random_background(m: usize, d: usize, seed: u64) -> BackgroundSet {
        let mut rng = seeds::rng(seed);
        let mut points = Array2::zeros((m, d));
        for v in points.iter_mut() {
            *v = rng.gen_range(-1.5..1.5);
        }
        background(points)
    }

    #[test]
    fn matches_exact_oracle_on_nonlinear_game() {
        let d = 6;
        let bg = random_background(20, d, 3);
        let f = |p: &[f64]| p[0] * p[1] + p[2].sin() * 2.0 - p[3] * p[3] + 0.5 * p[4] * p[5];
        let mut rng = seeds::rng(17);
        for trial in 0..5 {
            let point: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let exact = exact_shapley(&f, &point, &bg).unwrap();
            let kernel = kernel_shap(&f, &point, &bg, &KernelShapConfig::with_seed(trial)).unwrap();
            for j in 0..d {
                assert!(
                    (exact.phi[j] - kernel.phi[j]).abs() < 1e-6,
                    "trial {trial} phi[{j}]: exact {} vs kernel {}",
                    exact.phi[j],
                    kernel.phi[j]
                );
            }
            assert!((exact.base_value - kernel.base_value).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_function_yields_zero_vector_in_both_regimes() {
        for d in [4usize, 15] {
            let bg = random_background(8, d, 9);
            let f = |_: &[f64]| 2.5;
            let attr = kernel_shap(&f, &vec![0.3; d], &bg, &KernelShapConfig::with_seed(1)).unwrap();
            assert!((attr.base_value - 2.5).abs() < 1e-12);
            for phi in attr.phi {
                assert!(phi.abs() < 1e-9, "constant game phi = {phi}");
            }
        }
    }

    #[test]
    fn symmetry_axiom_holds() {
        // Score symmetric in features 0 and 1, point with x0 = x1, background
        // columns 0/1 exchanged pairwise.
        let d = 4;
        let mut points = Array2::zeros((6, d));
        let mut rng = seeds::rng(23);
        for i in 0..3 {
            for j in 0..d {
                points[[2 * i, j]] = rng.gen_range(-1.0..1.0);
            }
            for j in 0..d {
                points[[2 * i + 1, j]] = points[[2 * i, j]];
            }
            points[[2 * i + 1, 0]] = points[[2 * i, 1]];
            points[[2 * i + 1, 1]] = points[[2 * i, 0]];
        }
        let bg = background(points);
        let f = |p: &[f64]| p[0] * p[1] + (p[0] + p[1]).cos() + 0.3 * p[2] - p[3];
        let point = [0.4, 0.4, -0.2, 0.9];
        let attr = kernel_shap(&f, &point, &bg, &KernelShapConfig::with_seed(5)).unwrap();
        assert!(
            (attr.phi[0] - attr.phi[1]).abs() < 1e-6,
            "symmetric players differ: {} vs {}",
            attr.phi[0],
            attr.phi[1]
        );
    }

    #[test]
    fn enumeration_is_seed_independent() {
        let d = 5;
        let bg = random_background(10, d, 2);
        let f = |p: &[f64]| p.iter().sum::<f64>().tanh();
        let point = [0.1, -0.7, 0.3, 0.9, -0.2];
        let a = kernel_shap(&f, &point, &bg, &KernelShapConfig::with_seed(1)).unwrap();
        let b = kernel_shap(&f, &point, &bg, &KernelShapConfig::with_seed(999)).unwrap();
        assert_eq!(a.phi, b.phi);
    }

    #[test]
    fn sampled_regime_recovers_linear_game_approximately() {
        let d = 20;
        let mut rng = seeds::rng(7);
        let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let bg = random_background(12, d, 11);
        let weights = w.clone();
        let f = move |p: &[f64]| -> f64 { p.iter().zip(&weights).map(|(x, wj)| x * wj).sum() };
        let point: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let attr = kernel_shap(&f, &point, &bg, &KernelShapConfig::with_seed(3)).unwrap();

        let score = f(&point);
        assert!(
            attr.additivity_residual(score).abs() < 1e-3,
            "sampled additivity residual {}",
            attr.additivity_residual(score)
        );
        // Linear games have the closed form phi_j = w_j (x_j - mean bg_j).
        let mut worst = 0.0f64;
        for j in 0..d {
            let mean_bg: f64 = bg.points.column(j).sum() / bg.m() as f64;
            let expected = w[j] * (point[j] - mean_bg);
            worst = worst.max((attr.phi[j] - expected).abs());
        }
        assert!(worst < 0.05, "worst sampled deviation {worst}");
    }

    #[test]
    fn sampled_regime_is_deterministic_per_seed() {
        let d = 18;
        let bg = random_background(10, d, 4);
        let f = |p: &[f64]| p.iter().map(|v| v.abs()).sum::<f64>();
        let point: Vec<f64> = (0..d).map(|j| j as f64 / d as f64 - 0.5).collect();
        let cfg = KernelShapConfig {
            n_coalitions: 512,
            ..KernelShapConfig::with_seed(21)
        };
        let a = kernel_shap(&f, &point, &bg, &cfg).unwrap();
        let b = kernel_shap(&f, &point, &bg, &cfg).unwrap();
        assert_eq!(a.phi, b.phi);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let bg = random_background(5, 3, 1);
        let f = |_: &[f64]| 0.0;
        assert!(matches!(
            kernel_shap(&f, &[1.0, 2.0], &bg, &KernelShapConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
