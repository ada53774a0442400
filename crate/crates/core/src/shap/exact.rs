//! Exact Shapley values by full coalition enumeration.

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::{Attribution, BackgroundSet, CoalitionGame, ENUMERATION_LIMIT};

/// Exact Shapley attribution:
/// `phi_j = sum over S not containing j of |S|!(d-|S|-1)!/d! * (v(S+j) - v(S))`
/// with the coalition value `v` taken as the background-marginal expectation.
/// Cost is `2^d * m` score calls, so d is capped at [`ENUMERATION_LIMIT`].
pub fn exact_shapley<F: Fn(&[f64]) -> f64 + Sync>(
    score_fn: &F,
    point: &[f64],
    background: &BackgroundSet,
) -> Result<Attribution> {
    let d = point.len();
    if d == 0 {
        return Err(Error::InvalidParameter("empty point".into()));
    }
    if d > ENUMERATION_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "exact enumeration supports d <= {ENUMERATION_LIMIT}, got {d}"
        )));
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
    let n_masks = 1usize << d;
    let values: Vec<f64> = (0..n_masks)
        .into_par_iter()
        .map(|mask| {
            let members: Vec<bool> = (0..d).map(|j| mask >> j & 1 == 1).collect();
            game.value(&members)
        })
        .collect();

    // w(s) = s! (d-1-s)! / d!, exact in f64 for d <= 12.
    let factorial = |k: usize| -> f64 { (1..=k).map(|v| v as f64).product() };
    let weights: Vec<f64> = (0..d)
        .map(|s| factorial(s) * factorial(d - 1 - s) / factorial(d))
        .collect();

    let mut phi = vec![0.0; d];
    for (j, item) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        let mut acc = 0.0;
        for mask in 0..n_masks {
            if mask & bit != 0 {
                continue;
            }
            let s = (mask as u32).count_ones() as usize;
            acc += weights[s] * (values[mask | bit] - values[mask]);
        }
        *item = acc;
    }

    Ok(Attribution {
        phi,
        base_value: values[0],
        point_id: 0,
        model_tag: String::new(),
    })
}
