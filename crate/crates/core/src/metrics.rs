//! Detection-performance metrics (AUC, precision, fidelity) and
//! explanation-drift metrics (ShapGAP-Euclidean, ShapGAP-Cosine, ShapLength),
//! plus the small statistics helpers the sweep reports are built from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shap::AttributionMatrix;

/// Per-class precision; an entry is absent when its class was never
/// predicted. The weighted average (weights = true class frequencies) is
/// present only when every class with support has a defined precision.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrecisionByClass {
    pub anomaly: Option<f64>,
    pub normal: Option<f64>,
    pub weighted: Option<f64>,
}

/// Counts of the neutral-midpoint substitutions applied by the cosine
/// distance when an attribution vector has zero norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CosineZeroFlags {
    pub both_zero: usize,
    pub one_zero: usize,
}

/// Full metric record for one sweep cell (or a baseline compared against
/// itself).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub precision: PrecisionByClass,
    pub fidelity: f64,
    pub shapgap_l2_mean: f64,
    pub shapgap_cos_mean: f64,
    pub shaplength_mean: f64,
    pub per_point_l2: Vec<f64>,
    pub per_point_cos: Vec<f64>,
    pub cosine_zero_flags: CosineZeroFlags,
}

impl MetricReport {
    /// Checks the structural invariants: stored means equal the means of the
    /// per-point vectors and every bounded metric is in range.
    pub fn validate(&self) -> Result<()> {
        let check_mean = |name: &str, mean: f64, values: &[f64]| -> Result<()> {
            if values.is_empty() {
                return Ok(());
            }
            let m = values.iter().sum::<f64>() / values.len() as f64;
            if (m - mean).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "{name} mean {mean} disagrees with per-point mean {m}"
                )));
            }
            Ok(())
        };
        check_mean("shapgap_l2", self.shapgap_l2_mean, &self.per_point_l2)?;
        check_mean("shapgap_cos", self.shapgap_cos_mean, &self.per_point_cos)?;
        if !(0.0..=1.0).contains(&self.auc) {
            return Err(Error::InvalidParameter(format!("auc {} out of range", self.auc)));
        }
        if !(0.0..=1.0).contains(&self.fidelity) {
            return Err(Error::InvalidParameter(format!(
                "fidelity {} out of range",
                self.fidelity
            )));
        }
        if self.per_point_cos.iter().any(|v| !(0.0..=2.0).contains(v)) {
            return Err(Error::InvalidParameter("cosine distance out of [0, 2]".into()));
        }
        if self.per_point_l2.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidParameter("negative euclidean distance".into()));
        }
        Ok(())
    }
}

/// Threshold share for the smallest p%-complete explanation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapLengthConfig {
    pub p: f64,
}

impl Default for ShapLengthConfig {
    fn default() -> Self {
        Self { p: 0.90 }
    }
}

fn check_same_shape(a: &AttributionMatrix, b: &AttributionMatrix) -> Result<()> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch {
            expected: a.d(),
            found: b.d(),
        });
    }
    if a.rows.len() != b.rows.len() {
        return Err(Error::DimensionMismatch {
            expected: a.rows.len(),
            found: b.rows.len(),
        });
    }
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        if ra.point_id != rb.point_id {
            return Err(Error::InvalidParameter(format!(
                "point id mismatch: {} vs {}",
                ra.point_id, rb.point_id
            )));
        }
    }
    Ok(())
}

/// Mean and per-point L2 distance between two attribution matrices over the
/// same points.
pub fn shapgap_euclidean(a: &AttributionMatrix, b: &AttributionMatrix) -> Result<(f64, Vec<f64>)> {
    check_same_shape(a, b)?;
    let per_point: Vec<f64> = a
        .rows
        .iter()
        .zip(&b.rows)
        .map(|(ra, rb)| {
            ra.phi
                .iter()
                .zip(&rb.phi)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mean = mean_or_zero(&per_point);
    Ok((mean, per_point))
}

/// Mean and per-point cosine distance `1 - cos(phi_a, phi_b)`, range [0, 2].
/// Zero-norm vectors use neutral midpoints: both zero -> 0, exactly one
/// zero -> 1; the substitutions are counted in the returned flags.
pub fn shapgap_cosine(
    a: &AttributionMatrix,
    b: &AttributionMatrix,
) -> Result<(f64, Vec<f64>, CosineZeroFlags)> {
    check_same_shape(a, b)?;
    let mut flags = CosineZeroFlags::default();
    let per_point: Vec<f64> = a
        .rows
        .iter()
        .zip(&b.rows)
        .map(|(ra, rb)| {
            let na: f64 = ra.phi.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb: f64 = rb.phi.iter().map(|v| v * v).sum::<f64>().sqrt();
            if na == 0.0 && nb == 0.0 {
                flags.both_zero += 1;
                return 0.0;
            }
            if na == 0.0 || nb == 0.0 {
                flags.one_zero += 1;
                return 1.0;
            }
            let dot: f64 = ra.phi.iter().zip(&rb.phi).map(|(x, y)| x * y).sum();
            (1.0 - dot / (na * nb)).clamp(0.0, 2.0)
        })
        .collect();
    let mean = mean_or_zero(&per_point);
    Ok((mean, per_point, flags))
}

/// Smallest number of features whose sorted absolute attributions reach
/// `p * sum(|phi|)`; 0 when the attribution vector is all zero.
pub fn shap_length(phi: &[f64], config: &ShapLengthConfig) -> usize {
    let total: f64 = phi.iter().map(|v| v.abs()).sum();
    if total <= 0.0 {
        return 0;
    }
    let mut magnitudes: Vec<(f64, usize)> = phi.iter().map(|v| v.abs()).zip(0..).collect();
    // Descending magnitude, ties by feature index.
    magnitudes.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let target = config.p * total;
    let mut acc = 0.0;
    for (count, (mag, _)) in magnitudes.iter().enumerate() {
        acc += mag;
        if acc >= target {
            return count + 1;
        }
    }
    phi.len()
}

/// Mean ShapLength over all rows of an attribution matrix.
pub fn shap_length_mean(matrix: &AttributionMatrix, config: &ShapLengthConfig) -> f64 {
    if matrix.rows.is_empty() {
        return 0.0;
    }
    matrix
        .rows
        .iter()
        .map(|r| shap_length(&r.phi, config) as f64)
        .sum::<f64>()
        / matrix.rows.len() as f64
}

/// Fraction of positions where two binary decision vectors agree.
pub fn fidelity(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidParameter("empty decision vectors".into()));
    }
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(agree as f64 / a.len() as f64)
}

/// Mann-Whitney AUC: P(score_anomaly > score_normal) + 0.5 P(equal),
/// computed exactly by rank sums with average ranks on ties.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    let m = labels.iter().filter(|&&l| l).count();
    let n = labels.len() - m;
    if m == 0 || n == 0 {
        return Err(Error::SingleClass(format!("{m} anomalies, {n} normals")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg_rank;
        }
        i = j + 1;
    }
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(r, _)| r)
        .sum();
    let u = rank_sum - (m * (m + 1)) as f64 / 2.0;
    Ok(u / (m as f64 * n as f64))
}

/// Per-class precision plus the class-frequency-weighted average.
pub fn precision(pred: &[bool], labels: &[bool]) -> Result<PrecisionByClass> {
    if pred.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: pred.len(),
            found: labels.len(),
        });
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut tn = 0usize;
    let mut fn_ = 0usize;
    for (&p, &l) in pred.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let anomaly = if tp + fp > 0 {
        Some(tp as f64 / (tp + fp) as f64)
    } else {
        None
    };
    let normal = if tn + fn_ > 0 {
        Some(tn as f64 / (tn + fn_) as f64)
    } else {
        None
    };
    let n = pred.len() as f64;
    let anomaly_support = (tp + fn_) as f64;
    let normal_support = (tn + fp) as f64;
    let weighted = match (anomaly, normal) {
        (Some(pa), Some(pn)) => Some((anomaly_support * pa + normal_support * pn) / n),
        (Some(pa), None) if normal_support == 0.0 => Some(pa),
        (None, Some(pn)) if anomaly_support == 0.0 => Some(pn),
        _ => None,
    };
    Ok(PrecisionByClass {
        anomaly,
        normal,
        weighted,
    })
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two observations".into(),
        ));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
        sxy += (rx[i] - mx) * (ry[i] - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidParameter(
            "rank variance is zero; correlation undefined".into(),
        ));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Linear-interpolation quantile over an ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let q = q.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Five-number summary for box plots: quartiles plus Tukey whiskers (the
/// extreme data within 1.5 IQR of the box).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub iqr: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("box stats of empty vector".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let whisker_lo = sorted
        .iter()
        .cloned()
        .find(|v| *v >= lo_fence)
        .unwrap_or(sorted[0]);
    let whisker_hi = sorted
        .iter()
        .rev()
        .cloned()
        .find(|v| *v <= hi_fence)
        .unwrap_or(sorted[sorted.len() - 1]);
    Ok(BoxStats {
        q1,
        median,
        q3,
        iqr,
        whisker_lo,
        whisker_hi,
    })
}

fn mean_or_zero(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shap::{Attribution, AttributionMatrix};

    fn matrix(rows: Vec<Vec<f64>>) -> AttributionMatrix {
        AttributionMatrix {
            rows: rows
                .into_iter()
                .enumerate()
                .map(|(i, phi)| Attribution {
                    phi,
                    base_value: 0.0,
                    point_id: i,
                    model_tag: "test".into(),
                })
                .collect(),
            model_tag: "test".into(),
            background_digest: "bg".into(),
        }
    }

    #[test]
    fn euclidean_identity_and_hand_values() {
        let a = matrix(vec![vec![1.0, 0.0]]);
        let (mean, _) = shapgap_euclidean(&a, &a).unwrap();
        assert_eq!(mean, 0.0);

        let b = matrix(vec![vec![0.0, 1.0]]);
        let (mean, per) = shapgap_euclidean(&a, &b).unwrap();
        assert!((mean - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(per.len(), 1);

        // Distances 3 and 4 average to 3.5.
        let c = matrix(vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let d = matrix(vec![vec![3.0, 0.0], vec![0.0, 4.0]]);
        let (mean, _) = shapgap_euclidean(&c, &d).unwrap();
        assert!((mean - 3.5).abs() < 1e-12);
    }

    #[test]
    fn cosine_parallel_antiparallel_orthogonal() {
        let a = matrix(vec![vec![1.0, 2.0]]);
        let (mean, _, _) = shapgap_cosine(&a, &a).unwrap();
        assert!(mean.abs() < 1e-12);

        let neg = matrix(vec![vec![-1.0, -2.0]]);
        let (mean, _, _) = shapgap_cosine(&a, &neg).unwrap();
        assert!((mean - 2.0).abs() < 1e-12);

        let x = matrix(vec![vec![1.0, 0.0]]);
        let y = matrix(vec![vec![0.0, 1.0]]);
        let (mean, _, _) = shapgap_cosine(&x, &y).unwrap();
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_zero_vector_rules() {
        let zero = matrix(vec![vec![0.0, 0.0]]);
        let (mean, _, flags) = shapgap_cosine(&zero, &zero).unwrap();
        assert_eq!(mean, 0.0);
        assert_eq!(flags.both_zero, 1);

        let nonzero = matrix(vec![vec![1.0, 1.0]]);
        let (mean, _, flags) = shapgap_cosine(&zero, &nonzero).unwrap();
        assert_eq!(mean, 1.0);
        assert_eq!(flags.one_zero, 1);
    }

    #[test]
    fn scaling_separates_cosine_from_euclidean() {
        let a = matrix(vec![vec![1.0, 2.0, 3.0]]);
        let doubled = matrix(vec![vec![2.0, 4.0, 6.0]]);
        let (cos, _, _) = shapgap_cosine(&a, &doubled).unwrap();
        let (l2, _) = shapgap_euclidean(&a, &doubled).unwrap();
        assert!(cos.abs() < 1e-12);
        assert!(l2 > 0.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = matrix(vec![vec![1.0, 2.0]]);
        let b = matrix(vec![vec![1.0, 2.0, 3.0]]);
        assert!(shapgap_euclidean(&a, &b).is_err());
        let c = matrix(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(shapgap_cosine(&a, &c).is_err());
    }

    #[test]
    fn shap_length_prefix_cases() {
        let cfg = ShapLengthConfig { p: 0.8 };
        assert_eq!(shap_length(&[0.5, 0.3, 0.2], &cfg), 2);

        let cfg = ShapLengthConfig { p: 0.9 };
        assert_eq!(shap_length(&[0.25, 0.25, 0.25, 0.25], &cfg), 4);

        assert_eq!(shap_length(&[0.0, 0.7, 0.0], &ShapLengthConfig::default()), 1);
        assert_eq!(shap_length(&[0.0, 0.0], &ShapLengthConfig::default()), 0);
    }

    #[test]
    fn shap_length_monotone_in_p() {
        let phi = [0.4, -0.3, 0.2, -0.05, 0.05];
        let mut prev = 0;
        for p in [0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
            let len = shap_length(&phi, &ShapLengthConfig { p });
            assert!(len >= prev);
            prev = len;
        }
        assert!(prev <= phi.len());
    }

    #[test]
    fn fidelity_cases() {
        let a = vec![true, false, true, false];
        assert_eq!(fidelity(&a, &a).unwrap(), 1.0);
        let b: Vec<bool> = a.iter().map(|x| !x).collect();
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
        let c = vec![true, false, false, true];
        assert_eq!(fidelity(&a, &c).unwrap(), 0.5);
        assert_eq!(fidelity(&a, &c).unwrap(), fidelity(&c, &a).unwrap());
        assert!(fidelity(&a, &[true]).is_err());
    }

    #[test]
    fn auc_cases() {
        // Perfect separation.
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);

        // All ties.
        let flat = [0.5, 0.5, 0.5, 0.5];
        assert_eq!(auc(&flat, &labels).unwrap(), 0.5);

        // Exhaustive pair count: 3 of 4 anomaly/normal pairs ordered.
        let scores = [0.9, 0.8, 0.7, 0.1];
        let labels = [true, false, true, false];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.75);

        assert!(auc(&scores, &[true, true, true, true]).is_err());
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let scores = [0.1, 0.4, 0.35, 0.8, 0.95, 0.2];
        let labels = [false, true, false, true, true, false];
        let base = auc(&scores, &labels).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|s| (5.0 * s).exp()).collect();
        assert_eq!(auc(&squashed, &labels).unwrap(), base);
    }

    #[test]
    fn precision_cases() {
        let labels = [true, false, false, false];
        let exact = [true, false, false, false];
        let p = precision(&exact, &labels).unwrap();
        assert_eq!(p.anomaly, Some(1.0));
        assert_eq!(p.normal, Some(1.0));
        assert_eq!(p.weighted, Some(1.0));

        // All-anomaly predictions leave normal precision undefined.
        let all = [true, true, true, true, true, true, true, true, true, true];
        let lab10 = [true, false, false, false, false, false, false, false, false, false];
        let p = precision(&all, &lab10).unwrap();
        assert_eq!(p.anomaly, Some(0.1));
        assert_eq!(p.normal, None);
        assert_eq!(p.weighted, None);

        // Hand confusion matrix: anomaly 0.5, normal 1.0, weighted 0.875.
        let pred = [true, true, false, false];
        let lab = [true, false, false, false];
        let p = precision(&pred, &lab).unwrap();
        assert_eq!(p.anomaly, Some(0.5));
        assert_eq!(p.normal, Some(1.0));
        assert_eq!(p.weighted, Some(0.875));
    }

    #[test]
    fn spearman_signs_and_ties() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [10.0, 20.0, 30.0, 40.0];
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        assert!((spearman(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(spearman(&[1.0, 1.0], &[2.0, 3.0]).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&sorted, 0.0), 1.0);
        assert_eq!(quantile_sorted(&sorted, 1.0), 4.0);
        assert_eq!(quantile_sorted(&sorted, 0.5), 2.5);
        let stats = box_stats(&sorted).unwrap();
        assert_eq!(stats.median, 2.5);
        assert!((stats.q1 - 1.75).abs() < 1e-12);
        assert!((stats.q3 - 3.25).abs() < 1e-12);
    }

    #[test]
    fn metric_report_validation_catches_mean_drift() {
        let report = MetricReport {
            auc: 0.9,
            precision: PrecisionByClass::default(),
            fidelity: 1.0,
            shapgap_l2_mean: 5.0,
            shapgap_cos_mean: 0.0,
            shaplength_mean: 1.0,
            per_point_l2: vec![1.0, 2.0],
            per_point_cos: vec![0.0, 0.0],
            cosine_zero_flags: CosineZeroFlags::default(),
        };
        assert!(report.validate().is_err());
    }
}
