//! Tabular dataset ingestion, validation, standardization, and synthetic
//! anomaly benchmarks.
//!
//! Labels ride along for evaluation only; fitting code receives the feature
//! matrix and never sees them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seeds;

/// Immutable feature matrix with optional binary anomaly labels.
///
/// Invariants enforced at construction: all entries finite, unique feature
/// names of matching arity, and labels (when present) covering both classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Option<Vec<bool>>,
    feature_names: Vec<String>,
    provenance: String,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Option<Vec<bool>>,
        feature_names: Vec<String>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::InvalidParameter("empty feature matrix".into()));
        }
        if let Some((row, col)) = first_nonfinite(&features.view()) {
            return Err(Error::Parse {
                row: row + 1,
                column: feature_names
                    .get(col)
                    .cloned()
                    .unwrap_or_else(|| format!("#{col}")),
                message: "non-finite value".into(),
            });
        }
        if feature_names.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: feature_names.len(),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate feature name {name:?}"
                )));
            }
        }
        if let Some(lab) = &labels {
            if lab.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: lab.len(),
                });
            }
            let anomalies = lab.iter().filter(|&&a| a).count();
            if anomalies == 0 || anomalies == n {
                return Err(Error::SingleClass(format!(
                    "{anomalies} anomalies out of {n} rows"
                )));
            }
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            provenance: provenance.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Fraction of labeled anomalies, if labels are present.
    pub fn contamination(&self) -> Option<f64> {
        self.labels
            .as_ref()
            .map(|lab| lab.iter().filter(|&&a| a).count() as f64 / lab.len() as f64)
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels
            .as_ref()
            .map_or(0, |lab| lab.iter().filter(|&&a| a).count())
    }

    /// SHA-256 over the exact feature bytes, labels, and names.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for v in self.features.iter() {
            hasher.update(v.to_le_bytes());
        }
        if let Some(lab) = &self.labels {
            for &a in lab {
                hasher.update([u8::from(a)]);
            }
        }
        for name in &self.feature_names {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
        }
        hex::encode(hasher.finalize())
    }

    /// Same rows, new feature matrix (used by standardization and noise
    /// injection). Labels and names are carried over untouched.
    pub fn with_features(&self, features: Array2<f64>, provenance: impl Into<String>) -> Result<Self> {
        if features.dim() != self.features.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.features.ncols(),
                found: features.ncols(),
            });
        }
        Dataset::new(
            features,
            self.labels.clone(),
            self.feature_names.clone(),
            provenance,
        )
    }

    /// Row subset in the given index order.
    pub fn select_rows(&self, indices: &[usize], provenance: impl Into<String>) -> Result<Self> {
        let mut features = Array2::zeros((indices.len(), self.d()));
        for (out, &i) in indices.iter().enumerate() {
            features.row_mut(out).assign(&self.features.row(i));
        }
        let labels = self
            .labels
            .as_ref()
            .map(|lab| indices.iter().map(|&i| lab[i]).collect());
        Dataset::new(features, labels, self.feature_names.clone(), provenance)
    }

    /// Writes the dataset as CSV (header row, shortest round-trip floats,
    /// optional trailing `label` column with 0/1 values).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = self.feature_names.clone();
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n() {
            record.clear();
            for v in self.features.row(i) {
                record.push(format!("{v}"));
            }
            if let Some(lab) = &self.labels {
                record.push(if lab[i] { "1".into() } else { "0".into() });
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn first_nonfinite(m: &ArrayView2<'_, f64>) -> Option<(usize, usize)> {
    for (i, row) in m.outer_iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}

/// Published shape of a known benchmark dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub n_records: usize,
    pub n_features: usize,
    pub n_anomalies: usize,
}

impl DatasetDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.n_anomalies >= self.n_records {
            return Err(Error::InvalidParameter(format!(
                "descriptor {:?}: n_anomalies {} must be < n_records {}",
                self.name, self.n_anomalies, self.n_records
            )));
        }
        if self.n_features == 0 {
            return Err(Error::InvalidParameter(format!(
                "descriptor {:?}: n_features must be >= 1",
                self.name
            )));
        }
        Ok(())
    }

    pub fn check(&self, data: &Dataset) -> Result<()> {
        let found = (data.n(), data.d(), data.anomaly_count());
        let expected = (self.n_records, self.n_features, self.n_anomalies);
        if found != expected {
            return Err(Error::DescriptorMismatch {
                name: self.name.clone(),
                expected: format!(
                    "{} records x {} features, {} anomalies",
                    expected.0, expected.1, expected.2
                ),
                found: format!(
                    "{} records x {} features, {} anomalies",
                    found.0, found.1, found.2
                ),
            });
        }
        Ok(())
    }
}

/// Descriptor manifest keyed by dataset name.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DescriptorManifest {
    pub datasets: BTreeMap<String, DatasetDescriptor>,
}

impl DescriptorManifest {
    /// Built-in manifest for the three public benchmarks.
    pub fn builtin() -> Self {
        serde_json::from_str(include_str!("descriptors.json"))
            .expect("embedded descriptor manifest parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn get(&self, name: &str) -> Result<&DatasetDescriptor> {
        self.datasets
            .get(name)
            .ok_or_else(|| Error::UnknownDataset(name.to_string()))
    }
}

/// Policy for rows containing empty or non-finite cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Fail ingestion, naming the offending row and column.
    #[default]
    Reject,
    /// Drop the row silently.
    DropRow,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub missing: MissingPolicy,
}

/// Loads a CSV with a header row into a [`Dataset`].
///
/// All non-label columns must parse as real numbers. Label values must be 0
/// or 1 (1 = anomaly). If a descriptor is given, the loaded shape must match
/// it exactly.
pub fn load_csv(
    path: &Path,
    label_column: Option<&str>,
    descriptor: Option<&DatasetDescriptor>,
) -> Result<Dataset> {
    load_csv_with(path, label_column, descriptor, LoadOptions::default())
}

pub fn load_csv_with(
    path: &Path,
    label_column: Option<&str>,
    descriptor: Option<&DatasetDescriptor>,
    options: LoadOptions,
) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();

    let label_idx = match label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingLabelColumn(name.to_string()))?,
        ),
        None => None,
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<bool> = Vec::new();
    let mut n = 0usize;
    'records: for (rec_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = rec_idx + 1; // 1-based data row, header excluded
        let mut row_buf = Vec::with_capacity(feature_names.len());
        let mut label_buf = None;
        for (col_idx, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let column = header
                .get(col_idx)
                .cloned()
                .unwrap_or_else(|| format!("#{col_idx}"));
            if Some(col_idx) == label_idx {
                label_buf = Some(match cell {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::Parse {
                            row: row_no,
                            column,
                            message: format!("label must be 0 or 1, found {other:?}"),
                        })
                    }
                });
                continue;
            }
            if cell.is_empty() {
                match options.missing {
                    MissingPolicy::Reject => {
                        return Err(Error::Parse {
                            row: row_no,
                            column,
                            message: "missing value".into(),
                        })
                    }
                    MissingPolicy::DropRow => continue 'records,
                }
            }
            let value: f64 = cell.parse().map_err(|e| Error::Parse {
                row: row_no,
                column: column.clone(),
                message: format!("{e}"),
            })?;
            if !value.is_finite() {
                match options.missing {
                    MissingPolicy::Reject => {
                        return Err(Error::Parse {
                            row: row_no,
                            column,
                            message: "non-finite value".into(),
                        })
                    }
                    MissingPolicy::DropRow => continue 'records,
                }
            }
            row_buf.push(value);
        }
        if row_buf.len() != feature_names.len() {
            return Err(Error::Parse {
                row: row_no,
                column: format!("#{}", record.len()),
                message: format!(
                    "expected {} feature cells, found {}",
                    feature_names.len(),
                    row_buf.len()
                ),
            });
        }
        rows.extend_from_slice(&row_buf);
        if let Some(lab) = label_buf {
            labels.push(lab);
        }
        n += 1;
    }

    let d = feature_names.len();
    let features = Array2::from_shape_vec((n, d), rows)
        .map_err(|e| Error::InvalidParameter(format!("csv shape: {e}")))?;
    let labels = label_idx.map(|_| labels);
    let data = Dataset::new(
        features,
        labels,
        feature_names,
        path.display().to_string(),
    )?;
    if let Some(desc) = descriptor {
        desc.validate()?;
        desc.check(&data)?;
    }
    Ok(data)
}

/// Per-feature centering/scaling parameters produced by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Features left untouched because their sample variance is zero.
    pub zero_variance: Vec<bool>,
}

impl Standardizer {
    pub fn identity(d: usize) -> Self {
        Self {
            means: vec![0.0; d],
            stds: vec![1.0; d],
            zero_variance: vec![false; d],
        }
    }

    pub fn apply(&self, features: &ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = features.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            if self.zero_variance[j] {
                continue;
            }
            col.mapv_inplace(|v| (v - self.means[j]) / self.stds[j]);
        }
        out
    }

    pub fn apply_point(&self, point: &mut [f64]) {
        for (j, v) in point.iter_mut().enumerate() {
            if !self.zero_variance[j] {
                *v = (*v - self.means[j]) / self.stds[j];
            }
        }
    }
}

/// Centers each feature to mean 0 and scales to sample standard deviation 1
/// (n-1 denominator). Zero-variance features pass through unchanged and are
/// flagged in the returned [`Standardizer`].
pub fn standardize(data: &Dataset) -> (Dataset, Standardizer) {
    let n = data.n() as f64;
    let d = data.d();
    let mut means = vec![0.0; d];
    let mut stds = vec![1.0; d];
    let mut zero_variance = vec![false; d];
    for (j, col) in data.features().axis_iter(Axis(1)).enumerate() {
        let mean = col.iter().sum::<f64>() / n;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let var = if n > 1.0 { ss / (n - 1.0) } else { 0.0 };
        if var > 0.0 {
            means[j] = mean;
            stds[j] = var.sqrt();
        } else {
            zero_variance[j] = true;
        }
    }
    let standardizer = Standardizer {
        means,
        stds,
        zero_variance,
    };
    let features = standardizer.apply(&data.features());
    let out = Dataset::new(
        features,
        data.labels.clone(),
        data.feature_names.clone(),
        format!("{} (standardized)", data.provenance),
    )
    .expect("standardization preserves validity");
    (out, standardizer)
}

/// Synthetic benchmark flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// One Gaussian cluster plus uniformly scattered far points.
    GlobalOutliers,
    /// Two Gaussian clusters of very different densities plus points planted
    /// in the sparse margin of the dense cluster.
    LocalOutliers,
}

/// Deterministic synthetic benchmark generator.
///
/// `global_outliers`: normals ~ N(0, I); anomalies scattered uniformly in a
/// wide box, rejected back into the far shell so they are unambiguous global
/// outliers (and mutually sparse, which keeps them invisible to a local
/// density detector).
///
/// `local_outliers`: a dense cluster and a much wider sparse cluster;
/// anomalies sit in the thin margin of the dense cluster where its own points
/// no longer reach, yet well inside the range of normal distances to the
/// global centroid.
pub fn gen_synthetic(
    kind: SyntheticKind,
    n_normal: usize,
    n_anomalies: usize,
    d: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_anomalies == 0 || n_normal < 10 * n_anomalies {
        return Err(Error::InvalidParameter(format!(
            "need n_normal >= 10 * n_anomalies >= 10, got {n_normal}/{n_anomalies}"
        )));
    }
    if d < 2 {
        return Err(Error::InvalidParameter(format!("need d >= 2, got {d}")));
    }
    let n = n_normal + n_anomalies;
    let mut features = Array2::zeros((n, d));
    let mut labels = vec![false; n];
    let mut rng = seeds::rng(seeds::mix(&[seed, kind_tag(kind), n as u64, d as u64]));

    match kind {
        SyntheticKind::GlobalOutliers => {
            for i in 0..n_normal {
                for j in 0..d {
                    features[[i, j]] = StandardNormal.sample(&mut rng);
                }
            }
            // Far shell: uniform in [-16, 16]^d, at least 8 from the origin.
            for i in n_normal..n {
                loop {
                    let mut norm2 = 0.0;
                    for j in 0..d {
                        let v: f64 = rng.gen_range(-16.0..16.0);
                        features[[i, j]] = v;
                        norm2 += v * v;
                    }
                    if norm2.sqrt() >= 8.0 {
                        break;
                    }
                }
                labels[i] = true;
            }
        }
        SyntheticKind::LocalOutliers => {
            let n_dense = (n_normal as f64 * 0.6).round() as usize;
            let dense_std = 0.3;
            let sparse_std = 3.0;
            let mut sparse_center = vec![0.0; d];
            sparse_center[0] = 10.0;
            for i in 0..n_normal {
                if i < n_dense {
                    for j in 0..d {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        features[[i, j]] = g * dense_std;
                    }
                } else {
                    for j in 0..d {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        features[[i, j]] = sparse_center[j] + g * sparse_std;
                    }
                }
            }
            // Margin ring of the dense cluster: radius in 4..6 dense sigmas.
            for i in n_normal..n {
                let radius = dense_std * rng.gen_range(4.0..6.0);
                let mut dir = vec![0.0f64; d];
                let mut norm2 = 0.0f64;
                for v in dir.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                    norm2 += *v * *v;
                }
                let norm = norm2.sqrt().max(1e-12);
                for j in 0..d {
                    features[[i, j]] = dir[j] / norm * radius;
                }
                labels[i] = true;
            }
        }
    }

    let feature_names = (0..d).map(|j| format!("f{j}")).collect();
    Dataset::new(
        features,
        Some(labels),
        feature_names,
        format!("synthetic:{kind:?}:{n_normal}+{n_anomalies}x{d}:seed={seed}"),
    )
}

fn kind_tag(kind: SyntheticKind) -> u64 {
    match kind {
        SyntheticKind::GlobalOutliers => 1,
        SyntheticKind::LocalOutliers => 2,
    }
}

/// Desk-scale analogue of one of the public benchmarks (matching feature
/// count and contamination, scaled-down row count). Normals form a unit
/// Gaussian cluster; anomalies sit in a moderate shell with per-feature
/// displacement weights so attribution rankings are stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalogueKind {
    MammographyLike,
    ThyroidLike,
    BankLike,
}

impl AnalogueKind {
    pub fn name(&self) -> &'static str {
        match self {
            AnalogueKind::MammographyLike => "mammography_like",
            AnalogueKind::ThyroidLike => "thyroid_like",
            AnalogueKind::BankLike => "bank_like",
        }
    }

    fn shape(&self) -> (usize, usize, usize) {
        // (n_normal, n_anomalies, d)
        match self {
            AnalogueKind::MammographyLike => (4200, 220, 6),
            AnalogueKind::ThyroidLike => (2800, 220, 21),
            AnalogueKind::BankLike => (2200, 270, 62),
        }
    }
}

pub fn gen_analogue(kind: AnalogueKind, seed: u64) -> Dataset {
    let (n_normal, n_anomalies, d) = kind.shape();
    let n = n_normal + n_anomalies;
    let mut features = Array2::zeros((n, d));
    let mut labels = vec![false; n];
    let mut rng = seeds::rng(seeds::mix_tagged(seed, &["analogue", kind.name()]));

    // Displacement weights decay across features so the leading features
    // carry most of the anomaly signal.
    let weights: Vec<f64> = (0..d).map(|j| 1.0 / (1.0 + j as f64 * 0.35)).collect();
    let wnorm: f64 = weights.iter().map(|w| w * w).sum::<f64>().sqrt();

    for i in 0..n_normal {
        for j in 0..d {
            features[[i, j]] = StandardNormal.sample(&mut rng);
        }
    }
    for i in n_normal..n {
        let radius: f64 = rng.gen_range(3.5..5.5);
        let side: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        for j in 0..d {
            let g: f64 = StandardNormal.sample(&mut rng);
            features[[i, j]] = side * radius * weights[j] / wnorm + g * 0.35;
        }
        labels[i] = true;
    }

    let feature_names = (0..d).map(|j| format!("f{j}")).collect();
    Dataset::new(
        features,
        Some(labels),
        feature_names,
        format!("analogue:{}:seed={seed}", kind.name()),
    )
    .expect("analogue generator produces valid datasets")
}

/// Renders a dataset back to CSV text (used by tests for round-trip checks).
pub fn to_csv_string(data: &Dataset) -> String {
    let mut out = String::new();
    let mut header = data.feature_names().join(",");
    if data.labels().is_some() {
        header.push_str(",label");
    }
    let _ = writeln!(out, "{header}");
    for i in 0..data.n() {
        let mut cells: Vec<String> = data.row(i).iter().map(|v| format!("{v}")).collect();
        if let Some(lab) = data.labels() {
            cells.push(if lab[i] { "1".into() } else { "0".into() });
        }
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}
