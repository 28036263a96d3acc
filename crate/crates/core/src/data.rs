//! Dataset loading, synthetic generation, IID partitioning and per-device
//! feature subsets.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::clustering::DataSignature;
use crate::error::{Error, Result};
use crate::ml::Matrix;
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSchema {
    pub num_features: usize,
    pub num_classes: usize,
    pub label_column: LabelColumn,
}

impl Default for DatasetSchema {
    fn default() -> Self {
        Self {
            num_features: 274,
            num_classes: 9,
            label_column: LabelColumn::Name("label".into()),
        }
    }
}

impl DatasetSchema {
    pub fn validate(&self) -> Result<()> {
        if self.num_features == 0 || self.num_classes == 0 {
            return Err(Error::InvalidConfig("schema counts must be positive".into()));
        }
        Ok(())
    }
}

/// Feature rows with integer class labels in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.rows(),
                actual: labels.len(),
                context: "label count",
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange { label, num_classes });
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn signature(&self) -> Result<DataSignature> {
        DataSignature::dense(self.num_features(), self.num_classes as u32)
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Splits off the first `ceil(fraction * len)` rows of a seeded
    /// permutation. Returns `(split, rest)`.
    pub fn split(&self, fraction: f64, seed: u64, stream_tag: u64) -> (Dataset, Dataset) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut rng::stream(seed, &[stream_tag]));
        let k = ((fraction.clamp(0.0, 1.0) * self.len() as f64).ceil() as usize).min(self.len());
        (self.subset(&order[..k]), self.subset(&order[k..]))
    }

    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or(Error::EmptyDataset)?;
        if parts
            .iter()
            .any(|p| p.num_classes != first.num_classes || p.num_features() != first.num_features())
        {
            return Err(Error::SignatureMismatch);
        }
        let mats: Vec<&Matrix> = parts.iter().map(|p| &p.features).collect();
        Ok(Dataset {
            features: Matrix::vstack(&mats)?,
            labels: parts.iter().flat_map(|p| p.labels.iter().copied()).collect(),
            num_classes: first.num_classes,
        })
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// A loaded CSV: the dataset plus label names in encoding order.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub label_names: Vec<String>,
}

pub fn load_csv(path: &Path, schema: &DatasetSchema) -> Result<LoadedDataset> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = match &schema.label_column {
        LabelColumn::Index(i) if *i < headers.len() => *i,
        LabelColumn::Index(i) => {
            return Err(Error::SchemaMismatch(format!(
                "label column index {i} but header has {} columns",
                headers.len()
            )))
        }
        LabelColumn::Name(name) => headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::SchemaMismatch(format!("no label column named {name:?}")))?,
    };
    if headers.len() - 1 != schema.num_features {
        return Err(Error::SchemaMismatch(format!(
            "expected {} feature columns, header has {}",
            schema.num_features,
            headers.len() - 1
        )));
    }

    let mut data = Vec::new();
    let mut names = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            if c == label_idx {
                names.push(cell.trim().to_string());
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|e| Error::Parse {
                row,
                column: headers[c].to_string(),
                message: format!("{cell:?}: {e}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: headers[c].to_string(),
                    message: format!("non-finite value {cell:?}"),
                });
            }
            data.push(v);
        }
    }
    if names.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let label_names: Vec<String> = names.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    if label_names.len() > schema.num_classes {
        return Err(Error::SchemaMismatch(format!(
            "{} distinct labels exceed {} classes",
            label_names.len(),
            schema.num_classes
        )));
    }
    let code: BTreeMap<&str, usize> = label_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let labels = names.iter().map(|n| code[n.as_str()]).collect();
    let features = Matrix::new(names.len(), schema.num_features, data)?;
    Ok(LoadedDataset {
        dataset: Dataset::new(features, labels, schema.num_classes)?,
        label_names,
    })
}

/// Label name written for class `c`; zero-padded so that name order equals
/// class order when read back.
pub fn class_name(c: usize, num_classes: usize) -> String {
    let width = num_classes.saturating_sub(1).to_string().len();
    format!("class_{c:0width$}")
}

/// Writes `f0..f{n-1},label` rows; floats use the shortest round-trip form.
pub fn write_csv<W: Write>(out: W, dataset: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..dataset.num_features()).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for (row, &label) in dataset.features.iter_rows().zip(&dataset.labels) {
        rec.clear();
        rec.extend(row.iter().map(|v| v.to_string()));
        rec.push(class_name(label, dataset.num_classes));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Shape of the synthetic surrogate. Each class owns `modes_per_class`
/// centres in a `latent_dim`-dimensional space; a sample picks one of its
/// class's centres uniformly, scatters around it with standard deviation
/// `spread` and is mapped into feature space by a fixed random linear map,
/// plus isotropic feature noise of scale `spread * noise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub latent_dim: usize,
    pub modes_per_class: usize,
    pub separation: f64,
    pub spread: f64,
    pub noise: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            latent_dim: 16,
            modes_per_class: 4,
            separation: 1.2,
            spread: 1.0,
            noise: 2.5,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.modes_per_class == 0 {
            return Err(Error::InvalidConfig(
                "latent_dim and modes_per_class must be positive".into(),
            ));
        }
        if !(self.separation > 0.0 && self.spread >= 0.0 && self.noise >= 0.0) {
            return Err(Error::InvalidConfig("synthetic scales must be non-negative".into()));
        }
        Ok(())
    }
}

/// Mode centres in feature space, as used by [`gen_synthetic_with`]. Row
/// `c * modes_per_class + m` is mode `m` of class `c`.
pub fn synthetic_means(schema: &DatasetSchema, params: &SyntheticParams, seed: u64) -> Matrix {
    let (means, map) = synthetic_structure(schema, params, seed);
    let mut out = Matrix::zeros(means.rows(), schema.num_features);
    for c in 0..means.rows() {
        project(&map, means.row(c), out.row_mut(c));
    }
    out
}

fn synthetic_structure(schema: &DatasetSchema, params: &SyntheticParams, seed: u64) -> (Matrix, Matrix) {
    let mut r = rng::stream(seed, &[tag::DATA, 0]);
    let k = params.latent_dim;
    let mut means = Matrix::zeros(schema.num_classes * params.modes_per_class, k);
    for v in means.as_mut_slice() {
        *v = params.separation * r.sample::<f64, _>(StandardNormal);
    }
    // Entries scaled so each feature has variance ~ |z|^2 / k.
    let scale = 1.0 / (k as f64).sqrt();
    let mut map = Matrix::zeros(schema.num_features, k);
    for v in map.as_mut_slice() {
        *v = scale * r.sample::<f64, _>(StandardNormal);
    }
    (means, map)
}

fn project(map: &Matrix, z: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(map.iter_rows()) {
        *o = row.iter().zip(z).map(|(a, b)| a * b).sum();
    }
}

pub fn gen_synthetic(schema: &DatasetSchema, samples: usize, seed: u64) -> Result<Dataset> {
    gen_synthetic_with(schema, &SyntheticParams::default(), samples, seed)
}

/// Balanced labels: class `i % num_classes` for sample `i`, then shuffled.
pub fn gen_synthetic_with(
    schema: &DatasetSchema,
    params: &SyntheticParams,
    samples: usize,
    seed: u64,
) -> Result<Dataset> {
    schema.validate()?;
    params.validate()?;
    if samples == 0 {
        return Err(Error::EmptyDataset);
    }
    let (means, map) = synthetic_structure(schema, params, seed);
    let mut r = rng::stream(seed, &[tag::DATA, 1]);
    let mut labels: Vec<usize> = (0..samples).map(|i| i % schema.num_classes).collect();
    labels.shuffle(&mut r);

    let k = params.latent_dim;
    let mut features = Matrix::zeros(samples, schema.num_features);
    let mut z = vec![0.0; k];
    let modes = params.modes_per_class;
    for (i, &y) in labels.iter().enumerate() {
        let mode = if modes > 1 {
            y * modes + r.random_range(0..modes)
        } else {
            y
        };
        for (zj, mj) in z.iter_mut().zip(means.row(mode)) {
            *zj = mj + params.spread * r.sample::<f64, _>(StandardNormal);
        }
        let row = features.row_mut(i);
        project(&map, &z, row);
        for v in row.iter_mut() {
            *v += params.spread * params.noise * r.sample::<f64, _>(StandardNormal);
        }
    }
    Dataset::new(features, labels, schema.num_classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PartitionStrategy {
    #[default]
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionPlan {
    pub devices: usize,
    pub samples_per_device: usize,
    pub strategy: PartitionStrategy,
    pub seed: u64,
}

impl Default for PartitionPlan {
    fn default() -> Self {
        Self {
            devices: 5,
            samples_per_device: 3500,
            strategy: PartitionStrategy::Iid,
            seed: 0,
        }
    }
}

impl PartitionPlan {
    pub fn validate(&self) -> Result<()> {
        if self.devices == 0 || self.samples_per_device == 0 {
            return Err(Error::InvalidConfig("partition counts must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partitions {
    pub parts: Vec<Dataset>,
    /// Set when the source was too small for disjoint partitions.
    pub with_replacement: bool,
}

pub fn partition(dataset: &Dataset, plan: &PartitionPlan) -> Result<Partitions> {
    plan.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut r = rng::stream(plan.seed, &[tag::PARTITION]);
    let need = plan.devices * plan.samples_per_device;
    if need <= dataset.len() {
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut r);
        let parts = order[..need]
            .chunks(plan.samples_per_device)
            .map(|idx| dataset.subset(idx))
            .collect();
        return Ok(Partitions {
            parts,
            with_replacement: false,
        });
    }
    let parts = (0..plan.devices)
        .map(|_| {
            let idx: Vec<usize> = (0..plan.samples_per_device)
                .map(|_| r.random_range(0..dataset.len()))
                .collect();
            dataset.subset(&idx)
        })
        .collect();
    Ok(Partitions {
        parts,
        with_replacement: true,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSubsetPlan {
    pub subsets: Vec<Vec<usize>>,
}

impl FeatureSubsetPlan {
    pub fn identity(num_features: usize, devices: usize) -> Self {
        Self {
            subsets: vec![(0..num_features).collect(); devices],
        }
    }

    /// Distinct sorted random subsets of `subset_size` features per device.
    pub fn random(num_features: usize, devices: usize, subset_size: usize, seed: u64) -> Result<Self> {
        if subset_size == 0 || subset_size > num_features {
            return Err(Error::InvalidConfig(format!(
                "feature subset size {subset_size} not in [1, {num_features}]"
            )));
        }
        let subsets = (0..devices)
            .map(|d| {
                let mut r = rng::stream(seed, &[tag::FEATURES, d as u64]);
                let mut s = index::sample(&mut r, num_features, subset_size).into_vec();
                s.sort_unstable();
                s
            })
            .collect();
        Ok(Self { subsets })
    }
}

pub fn select_features(dataset: &Dataset, plan: &FeatureSubsetPlan, device_index: usize) -> Result<Dataset> {
    let cols = plan.subsets.get(device_index).ok_or(Error::IndexOutOfRange {
        index: device_index,
        len: plan.subsets.len(),
    })?;
    Ok(Dataset {
        features: dataset.features.select_cols(cols)?,
        labels: dataset.labels.clone(),
        num_classes: dataset.num_classes,
    })
}
