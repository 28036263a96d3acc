//! Model aggregation in class-probability space. The same operations serve a
//! cluster head combining its members and the base station combining heads.

use serde::{Deserialize, Serialize};

use crate::clustering::{check_homogeneity, DataSignature};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ml::{self, ClassifierConfig, DenseNetwork, Matrix, ProbabilityMatrix, Standardizer};
use crate::DeviceId;

/// Transform from raw dataset rows to the network's input: optional column
/// projection, optional z-scoring, optional encoder and optional z-scoring of
/// the codes, in that order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InputPipeline {
    pub columns: Option<Vec<usize>>,
    pub standardizer: Option<Standardizer>,
    pub encoder: Option<DenseNetwork>,
    pub latent_standardizer: Option<Standardizer>,
}

impl InputPipeline {
    pub fn apply(&self, raw: &Matrix) -> Result<Matrix> {
        let mut x = match &self.columns {
            Some(cols) => raw.select_cols(cols)?,
            None => raw.clone(),
        };
        if let Some(s) = &self.standardizer {
            x = s.transform(&x)?;
        }
        if let Some(enc) = &self.encoder {
            x = ml::encode(enc, &x)?;
        }
        if let Some(s) = &self.latent_standardizer {
            x = s.transform(&x)?;
        }
        Ok(x)
    }

    pub fn param_count(&self) -> usize {
        self.encoder.as_ref().map_or(0, DenseNetwork::param_count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArtifactKind {
    Plain,
    /// Stacked model: the network consumes the members' concatenated
    /// probability vectors, so inference needs the members too.
    Meta {
        members: Vec<ModelArtifact>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub network: DenseNetwork,
    pub pipeline: InputPipeline,
    pub kind: ArtifactKind,
    pub source_id: DeviceId,
    pub round: u32,
    pub signature: DataSignature,
}

impl ModelArtifact {
    pub fn new(
        network: DenseNetwork,
        pipeline: InputPipeline,
        source_id: DeviceId,
        round: u32,
        signature: DataSignature,
    ) -> Result<Self> {
        let a = Self {
            network,
            pipeline,
            kind: ArtifactKind::Plain,
            source_id,
            round,
            signature,
        };
        a.check()?;
        Ok(a)
    }

    fn check(&self) -> Result<()> {
        if self.signature.num_classes() != self.network.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.signature.num_classes(),
                actual: self.network.output_dim(),
                context: "artifact output classes",
            });
        }
        Ok(())
    }

    pub fn encoder(&self) -> Option<&DenseNetwork> {
        self.pipeline.encoder.as_ref()
    }

    pub fn is_meta(&self) -> bool {
        matches!(self.kind, ArtifactKind::Meta { .. })
    }

    /// Parameters that travel with this artifact when it is transmitted.
    pub fn param_count(&self) -> usize {
        let own = self.network.param_count() + self.pipeline.param_count();
        match &self.kind {
            ArtifactKind::Plain => own,
            ArtifactKind::Meta { members } => own + members.iter().map(ModelArtifact::param_count).sum::<usize>(),
        }
    }

    /// Class probabilities for raw dataset rows.
    pub fn predict_proba(&self, raw: &Matrix) -> Result<ProbabilityMatrix> {
        match &self.kind {
            ArtifactKind::Plain => ml::predict_proba(&self.network, &self.pipeline.apply(raw)?),
            ArtifactKind::Meta { members } => ml::predict_proba(&self.network, &stacked_inputs(members, raw)?),
        }
    }

    /// Probabilities with this artifact's network but another input pipeline.
    /// Only meaningful for plain artifacts.
    pub fn predict_proba_via(&self, pipeline: &InputPipeline, raw: &Matrix) -> Result<ProbabilityMatrix> {
        match &self.kind {
            ArtifactKind::Plain => ml::predict_proba(&self.network, &pipeline.apply(raw)?),
            ArtifactKind::Meta { .. } => self.predict_proba(raw),
        }
    }
}

fn stacked_inputs(members: &[ModelArtifact], raw: &Matrix) -> Result<Matrix> {
    let probs = members
        .iter()
        .map(|m| m.predict_proba(raw).map(ProbabilityMatrix::into_matrix))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Matrix> = probs.iter().collect();
    Matrix::hstack(&refs)
}

/// Shared evaluation rows on which member probabilities are compared.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub features: Matrix,
    pub labels: Option<Vec<usize>>,
}

impl ProbeSet {
    pub fn new(features: Matrix, labels: Option<Vec<usize>>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if let Some(l) = &labels {
            if l.len() != features.rows() {
                return Err(Error::DimensionMismatch {
                    expected: features.rows(),
                    actual: l.len(),
                    context: "probe labels",
                });
            }
        }
        Ok(Self { features, labels })
    }

    pub fn from_dataset(d: &Dataset) -> Result<Self> {
        Self::new(d.features.clone(), Some(d.labels.clone()))
    }

    fn labels(&self) -> Result<&[usize]> {
        self.labels.as_deref().ok_or(Error::MissingLabels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AggregationMethod {
    #[default]
    WeightedAveraging,
    AdaptiveWeightedAveraging,
    MetaLearning,
    Retraining,
}

impl AggregationMethod {
    pub fn needs_labels(self) -> bool {
        self != AggregationMethod::WeightedAveraging
    }
}

fn check_members(members: &[ModelArtifact]) -> Result<()> {
    let first = members.first().ok_or(Error::EmptyMemberList)?;
    if members
        .iter()
        .any(|m| !check_homogeneity(&first.signature, &m.signature))
    {
        return Err(Error::SignatureMismatch);
    }
    Ok(())
}

fn member_probabilities(members: &[ModelArtifact], probe: &ProbeSet) -> Result<Vec<ProbabilityMatrix>> {
    members.iter().map(|m| m.predict_proba(&probe.features)).collect()
}

/// Index of the member whose probabilities are closest to `avg`
/// (Frobenius), ties going to the lower source id.
fn closest_member(members: &[ModelArtifact], probs: &[ProbabilityMatrix], avg: &Matrix) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in probs.iter().enumerate() {
        let d = p.matrix().frobenius_distance(avg);
        if d < best_d || (d == best_d && members[i].source_id < members[best].source_id) {
            best = i;
            best_d = d;
        }
    }
    best
}

pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn check_simplex(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: weights.len(),
            context: "aggregation weights",
        });
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "weights must lie on the simplex (sum {sum})"
        )));
    }
    Ok(())
}

/// Renormalizes each row to sum to one; rows of all zeros become uniform.
fn normalize_rows(mut m: Matrix) -> Result<ProbabilityMatrix> {
    let c = m.cols();
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        } else {
            row.iter_mut().for_each(|v| *v = 1.0 / c as f64);
        }
    }
    ProbabilityMatrix::new(m)
}

/// Averages member probabilities on the probe with per-member `weights` and
/// returns the member closest to the average, together with the average.
pub fn aggregate_weighted(
    members: &[ModelArtifact],
    probe: &ProbeSet,
    weights: &[f64],
) -> Result<(ModelArtifact, ProbabilityMatrix)> {
    check_members(members)?;
    check_simplex(weights, members.len())?;
    let probs = member_probabilities(members, probe)?;
    let mut avg = Matrix::zeros(probe.features.rows(), members[0].signature.num_classes());
    for (p, &w) in probs.iter().zip(weights) {
        avg.add_scaled(w, p.matrix());
    }
    let avg = ProbabilityMatrix::new(avg)?;
    let i = closest_member(members, &probs, avg.matrix());
    Ok((members[i].clone(), avg))
}

/// Per-class member weights; row `c` holds the members' weights for class `c`
/// and lies on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights(pub Matrix);

impl ClassWeights {
    pub fn uniform(classes: usize, members: usize) -> Self {
        Self(Matrix::new(classes, members, vec![1.0 / members as f64; classes * members]).expect("sized buffer"))
    }
}

/// Per-class weighted average: column `c` of the result is
/// `sum_m W[c][m] * P_m[:, c]`.
fn class_weighted_scores(probs: &[ProbabilityMatrix], w: &ClassWeights) -> Matrix {
    let rows = probs[0].rows();
    let classes = probs[0].classes();
    let mut out = Matrix::zeros(rows, classes);
    for (m, p) in probs.iter().enumerate() {
        for r in 0..rows {
            let src = p.matrix().row(r);
            let dst = out.row_mut(r);
            for c in 0..classes {
                dst[c] += w.0.get(c, m) * src[c];
            }
        }
    }
    out
}

fn argmax_row(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &p)| if p > best.1 { (i, p) } else { best },
        )
        .0
}

/// Probe accuracy of the per-class weighted average.
pub fn class_weighted_accuracy(members: &[ModelArtifact], probe: &ProbeSet, w: &ClassWeights) -> Result<f64> {
    check_members(members)?;
    let labels = probe.labels()?;
    let probs = member_probabilities(members, probe)?;
    Ok(weighted_hits(&probs, w, labels) as f64 / labels.len() as f64)
}

fn weighted_hits(probs: &[ProbabilityMatrix], w: &ClassWeights, labels: &[usize]) -> usize {
    let scores = class_weighted_scores(probs, w);
    scores
        .iter_rows()
        .zip(labels)
        .filter(|(r, &l)| argmax_row(r) == l)
        .count()
}

pub const ADAPTIVE_GRID: f64 = 0.05;
pub const ADAPTIVE_MAX_SWEEPS: usize = 50;
/// Above this many grid points per class the search moves weight between
/// member pairs instead of enumerating the class simplex.
const FULL_GRID_LIMIT: usize = 5000;

/// All points of the simplex over `m` members with coordinates in steps of
/// `1 / steps`, in lexicographic order.
pub fn simplex_grid(m: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(m: usize, left: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == m {
            cur.push(left);
            out.push(cur.iter().map(|&k| k as f64 / steps as f64).collect());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(m, left - k, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if m > 0 {
        rec(m, steps, steps, &mut Vec::new(), &mut out);
    }
    out
}

fn grid_size(m: usize, steps: usize) -> usize {
    // C(steps + m - 1, m - 1), saturating.
    let mut acc: usize = 1;
    for i in 1..m {
        acc = acc.saturating_mul(steps + i) / i;
        if acc > FULL_GRID_LIMIT {
            return usize::MAX;
        }
    }
    acc
}

/// Coordinate ascent over per-class simplex weights, starting at uniform.
/// Each sweep visits classes in index order and replaces a class's weights
/// with the first grid candidate that strictly improves probe accuracy the
/// most. Stops after a sweep without improvement.
pub fn optimize_adaptive_weights(members: &[ModelArtifact], probe: &ProbeSet) -> Result<ClassWeights> {
    check_members(members)?;
    let labels = probe.labels()?;
    let probs = member_probabilities(members, probe)?;
    Ok(optimize_on_probabilities(&probs, labels))
}

pub(crate) fn optimize_on_probabilities(probs: &[ProbabilityMatrix], labels: &[usize]) -> ClassWeights {
    let m = probs.len();
    let classes = probs[0].classes();
    let mut w = ClassWeights::uniform(classes, m);
    if m == 1 {
        return w;
    }
    let steps = (1.0 / ADAPTIVE_GRID).round() as usize;
    let full = (grid_size(m, steps) != usize::MAX).then(|| simplex_grid(m, steps));
    let mut best = weighted_hits(probs, &w, labels);
    for _ in 0..ADAPTIVE_MAX_SWEEPS {
        let mut improved = false;
        for c in 0..classes {
            let current: Vec<f64> = w.0.row(c).to_vec();
            let candidates: Vec<Vec<f64>> = match &full {
                Some(grid) => grid.clone(),
                None => pair_moves(&current, ADAPTIVE_GRID),
            };
            let mut chosen: Option<Vec<f64>> = None;
            for cand in candidates {
                w.0.row_mut(c).copy_from_slice(&cand);
                let hits = weighted_hits(probs, &w, labels);
                if hits > best {
                    best = hits;
                    chosen = Some(cand);
                }
            }
            w.0.row_mut(c).copy_from_slice(chosen.as_deref().unwrap_or(&current));
            improved |= chosen.is_some();
        }
        if !improved {
            break;
        }
    }
    w
}

fn pair_moves(current: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for from in 0..current.len() {
        if current[from] < step - 1e-12 {
            continue;
        }
        for to in 0..current.len() {
            if to != from {
                let mut c = current.to_vec();
                c[from] = (c[from] - step).max(0.0);
                c[to] += step;
                out.push(c);
            }
        }
    }
    out
}

/// Per-class weighted averaging followed by closest-member selection.
pub fn aggregate_adaptive(
    members: &[ModelArtifact],
    probe: &ProbeSet,
    weights: &ClassWeights,
) -> Result<(ModelArtifact, ProbabilityMatrix)> {
    check_members(members)?;
    let probs = member_probabilities(members, probe)?;
    let avg = normalize_rows(class_weighted_scores(&probs, weights))?;
    let i = closest_member(members, &probs, avg.matrix());
    Ok((members[i].clone(), avg))
}

/// Trains a stacked classifier on the members' concatenated probe
/// probabilities. `config.input_dim` is overridden to `members * classes`.
pub fn train_meta(
    members: &[ModelArtifact],
    probe: &ProbeSet,
    config: &ClassifierConfig,
    source_id: DeviceId,
    round: u32,
) -> Result<ModelArtifact> {
    check_members(members)?;
    let labels = probe.labels()?;
    let inputs = stacked_inputs(members, &probe.features)?;
    let signature = members[0].signature.clone();
    let cfg = ClassifierConfig {
        input_dim: inputs.cols(),
        num_classes: signature.num_classes(),
        ..*config
    };
    let network = ml::train_classifier(&cfg, &inputs, labels)?;
    let mut a = ModelArtifact::new(network, InputPipeline::default(), source_id, round, signature)?;
    a.kind = ArtifactKind::Meta {
        members: members.to_vec(),
    };
    Ok(a)
}

/// Trains one classifier from scratch on the concatenation of the members'
/// data.
pub fn retrain_pooled(member_data: &[&Dataset], config: &ClassifierConfig) -> Result<ModelArtifact> {
    let pooled = pool(member_data)?;
    let network = ml::train_classifier(config, &pooled.features, &pooled.labels)?;
    ModelArtifact::new(network, InputPipeline::default(), 0, 0, pooled.signature()?)
}

/// Continues `base` (network and input pipeline) on the pooled raw data.
pub fn retrain_pooled_from(
    member_data: &[&Dataset],
    config: &ClassifierConfig,
    base: &ModelArtifact,
    source_id: DeviceId,
    round: u32,
) -> Result<ModelArtifact> {
    if base.is_meta() {
        return Err(Error::InvalidConfig("cannot retrain a stacked model".into()));
    }
    let pooled = pool(member_data)?;
    let x = base.pipeline.apply(&pooled.features)?;
    let mut network = base.network.clone();
    let cfg = ClassifierConfig {
        input_dim: x.cols(),
        num_classes: base.signature.num_classes(),
        ..*config
    };
    ml::continue_classifier(&mut network, &cfg, &x, &pooled.labels)?;
    ModelArtifact::new(network, base.pipeline.clone(), source_id, round, base.signature.clone())
}

fn pool(member_data: &[&Dataset]) -> Result<Dataset> {
    if member_data.iter().all(|d| d.is_empty()) {
        return Err(Error::EmptyDataset);
    }
    Dataset::concat(member_data)
}
