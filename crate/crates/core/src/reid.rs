//! Person re-identification on top of a trained encoder: per-step gait
//! feature extraction, a small frozen-feature recognition network, and
//! multi-shot metrics (Rank-1 / CMC / nAUC).

use serde::{Deserialize, Serialize};

use crate::attention::AttentionMode;
use crate::error::{GaitError, Result};
use crate::numerics::{softmax, Matrix, OptimizerState, ParamTensor};
use crate::rng::Rng;
use crate::seq2seq::{decode, encode, DecodeMode};
use crate::skeldata::{split_axes, SkeletonSequence};
use crate::trainer::Checkpoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    /// Concatenated per-axis context vectors, one per decoding step.
    Age,
    /// Concatenated per-axis encoder hidden states, one per input frame.
    EncodedState,
}

impl FeatureKind {
    pub fn parse(s: &str) -> Result<FeatureKind> {
        match s {
            "age" => Ok(FeatureKind::Age),
            "encoded-state" => Ok(FeatureKind::EncodedState),
            other => Err(GaitError::Config(format!(
                "unknown feature kind '{other}' (expected age or encoded-state)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureKind::Age => "age",
            FeatureKind::EncodedState => "encoded-state",
        }
    }
}

/// One skeleton-level feature vector: `values` has width 3k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    /// Index of the source sequence in extraction order.
    pub sequence: usize,
    /// 1-based step within the sequence.
    pub step: usize,
    pub label: usize,
    pub values: Vec<f64>,
}

/// Runs the frozen model over each sequence and emits one feature row
/// per step. Decoding is free-running (no ground-truth feedback), so
/// extraction works identically on data with or without useful labels.
pub fn extract_features(
    sequences: &[SkeletonSequence],
    ckpt: &Checkpoint,
    kind: FeatureKind,
) -> Result<Vec<FeatureRow>> {
    if kind == FeatureKind::Age && ckpt.config.attention == AttentionMode::None {
        return Err(GaitError::Config(
            "checkpoint was trained without attention; it has no context vectors, \
             so age features cannot be extracted (use encoded-state)"
                .into(),
        ));
    }
    let attn = ckpt.config.attention_config();
    let f = ckpt.config.seq_len;
    let mut rows = Vec::with_capacity(sequences.len() * f);
    for (seq_idx, seq) in sequences.iter().enumerate() {
        if seq.frames.len() != f {
            return Err(GaitError::Shape(format!(
                "sequence {seq_idx} has {} frames, checkpoint expects {f}",
                seq.frames.len()
            )));
        }
        if let Some(sk) = seq.frames.first() {
            if sk.joint_count() != ckpt.joint_count {
                return Err(GaitError::Shape(format!(
                    "sequence {seq_idx} has {} joints, checkpoint expects {}",
                    sk.joint_count(),
                    ckpt.joint_count
                )));
            }
        }
        let channels = split_axes(seq);
        // per_axis[axis][t] is a k-vector; rows are built by concatenation.
        let mut per_axis: Vec<Vec<Vec<f64>>> = Vec::with_capacity(3);
        for (axis_idx, channel) in channels.iter().enumerate() {
            let enc = encode(&channel.values, &ckpt.models[axis_idx].encoder)?;
            match kind {
                FeatureKind::EncodedState => per_axis.push(enc.top_states.clone()),
                FeatureKind::Age => {
                    let trace = decode(
                        &enc,
                        None,
                        &ckpt.models[axis_idx].decoder,
                        &attn,
                        DecodeMode::Test,
                        ckpt.config.reverse,
                    )?;
                    per_axis.push(
                        trace
                            .steps
                            .iter()
                            .map(|s| {
                                s.context
                                    .clone()
                                    .expect("attention-enabled decode always yields contexts")
                            })
                            .collect(),
                    );
                }
            }
        }
        for t in 0..f {
            let mut values = Vec::with_capacity(3 * ckpt.config.hidden);
            for axis in &per_axis {
                values.extend_from_slice(&axis[t]);
            }
            rows.push(FeatureRow {
                sequence: seq_idx,
                step: t + 1,
                label: seq.label,
                values,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecognizerConfig {
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for RecognizerConfig {
    fn default() -> Self {
        RecognizerConfig {
            hidden_dim: 128,
            learning_rate: 0.1,
            momentum: 0.9,
            epochs: 300,
            seed: 0,
        }
    }
}

impl RecognizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(GaitError::Config("recognizer hidden_dim must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(GaitError::Config("recognizer learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(GaitError::Config("recognizer momentum must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// hidden tanh layer + softmax output over C identities.
#[derive(Debug, Clone, PartialEq)]
pub struct RecognitionParams {
    pub classes: usize,
    pub hidden_w: Matrix,
    pub hidden_b: Vec<f64>,
    pub out_w: Matrix,
    pub out_b: Vec<f64>,
}

impl RecognitionParams {
    pub fn zeros(feature_dim: usize, hidden_dim: usize, classes: usize) -> Self {
        RecognitionParams {
            classes,
            hidden_w: Matrix::zeros(hidden_dim, feature_dim),
            hidden_b: vec![0.0; hidden_dim],
            out_w: Matrix::zeros(classes, hidden_dim),
            out_b: vec![0.0; classes],
        }
    }

    pub fn init(feature_dim: usize, hidden_dim: usize, classes: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(feature_dim, hidden_dim, classes);
        let lim_h = (6.0 / (feature_dim + hidden_dim) as f64).sqrt();
        for v in p.hidden_w.data_mut() {
            *v = rng.uniform_in(-lim_h, lim_h);
        }
        let lim_o = (6.0 / (hidden_dim + classes) as f64).sqrt();
        for v in p.out_w.data_mut() {
            *v = rng.uniform_in(-lim_o, lim_o);
        }
        p
    }

    pub fn feature_dim(&self) -> usize {
        self.hidden_w.cols()
    }

    /// Class probability vector for one feature row.
    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.feature_dim() {
            return Err(GaitError::Shape(format!(
                "feature of width {}, recognizer expects {}",
                features.len(),
                self.feature_dim()
            )));
        }
        let mut z = self.hidden_w.matvec(features);
        for (zi, bi) in z.iter_mut().zip(&self.hidden_b) {
            *zi = (*zi + bi).tanh();
        }
        let mut logits = self.out_w.matvec(&z);
        for (li, bi) in logits.iter_mut().zip(&self.out_b) {
            *li += bi;
        }
        softmax(&logits)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RecognizerGrads {
    pub hidden_w: Vec<f64>,
    pub hidden_b: Vec<f64>,
    pub out_w: Vec<f64>,
    pub out_b: Vec<f64>,
}

/// Mean cross-entropy over the rows plus its gradient.
pub fn recognizer_loss_and_grads(
    params: &RecognitionParams,
    rows: &[FeatureRow],
    grads: &mut RecognizerGrads,
) -> Result<f64> {
    if rows.is_empty() {
        return Err(GaitError::Data("no feature rows to train on".into()));
    }
    let d = params.feature_dim();
    let h = params.hidden_b.len();
    let c = params.classes;
    grads.hidden_w.clear();
    grads.hidden_w.resize(h * d, 0.0);
    grads.hidden_b.clear();
    grads.hidden_b.resize(h, 0.0);
    grads.out_w.clear();
    grads.out_w.resize(c * h, 0.0);
    grads.out_b.clear();
    grads.out_b.resize(c, 0.0);

    let inv_n = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    for row in rows {
        if row.label < 1 || row.label > c {
            return Err(GaitError::Data(format!(
                "label {} outside 1..={c}",
                row.label
            )));
        }
        if row.values.len() != d {
            return Err(GaitError::Shape(format!(
                "feature of width {}, recognizer expects {d}",
                row.values.len()
            )));
        }
        let y = row.label - 1;
        let mut z = params.hidden_w.matvec(&row.values);
        for (zi, bi) in z.iter_mut().zip(&params.hidden_b) {
            *zi = (*zi + bi).tanh();
        }
        let mut logits = params.out_w.matvec(&z);
        for (li, bi) in logits.iter_mut().zip(&params.out_b) {
            *li += bi;
        }
        // Stable -log softmax(logits)[y] via log-sum-exp.
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        loss += (lse - logits[y]) * inv_n;

        let p = softmax(&logits)?;
        let mut d_logits = p;
        d_logits[y] -= 1.0;
        for v in &mut d_logits {
            *v *= inv_n;
        }
        for (i, dl) in d_logits.iter().enumerate() {
            grads.out_b[i] += dl;
            for (j, zj) in z.iter().enumerate() {
                grads.out_w[i * h + j] += dl * zj;
            }
        }
        let mut d_z = vec![0.0; h];
        for (i, dl) in d_logits.iter().enumerate() {
            for (j, dz) in d_z.iter_mut().enumerate() {
                *dz += params.out_w.get(i, j) * dl;
            }
        }
        for (j, dz) in d_z.iter_mut().enumerate() {
            *dz *= 1.0 - z[j] * z[j];
            grads.hidden_b[j] += *dz;
            for (l, xv) in row.values.iter().enumerate() {
                grads.hidden_w[j * d + l] += *dz * xv;
            }
        }
    }
    Ok(loss)
}

/// Fits the recognition head on frozen features with full-batch
/// SGD-momentum (deterministic: no shuffling involved).
pub fn train_recognizer(
    rows: &[FeatureRow],
    classes: usize,
    cfg: &RecognizerConfig,
) -> Result<RecognitionParams> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(GaitError::Data("no feature rows to train on".into()));
    }
    if classes < 2 {
        return Err(GaitError::Config("need at least 2 identities".into()));
    }
    let d = rows[0].values.len();
    let mut rng = Rng::from_seed(cfg.seed);
    let mut params = RecognitionParams::init(d, cfg.hidden_dim, classes, &mut rng);
    let sizes = [
        cfg.hidden_dim * d,
        cfg.hidden_dim,
        classes * cfg.hidden_dim,
        classes,
    ];
    let mut opt = OptimizerState::new(cfg.learning_rate, cfg.momentum, 0.0, &sizes);
    let mut grads = RecognizerGrads::default();
    for _ in 0..cfg.epochs {
        let loss = recognizer_loss_and_grads(&params, rows, &mut grads)?;
        if !loss.is_finite() {
            return Err(GaitError::Numeric(format!(
                "recognizer loss became non-finite ({loss})"
            )));
        }
        let mut tensors = vec![
            ParamTensor {
                values: params.hidden_w.data_mut(),
                grad: &grads.hidden_w,
                is_weight: true,
            },
            ParamTensor {
                values: &mut params.hidden_b,
                grad: &grads.hidden_b,
                is_weight: false,
            },
            ParamTensor {
                values: params.out_w.data_mut(),
                grad: &grads.out_w,
                is_weight: true,
            },
            ParamTensor {
                values: &mut params.out_b,
                grad: &grads.out_b,
                is_weight: false,
            },
        ];
        opt.step(&mut tensors)?;
    }
    Ok(params)
}

/// Elementwise mean of per-step probability vectors.
pub fn sequence_prediction(step_probs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = step_probs
        .first()
        .ok_or_else(|| GaitError::Data("no step predictions to average".into()))?;
    let c = first.len();
    let mut mean = vec![0.0; c];
    for probs in step_probs {
        if probs.len() != c {
            return Err(GaitError::Shape("ragged prediction rows".into()));
        }
        for (m, p) in mean.iter_mut().zip(probs) {
            *m += p;
        }
    }
    let inv = 1.0 / step_probs.len() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    Ok(mean)
}

/// 1-based rank of the true class under descending scores; ties broken
/// toward the lower class index so results never depend on sort
/// internals.
pub fn rank_of_true_class(scores: &[f64], label: usize) -> Result<usize> {
    if label < 1 || label > scores.len() {
        return Err(GaitError::Data(format!(
            "label {label} outside 1..={}",
            scores.len()
        )));
    }
    let y = label - 1;
    let s = scores[y];
    let mut rank = 1;
    for (c, &v) in scores.iter().enumerate() {
        if v > s || (v == s && c < y) {
            rank += 1;
        }
    }
    Ok(rank)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rank1: f64,
    /// cmc[r-1] = fraction of test sequences whose true class ranks <= r.
    pub cmc: Vec<f64>,
    pub nauc: f64,
    /// True label per test sequence, extraction order.
    pub labels: Vec<usize>,
    /// Averaged class-score vector per test sequence.
    pub scores: Vec<Vec<f64>>,
}

/// Groups rows by sequence id (first-appearance order) and checks each
/// sequence carries one consistent label.
fn group_by_sequence(rows: &[FeatureRow]) -> Result<Vec<(usize, Vec<&FeatureRow>)>> {
    let mut groups: Vec<(usize, usize, Vec<&FeatureRow>)> = Vec::new();
    for row in rows {
        match groups.iter_mut().find(|(id, _, _)| *id == row.sequence) {
            Some((_, label, members)) => {
                if *label != row.label {
                    return Err(GaitError::Data(format!(
                        "sequence {} carries conflicting labels {} and {}",
                        row.sequence, label, row.label
                    )));
                }
                members.push(row);
            }
            None => groups.push((row.sequence, row.label, vec![row])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(_, label, members)| (label, members))
        .collect())
}

/// Scores every test sequence with the recognizer (mean of per-step
/// probabilities) and computes Rank-1, the CMC curve, and nAUC.
pub fn evaluate(params: &RecognitionParams, test_rows: &[FeatureRow]) -> Result<EvalReport> {
    let groups = group_by_sequence(test_rows)?;
    if groups.is_empty() {
        return Err(GaitError::Data("no test sequences to evaluate".into()));
    }
    let c = params.classes;
    let mut labels = Vec::with_capacity(groups.len());
    let mut scores = Vec::with_capacity(groups.len());
    let mut ranks = Vec::with_capacity(groups.len());
    for (label, members) in &groups {
        if *label < 1 || *label > c {
            return Err(GaitError::Data(format!("label {label} outside 1..={c}")));
        }
        let probs: Vec<Vec<f64>> = members
            .iter()
            .map(|row| params.predict(&row.values))
            .collect::<Result<_>>()?;
        let avg = sequence_prediction(&probs)?;
        ranks.push(rank_of_true_class(&avg, *label)?);
        labels.push(*label);
        scores.push(avg);
    }
    let cmc = cmc_from_ranks(&ranks, c);
    Ok(EvalReport {
        rank1: cmc[0],
        nauc: cmc.iter().sum::<f64>() / c as f64,
        cmc,
        labels,
        scores,
    })
}

/// Mean attention-weight matrix per axis (X, Y, Z) over the given
/// sequences, using the same free-running decode as feature extraction.
/// Entry (t, j) is the average weight decoding step t puts on encoder
/// frame j.
pub fn average_attention(
    sequences: &[SkeletonSequence],
    ckpt: &Checkpoint,
) -> Result<[Matrix; 3]> {
    if ckpt.config.attention == AttentionMode::None {
        return Err(GaitError::Config(
            "checkpoint was trained without attention; there are no weights to export".into(),
        ));
    }
    if sequences.is_empty() {
        return Err(GaitError::Data("no sequences to average attention over".into()));
    }
    let attn = ckpt.config.attention_config();
    let f = ckpt.config.seq_len;
    let mut sums = [Matrix::zeros(f, f), Matrix::zeros(f, f), Matrix::zeros(f, f)];
    for seq in sequences {
        let channels = split_axes(seq);
        for (axis_idx, channel) in channels.iter().enumerate() {
            let enc = encode(&channel.values, &ckpt.models[axis_idx].encoder)?;
            let trace = decode(
                &enc,
                None,
                &ckpt.models[axis_idx].decoder,
                &attn,
                DecodeMode::Test,
                ckpt.config.reverse,
            )?;
            let weights = trace
                .weights_matrix()
                .expect("attention-enabled decode always yields weights");
            for (acc, w) in sums[axis_idx].data_mut().iter_mut().zip(weights.data()) {
                *acc += w;
            }
        }
    }
    let inv = 1.0 / sequences.len() as f64;
    for m in &mut sums {
        for v in m.data_mut() {
            *v *= inv;
        }
    }
    Ok(sums)
}

/// cmc[r-1] = |{ranks <= r}| / n for r in 1..=classes.
pub fn cmc_from_ranks(ranks: &[usize], classes: usize) -> Vec<f64> {
    let n = ranks.len() as f64;
    (1..=classes)
        .map(|r| ranks.iter().filter(|&&rk| rk <= r).count() as f64 / n)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::AttentionMode;
    use crate::skeldata::Skeleton;
    use crate::trainer::{init_checkpoint, TrainConfig};

    fn tiny_sequences(n: usize, f: usize, j: usize, seed: u64) -> Vec<SkeletonSequence> {
        let mut rng = Rng::from_seed(seed);
        (0..n)
            .map(|i| SkeletonSequence {
                frames: (0..f)
                    .map(|_| Skeleton {
                        joints: Matrix::from_vec(
                            j,
                            3,
                            (0..j * 3).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
                        )
                        .unwrap(),
                    })
                    .collect(),
                label: i % 2 + 1,
            })
            .collect()
    }

    fn tiny_checkpoint(attention: AttentionMode) -> crate::trainer::Checkpoint {
        let cfg = TrainConfig {
            seq_len: 4,
            hidden: 8,
            window_radius: 2,
            attention,
            seed: 3,
            ..TrainConfig::default()
        };
        init_checkpoint(3, &cfg).unwrap()
    }

    #[test]
    fn feature_width_is_three_k() {
        let ckpt = tiny_checkpoint(AttentionMode::Las);
        let seqs = tiny_sequences(2, 4, 3, 5);
        for kind in [FeatureKind::Age, FeatureKind::EncodedState] {
            let rows = extract_features(&seqs, &ckpt, kind).unwrap();
            assert_eq!(rows.len(), 2 * 4);
            assert!(rows.iter().all(|r| r.values.len() == 3 * 8));
            assert!(rows.iter().all(|r| r.values.iter().all(|v| v.is_finite())));
        }
    }

    #[test]
    fn zero_weights_give_zero_age() {
        let mut ckpt = tiny_checkpoint(AttentionMode::Bas);
        for model in &mut ckpt.models {
            for (_, data, _) in model.tensors_mut() {
                data.fill(0.0);
            }
        }
        let seqs = tiny_sequences(1, 4, 3, 5);
        let rows = extract_features(&seqs, &ckpt, FeatureKind::Age).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn extraction_is_deterministic() {
        let ckpt = tiny_checkpoint(AttentionMode::Las);
        let seqs = tiny_sequences(3, 4, 3, 5);
        let a = extract_features(&seqs, &ckpt, FeatureKind::Age).unwrap();
        let b = extract_features(&seqs, &ckpt, FeatureKind::Age).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn age_requires_attention() {
        let ckpt = tiny_checkpoint(AttentionMode::None);
        let seqs = tiny_sequences(1, 4, 3, 5);
        let err = extract_features(&seqs, &ckpt, FeatureKind::Age).unwrap_err();
        assert!(err.to_string().contains("without attention"));
        // Hidden-state features remain available.
        assert!(extract_features(&seqs, &ckpt, FeatureKind::EncodedState).is_ok());
    }

    #[test]
    fn joint_mismatch_is_rejected() {
        let ckpt = tiny_checkpoint(AttentionMode::Las);
        let seqs = tiny_sequences(1, 4, 5, 5);
        assert!(extract_features(&seqs, &ckpt, FeatureKind::Age).is_err());
    }

    #[test]
    fn labels_do_not_leak_into_features() {
        let ckpt = tiny_checkpoint(AttentionMode::Las);
        let seqs = tiny_sequences(2, 4, 3, 5);
        let mut relabeled = seqs.clone();
        for s in &mut relabeled {
            s.label = 1;
        }
        let a = extract_features(&seqs, &ckpt, FeatureKind::Age).unwrap();
        let b = extract_features(&relabeled, &ckpt, FeatureKind::Age).unwrap();
        let va: Vec<&Vec<f64>> = a.iter().map(|r| &r.values).collect();
        let vb: Vec<&Vec<f64>> = b.iter().map(|r| &r.values).collect();
        assert_eq!(va, vb);
    }

    fn separable_rows(n_per_class: usize, seed: u64) -> Vec<FeatureRow> {
        let mut rng = Rng::from_seed(seed);
        let mut rows = Vec::new();
        for i in 0..n_per_class * 2 {
            let label = i % 2 + 1;
            let base = if label == 1 { [1.0, 0.0] } else { [0.0, 1.0] };
            rows.push(FeatureRow {
                sequence: i,
                step: 1,
                label,
                values: vec![
                    base[0] + 0.1 * rng.uniform_in(-1.0, 1.0),
                    base[1] + 0.1 * rng.uniform_in(-1.0, 1.0),
                ],
            });
        }
        rows
    }

    #[test]
    fn recognizer_gradients_match_finite_differences() {
        use crate::numerics::{finite_difference_gradient, max_relative_error};
        let rows = separable_rows(3, 11);
        let mut rng = Rng::from_seed(1);
        let params = RecognitionParams::init(2, 4, 2, &mut rng);

        let mut grads = RecognizerGrads::default();
        recognizer_loss_and_grads(&params, &rows, &mut grads).unwrap();
        let analytic: Vec<f64> = grads
            .hidden_w
            .iter()
            .chain(&grads.hidden_b)
            .chain(&grads.out_w)
            .chain(&grads.out_b)
            .cloned()
            .collect();

        let theta: Vec<f64> = params
            .hidden_w
            .data()
            .iter()
            .chain(&params.hidden_b)
            .chain(params.out_w.data())
            .chain(&params.out_b)
            .cloned()
            .collect();
        let (h, d, c) = (4, 2, 2);
        let loss_fn = |t: &[f64]| {
            let mut p = RecognitionParams::zeros(d, h, c);
            p.hidden_w.data_mut().copy_from_slice(&t[..h * d]);
            p.hidden_b.copy_from_slice(&t[h * d..h * d + h]);
            p.out_w
                .data_mut()
                .copy_from_slice(&t[h * d + h..h * d + h + c * h]);
            p.out_b.copy_from_slice(&t[h * d + h + c * h..]);
            let mut g = RecognizerGrads::default();
            recognizer_loss_and_grads(&p, &rows, &mut g).unwrap()
        };
        let numeric = finite_difference_gradient(&loss_fn, &theta, 1e-6).unwrap();
        let err = max_relative_error(&analytic, &numeric, 1e-8);
        assert!(err <= 1e-6, "max relative error {err}");
    }

    #[test]
    fn separable_set_reaches_full_accuracy() {
        let rows = separable_rows(10, 4);
        let cfg = RecognizerConfig {
            hidden_dim: 8,
            epochs: 200,
            ..RecognizerConfig::default()
        };
        let params = train_recognizer(&rows, 2, &cfg).unwrap();
        let correct = rows
            .iter()
            .filter(|r| {
                let p = params.predict(&r.values).unwrap();
                rank_of_true_class(&p, r.label).unwrap() == 1
            })
            .count();
        assert_eq!(correct, rows.len());
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let rows = separable_rows(2, 4);
        let cfg = RecognizerConfig {
            hidden_dim: 4,
            epochs: 0,
            seed: 9,
            ..RecognizerConfig::default()
        };
        let params = train_recognizer(&rows, 2, &cfg).unwrap();
        let mut rng = Rng::from_seed(9);
        assert_eq!(params, RecognitionParams::init(2, 4, 2, &mut rng));
    }

    #[test]
    fn sequence_prediction_cases() {
        let row = vec![0.2, 0.5, 0.3];
        let out = sequence_prediction(&[row.clone(), row.clone()]).unwrap();
        assert_eq!(out, row);

        let out = sequence_prediction(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        assert!(sequence_prediction(&[]).is_err());
    }

    #[test]
    fn rank_breaks_ties_toward_lower_class() {
        // Classes 1 and 2 tie at the top.
        let scores = vec![0.4, 0.4, 0.2];
        assert_eq!(rank_of_true_class(&scores, 1).unwrap(), 1);
        assert_eq!(rank_of_true_class(&scores, 2).unwrap(), 2);
        assert_eq!(rank_of_true_class(&scores, 3).unwrap(), 3);
    }

    #[test]
    fn evaluate_hand_built_cases() {
        // Identity-ish recognizer: direct pass-through of 3 scores.
        let mut params = RecognitionParams::zeros(3, 3, 3);
        // hidden = tanh(I x), output = I z: monotone, preserves argsort.
        for i in 0..3 {
            params.hidden_w.set(i, i, 1.0);
            params.out_w.set(i, i, 1.0);
        }
        // True ranks 1, 2, 3 by construction.
        let rows = vec![
            FeatureRow { sequence: 0, step: 1, label: 1, values: vec![5.0, 1.0, 0.0] },
            FeatureRow { sequence: 1, step: 1, label: 2, values: vec![5.0, 1.0, 0.0] },
            FeatureRow { sequence: 2, step: 1, label: 3, values: vec![5.0, 1.0, 0.0] },
        ];
        let report = evaluate(&params, &rows).unwrap();
        assert_eq!(report.cmc, vec![1.0 / 3.0, 2.0 / 3.0, 1.0]);
        assert!((report.nauc - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(report.rank1, report.cmc[0]);
        assert_eq!(report.labels, vec![1, 2, 3]);
        assert_eq!(report.scores.len(), 3);
    }

    #[test]
    fn perfect_classifier_reports_ones() {
        let mut params = RecognitionParams::zeros(2, 2, 2);
        for i in 0..2 {
            params.hidden_w.set(i, i, 1.0);
            params.out_w.set(i, i, 5.0);
        }
        let rows = vec![
            FeatureRow { sequence: 0, step: 1, label: 1, values: vec![1.0, 0.0] },
            FeatureRow { sequence: 0, step: 2, label: 1, values: vec![1.0, 0.0] },
            FeatureRow { sequence: 1, step: 1, label: 2, values: vec![0.0, 1.0] },
        ];
        let report = evaluate(&params, &rows).unwrap();
        assert_eq!(report.rank1, 1.0);
        assert_eq!(report.cmc, vec![1.0, 1.0]);
        assert_eq!(report.nauc, 1.0);
    }

    #[test]
    fn cmc_is_nondecreasing_and_ends_at_one() {
        let mut rng = Rng::from_seed(21);
        for _ in 0..50 {
            let c = 2 + rng.below(8);
            let n = 1 + rng.below(30);
            let ranks: Vec<usize> = (0..n).map(|_| 1 + rng.below(c)).collect();
            let cmc = cmc_from_ranks(&ranks, c);
            assert!(cmc.windows(2).all(|w| w[0] <= w[1]));
            assert_eq!(*cmc.last().unwrap(), 1.0);
        }
    }

    #[test]
    fn average_attention_rows_stay_normalized() {
        let ckpt = tiny_checkpoint(AttentionMode::Las);
        let seqs = tiny_sequences(3, 4, 3, 8);
        let avg = average_attention(&seqs, &ckpt).unwrap();
        for m in &avg {
            assert_eq!((m.rows(), m.cols()), (4, 4));
            for t in 0..4 {
                let s: f64 = m.row(t).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_weights_give_uniform_attention() {
        let mut ckpt = tiny_checkpoint(AttentionMode::Bas);
        for model in &mut ckpt.models {
            for (_, data, _) in model.tensors_mut() {
                data.fill(0.0);
            }
        }
        let seqs = tiny_sequences(2, 4, 3, 8);
        let avg = average_attention(&seqs, &ckpt).unwrap();
        for m in &avg {
            assert!(m.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        }

        let none = tiny_checkpoint(AttentionMode::None);
        assert!(average_attention(&seqs, &none).is_err());
    }

    #[test]
    fn conflicting_sequence_labels_are_rejected() {
        let params = RecognitionParams::zeros(2, 2, 2);
        let rows = vec![
            FeatureRow { sequence: 0, step: 1, label: 1, values: vec![1.0, 0.0] },
            FeatureRow { sequence: 0, step: 2, label: 2, values: vec![1.0, 0.0] },
        ];
        assert!(evaluate(&params, &rows).is_err());
    }
}
