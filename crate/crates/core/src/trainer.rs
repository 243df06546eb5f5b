//! Self-supervised training: reverse-reconstruction + alignment
//! objective over three per-axis models, the epoch loop, and bit-exact
//! checkpoint persistence.

use std::io::{Read as _, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attention::{AttentionConfig, AttentionMode};
use crate::error::{GaitError, Result};
use crate::numerics::{clip_global_norm, Matrix, OptimizerState, ParamTensor};
use crate::rng::Rng;
use crate::seq2seq::{
    backprop, decode, encode, DecodeMode, DecodeTrace, ModelGrads, ModelParams,
};
use crate::skeldata::{reverse_target, split_axes, Dataset, SkeletonSequence};

pub const GRAD_CLIP_NORM: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Frames per sequence (f). Must match the dataset windows.
    pub seq_len: usize,
    /// Hidden units per recurrent layer (k).
    pub hidden: usize,
    /// Locality window radius (D); sigma is D/2.
    pub window_radius: usize,
    pub lambda_r: f64,
    /// Alignment-loss weight; only active in `las` mode.
    pub lambda_a: f64,
    /// L2 coefficient over weight matrices.
    pub beta: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub attention: AttentionMode,
    /// Reconstruct the sequence in reverse order (the default) or in
    /// original order (ablation).
    pub reverse: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seq_len: 6,
            hidden: 256,
            window_radius: 6,
            lambda_r: 1.0,
            lambda_a: 1.0,
            beta: 0.02,
            learning_rate: 0.0005,
            momentum: 0.9,
            batch_size: 128,
            epochs: 200,
            seed: 0,
            attention: AttentionMode::Las,
            reverse: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seq_len < 2 || self.seq_len % 2 != 0 {
            return Err(GaitError::Config("seq_len must be even and >= 2".into()));
        }
        if self.hidden == 0 {
            return Err(GaitError::Config("hidden size must be positive".into()));
        }
        if self.window_radius == 0 {
            return Err(GaitError::Config("window radius must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(GaitError::Config("batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(GaitError::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(GaitError::Config("momentum must be in [0, 1)".into()));
        }
        if self.lambda_r < 0.0 || self.lambda_a < 0.0 || self.beta < 0.0 {
            return Err(GaitError::Config("loss weights must be non-negative".into()));
        }
        Ok(())
    }

    pub fn attention_config(&self) -> AttentionConfig {
        AttentionConfig::new(self.attention, self.window_radius)
    }
}

/// Eq.-of-motion for the curves: one row per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    /// Mean per-sequence objective including the L2 penalty.
    pub total: f64,
    /// Mean per-sequence reconstruction term, summed over axes, unweighted.
    pub reconstruction: f64,
    /// Mean per-sequence alignment term, summed over axes, unweighted.
    pub alignment: f64,
}

/// Sum of squared differences between prediction and target.
pub fn reconstruction_loss(predicted: &Matrix, target: &Matrix) -> Result<f64> {
    if predicted.rows() != target.rows() || predicted.cols() != target.cols() {
        return Err(GaitError::Shape(format!(
            "prediction {}x{} vs target {}x{}",
            predicted.rows(),
            predicted.cols(),
            target.rows(),
            target.cols()
        )));
    }
    Ok(predicted
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, g)| (p - g) * (p - g))
        .sum())
}

/// Full objective for one sequence given its three per-axis traces and
/// targets: weighted reconstruction + (las only) weighted alignment +
/// L2 penalty over all weight matrices.
pub fn total_loss(
    traces: &[DecodeTrace; 3],
    targets: &[Matrix; 3],
    models: &[ModelParams; 3],
    cfg: &TrainConfig,
) -> Result<f64> {
    let mut loss = 0.0;
    for (trace, target) in traces.iter().zip(targets) {
        loss += cfg.lambda_r * reconstruction_loss(&trace.predicted_matrix(), target)?;
        if cfg.attention == AttentionMode::Las {
            let bas = trace
                .bas_matrix()
                .ok_or_else(|| GaitError::Config("alignment loss needs attention".into()))?;
            let masked = trace.masked_matrix().unwrap();
            loss += cfg.lambda_a * crate::attention::la_loss(&bas, &masked)?;
        }
    }
    loss += cfg.beta * models.iter().map(ModelParams::weight_norm_sq).sum::<f64>();
    Ok(loss)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BatchLoss {
    /// Mean per-sequence data loss (weighted recon + weighted alignment).
    pub data_mean: f64,
    /// Mean per-sequence reconstruction term (unweighted).
    pub reconstruction_mean: f64,
    /// Mean per-sequence alignment term (unweighted).
    pub alignment_mean: f64,
}

/// Forward + backward over one batch. Gradients of the mean
/// per-sequence data loss accumulate into `grads` (which must arrive
/// zeroed); the L2 term is NOT added here — the optimizer applies it at
/// step time, and `add_l2_gradients` exists for building the full
/// objective gradient externally.
///
/// The alignment target (masked scores) is treated as a constant: its
/// gradient path is intentionally cut, matching a regression onto a
/// frozen copy of the masked scores.
pub fn batch_loss_and_grads(
    models: &[ModelParams; 3],
    batch: &[&SkeletonSequence],
    cfg: &TrainConfig,
    grads: &mut [ModelGrads; 3],
) -> Result<BatchLoss> {
    if batch.is_empty() {
        return Err(GaitError::Data("empty batch".into()));
    }
    let attn = cfg.attention_config();
    let inv_b = 1.0 / batch.len() as f64;
    let mut out = BatchLoss::default();
    for seq in batch {
        if seq.frames.len() != cfg.seq_len {
            return Err(GaitError::Shape(format!(
                "sequence of {} frames, config expects {}",
                seq.frames.len(),
                cfg.seq_len
            )));
        }
        let channels = split_axes(seq);
        for (axis_idx, channel) in channels.iter().enumerate() {
            let target = if cfg.reverse {
                reverse_target(channel).values
            } else {
                channel.values.clone()
            };
            let enc = encode(&channel.values, &models[axis_idx].encoder)?;
            let trace = decode(
                &enc,
                Some(&target),
                &models[axis_idx].decoder,
                &attn,
                DecodeMode::Train,
                cfg.reverse,
            )?;

            let mut d_pred = Vec::with_capacity(cfg.seq_len);
            let mut recon = 0.0;
            for (t, step) in trace.steps.iter().enumerate() {
                let row = target.row(t);
                let mut d = Vec::with_capacity(row.len());
                for (p, g) in step.predicted.iter().zip(row) {
                    recon += (p - g) * (p - g);
                    d.push(2.0 * cfg.lambda_r * (p - g) * inv_b);
                }
                d_pred.push(d);
            }
            out.reconstruction_mean += recon * inv_b;
            out.data_mean += cfg.lambda_r * recon * inv_b;

            let d_score = if cfg.attention == AttentionMode::Las {
                let mut align = 0.0;
                let mut ds = Vec::with_capacity(cfg.seq_len);
                for step in &trace.steps {
                    let a = step.bas.as_ref().unwrap();
                    let masked = step.masked.as_ref().unwrap();
                    let mut d = Vec::with_capacity(a.len());
                    for (&ai, &mi) in a.iter().zip(masked) {
                        align += (ai - mi) * (ai - mi);
                        d.push(2.0 * cfg.lambda_a * (ai - mi) * inv_b);
                    }
                    ds.push(d);
                }
                out.alignment_mean += align * inv_b;
                out.data_mean += cfg.lambda_a * align * inv_b;
                Some(ds)
            } else {
                None
            };

            backprop(
                &models[axis_idx].encoder,
                &models[axis_idx].decoder,
                &enc,
                &trace,
                &d_pred,
                d_score.as_deref(),
                &mut grads[axis_idx],
            )?;
        }
    }
    Ok(out)
}

/// Adds the L2 term's gradient (2*beta*w per weight-matrix entry) to an
/// existing gradient set. The training loop itself leaves this to the
/// optimizer; this helper builds the complete objective gradient for
/// verification against numerical differentiation.
pub fn add_l2_gradients(models: &[ModelParams; 3], beta: f64, grads: &mut [ModelGrads; 3]) {
    for (model, grad) in models.iter().zip(grads.iter_mut()) {
        for ((_, p, is_weight), g) in model.tensors().into_iter().zip(grad.tensors_mut()) {
            if is_weight {
                for (gv, pv) in g.iter_mut().zip(p) {
                    *gv += 2.0 * beta * pv;
                }
            }
        }
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKPOINT_MAGIC: &[u8; 8] = b"GAITCKPT";

/// Complete training state; save/load round-trips bitwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub joint_count: usize,
    /// Per-axis models in X, Y, Z order.
    pub models: [ModelParams; 3],
    pub optimizer: OptimizerState,
    pub epoch: usize,
    pub rng_state: [u64; 4],
}

fn model_tensor_sizes(models: &[ModelParams; 3]) -> Vec<usize> {
    models
        .iter()
        .flat_map(|m| m.tensors().into_iter().map(|(_, d, _)| d.len()))
        .collect()
}

/// Initializes per-axis models and optimizer without running any epochs.
pub fn init_checkpoint(joint_count: usize, config: &TrainConfig) -> Result<Checkpoint> {
    config.validate()?;
    let mut rng = Rng::from_seed(config.seed);
    let models = [
        ModelParams::init(joint_count, config.hidden, &mut rng),
        ModelParams::init(joint_count, config.hidden, &mut rng),
        ModelParams::init(joint_count, config.hidden, &mut rng),
    ];
    let sizes = model_tensor_sizes(&models);
    let optimizer = OptimizerState::new(
        config.learning_rate,
        config.momentum,
        config.beta,
        &sizes,
    );
    Ok(Checkpoint {
        version: CHECKPOINT_VERSION,
        config: config.clone(),
        joint_count,
        models,
        optimizer,
        epoch: 0,
        rng_state: rng.state(),
    })
}

/// Runs `epochs` more epochs on the checkpoint in place, returning one
/// loss record per epoch. Deterministic continuation: the shuffling RNG
/// resumes from the stored state.
pub fn train_more(
    ckpt: &mut Checkpoint,
    dataset: &Dataset,
    epochs: usize,
) -> Result<Vec<LossRecord>> {
    let cfg = ckpt.config.clone();
    if dataset.train.is_empty() {
        return Err(GaitError::Data("empty training split".into()));
    }
    if dataset.joint_count != ckpt.joint_count {
        return Err(GaitError::Shape(format!(
            "dataset has {} joints, checkpoint {}",
            dataset.joint_count, ckpt.joint_count
        )));
    }
    let mut rng = Rng::from_state(ckpt.rng_state);
    let n = dataset.train.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut records = Vec::with_capacity(epochs);

    for _ in 0..epochs {
        order.sort_unstable();
        rng.shuffle(&mut order);
        let mut sum_total = 0.0;
        let mut sum_recon = 0.0;
        let mut sum_align = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&SkeletonSequence> =
                chunk.iter().map(|&i| &dataset.train[i]).collect();
            let mut grads = [
                ModelGrads::zeros(ckpt.joint_count, cfg.hidden),
                ModelGrads::zeros(ckpt.joint_count, cfg.hidden),
                ModelGrads::zeros(ckpt.joint_count, cfg.hidden),
            ];
            let loss = batch_loss_and_grads(&ckpt.models, &batch, &cfg, &mut grads)?;

            let penalty =
                cfg.beta * ckpt.models.iter().map(ModelParams::weight_norm_sq).sum::<f64>();
            let b = batch.len() as f64;
            sum_total += (loss.data_mean + penalty) * b;
            sum_recon += loss.reconstruction_mean * b;
            sum_align += loss.alignment_mean * b;

            let mut grad_views: Vec<&mut [f64]> = grads
                .iter_mut()
                .flat_map(|g| g.tensors_mut())
                .collect();
            clip_global_norm(&mut grad_views, GRAD_CLIP_NORM);

            let grad_flat: Vec<&[f64]> =
                grads.iter().flat_map(|g| g.tensors()).collect();
            let mut tensors: Vec<ParamTensor<'_>> = Vec::with_capacity(grad_flat.len());
            for (model, grad_chunk) in ckpt
                .models
                .iter_mut()
                .zip(grad_flat.chunks(crate::seq2seq::TENSORS_PER_MODEL))
            {
                for ((_, values, is_weight), &grad) in
                    model.tensors_mut().into_iter().zip(grad_chunk)
                {
                    tensors.push(ParamTensor {
                        values,
                        grad,
                        is_weight,
                    });
                }
            }
            ckpt.optimizer.step(&mut tensors)?;
        }
        ckpt.epoch += 1;
        let record = LossRecord {
            epoch: ckpt.epoch,
            total: sum_total / n as f64,
            reconstruction: sum_recon / n as f64,
            alignment: sum_align / n as f64,
        };
        if !record.total.is_finite() {
            return Err(GaitError::Numeric(format!(
                "loss became non-finite at epoch {} (total {}); training aborted",
                record.epoch, record.total
            )));
        }
        records.push(record);
    }
    ckpt.rng_state = rng.state();
    Ok(records)
}

/// Trains from scratch per the config.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(Checkpoint, Vec<LossRecord>)> {
    let mut ckpt = init_checkpoint(dataset.joint_count, config)?;
    let records = train_more(&mut ckpt, dataset, config.epochs)?;
    Ok((ckpt, records))
}

fn push_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f64_slice(buf: &mut Vec<u8>, data: &[f64]) {
    push_u64(buf, data.len() as u64);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.data.len() {
            return Err(GaitError::Data("checkpoint truncated".into()));
        }
        let s = &self.data[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64_block(&mut self, expect: usize) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n != expect {
            return Err(GaitError::Data(format!(
                "checkpoint tensor of {n} values where {expect} expected"
            )));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.f64()?);
        }
        Ok(out)
    }
}

impl Checkpoint {
    /// Binary layout: magic, then a CRC-protected payload of version,
    /// config JSON, scalar counters, RNG state, every parameter tensor
    /// in canonical X/Y/Z order, and the optimizer state.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = Vec::new();
        payload.extend_from_slice(&self.version.to_le_bytes());
        let config_json = serde_json::to_string(&self.config)
            .map_err(|e| GaitError::Config(format!("config serialize: {e}")))?;
        push_u64(&mut payload, config_json.len() as u64);
        payload.extend_from_slice(config_json.as_bytes());
        push_u64(&mut payload, self.joint_count as u64);
        push_u64(&mut payload, self.epoch as u64);
        for s in self.rng_state {
            push_u64(&mut payload, s);
        }
        for model in &self.models {
            for (_, data, _) in model.tensors() {
                push_f64_slice(&mut payload, data);
            }
        }
        payload.extend_from_slice(&self.optimizer.learning_rate.to_le_bytes());
        payload.extend_from_slice(&self.optimizer.momentum.to_le_bytes());
        payload.extend_from_slice(&self.optimizer.l2_coefficient.to_le_bytes());
        push_u64(&mut payload, self.optimizer.velocities.len() as u64);
        for v in &self.optimizer.velocities {
            push_f64_slice(&mut payload, v);
        }

        let mut out = Vec::with_capacity(payload.len() + 12);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(GaitError::Data("not a checkpoint file".into()));
        }
        let payload = &bytes[8..bytes.len() - 4];
        let stored_crc =
            u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        if crc32fast::hash(payload) != stored_crc {
            return Err(GaitError::Data("checkpoint checksum mismatch".into()));
        }
        let mut cur = Cursor {
            data: payload,
            at: 0,
        };
        let version = cur.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(GaitError::Data(format!(
                "checkpoint version {version}, this build reads {CHECKPOINT_VERSION}"
            )));
        }
        let json_len = cur.u64()? as usize;
        let config: TrainConfig = serde_json::from_slice(cur.take(json_len)?)
            .map_err(|e| GaitError::Data(format!("checkpoint config: {e}")))?;
        config.validate()?;
        let joint_count = cur.u64()? as usize;
        let epoch = cur.u64()? as usize;
        let mut rng_state = [0u64; 4];
        for s in &mut rng_state {
            *s = cur.u64()?;
        }
        let mut models = [
            ModelParams::zeros(joint_count, config.hidden),
            ModelParams::zeros(joint_count, config.hidden),
            ModelParams::zeros(joint_count, config.hidden),
        ];
        for model in &mut models {
            for (_, data, _) in model.tensors_mut() {
                let block = cur.f64_block(data.len())?;
                data.copy_from_slice(&block);
            }
        }
        let learning_rate = cur.f64()?;
        let momentum = cur.f64()?;
        let l2 = cur.f64()?;
        let vel_count = cur.u64()? as usize;
        let sizes = model_tensor_sizes(&models);
        if vel_count != sizes.len() {
            return Err(GaitError::Data(format!(
                "checkpoint holds {vel_count} velocity buffers, expected {}",
                sizes.len()
            )));
        }
        let mut optimizer = OptimizerState::new(learning_rate, momentum, l2, &sizes);
        for (buf, expect) in optimizer.velocities.iter_mut().zip(&sizes) {
            *buf = cur.f64_block(*expect)?;
        }
        if cur.at != payload.len() {
            return Err(GaitError::Data("checkpoint has trailing bytes".into()));
        }
        Ok(Checkpoint {
            version,
            config,
            joint_count,
            models,
            optimizer,
            epoch,
            rng_state,
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = ckpt.to_bytes()?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeldata::{Dataset, Provenance, Skeleton};

    /// Tiny hand-rolled dataset: `n` sequences of f frames x j joints.
    fn tiny_dataset(n: usize, f: usize, j: usize, seed: u64) -> Dataset {
        let mut rng = Rng::from_seed(seed);
        let mut seqs = Vec::new();
        for i in 0..n {
            let frames: Vec<Skeleton> = (0..f)
                .map(|_| {
                    let data: Vec<f64> =
                        (0..j * 3).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
                    Skeleton {
                        joints: Matrix::from_vec(j, 3, data).unwrap(),
                    }
                })
                .collect();
            seqs.push(SkeletonSequence {
                frames,
                label: i % 2 + 1,
            });
        }
        let test = vec![seqs[0].clone(), seqs[1].clone()];
        Dataset {
            name: "tiny".into(),
            joint_count: j,
            identities: 2,
            train: seqs,
            test,
            provenance: Provenance::default(),
        }
    }

    fn toy_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            seq_len: 4,
            hidden: 8,
            window_radius: 2,
            epochs,
            seed: 7,
            learning_rate: 0.01,
            batch_size: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn reconstruction_loss_cases() {
        let a = Matrix::from_vec(1, 1, vec![2.0]).unwrap();
        let b = Matrix::from_vec(1, 1, vec![0.0]).unwrap();
        assert_eq!(reconstruction_loss(&a, &b).unwrap(), 4.0);
        assert_eq!(reconstruction_loss(&a, &a).unwrap(), 0.0);
        let c = Matrix::from_vec(2, 2, vec![1.0, -1.0, 0.5, 0.0]).unwrap();
        let d = Matrix::from_vec(2, 2, vec![0.0, 1.0, 0.5, -2.0]).unwrap();
        assert!(reconstruction_loss(&c, &d).unwrap() >= 0.0);
        assert!(reconstruction_loss(&a, &c).is_err());
    }

    #[test]
    fn total_loss_mode_contract() {
        // Zero models predict zero; zero targets → perfect reconstruction.
        let models = [
            ModelParams::zeros(2, 3),
            ModelParams::zeros(2, 3),
            ModelParams::zeros(2, 3),
        ];
        let f = 4;
        let target = Matrix::zeros(f, 2);
        let make_trace = |mode: AttentionMode| {
            let attn = AttentionConfig::new(mode, 2);
            let enc = encode(&target, &models[0].encoder).unwrap();
            decode(&enc, Some(&target), &models[0].decoder, &attn, DecodeMode::Train, true)
                .unwrap()
        };

        // Perfect reconstruction, beta 0 → alignment term dominates; with
        // uniform scores and a non-trivial mask it is positive in las mode.
        let cfg_las = TrainConfig {
            seq_len: f,
            hidden: 3,
            window_radius: 2,
            beta: 0.0,
            ..TrainConfig::default()
        };
        let traces = [
            make_trace(AttentionMode::Las),
            make_trace(AttentionMode::Las),
            make_trace(AttentionMode::Las),
        ];
        let targets = [target.clone(), target.clone(), target.clone()];
        let las_total = total_loss(&traces, &targets, &models, &cfg_las).unwrap();
        assert!(las_total > 0.0);

        // Same setup in bas mode: no alignment term, perfect recon, beta 0 → 0.
        let cfg_bas = TrainConfig {
            attention: AttentionMode::Bas,
            ..cfg_las.clone()
        };
        let traces_bas = [
            make_trace(AttentionMode::Bas),
            make_trace(AttentionMode::Bas),
            make_trace(AttentionMode::Bas),
        ];
        assert_eq!(
            total_loss(&traces_bas, &targets, &models, &cfg_bas).unwrap(),
            0.0
        );

        // lambda_r = lambda_a = 0, beta = 1, single weight 2 → 4.
        let mut models_w = models.clone();
        models_w[0].decoder.w_f.set(0, 0, 2.0);
        let cfg_beta = TrainConfig {
            lambda_r: 0.0,
            lambda_a: 0.0,
            beta: 1.0,
            attention: AttentionMode::Bas,
            ..cfg_las
        };
        assert_eq!(
            total_loss(&traces_bas, &targets, &models_w, &cfg_beta).unwrap(),
            4.0
        );
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let ds = tiny_dataset(8, 4, 3, 1);
        let cfg = toy_config(0);
        let (ckpt, records) = train(&ds, &cfg).unwrap();
        assert!(records.is_empty());
        let fresh = init_checkpoint(3, &cfg).unwrap();
        assert_eq!(ckpt, fresh);
    }

    #[test]
    fn training_is_deterministic() {
        let ds = tiny_dataset(8, 4, 3, 1);
        let cfg = toy_config(3);
        let (ck1, rec1) = train(&ds, &cfg).unwrap();
        let (ck2, rec2) = train(&ds, &cfg).unwrap();
        assert_eq!(rec1, rec2);
        assert_eq!(ck1.to_bytes().unwrap(), ck2.to_bytes().unwrap());
    }

    #[test]
    fn toy_training_reduces_loss() {
        let ds = tiny_dataset(8, 4, 3, 1);
        let cfg = toy_config(200);
        let (_, records) = train(&ds, &cfg).unwrap();
        assert_eq!(records.len(), 200);
        assert!(
            records.last().unwrap().total < records[0].total,
            "first {} vs last {}",
            records[0].total,
            records.last().unwrap().total
        );
    }

    #[test]
    fn checkpoint_round_trip_bitwise() {
        let ds = tiny_dataset(8, 4, 3, 1);
        let (ckpt, _) = train(&ds, &toy_config(2)).unwrap();
        let bytes = ckpt.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.to_bytes().unwrap(), bytes);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&ckpt, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), ckpt);
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let ds = tiny_dataset(8, 4, 3, 1);
        let (ckpt, _) = train(&ds, &toy_config(1)).unwrap();
        let bytes = ckpt.to_bytes().unwrap();

        let truncated = &bytes[..bytes.len() - 9];
        assert!(Checkpoint::from_bytes(truncated).is_err());

        let mut flipped = bytes.clone();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 0xff;
        let err = Checkpoint::from_bytes(&flipped).unwrap_err();
        assert!(err.to_string().contains("checksum"));

        assert!(Checkpoint::from_bytes(b"BOGUS").is_err());
    }

    #[test]
    fn resume_zero_epochs_is_identity() {
        let ds = tiny_dataset(8, 4, 3, 1);
        let (ckpt, _) = train(&ds, &toy_config(2)).unwrap();
        let mut resumed = Checkpoint::from_bytes(&ckpt.to_bytes().unwrap()).unwrap();
        let records = train_more(&mut resumed, &ds, 0).unwrap();
        assert!(records.is_empty());
        assert_eq!(resumed, ckpt);
    }

    #[test]
    fn split_training_matches_straight_run() {
        // 2 + 3 epochs through a checkpoint equals 5 epochs in one go.
        let ds = tiny_dataset(8, 4, 3, 1);
        let cfg = toy_config(5);
        let (straight, rec_straight) = train(&ds, &cfg).unwrap();

        let mut ckpt = init_checkpoint(3, &cfg).unwrap();
        let mut recs = train_more(&mut ckpt, &ds, 2).unwrap();
        recs.extend(train_more(&mut ckpt, &ds, 3).unwrap());
        assert_eq!(ckpt.epoch, 5);
        // The `epochs` config field records intent, not progress.
        assert_eq!(straight.models, ckpt.models);
        assert_eq!(rec_straight, recs);
    }

    #[test]
    fn rejects_empty_training_split() {
        let mut ds = tiny_dataset(8, 4, 3, 1);
        ds.train.clear();
        assert!(train(&ds, &toy_config(1)).is_err());
    }

    #[test]
    fn perturbing_one_axis_leaves_other_gradients_untouched() {
        // Axis models are independent through forward/backward; they only
        // couple at the shared global-norm clip. So compare raw gradients.
        let ds = tiny_dataset(4, 4, 3, 2);
        let cfg = toy_config(1);
        let batch: Vec<&SkeletonSequence> = ds.train.iter().collect();
        let base = init_checkpoint(3, &cfg).unwrap();

        let mut grads_a = [
            ModelGrads::zeros(3, cfg.hidden),
            ModelGrads::zeros(3, cfg.hidden),
            ModelGrads::zeros(3, cfg.hidden),
        ];
        batch_loss_and_grads(&base.models, &batch, &cfg, &mut grads_a).unwrap();

        let mut warped = base.models.clone();
        warped[0].decoder.w_f.set(0, 0, 9.0);
        let mut grads_b = [
            ModelGrads::zeros(3, cfg.hidden),
            ModelGrads::zeros(3, cfg.hidden),
            ModelGrads::zeros(3, cfg.hidden),
        ];
        batch_loss_and_grads(&warped, &batch, &cfg, &mut grads_b).unwrap();

        assert_ne!(grads_a[0], grads_b[0]);
        assert_eq!(grads_a[1], grads_b[1]);
        assert_eq!(grads_a[2], grads_b[2]);
    }
}
