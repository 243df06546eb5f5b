//! Per-axis encoder-decoder pair: a 2-layer recurrent encoder over
//! skeleton rows, an attention-conditioned 2-layer decoder with input
//! feeding (teacher-forced in training, free-running in testing), a
//! linear readout that reconstructs skeleton rows, and the exact
//! backward pass through the whole stack.

use crate::attention::{
    bas_scores, context_vector, mask_centered_at, mbas_scores, AlignmentMatrix, AttentionConfig,
    AttentionMode,
};
use crate::error::{GaitError, Result};
use crate::numerics::{
    affine_forward, dot, lstm_cell_backward, lstm_cell_forward, LstmCache, LstmCellGrads,
    LstmCellParams, LstmState, Matrix,
};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    /// Layer 1 consumes skeleton rows (input_dim = J).
    pub layer1: LstmCellParams,
    /// Layer 2 consumes layer 1's hidden vector (input_dim = k).
    pub layer2: LstmCellParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    /// Layer 1 consumes the previous skeleton row concatenated with the
    /// previous attentional state (input_dim = J + k).
    pub layer1: LstmCellParams,
    pub layer2: LstmCellParams,
    /// k x 2k fusion of [context; decoded state].
    pub w_att: Matrix,
    /// J x k linear readout, no bias.
    pub w_f: Matrix,
}

/// All learnable parameters for one coordinate axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub joints: usize,
    pub hidden: usize,
    pub encoder: EncoderParams,
    pub decoder: DecoderParams,
}

pub const TENSORS_PER_MODEL: usize = 14;

impl ModelParams {
    pub fn zeros(joints: usize, hidden: usize) -> Self {
        ModelParams {
            joints,
            hidden,
            encoder: EncoderParams {
                layer1: LstmCellParams::zeros(joints, hidden),
                layer2: LstmCellParams::zeros(hidden, hidden),
            },
            decoder: DecoderParams {
                layer1: LstmCellParams::zeros(joints + hidden, hidden),
                layer2: LstmCellParams::zeros(hidden, hidden),
                w_att: Matrix::zeros(hidden, 2 * hidden),
                w_f: Matrix::zeros(joints, hidden),
            },
        }
    }

    pub fn init(joints: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut m = Self::zeros(joints, hidden);
        m.encoder.layer1 = LstmCellParams::init(joints, hidden, rng);
        m.encoder.layer2 = LstmCellParams::init(hidden, hidden, rng);
        m.decoder.layer1 = LstmCellParams::init(joints + hidden, hidden, rng);
        m.decoder.layer2 = LstmCellParams::init(hidden, hidden, rng);
        let lim_att = (6.0 / (3 * hidden) as f64).sqrt();
        for v in m.decoder.w_att.data_mut() {
            *v = rng.uniform_in(-lim_att, lim_att);
        }
        let lim_f = (6.0 / (joints + hidden) as f64).sqrt();
        for v in m.decoder.w_f.data_mut() {
            *v = rng.uniform_in(-lim_f, lim_f);
        }
        m
    }

    /// Canonical tensor order shared by the optimizer, gradient
    /// accumulators, and checkpoints: (name, data, is_weight_matrix).
    pub fn tensors(&self) -> Vec<(&'static str, &[f64], bool)> {
        vec![
            ("enc1.wx", self.encoder.layer1.wx.data(), true),
            ("enc1.wh", self.encoder.layer1.wh.data(), true),
            ("enc1.b", &self.encoder.layer1.b, false),
            ("enc2.wx", self.encoder.layer2.wx.data(), true),
            ("enc2.wh", self.encoder.layer2.wh.data(), true),
            ("enc2.b", &self.encoder.layer2.b, false),
            ("dec1.wx", self.decoder.layer1.wx.data(), true),
            ("dec1.wh", self.decoder.layer1.wh.data(), true),
            ("dec1.b", &self.decoder.layer1.b, false),
            ("dec2.wx", self.decoder.layer2.wx.data(), true),
            ("dec2.wh", self.decoder.layer2.wh.data(), true),
            ("dec2.b", &self.decoder.layer2.b, false),
            ("w_att", self.decoder.w_att.data(), true),
            ("w_f", self.decoder.w_f.data(), true),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64], bool)> {
        vec![
            ("enc1.wx", self.encoder.layer1.wx.data_mut(), true),
            ("enc1.wh", self.encoder.layer1.wh.data_mut(), true),
            ("enc1.b", self.encoder.layer1.b.as_mut_slice(), false),
            ("enc2.wx", self.encoder.layer2.wx.data_mut(), true),
            ("enc2.wh", self.encoder.layer2.wh.data_mut(), true),
            ("enc2.b", self.encoder.layer2.b.as_mut_slice(), false),
            ("dec1.wx", self.decoder.layer1.wx.data_mut(), true),
            ("dec1.wh", self.decoder.layer1.wh.data_mut(), true),
            ("dec1.b", self.decoder.layer1.b.as_mut_slice(), false),
            ("dec2.wx", self.decoder.layer2.wx.data_mut(), true),
            ("dec2.wh", self.decoder.layer2.wh.data_mut(), true),
            ("dec2.b", self.decoder.layer2.b.as_mut_slice(), false),
            ("w_att", self.decoder.w_att.data_mut(), true),
            ("w_f", self.decoder.w_f.data_mut(), true),
        ]
    }

    /// Sum of squared entries of the weight matrices (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.tensors()
            .iter()
            .filter(|(_, _, w)| *w)
            .map(|(_, d, _)| d.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }
}

/// Gradient accumulators shaped like `ModelParams`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub enc1: LstmCellGrads,
    pub enc2: LstmCellGrads,
    pub dec1: LstmCellGrads,
    pub dec2: LstmCellGrads,
    pub w_att: Matrix,
    pub w_f: Matrix,
}

impl ModelGrads {
    pub fn zeros(joints: usize, hidden: usize) -> Self {
        ModelGrads {
            enc1: LstmCellGrads::zeros(joints, hidden),
            enc2: LstmCellGrads::zeros(hidden, hidden),
            dec1: LstmCellGrads::zeros(joints + hidden, hidden),
            dec2: LstmCellGrads::zeros(hidden, hidden),
            w_att: Matrix::zeros(hidden, 2 * hidden),
            w_f: Matrix::zeros(joints, hidden),
        }
    }

    /// Same order as `ModelParams::tensors`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.enc1.wx.data(),
            self.enc1.wh.data(),
            &self.enc1.b,
            self.enc2.wx.data(),
            self.enc2.wh.data(),
            &self.enc2.b,
            self.dec1.wx.data(),
            self.dec1.wh.data(),
            &self.dec1.b,
            self.dec2.wx.data(),
            self.dec2.wh.data(),
            &self.dec2.b,
            self.w_att.data(),
            self.w_f.data(),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.enc1.wx.data_mut(),
            self.enc1.wh.data_mut(),
            self.enc1.b.as_mut_slice(),
            self.enc2.wx.data_mut(),
            self.enc2.wh.data_mut(),
            self.enc2.b.as_mut_slice(),
            self.dec1.wx.data_mut(),
            self.dec1.wh.data_mut(),
            self.dec1.b.as_mut_slice(),
            self.dec2.wx.data_mut(),
            self.dec2.wh.data_mut(),
            self.dec2.b.as_mut_slice(),
            self.w_att.data_mut(),
            self.w_f.data_mut(),
        ]
    }
}

/// Encoder outputs: the top-layer hidden vector per step plus both
/// layers' final states (which seed the decoder).
#[derive(Debug, Clone)]
pub struct EncodeResult {
    pub top_states: Vec<Vec<f64>>,
    pub final1: LstmState,
    pub final2: LstmState,
    pub(crate) caches1: Vec<LstmCache>,
    pub(crate) caches2: Vec<LstmCache>,
}

/// Runs the 2-layer encoder over an f x J channel from the zero state.
pub fn encode(values: &Matrix, params: &EncoderParams) -> Result<EncodeResult> {
    if values.cols() != params.layer1.input_dim {
        return Err(GaitError::Shape(format!(
            "channel width {} != encoder input {}",
            values.cols(),
            params.layer1.input_dim
        )));
    }
    let k = params.layer1.hidden_dim;
    let mut s1 = LstmState::zeros(k);
    let mut s2 = LstmState::zeros(k);
    let f = values.rows();
    let mut top_states = Vec::with_capacity(f);
    let mut caches1 = Vec::with_capacity(f);
    let mut caches2 = Vec::with_capacity(f);
    for t in 0..f {
        let (n1, c1) = lstm_cell_forward(&params.layer1, values.row(t), &s1)?;
        let (n2, c2) = lstm_cell_forward(&params.layer2, &n1.hidden, &s2)?;
        top_states.push(n2.hidden.clone());
        caches1.push(c1);
        caches2.push(c2);
        s1 = n1;
        s2 = n2;
    }
    Ok(EncodeResult {
        top_states,
        final1: s1,
        final2: s2,
        caches1,
        caches2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    /// Teacher forcing: feed ground-truth target rows back in.
    Train,
    /// Free running: feed the model's own predictions back in.
    Test,
}

/// Everything one decoding step produced. Attention fields are `None`
/// when the attention mode is `None` (plain passthrough decoding).
#[derive(Debug, Clone)]
pub struct DecodeStep {
    /// Top-layer decoded gait state.
    pub decoded_state: Vec<f64>,
    /// Basic alignment scores over encoder steps.
    pub bas: Option<Vec<f64>>,
    /// Locality mask for this step.
    pub mask: Option<Vec<f64>>,
    /// Mask-multiplied scores.
    pub masked: Option<Vec<f64>>,
    /// The scores actually used to weight the context.
    pub weights: Option<Vec<f64>>,
    pub context: Option<Vec<f64>>,
    /// Attentional state fed to the readout and the next step.
    pub attentional: Vec<f64>,
    /// Reconstructed skeleton row.
    pub predicted: Vec<f64>,
    pub(crate) cache1: LstmCache,
    pub(crate) cache2: LstmCache,
}

#[derive(Debug, Clone)]
pub struct DecodeTrace {
    pub steps: Vec<DecodeStep>,
    pub attention_mode: AttentionMode,
}

impl DecodeTrace {
    fn matrix_of(&self, pick: impl Fn(&DecodeStep) -> Option<&Vec<f64>>) -> Option<AlignmentMatrix> {
        let f = self.steps.len();
        let mut m = Matrix::zeros(f, f);
        for (t, step) in self.steps.iter().enumerate() {
            let row = pick(step)?;
            m.row_mut(t).copy_from_slice(row);
        }
        Some(m)
    }

    /// f x f basic alignment scores, row per decoding step.
    pub fn bas_matrix(&self) -> Option<AlignmentMatrix> {
        self.matrix_of(|s| s.bas.as_ref())
    }

    pub fn masked_matrix(&self) -> Option<AlignmentMatrix> {
        self.matrix_of(|s| s.masked.as_ref())
    }

    /// The context weights that were actually applied.
    pub fn weights_matrix(&self) -> Option<AlignmentMatrix> {
        self.matrix_of(|s| s.weights.as_ref())
    }

    pub fn predicted_matrix(&self) -> Matrix {
        let f = self.steps.len();
        let j = self.steps.first().map_or(0, |s| s.predicted.len());
        let mut m = Matrix::zeros(f, j);
        for (t, step) in self.steps.iter().enumerate() {
            m.row_mut(t).copy_from_slice(&step.predicted);
        }
        m
    }
}

/// Linear readout of a skeleton row from an attentional state.
pub fn predict_row(attentional: &[f64], w_f: &Matrix) -> Result<Vec<f64>> {
    affine_forward(w_f, attentional, false)
}

/// Runs the decoder for as many steps as the encoder saw.
///
/// `target` rows are the reconstruction targets in decoding order
/// (already reversed by the caller when reverse-order training is on);
/// they are required for teacher forcing in `Train` mode and unused in
/// `Test` mode. `reverse_order` selects where the locality mask centers:
/// position f-t+1 when the decoder emits the sequence reversed, position
/// t when it emits in original order.
pub fn decode(
    enc: &EncodeResult,
    target: Option<&Matrix>,
    params: &DecoderParams,
    attn: &AttentionConfig,
    mode: DecodeMode,
    reverse_order: bool,
) -> Result<DecodeTrace> {
    let f = enc.top_states.len();
    let k = params.layer2.hidden_dim;
    let joints = params.w_f.rows();
    if let Some(tg) = target {
        if tg.rows() != f || tg.cols() != joints {
            return Err(GaitError::Shape(format!(
                "target {}x{} does not match {f} steps of width {joints}",
                tg.rows(),
                tg.cols()
            )));
        }
    }
    if mode == DecodeMode::Train && target.is_none() {
        return Err(GaitError::Config("teacher forcing requires targets".into()));
    }
    attn.validate()?;

    let mut s1 = enc.final1.clone();
    let mut s2 = enc.final2.clone();
    let mut steps: Vec<DecodeStep> = Vec::with_capacity(f);
    let mut x1 = vec![0.0; joints + k];
    for t in 0..f {
        // Input feeding: previous skeleton row next to the previous
        // attentional state; step 1 gets the all-zero placeholder.
        x1.fill(0.0);
        if t > 0 {
            match mode {
                DecodeMode::Train => {
                    x1[..joints].copy_from_slice(target.unwrap().row(t - 1));
                }
                DecodeMode::Test => {
                    x1[..joints].copy_from_slice(&steps[t - 1].predicted);
                }
            }
            x1[joints..].copy_from_slice(&steps[t - 1].attentional);
        }
        let (n1, cache1) = lstm_cell_forward(&params.layer1, &x1, &s1)?;
        let (n2, cache2) = lstm_cell_forward(&params.layer2, &n1.hidden, &s2)?;
        let decoded = n2.hidden.clone();

        let step = if attn.mode.uses_attention() {
            let a = bas_scores(&decoded, &enc.top_states)?;
            let center = if reverse_order {
                (f - t) as f64 // reverse reconstruction: step t emits row f-t+1
            } else {
                (t + 1) as f64
            };
            let mask = mask_centered_at(center, f, attn.window_radius, attn.sigma);
            let masked = mbas_scores(&a, &mask)?;
            let weights = match attn.mode {
                AttentionMode::Mbas => masked.clone(),
                _ => a.clone(),
            };
            let context = context_vector(&weights, &enc.top_states)?;
            let mut joint = Vec::with_capacity(2 * k);
            joint.extend_from_slice(&context);
            joint.extend_from_slice(&decoded);
            let attentional = affine_forward(&params.w_att, &joint, true)?;
            let predicted = predict_row(&attentional, &params.w_f)?;
            DecodeStep {
                decoded_state: decoded,
                bas: Some(a),
                mask: Some(mask),
                masked: Some(masked),
                weights: Some(weights),
                context: Some(context),
                attentional,
                predicted,
                cache1,
                cache2,
            }
        } else {
            // Passthrough: the decoded state itself feeds the readout.
            let predicted = predict_row(&decoded, &params.w_f)?;
            DecodeStep {
                decoded_state: decoded.clone(),
                bas: None,
                mask: None,
                masked: None,
                weights: None,
                context: None,
                attentional: decoded,
                predicted,
                cache1,
                cache2,
            }
        };
        steps.push(step);
        s1 = n1;
        s2 = n2;
    }
    Ok(DecodeTrace {
        steps,
        attention_mode: attn.mode,
    })
}

/// Exact reverse-mode pass through decode + encode for one sequence.
///
/// Requires a `Train`-mode trace (teacher forcing): gradients into fed
/// target rows are constants and get dropped. `d_pred_rows[t]` is the
/// upstream gradient on the predicted row of step t (loss scaling
/// already applied by the caller); `d_score_extra`, when present, adds
/// an upstream gradient on the basic alignment scores of each step (the
/// alignment-loss path, where the masked copy is a held-fixed target).
pub fn backprop(
    enc_params: &EncoderParams,
    dec_params: &DecoderParams,
    enc: &EncodeResult,
    trace: &DecodeTrace,
    d_pred_rows: &[Vec<f64>],
    d_score_extra: Option<&[Vec<f64>]>,
    grads: &mut ModelGrads,
) -> Result<()> {
    let f = trace.steps.len();
    let k = dec_params.layer2.hidden_dim;
    let joints = dec_params.w_f.rows();
    if d_pred_rows.len() != f {
        return Err(GaitError::Shape("one prediction gradient per step".into()));
    }
    if let Some(ds) = d_score_extra {
        if ds.len() != f {
            return Err(GaitError::Shape("one score gradient per step".into()));
        }
    }

    // Carried backward across decoder steps.
    let mut d_s1 = (vec![0.0; k], vec![0.0; k]); // (d_hidden, d_cell) layer 1
    let mut d_s2 = (vec![0.0; k], vec![0.0; k]);
    let mut d_attentional_next = vec![0.0; k]; // via next step's input feeding
    let mut d_top: Vec<Vec<f64>> = vec![vec![0.0; k]; f]; // into encoder states

    for t in (0..f).rev() {
        let step = &trace.steps[t];

        // Readout: predicted = w_f · attentional.
        let mut d_attentional = dec_params.w_f.matvec_t(&d_pred_rows[t]);
        grads.w_f.add_outer(&d_pred_rows[t], &step.attentional);
        for (da, dn) in d_attentional.iter_mut().zip(&d_attentional_next) {
            *da += dn;
        }

        let d_decoded = if trace.attention_mode.uses_attention() {
            let a = step.bas.as_ref().unwrap();
            let weights = step.weights.as_ref().unwrap();
            let context = step.context.as_ref().unwrap();

            // attentional = tanh(w_att [context; decoded])
            let mut d_pre = vec![0.0; k];
            for j in 0..k {
                let y = step.attentional[j];
                d_pre[j] = d_attentional[j] * (1.0 - y * y);
            }
            let mut joint = Vec::with_capacity(2 * k);
            joint.extend_from_slice(context);
            joint.extend_from_slice(&step.decoded_state);
            grads.w_att.add_outer(&d_pre, &joint);
            let d_joint = dec_params.w_att.matvec_t(&d_pre);
            let d_context = &d_joint[..k];
            let mut d_decoded = d_joint[k..].to_vec();

            // context = sum_j weights_j · h_j
            let mut d_weights = vec![0.0; f];
            for j in 0..f {
                d_top[j]
                    .iter_mut()
                    .zip(d_context)
                    .for_each(|(dt, &dc)| *dt += weights[j] * dc);
                d_weights[j] = dot(d_context, &enc.top_states[j]);
            }

            // Context weights back to the basic scores.
            let mut d_a = match trace.attention_mode {
                AttentionMode::Mbas => {
                    let mask = step.mask.as_ref().unwrap();
                    d_weights
                        .iter()
                        .zip(mask)
                        .map(|(&dw, &l)| dw * l)
                        .collect::<Vec<f64>>()
                }
                _ => d_weights,
            };
            if let Some(ds) = d_score_extra {
                for (da, &extra) in d_a.iter_mut().zip(&ds[t]) {
                    *da += extra;
                }
            }

            // Softmax backward: d_score = a ∘ (d_a − ⟨d_a, a⟩).
            let inner = dot(&d_a, a);
            let d_score: Vec<f64> = a
                .iter()
                .zip(&d_a)
                .map(|(&ai, &dai)| ai * (dai - inner))
                .collect();

            // score_j = ⟨decoded, h_j⟩
            for j in 0..f {
                d_decoded
                    .iter_mut()
                    .zip(&enc.top_states[j])
                    .for_each(|(dd, &hj)| *dd += d_score[j] * hj);
                d_top[j]
                    .iter_mut()
                    .zip(&step.decoded_state)
                    .for_each(|(dt, &hh)| *dt += d_score[j] * hh);
            }
            d_decoded
        } else {
            // Passthrough: attentional state IS the decoded state.
            d_attentional
        };

        // Layer 2: its hidden is the decoded state.
        let mut d_h2 = d_s2.0.clone();
        for (dh, dd) in d_h2.iter_mut().zip(&d_decoded) {
            *dh += dd;
        }
        let (d_x2, d_h2p, d_c2p) =
            lstm_cell_backward(&dec_params.layer2, &step.cache2, &d_h2, &d_s2.1, &mut grads.dec2);
        d_s2 = (d_h2p, d_c2p);

        // Layer 1: its hidden fed layer 2.
        let mut d_h1 = d_s1.0.clone();
        for (dh, dx) in d_h1.iter_mut().zip(&d_x2) {
            *dh += dx;
        }
        let (d_x1, d_h1p, d_c1p) =
            lstm_cell_backward(&dec_params.layer1, &step.cache1, &d_h1, &d_s1.1, &mut grads.dec1);
        d_s1 = (d_h1p, d_c1p);

        // Input feeding split: the skeleton-row part is a constant
        // (teacher forcing); the attentional part flows to step t-1.
        d_attentional_next.copy_from_slice(&d_x1[joints..]);
    }

    // The decoder's initial states were the encoder's final states.
    let mut d_enc1 = d_s1;
    let mut d_enc2 = d_s2;
    for t in (0..f).rev() {
        let mut d_h2 = d_enc2.0;
        for (dh, dt) in d_h2.iter_mut().zip(&d_top[t]) {
            *dh += dt;
        }
        let (d_x2, d_h2p, d_c2p) = lstm_cell_backward(
            &enc_params.layer2,
            &enc.caches2[t],
            &d_h2,
            &d_enc2.1,
            &mut grads.enc2,
        );
        d_enc2 = (d_h2p, d_c2p);

        let mut d_h1 = d_enc1.0;
        for (dh, dx) in d_h1.iter_mut().zip(&d_x2) {
            *dh += dx;
        }
        let (_d_input, d_h1p, d_c1p) = lstm_cell_backward(
            &enc_params.layer1,
            &enc.caches1[t],
            &d_h1,
            &d_enc1.1,
            &mut grads.enc1,
        );
        d_enc1 = (d_h1p, d_c1p);
    }
    Ok(())
}
