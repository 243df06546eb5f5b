//! Single LSTM cell: forward pass with a cache, and an exact manual
//! backward pass. Gate weights are fused into one (4k x in) matrix per
//! source with row blocks ordered [input; forget; candidate; output].

use crate::error::{GaitError, Result};
use crate::numerics::matrix::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// (4k x input_dim) input weights, gate blocks stacked.
    pub wx: Matrix,
    /// (4k x k) recurrent weights, gate blocks stacked.
    pub wh: Matrix,
    /// (4k) biases, gate blocks stacked.
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LstmState {
            hidden: vec![0.0; hidden_dim],
            cell: vec![0.0; hidden_dim],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.hidden.iter().all(|v| v.is_finite()) && self.cell.iter().all(|v| v.is_finite())
    }
}

/// Post-activation gate values and everything else the backward pass
/// needs to avoid recomputation.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub input: Vec<f64>,
    pub prev_hidden: Vec<f64>,
    pub prev_cell: Vec<f64>,
    /// sigma(z_i), sigma(z_f), tanh(z_g), sigma(z_o), each length k.
    pub gate_i: Vec<f64>,
    pub gate_f: Vec<f64>,
    pub gate_g: Vec<f64>,
    pub gate_o: Vec<f64>,
    /// tanh of the new cell value.
    pub tanh_cell: Vec<f64>,
}

/// Gradient accumulators shaped like `LstmCellParams`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellGrads {
    pub wx: Matrix,
    pub wh: Matrix,
    pub b: Vec<f64>,
}

impl LstmCellGrads {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmCellGrads {
            wx: Matrix::zeros(4 * hidden_dim, input_dim),
            wh: Matrix::zeros(4 * hidden_dim, hidden_dim),
            b: vec![0.0; 4 * hidden_dim],
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LstmCellParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmCellParams {
            input_dim,
            hidden_dim,
            wx: Matrix::zeros(4 * hidden_dim, input_dim),
            wh: Matrix::zeros(4 * hidden_dim, hidden_dim),
            b: vec![0.0; 4 * hidden_dim],
        }
    }

    /// Glorot-uniform weights per gate block; biases zero except the
    /// forget gate's, set to 1.0 so early training does not flush the
    /// cell state.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        let lim_x = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let lim_h = (6.0 / (2 * hidden_dim) as f64).sqrt();
        for v in p.wx.data_mut() {
            *v = rng.uniform_in(-lim_x, lim_x);
        }
        for v in p.wh.data_mut() {
            *v = rng.uniform_in(-lim_h, lim_h);
        }
        for v in &mut p.b[hidden_dim..2 * hidden_dim] {
            *v = 1.0;
        }
        p
    }
}

pub fn lstm_cell_forward(
    params: &LstmCellParams,
    input: &[f64],
    prev: &LstmState,
) -> Result<(LstmState, LstmCache)> {
    let k = params.hidden_dim;
    if input.len() != params.input_dim {
        return Err(GaitError::Shape(format!(
            "lstm input length {} != {}",
            input.len(),
            params.input_dim
        )));
    }
    if prev.hidden.len() != k || prev.cell.len() != k {
        return Err(GaitError::Shape("lstm state length mismatch".into()));
    }

    // z = Wx·x + Wh·h_prev + b, all four gates at once.
    let mut z = params.wx.matvec(input);
    for (zi, &bi) in z.iter_mut().zip(&params.b) {
        *zi += bi;
    }
    let rec = params.wh.matvec(&prev.hidden);
    for (zi, ri) in z.iter_mut().zip(rec) {
        *zi += ri;
    }

    let mut gate_i = vec![0.0; k];
    let mut gate_f = vec![0.0; k];
    let mut gate_g = vec![0.0; k];
    let mut gate_o = vec![0.0; k];
    for j in 0..k {
        gate_i[j] = sigmoid(z[j]);
        gate_f[j] = sigmoid(z[k + j]);
        gate_g[j] = z[2 * k + j].tanh();
        gate_o[j] = sigmoid(z[3 * k + j]);
    }

    let mut cell = vec![0.0; k];
    let mut tanh_cell = vec![0.0; k];
    let mut hidden = vec![0.0; k];
    for j in 0..k {
        cell[j] = gate_f[j] * prev.cell[j] + gate_i[j] * gate_g[j];
        tanh_cell[j] = cell[j].tanh();
        hidden[j] = gate_o[j] * tanh_cell[j];
    }

    let next = LstmState { hidden, cell };
    if !next.is_finite() {
        return Err(GaitError::Numeric("lstm state diverged".into()));
    }
    let cache = LstmCache {
        input: input.to_vec(),
        prev_hidden: prev.hidden.clone(),
        prev_cell: prev.cell.clone(),
        gate_i,
        gate_f,
        gate_g,
        gate_o,
        tanh_cell,
    };
    Ok((next, cache))
}

/// Reverse-mode step for one cell application. `d_hidden` / `d_cell`
/// are the upstream gradients for the produced state; returns the
/// gradients w.r.t. the input and the previous state while accumulating
/// parameter gradients into `grads`.
pub fn lstm_cell_backward(
    params: &LstmCellParams,
    cache: &LstmCache,
    d_hidden: &[f64],
    d_cell: &[f64],
    grads: &mut LstmCellGrads,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let k = params.hidden_dim;
    debug_assert_eq!(d_hidden.len(), k);
    debug_assert_eq!(d_cell.len(), k);

    let mut dz = vec![0.0; 4 * k];
    let mut d_prev_cell = vec![0.0; k];
    for j in 0..k {
        let tc = cache.tanh_cell[j];
        let o = cache.gate_o[j];
        let i = cache.gate_i[j];
        let f = cache.gate_f[j];
        let g = cache.gate_g[j];
        // dh reaches the cell value through o·tanh(c).
        let dc = d_cell[j] + d_hidden[j] * o * (1.0 - tc * tc);
        let d_o = d_hidden[j] * tc;
        dz[j] = dc * g * i * (1.0 - i);
        dz[k + j] = dc * cache.prev_cell[j] * f * (1.0 - f);
        dz[2 * k + j] = dc * i * (1.0 - g * g);
        dz[3 * k + j] = d_o * o * (1.0 - o);
        d_prev_cell[j] = dc * f;
    }

    grads.wx.add_outer(&dz, &cache.input);
    grads.wh.add_outer(&dz, &cache.prev_hidden);
    for (gb, &d) in grads.b.iter_mut().zip(&dz) {
        *gb += d;
    }

    let d_input = params.wx.matvec_t(&dz);
    let d_prev_hidden = params.wh.matvec_t(&dz);
    (d_input, d_prev_hidden, d_prev_cell)
}
