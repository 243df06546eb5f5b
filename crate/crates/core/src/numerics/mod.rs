//! Dense f64 numerics: matrices, the LSTM cell with exact manual
//! gradients, softmax/affine helpers, SGD-with-momentum, and a
//! finite-difference oracle for testing backward passes.

pub mod gradcheck;
pub mod lstm;
pub mod matrix;
pub mod ops;
pub mod optim;

pub use gradcheck::{finite_difference_gradient, max_relative_error};
pub use lstm::{lstm_cell_backward, lstm_cell_forward, LstmCache, LstmCellGrads, LstmCellParams, LstmState};
pub use matrix::{axpy, dot, Matrix};
pub use ops::{affine_forward, softmax};
pub use optim::{clip_global_norm, OptimizerState, ParamTensor};
