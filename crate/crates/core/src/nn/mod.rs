//! Dense-tensor layers, optimizers and gradient checking.

pub mod dense;
pub mod gradcheck;
pub mod lstm;
pub mod optim;
pub mod params;

pub use dense::{dense_apply, softmax, softmax_backward, softmax_in_place, Activation, Dense};
pub use gradcheck::{grad_check, max_relative_error, numeric_gradient, relative_error};
pub use lstm::{bilstm_apply, lstm_step, BiLstm, LstmCell};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{Gradients, ParamId, Parameter, ParameterSet};
