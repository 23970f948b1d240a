//! Minimal reverse-mode autodiff over dense `f64` matrices.
//!
//! The model code builds a fresh [`Tape`] per document, leases parameters
//! from a shared [`ParamStore`], and differentiates a scalar loss with one
//! reverse sweep. The op set is exactly what the layers above need — matrix
//! products, gathers/scatters, segment softmax and log-sum-exp, a few
//! element-wise nonlinearities — each with a hand-derived backward rule that
//! is verified against central finite differences in the test suite.

mod gradcheck;
mod matrix;
mod optim;
mod store;
mod tape;

pub use gradcheck::{central_difference, check_all_params, relative_error, GradCheckReport};
pub use matrix::Matrix;
pub use optim::{Adam, AdamConfig, WarmupLinearDecay};
pub use store::{normal_init, xavier_uniform, GradStore, ParamExport, ParamId, ParamStore};
pub use tape::{Gradients, Tape, TensorError, Var};
