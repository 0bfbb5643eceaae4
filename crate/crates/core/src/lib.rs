//! Physics-informed wavelet neural operators.
//!
//! The crate learns solution operators of parametric PDEs with a wavelet
//! neural operator whose training loss is built from the governing equations.
//! Output-field derivatives come from stochastic-projection estimators, which
//! on a fixed grid reduce to sparse linear maps that the reverse-mode tape can
//! differentiate through.
//!
//! Layout:
//! - [`autodiff`]: tensors, tape, Adam with a step schedule
//! - [`wavelet`]: orthogonal Daubechies filter banks and multilevel 2-D DWT
//! - [`model`]: the operator network (lifting, wavelet blocks, projection)
//! - [`spgrad`]: stochastic-projection derivative stencils
//! - [`physics`]: PDE residuals and the composite loss
//! - [`problems`]: samplers, reference solvers, dataset container
//! - [`harness`]: training loop, evaluation, checkpoints, config, reports

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod error;
pub mod grid;
pub mod harness;
pub mod model;
pub mod physics;
pub mod problems;
pub mod spgrad;
pub mod wavelet;

pub use error::{Error, Result};
