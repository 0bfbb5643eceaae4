//! Dense tensors, a fixed-graph reverse-mode tape, and the Adam optimizer.

mod gemm;
mod optim;
mod sparse;
mod tape;
mod tensor;

pub use optim::{adam_step, lr_at, Gradients, OptimConfig, Param, ParamId, ParamStore};
pub use sparse::{LinearMap, SparseMatrix};
pub use tape::{gelu, gelu_derivative, NodeId, Op, Tape};
pub use tensor::DiffTensor;
