//! Orthogonal Daubechies bases and the multilevel separable DWT used for the
//! space-frequency parameterization of the operator kernel.

mod basis;
mod dwt;

pub use basis::{make_basis, WaveletBasis};
pub use dwt::{
    dwt2_forward, dwt2_inverse, dwt_adjoint, AdjointInput, AdjointOutput, CoarseAnalysis, CoarseSynthesis,
    CoeffPyramid, Direction, Dwt1, Dwt2,
};
