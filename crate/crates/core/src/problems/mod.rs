//! Benchmark problems: input samplers, reference solvers, dataset files.

pub mod dataset;
mod fft;
pub mod samplers;
pub mod solvers;

pub use dataset::{build_dataset, Dataset, DatasetSplits, Dtype, generate_splits};
pub use samplers::{
    burgers_ic, poisson_f, poisson_u, sample_burgers_ic, sample_grf_periodic2d, sample_grf_se, sample_poisson_pair,
    sample_rng, GrfSpec, SeSampler,
};
pub use solvers::{solve_allen_cahn, solve_burgers, solve_nagumo, SolverConfig};
