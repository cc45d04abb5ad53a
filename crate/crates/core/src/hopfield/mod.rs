//! Generalized sparse Hopfield model: energy, retrieval dynamics and the
//! attention-form layer, plus the property experiments that exercise them.

mod attention;
mod bank;
mod experiments;
pub mod patterns;

pub use attention::{gsh_attend, gsh_attention};
pub use bank::{MemoryBank, RetrievalTrace};
pub use experiments::{
    capacity_trend_experiment, check_sparse_dominates_dense, energy_descent_suite,
    is_non_decreasing, one_step_error_vs_beta, CapacityConfig, CapacityRow, DescentConfig,
    DescentReport, SparseDenseReport,
};
