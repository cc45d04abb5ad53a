//! Text-fused electrical load forecasting on sparse modern Hopfield attention.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: tensors, reverse-mode tape, layers, Adam.
//! - [`entmax`]: α-EntMax, Tsallis entropy and its conjugate.
//! - [`hopfield`]: sparse Hopfield energy, retrieval dynamics, attention.
//! - [`stanhop`]: TimeGSH / SeriesGSH blocks, memory plug-ins, coarsening.
//! - [`data`]: load panels, daily text memories, windows, splits.
//! - [`model`]: text memory, cross-modal retrieval, source gating, loss.
//! - [`training`]: the training loop and rolling forecasts.
//! - [`evaluation`]: point metrics, statistical baselines, Skill/RankRMSE/Wins.
//! - [`pipeline`]: dataset assembly, leakage audit, evaluation tasks.

pub mod data;
pub mod entmax;
pub mod error;
pub mod evaluation;
pub mod hopfield;
pub mod model;
pub mod numerics;
pub mod pipeline;
pub mod stanhop;
pub mod training;

pub use entmax::{Alpha, SimplexVector};
pub use error::{GraftError, Result};
pub use numerics::{ParamStore, Tape, Tensor, Var};
