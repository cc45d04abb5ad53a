//! GRAFT: the STanHop backbone with per-day text memories fused in by
//! source-gated sparse retrieval, a linear decoder head and the composite
//! training loss.

mod config;
mod forward;
mod fusion;
mod switch;

pub use config::{LossConfig, ModelConfig};
pub use forward::{
    backbone_forward, forward, init_params, loss, sample_tensors, FusionDiagnostics, ForwardOutput,
    GammaRecord, PiRecord,
};
pub use fusion::{build_text_memory, cross_modal_retrieve, source_gate, Gate, TextMemory};
pub use switch::SourceSwitch;

use crate::error::Result;
use crate::numerics::{Ctx, ParamStore, Tape, Tensor};
use crate::data::DayText;

/// Inference on plain values: de-normalization is left to the caller.
pub fn predict(
    store: &ParamStore,
    cfg: &ModelConfig,
    input: &Tensor,
    text: &[DayText],
    exemplars: Option<&Tensor>,
) -> Result<(Vec<f64>, FusionDiagnostics)> {
    let tape = Tape::new();
    let ctx = Ctx::eval(&tape, store);
    let out = forward(&ctx, cfg, input, text, exemplars)?;
    let values = out.prediction.value().data().to_vec();
    Ok((values, out.diagnostics))
}

#[cfg(test)]
mod tests;
