//! STanHop backbone: TimeGSH over time, SeriesGSH with prototype pooling
//! over channels, memory plug-ins and multi-resolution coarse-graining.
//!
//! Sequence states are `T × C × D` and live on the tape as a `(T·C) × D`
//! matrix in time-major order (row `t·C + c`).

mod block;
mod config;

pub use block::{
    coarse_grain, coarse_pairs, embed_segments, encode, init_params, plug_memory, series_gsh, series_pool,
    stanhop_block, time_gsh, tune_memory, BlockHook, MemoryPlugin, Stage,
};
pub use config::StanhopConfig;

use crate::error::{dim_err, Result};
use crate::numerics::{Tensor, Var};

/// A `T × C × D` state on the tape.
#[derive(Clone, Copy, Debug)]
pub struct Seq<'t> {
    pub z: Var<'t>,
    pub steps: usize,
    pub channels: usize,
}

impl<'t> Seq<'t> {
    pub fn new(z: Var<'t>, steps: usize, channels: usize) -> Self {
        assert_eq!(z.shape().0, steps * channels, "rows must equal T·C");
        Self { z, steps, channels }
    }

    pub fn width(&self) -> usize {
        self.z.shape().1
    }

    /// Row indices of channel `c` in time order.
    pub fn channel_rows(&self, c: usize) -> Vec<usize> {
        (0..self.steps).map(|t| t * self.channels + c).collect()
    }

    /// Plain `[T, C, D]` copy of the current value.
    pub fn to_state(&self) -> BlockState {
        let v = self.z.value();
        BlockState {
            z: v
                .reshape(&[self.steps, self.channels, self.width()])
                .expect("row count checked at construction"),
        }
    }
}

/// Plain `T × C × D` representation.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockState {
    z: Tensor,
}

impl BlockState {
    pub fn new(z: Tensor) -> Result<Self> {
        if z.shape().len() != 3 {
            return dim_err(format!("block state must be T×C×D, got {:?}", z.shape()));
        }
        if !z.is_finite() {
            return Err(crate::GraftError::Input("non-finite block state".into()));
        }
        Ok(Self { z })
    }

    pub fn steps(&self) -> usize {
        self.z.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.z.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.z.shape()[2]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.z
    }

    /// Records the state on a tape as a differentiable input.
    pub fn var<'t>(&self, tape: &'t crate::numerics::Tape) -> Seq<'t> {
        let m = self
            .z
            .reshape(&[self.steps() * self.channels(), self.width()])
            .expect("same count");
        Seq::new(tape.var(&m), self.steps(), self.channels())
    }
}
