use serde::{Deserialize, Serialize};

use crate::entmax::Alpha;
use crate::error::{GraftError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StanhopConfig {
    pub d_model: usize,
    pub d_ff: usize,
    pub n_heads: usize,
    pub e_layers: usize,
    pub dropout: f64,
    /// Half-hour steps per temporal segment token.
    pub seg_len: usize,
    /// Prototype count `K` for SeriesGSH pooling.
    pub pool_k: usize,
    pub coarsen_stride: usize,
    /// Inverse temperature; `None` means `1/sqrt(head width)`.
    pub beta: Option<f64>,
    pub alpha: Alpha,
}

impl Default for StanhopConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        Self {
            d_model: 32,
            d_ff: 64,
            n_heads: 4,
            e_layers: 1,
            dropout: 0.1,
            seg_len: 12,
            pool_k: 4,
            coarsen_stride: 1,
            beta: None,
            alpha: Alpha::default(),
        }
    }
}

impl StanhopConfig {
    /// Full-scale settings (`d_model` 512, `d_ff` 1024, 8 heads, 3 layers).
    pub fn full_scale() -> Self {
        Self {
            d_model: 512,
            d_ff: 1024,
            n_heads: 8,
            e_layers: 3,
            pool_k: 10,
            ..Self::default()
        }
    }

    pub fn head_width(&self) -> usize {
        self.d_model / self.n_heads.max(1)
    }

    pub fn beta(&self) -> f64 {
        self.beta
            .unwrap_or_else(|| 1.0 / (self.head_width() as f64).sqrt())
    }

    pub fn validate(&self, t_in: usize) -> Result<()> {
        let bad = |m: String| Err(GraftError::Config(m));
        if self.d_model == 0 || self.d_ff == 0 || self.n_heads == 0 {
            return bad("d_model, d_ff and n_heads must be positive".into());
        }
        if self.d_model % self.n_heads != 0 {
            return bad(format!("d_model {} not divisible by {} heads", self.d_model, self.n_heads));
        }
        if self.seg_len == 0 || t_in % self.seg_len != 0 {
            return bad(format!("seg_len {} must divide T_in {t_in}", self.seg_len));
        }
        if self.pool_k == 0 {
            return bad("pool_k must be at least 1".into());
        }
        if self.coarsen_stride == 0 {
            return bad("coarsen stride must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) {
                return bad(format!("beta {b} must be positive"));
            }
        }
        Ok(())
    }

    pub fn segments(&self, t_in: usize) -> usize {
        t_in / self.seg_len
    }

    /// Time steps left after `layers` coarsening passes.
    pub fn steps_after(&self, t_in: usize, layers: usize) -> usize {
        let mut t = self.segments(t_in);
        for _ in 0..layers {
            if t >= 2 * self.coarsen_stride {
                t = (t / (2 * self.coarsen_stride)) * self.coarsen_stride;
            }
        }
        t
    }
}
