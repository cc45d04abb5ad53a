use serde::{Deserialize, Serialize};

use super::SourceSwitch;
use crate::entmax::Alpha;
use crate::error::{GraftError, Result};
use crate::stanhop::StanhopConfig;

/// Weights of the composite training loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub lambda_tau: f64,
    pub lambda_gamma: f64,
    /// `true` subtracts `λ_γ·H(γ)` so minimizing the loss raises gate
    /// entropy; `false` adds it.
    pub entropy_bonus: bool,
    pub quantiles: Vec<f64>,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_tau: 0.1,
            lambda_gamma: 0.01,
            entropy_bonus: true,
            quantiles: vec![0.1, 0.9],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backbone: StanhopConfig,
    /// Input length in half-hour steps.
    pub t_in: usize,
    /// Forecast length in half-hour steps.
    pub t_out: usize,
    /// Input channels: load plus covariates.
    pub channels: usize,
    /// Per-source text embedding width.
    pub text_dim: usize,
    pub switch: SourceSwitch,
    /// Retrieval inverse temperature; `None` means `1/sqrt(d_model)`.
    pub retrieval_beta: Option<f64>,
    /// EntMax order of the text retrieval and the source gate.
    pub alpha: Alpha,
    pub loss: LossConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            backbone: StanhopConfig::default(),
            t_in: 7 * 48,
            t_out: 48,
            channels: 1,
            text_dim: 16,
            switch: SourceSwitch::All,
            retrieval_beta: None,
            alpha: Alpha::default(),
            loss: LossConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.backbone.validate(self.t_in)?;
        let bad = |m: String| Err(GraftError::Config(m));
        if self.t_in % 48 != 0 || self.t_out == 0 {
            return bad(format!("T_in {} must be a multiple of 48 and T_out positive", self.t_in));
        }
        if self.channels == 0 || self.text_dim == 0 {
            return bad("channels and text_dim must be positive".into());
        }
        if let Some(b) = self.retrieval_beta {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("retrieval beta {b} must be positive"));
            }
        }
        let l = &self.loss;
        if !(l.lambda_tau >= 0.0 && l.lambda_gamma >= 0.0) {
            return bad("loss weights must be non-negative".into());
        }
        if l.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return bad("quantiles must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn input_days(&self) -> usize {
        self.t_in / 48
    }

    pub fn retrieval_beta(&self) -> f64 {
        self.retrieval_beta
            .unwrap_or_else(|| 1.0 / (self.backbone.d_model as f64).sqrt())
    }

    /// Width of the flattened final representation fed to the decoder head.
    pub fn head_width(&self) -> usize {
        self.backbone.steps_after(self.t_in, self.backbone.e_layers) * self.channels * self.backbone.d_model
    }
}
