//! Flat `key = value` configuration.
//!
//! Files may pull in other files with `include = path` (resolved relative to
//! the including file; later lines win). Each known key can be overridden by
//! an environment variable `GRAFT_<KEY>` with dots and lowercase mapped to
//! `_` and uppercase (`train.epochs` → `GRAFT_TRAIN_EPOCHS`). Command-line
//! flags override both.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Result;
use chrono::NaiveDate;
use graft_core::data::synth::SynthConfig;
use graft_core::data::{PolicyDecay, WindowConfig};
use graft_core::model::{LossConfig, ModelConfig, SourceSwitch};
use graft_core::stanhop::StanhopConfig;
use graft_core::training::{Horizon, TrainConfig};
use graft_core::Alpha;

/// A validation failure in user-supplied settings or artifacts.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "source_switch",
    "horizon",
    "out",
    "data.load",
    "data.embeddings",
    "data.covariates",
    "split.train_end",
    "split.val_end",
    "split.train_frac",
    "split.val_frac",
    "window.t_in",
    "window.t_out",
    "window.stride",
    "text.dim",
    "policy.rho",
    "policy.horizon_days",
    "policy.min_factor",
    "model.d_model",
    "model.d_ff",
    "model.n_heads",
    "model.e_layers",
    "model.dropout",
    "model.seg_len",
    "model.pool_k",
    "model.coarsen_stride",
    "model.beta",
    "model.alpha",
    "model.retrieval_beta",
    "model.fusion_alpha",
    "loss.lambda_tau",
    "loss.lambda_gamma",
    "loss.entropy_bonus",
    "loss.quantiles",
    "train.lr",
    "train.batch_size",
    "train.epochs",
    "train.clip",
    "synth.days",
    "synth.event_days",
    "synth.region",
    "synth.start",
    "synth.embed_dim",
    "synth.sparse",
    "synth.base_load",
    "synth.seasonal",
    "synth.shock",
    "synth.noise",
];

const MAX_INCLUDE_DEPTH: usize = 16;

pub fn env_name(key: &str) -> String {
    format!("GRAFT_{}", key.replace('.', "_").to_uppercase())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// File (if any), then environment.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut s = Self::default();
        if let Some(p) = path {
            s.read_file(p, 0)?;
        }
        for key in KNOWN_KEYS {
            if let Ok(v) = std::env::var(env_name(key)) {
                s.values.insert(key.to_string(), v);
            }
        }
        Ok(s)
    }

    #[cfg(test)]
    pub fn parse_str(text: &str, base: &Path) -> Result<Self> {
        let mut s = Self::default();
        s.parse_into(text, base, Path::new("<string>"), 0)?;
        Ok(s)
    }

    fn read_file(&mut self, path: &Path, depth: usize) -> Result<()> {
        if depth > MAX_INCLUDE_DEPTH {
            return Err(invalid(format!("{}: includes nested deeper than {MAX_INCLUDE_DEPTH}", path.display())));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        self.parse_into(&text, &base, path, depth)
    }

    fn parse_into(&mut self, text: &str, base: &Path, origin: &Path, depth: usize) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(invalid(format!("{}:{}: expected key = value", origin.display(), i + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if k == "include" {
                let p = PathBuf::from(v);
                self.read_file(&if p.is_absolute() { p } else { base.join(p) }, depth + 1)?;
            } else if KNOWN_KEYS.contains(&k) {
                self.values.insert(k.to_string(), v.to_string());
            } else {
                return Err(invalid(format!("{}:{}: unknown key {k:?}", origin.display(), i + 1)));
            }
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| invalid(format!("{key} = {v:?}: {e}"))))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn seed(&self) -> Result<u64> {
        self.get_or("seed", 0)
    }

    pub fn switch(&self) -> Result<SourceSwitch> {
        self.get_or("source_switch", SourceSwitch::All)
    }

    pub fn horizon(&self) -> Result<Horizon> {
        self.get_or("horizon", Horizon::Stlf)
    }

    pub fn date(&self, key: &str) -> Result<Option<NaiveDate>> {
        self.raw(key)
            .map(|v| NaiveDate::parse_from_str(v, "%Y-%m-%d").map_err(|e| invalid(format!("{key} = {v:?}: {e}"))))
            .transpose()
    }

    fn alpha(&self, key: &str) -> Result<Option<Alpha>> {
        self.get::<f64>(key)?
            .map(|a| Alpha::new(a).map_err(|e| invalid(format!("{key}: {e}"))))
            .transpose()
    }

    pub fn window(&self) -> Result<WindowConfig> {
        let d = WindowConfig::default();
        Ok(WindowConfig {
            t_in: self.get_or("window.t_in", d.t_in)?,
            t_out: self.get_or("window.t_out", d.t_out)?,
            stride: self.get_or("window.stride", d.stride)?,
        })
    }

    pub fn decay(&self) -> Result<PolicyDecay> {
        let d = PolicyDecay::default();
        Ok(PolicyDecay {
            rho: self.get_or("policy.rho", d.rho)?,
            horizon_days: self.get_or("policy.horizon_days", d.horizon_days)?,
            min_factor: self.get_or("policy.min_factor", d.min_factor)?,
        })
    }

    pub fn text_dim(&self) -> Result<usize> {
        self.get_or("text.dim", 16)
    }

    /// Model settings; shapes (`t_in`, `t_out`, channels, text width) come
    /// from the prepared dataset.
    pub fn model(&self, window: &WindowConfig, channels: usize, text_dim: usize) -> Result<ModelConfig> {
        let b = StanhopConfig::default();
        let l = LossConfig::default();
        let m = ModelConfig::default();
        let backbone = StanhopConfig {
            d_model: self.get_or("model.d_model", b.d_model)?,
            d_ff: self.get_or("model.d_ff", b.d_ff)?,
            n_heads: self.get_or("model.n_heads", b.n_heads)?,
            e_layers: self.get_or("model.e_layers", b.e_layers)?,
            dropout: self.get_or("model.dropout", b.dropout)?,
            seg_len: self.get_or("model.seg_len", b.seg_len)?,
            pool_k: self.get_or("model.pool_k", b.pool_k)?,
            coarsen_stride: self.get_or("model.coarsen_stride", b.coarsen_stride)?,
            beta: self.get("model.beta")?,
            alpha: self.alpha("model.alpha")?.unwrap_or(b.alpha),
        };
        let quantiles = match self.raw("loss.quantiles") {
            Some(v) => v
                .split(',')
                .map(|q| q.trim().parse::<f64>().map_err(|e| invalid(format!("loss.quantiles: {e}"))))
                .collect::<Result<Vec<_>>>()?,
            None => l.quantiles,
        };
        let cfg = ModelConfig {
            backbone,
            t_in: window.t_in,
            t_out: window.t_out,
            channels,
            text_dim,
            switch: self.switch()?,
            retrieval_beta: self.get("model.retrieval_beta")?,
            alpha: self.alpha("model.fusion_alpha")?.unwrap_or(m.alpha),
            loss: LossConfig {
                lambda_tau: self.get_or("loss.lambda_tau", l.lambda_tau)?,
                lambda_gamma: self.get_or("loss.lambda_gamma", l.lambda_gamma)?,
                entropy_bonus: self.get_or("loss.entropy_bonus", l.entropy_bonus)?,
                quantiles,
            },
        };
        cfg.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn train(&self) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            lr: self.get_or("train.lr", d.lr)?,
            batch_size: self.get_or("train.batch_size", d.batch_size)?,
            epochs: self.get_or("train.epochs", d.epochs)?,
            clip_threshold: self.get_or("train.clip", d.clip_threshold)?,
            seed: self.seed()?,
            ..d
        };
        cfg.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn synth(&self) -> Result<SynthConfig> {
        let d = SynthConfig::default();
        Ok(SynthConfig {
            days: self.get_or("synth.days", d.days)?,
            event_days: self.get_or("synth.event_days", d.event_days)?,
            seed: self.seed()?,
            region: self.get_or("synth.region", d.region)?,
            start: self.date("synth.start")?.unwrap_or(d.start),
            embed_dim: self.get_or("synth.embed_dim", d.embed_dim)?,
            sparse: self.get_or("synth.sparse", d.sparse)?,
            base_load: self.get_or("synth.base_load", d.base_load)?,
            seasonal: self.get_or("synth.seasonal", d.seasonal)?,
            shock: self.get_or("synth.shock", d.shock)?,
            noise: self.get_or("synth.noise", d.noise)?,
        })
    }
}
