//! Mini-batch training with Adam, global-norm clipping and NaN-guard batch
//! skipping, plus rolling day-ahead forecasting over a test period.

use std::collections::BTreeMap;
use std::time::Instant;

use chrono::NaiveDate;
use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{DayText, NormStats, WindowSample, SLOTS_PER_DAY};
use crate::error::{GraftError, Result};
use crate::model::{forward, loss, predict, sample_tensors, FusionDiagnostics, ModelConfig};
use crate::numerics::{adam_step, clip_global_norm, AdamConfig, Ctx, GradMap, ParamStore, Tape, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub clip_threshold: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch_size: 32,
            epochs: 20,
            clip_threshold: 1.0,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(GraftError::Config(format!("lr {} must be positive", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(GraftError::Config("batch_size must be ≥ 1".into()));
        }
        if self.epochs == 0 {
            return Err(GraftError::Config("epochs must be ≥ 1".into()));
        }
        if !(self.clip_threshold > 0.0) {
            return Err(GraftError::Config("clip threshold must be positive".into()));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }
}

/// One normalized training example.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub input: Tensor,
    pub target: Tensor,
    pub text: Vec<DayText>,
}

pub fn examples(stats: &NormStats, samples: &[WindowSample]) -> Result<Vec<Example>> {
    samples
        .iter()
        .map(|s| {
            let (input, target) = sample_tensors(stats, s)?;
            Ok(Example {
                input,
                target,
                text: s.text.clone(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean composite loss over applied batches.
    pub mean_loss: f64,
    /// Mean training MSE over applied batches.
    pub mean_mse: f64,
    pub batches: usize,
    pub skipped_batches: usize,
    /// Mean pre-clip gradient norm.
    pub mean_grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub epochs: Vec<EpochLog>,
    pub skipped_batches: usize,
    pub wall_time_secs: f64,
    /// SHA-256 of the JSON-serialized model and training configs.
    pub config_digest: String,
}

impl RunLog {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }
}

pub fn config_digest(model: &ModelConfig, train: &TrainConfig) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(model)?);
    h.update(serde_json::to_vec(train)?);
    Ok(hex::encode(h.finalize()))
}

fn mix_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((epoch as u64).to_le_bytes());
    h.update((index as u64).to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

struct SampleResult {
    loss: f64,
    mse: f64,
    grads: GradMap,
    finite: bool,
}

fn run_sample(store: &ParamStore, cfg: &ModelConfig, ex: &Example, seed: u64) -> Result<SampleResult> {
    let tape = Tape::new();
    let ctx = Ctx::train(&tape, store, cfg.backbone.dropout, seed);
    let out = forward(&ctx, cfg, &ex.input, &ex.text, None)?;
    let total = loss(out.prediction, &ex.target, &out.gates, &cfg.loss);
    let loss_v = total.value().data()[0];
    let mse = out.prediction.mse(&ex.target).value().data()[0];
    let grads = total.backward().params();
    let finite = loss_v.is_finite() && !out.diagnostics.nan && grads.values().all(Tensor::is_finite);
    Ok(SampleResult {
        loss: loss_v,
        mse,
        grads,
        finite,
    })
}

/// Trains `store` in place. The result is bit-reproducible for a fixed
/// config and seed regardless of thread count.
pub fn train(
    data: &[Example],
    store: &mut ParamStore,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    mut on_epoch: Option<&mut dyn FnMut(usize, &ParamStore) -> Result<()>>,
) -> Result<RunLog> {
    cfg.validate()?;
    model_cfg.validate()?;
    if data.is_empty() {
        return Err(GraftError::Training("empty training split".into()));
    }
    let started = Instant::now();
    let adam = cfg.adam();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut skipped_total = 0;
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, epoch, usize::MAX));
        order.shuffle(&mut rng);
        let (mut loss_sum, mut mse_sum, mut norm_sum) = (0.0, 0.0, 0.0);
        let (mut applied, mut skipped) = (0usize, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let snapshot: &ParamStore = store;
            let results: Vec<SampleResult> = batch
                .par_iter()
                .map(|&i| run_sample(snapshot, model_cfg, &data[i], mix_seed(cfg.seed, epoch, i)))
                .collect::<Result<_>>()?;
            if results.iter().any(|r| !r.finite) {
                warn!("epoch {epoch}: non-finite loss or gradient, batch skipped");
                skipped += 1;
                continue;
            }
            let n = results.len() as f64;
            let mut grads: GradMap = BTreeMap::new();
            for r in &results {
                for (name, g) in &r.grads {
                    match grads.get_mut(name) {
                        Some(acc) => acc.accumulate(g),
                        None => {
                            grads.insert(name.clone(), g.clone());
                        }
                    }
                }
            }
            for g in grads.values_mut() {
                *g = g.scale(1.0 / n);
            }
            norm_sum += clip_global_norm(&mut grads, cfg.clip_threshold)?;
            adam_step(store, &grads, &adam)?;
            loss_sum += results.iter().map(|r| r.loss).sum::<f64>() / n;
            mse_sum += results.iter().map(|r| r.mse).sum::<f64>() / n;
            applied += 1;
        }
        if applied == 0 {
            return Err(GraftError::Training(format!(
                "every batch in epoch {epoch} produced non-finite values ({skipped} skipped)"
            )));
        }
        let log = EpochLog {
            epoch,
            mean_loss: loss_sum / applied as f64,
            mean_mse: mse_sum / applied as f64,
            batches: applied + skipped,
            skipped_batches: skipped,
            mean_grad_norm: norm_sum / applied as f64,
        };
        info!(
            "epoch {epoch}: loss {:.6} mse {:.6} skipped {skipped}",
            log.mean_loss, log.mean_mse
        );
        skipped_total += skipped;
        epochs.push(log);
        if let Some(cb) = on_epoch.as_deref_mut() {
            cb(epoch, store)?;
        }
    }
    Ok(RunLog {
        epochs,
        skipped_batches: skipped_total,
        wall_time_secs: started.elapsed().as_secs_f64(),
        config_digest: config_digest(model_cfg, cfg)?,
    })
}

/// Evaluation window length in half-hour points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Horizon {
    /// 16 points (8 hours).
    Vstlf,
    /// 48 points (one day).
    Stlf,
    /// 2880 points (60 days).
    Mtlf,
    Custom(usize),
}

impl Horizon {
    pub fn points(self) -> usize {
        match self {
            Horizon::Vstlf => 16,
            Horizon::Stlf => 48,
            Horizon::Mtlf => 2880,
            Horizon::Custom(w) => w,
        }
    }

    pub fn name(self) -> String {
        match self {
            Horizon::Vstlf => "vstlf".into(),
            Horizon::Stlf => "stlf".into(),
            Horizon::Mtlf => "mtlf".into(),
            Horizon::Custom(w) => format!("w{w}"),
        }
    }

    /// Calendar days spanned by one task.
    pub fn days(self) -> usize {
        self.points().div_ceil(SLOTS_PER_DAY)
    }
}

impl std::str::FromStr for Horizon {
    type Err = GraftError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vstlf" => Ok(Horizon::Vstlf),
            "stlf" => Ok(Horizon::Stlf),
            "mtlf" => Ok(Horizon::Mtlf),
            other => other
                .strip_prefix('w')
                .and_then(|w| w.parse().ok())
                .filter(|&w| w > 0)
                .map(Horizon::Custom)
                .ok_or_else(|| GraftError::Config(format!("unknown horizon {s:?}"))),
        }
    }
}

/// One evaluation window `Ω`: predictions and actuals in MW.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastTask {
    pub region: String,
    /// First forecast day.
    pub start: NaiveDate,
    pub predictions: Vec<f64>,
    pub actuals: Vec<f64>,
}

/// Day-ahead prediction for every sample, de-normalized, with diagnostics.
pub fn predict_samples(
    store: &ParamStore,
    cfg: &ModelConfig,
    stats: &NormStats,
    samples: &[WindowSample],
) -> Result<Vec<(Vec<f64>, FusionDiagnostics)>> {
    samples
        .par_iter()
        .map(|s| {
            let (input, _) = sample_tensors(stats, s)?;
            let (pred, diag) = predict(store, cfg, &input, &s.text, None)?;
            Ok((stats.denormalize(&s.region, &pred)?, diag))
        })
        .collect()
}

/// Chains day-ahead forecasts on observed inputs into tasks of
/// `horizon.points()` values. Task `i` starts on the first target day of
/// `samples` plus `i · horizon.days()`; each day `D` is predicted by the
/// window anchored on `D − 1`. A task that runs out of windows is truncated
/// with a warning.
pub fn rolling_forecast(
    store: &ParamStore,
    cfg: &ModelConfig,
    stats: &NormStats,
    samples: &[WindowSample],
    horizon: Horizon,
) -> Result<Vec<ForecastTask>> {
    let preds = predict_samples(store, cfg, stats, samples)?;
    let mut by_day: BTreeMap<(String, NaiveDate), (&[f64], &[f64])> = BTreeMap::new();
    for (s, (p, _)) in samples.iter().zip(&preds) {
        let day = s.anchor + chrono::Days::new(1);
        by_day.insert(
            (s.region.clone(), day),
            (&p[..SLOTS_PER_DAY.min(p.len())], &s.target[..SLOTS_PER_DAY.min(s.target.len())]),
        );
    }
    let mut regions: BTreeMap<&str, (NaiveDate, NaiveDate)> = BTreeMap::new();
    for (r, d) in by_day.keys() {
        let e = regions.entry(r).or_insert((*d, *d));
        e.0 = e.0.min(*d);
        e.1 = e.1.max(*d);
    }
    let w = horizon.points();
    let mut tasks = Vec::new();
    for (region, (first, last)) in regions {
        let mut start = first;
        while start <= last {
            let mut task = ForecastTask {
                region: region.to_string(),
                start,
                predictions: Vec::with_capacity(w),
                actuals: Vec::with_capacity(w),
            };
            let mut day = start;
            while task.predictions.len() < w {
                let Some((p, a)) = by_day.get(&(region.to_string(), day)) else {
                    break;
                };
                let take = (w - task.predictions.len()).min(p.len());
                task.predictions.extend_from_slice(&p[..take]);
                task.actuals.extend_from_slice(&a[..take]);
                day = day + chrono::Days::new(1);
            }
            if task.predictions.is_empty() {
                start = start + chrono::Days::new(1);
                continue;
            }
            if task.predictions.len() < w {
                warn!(
                    "{region} {start}: {} {} points available, truncated from {w}",
                    horizon.name(),
                    task.predictions.len()
                );
            }
            tasks.push(task);
            start = start + chrono::Days::new(horizon.days() as u64);
        }
    }
    Ok(tasks)
}
