//! Desk-scale synthetic testbed: seasonal, weekly and intraday load with
//! injected events. Each event day publishes News, Reddit and Policy
//! documents near a fixed per-source topic direction. The load shock lands
//! on the following afternoon and leaves no trace in the event day's own
//! load, so only the text announces it to a forecast issued on the event day.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::covariates::{write_covariates_csv, Covariates};
use super::panel::{write_load_csv, LoadPanel, SLOTS_PER_DAY};
use super::text::{write_embeddings_csv, DocumentRecord, RegionTag, Source};
use crate::error::{GraftError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub days: usize,
    pub event_days: usize,
    pub seed: u64,
    pub region: String,
    pub start: NaiveDate,
    pub embed_dim: usize,
    /// Only event days publish documents.
    pub sparse: bool,
    pub base_load: f64,
    /// Annual cycle amplitude as a fraction of base load, temperature effect
    /// included.
    pub seasonal: f64,
    /// Peak event shock as a fraction of base load.
    pub shock: f64,
    /// Noise standard deviation as a fraction of base load.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            days: 180,
            event_days: 20,
            seed: 0,
            region: "SYN".into(),
            start: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            embed_dim: 16,
            sparse: true,
            base_load: 1000.0,
            seasonal: 0.03,
            shock: 0.3,
            noise: 0.01,
        }
    }
}

/// Days before the first possible event, leaving room for a week of inputs.
const LEAD_DAYS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub panel: LoadPanel,
    pub documents: Vec<DocumentRecord>,
    pub covariates: Covariates,
    pub events: Vec<NaiveDate>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn intraday(hour: f64) -> f64 {
    0.15 * (-(hour - 8.0).powi(2) / 4.0).exp() + 0.25 * (-(hour - 18.5).powi(2) / 6.0).exp()
        - 0.1 * (-(hour - 3.5).powi(2) / 8.0).exp()
}

/// One event day per equal stratum of the eligible range; the last day of
/// each stratum is excluded so events are never adjacent.
fn place_events(rng: &mut ChaCha8Rng, days: usize, n: usize) -> Result<Vec<usize>> {
    let eligible = days.saturating_sub(LEAD_DAYS + 1);
    if n == 0 {
        return Ok(Vec::new());
    }
    if eligible < 2 * n {
        return Err(GraftError::Config(format!(
            "{days} days leave room for at most {} events, {n} requested",
            eligible / 2
        )));
    }
    Ok((0..n)
        .map(|i| {
            let lo = LEAD_DAYS + i * eligible / n;
            let hi = LEAD_DAYS + (i + 1) * eligible / n - 1;
            rng.random_range(lo..hi)
        })
        .collect())
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthDataset> {
    if cfg.embed_dim == 0 {
        return Err(GraftError::Config("embed_dim must be ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let topics: Vec<Vec<f64>> = Source::ALL.iter().map(|_| unit(&mut rng, cfg.embed_dim)).collect();
    let event_idx = place_events(&mut rng, cfg.days, cfg.event_days)?;
    let strength: BTreeMap<usize, f64> = event_idx
        .iter()
        .map(|&e| (e, cfg.shock * rng.random_range(0.8..1.2)))
        .collect();

    let mut days = Vec::with_capacity(cfg.days);
    let mut values = Vec::with_capacity(cfg.days);
    let mut covariates = Covariates::new(vec!["temp".into()]);
    let mut documents = Vec::new();
    for k in 0..cfg.days {
        let day = cfg.start + chrono::Days::new(k as u64);
        let doy = day.ordinal0() as f64;
        let temp = 20.0 + 8.0 * (2.0 * PI * (doy - 15.0) / 365.0).cos() + 1.5 * normal(&mut rng);
        covariates.insert(&cfg.region, day, vec![temp])?;
        let weekly = if matches!(day.weekday(), Weekday::Sat | Weekday::Sun) { -0.08 } else { 0.0 };
        let seasonal = cfg.seasonal * ((2.0 * PI * doy / 365.0).cos() + 0.1 * (temp - 20.0));
        let today = strength.get(&k).copied();
        let yesterday = k.checked_sub(1).and_then(|j| strength.get(&j).copied());
        let row: [f64; SLOTS_PER_DAY] = std::array::from_fn(|slot| {
            let hour = slot as f64 / 2.0;
            let mut level = 1.0 + seasonal + weekly + intraday(hour);
            if let Some(s) = yesterday {
                level += s * (-(hour - 15.0).powi(2) / 8.0).exp();
            }
            cfg.base_load * level
        });
        let row = row.map(|v| v + cfg.noise * cfg.base_load * normal(&mut rng));
        days.push(day);
        values.push(row);

        let is_event = today.is_some();
        for (src, topic) in Source::ALL.iter().zip(&topics) {
            let emb = if is_event {
                let jitter = unit(&mut rng, cfg.embed_dim);
                topic.iter().zip(&jitter).map(|(t, j)| t + 0.2 * j).collect()
            } else if !cfg.sparse && rng.random_bool(0.5) {
                unit(&mut rng, cfg.embed_dim)
            } else {
                continue;
            };
            documents.push(DocumentRecord::new(
                *src,
                RegionTag::Region(cfg.region.clone()),
                day,
                1.0,
                emb,
            )?);
        }
    }
    Ok(SynthDataset {
        panel: LoadPanel::new(cfg.region.clone(), days, values)?,
        documents,
        covariates,
        events: event_idx.iter().map(|&e| cfg.start + chrono::Days::new(e as u64)).collect(),
    })
}

impl SynthDataset {
    /// Writes `load.csv`, `embeddings.csv`, `covariates.csv`, `events.csv`
    /// and `synth.json` into `dir`.
    pub fn write(&self, dir: &Path, cfg: &SynthConfig) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_load_csv(std::slice::from_ref(&self.panel), &dir.join("load.csv"))?;
        write_embeddings_csv(&self.documents, &dir.join("embeddings.csv"))?;
        write_covariates_csv(&self.covariates, &dir.join("covariates.csv"))?;
        let mut w = csv::Writer::from_path(dir.join("events.csv"))?;
        w.write_record(["region", "date"])?;
        for e in &self.events {
            w.write_record([self.panel.region.as_str(), &e.format("%Y-%m-%d").to_string()])?;
        }
        w.flush()?;
        std::fs::write(dir.join("synth.json"), serde_json::to_string_pretty(cfg)? + "\n")?;
        Ok(())
    }
}

/// Reads `events.csv` written by [`SynthDataset::write`].
pub fn read_events_csv(path: &Path) -> Result<Vec<(String, NaiveDate)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let d = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d").map_err(|e| GraftError::Schema {
            path: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?;
        out.push((rec[0].to_string(), d));
    }
    Ok(out)
}
