use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::data::{Source, SLOTS_PER_DAY};
use crate::error::Result;
use crate::model::FusionDiagnostics;

/// Diagnostics of one forecast window with the calendar days it covers.
pub struct AttributionInput<'a> {
    pub region: &'a str,
    /// Input-window days, oldest first.
    pub days: &'a [NaiveDate],
    pub diagnostics: &'a FusionDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DailyWeights {
    pub region: String,
    pub date: NaiveDate,
    /// News, Reddit, Policy; sums to 1.
    pub weights: [f64; 3],
}

/// Retrieval weights per slot, source gates per day and the daily heatmap.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttributionTables {
    /// `(region, date, slot) → mean π per source`.
    pub pi: BTreeMap<(String, NaiveDate, usize), [f64; 3]>,
    pub gamma: BTreeMap<(String, NaiveDate), [f64; 3]>,
    pub daily: Vec<DailyWeights>,
}

#[derive(Default)]
struct Acc {
    sum: [f64; 3],
    n: usize,
}

impl Acc {
    fn add(&mut self, v: [f64; 3]) {
        for (s, x) in self.sum.iter_mut().zip(v) {
            *s += x;
        }
        self.n += 1;
    }

    fn mean(&self) -> [f64; 3] {
        self.sum.map(|s| s / self.n as f64)
    }
}

/// Averages over layers, channels and overlapping windows. Sources with
/// no memory at a position contribute weight 0 there.
pub fn export_attribution(inputs: &[AttributionInput]) -> AttributionTables {
    let mut pi: BTreeMap<(String, NaiveDate, usize), Acc> = BTreeMap::new();
    let mut gamma: BTreeMap<(String, NaiveDate), Acc> = BTreeMap::new();
    let mut daily: BTreeMap<(String, NaiveDate), Acc> = BTreeMap::new();
    for inp in inputs {
        for rec in &inp.diagnostics.pi {
            let Some(&date) = inp.days.get(rec.day) else { continue };
            let mut w = [0.0; 3];
            for (s, v) in rec.sources.iter().zip(&rec.weights) {
                w[s.index()] += v;
            }
            let key = (inp.region.to_string(), date);
            for slot in rec.slots.0..rec.slots.1 {
                let local = slot - rec.day * SLOTS_PER_DAY;
                pi.entry((key.0.clone(), date, local)).or_default().add(w);
                daily.entry(key.clone()).or_default().add(w);
            }
        }
        for rec in &inp.diagnostics.gamma {
            if let Some(&date) = inp.days.get(rec.day) {
                gamma.entry((inp.region.to_string(), date)).or_default().add(rec.gamma);
            }
        }
    }
    AttributionTables {
        pi: pi.into_iter().map(|(k, a)| (k, a.mean())).collect(),
        gamma: gamma.into_iter().map(|(k, a)| (k, a.mean())).collect(),
        daily: daily
            .into_iter()
            .map(|((region, date), a)| DailyWeights { region, date, weights: a.mean() })
            .collect(),
    }
}

impl AttributionTables {
    /// `region,date,slot,source,weight`, slots numbered 1..=48.
    pub fn write_pi_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["region", "date", "slot", "source", "weight"])?;
        for ((region, date, slot), weights) in &self.pi {
            for src in Source::ALL {
                w.write_record([
                    region.clone(),
                    date.to_string(),
                    (slot + 1).to_string(),
                    src.to_string(),
                    weights[src.index()].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_gamma_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["region", "date", "gamma_news", "gamma_reddit", "gamma_policy"])?;
        for ((region, date), g) in &self.gamma {
            w.write_record([region.clone(), date.to_string(), g[0].to_string(), g[1].to_string(), g[2].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Heatmap rows: `region,date,news,reddit,policy`.
    pub fn write_daily_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["region", "date", "news", "reddit", "policy"])?;
        for d in &self.daily {
            let [a, b, c] = d.weights;
            w.write_record([d.region.clone(), d.date.to_string(), a.to_string(), b.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
