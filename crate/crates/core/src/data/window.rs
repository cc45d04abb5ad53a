use chrono::NaiveDate;
use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::covariates::Covariates;
use super::panel::{LoadPanel, SLOTS_PER_DAY};
use super::text::{DailyEntry, MemoryStore, Source};
use crate::error::{GraftError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    /// Input length in half-hour steps.
    pub t_in: usize,
    /// Forecast length in half-hour steps.
    pub t_out: usize,
    /// Step between consecutive window starts, in half-hour steps.
    pub stride: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            t_in: 336,
            t_out: 48,
            stride: 48,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("T_in", self.t_in), ("T_out", self.t_out), ("stride", self.stride)] {
            if v == 0 || v % SLOTS_PER_DAY != 0 {
                return Err(GraftError::Config(format!("{name} = {v} must be a positive multiple of 48")));
            }
        }
        Ok(())
    }

    pub fn input_days(&self) -> usize {
        self.t_in / SLOTS_PER_DAY
    }

    pub fn output_days(&self) -> usize {
        self.t_out / SLOTS_PER_DAY
    }
}

/// Text memories of one input day, indexed by [`Source::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct DayText {
    pub day: NaiveDate,
    pub sources: [DailyEntry; 3],
}

impl DayText {
    pub fn entry(&self, source: Source) -> &DailyEntry {
        &self.sources[source.index()]
    }

    pub fn any_mask(&self) -> bool {
        self.sources.iter().any(|e| e.mask)
    }
}

/// One supervised window. `anchor` is the last input day.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    pub region: String,
    pub anchor: NaiveDate,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    /// One `T_in` series per covariate, each daily value repeated 48 times.
    pub covariates: Vec<Vec<f64>>,
    /// `L` entries, oldest first.
    pub text: Vec<DayText>,
}

impl WindowSample {
    pub fn target_days(&self) -> Vec<NaiveDate> {
        (1..=(self.target.len() / SLOTS_PER_DAY) as u64)
            .map(|k| self.anchor + chrono::Days::new(k))
            .collect()
    }
}

/// Slides over `panel`, emitting every window whose input and target days
/// are consecutive calendar days. Windows needing a missing covariate row
/// are skipped.
pub fn make_windows(
    panel: &LoadPanel,
    memories: Option<&MemoryStore>,
    covariates: Option<&Covariates>,
    cfg: &WindowConfig,
) -> Result<Vec<WindowSample>> {
    cfg.validate()?;
    let (l, h) = (cfg.input_days(), cfg.output_days());
    let span = l + h;
    let step = cfg.stride / SLOTS_PER_DAY;
    if panel.len() < span {
        warn!("{}: {} days is shorter than one window of {span} days", panel.region, panel.len());
        return Ok(Vec::new());
    }
    let dim = memories.map_or(0, MemoryStore::dim);
    let mut out = Vec::new();
    'start: for s in (0..=panel.len() - span).step_by(step) {
        if !panel.is_contiguous(s, span) {
            continue;
        }
        let input: Vec<f64> = panel.values[s..s + l].iter().flatten().copied().collect();
        let target: Vec<f64> = panel.values[s + l..s + span].iter().flatten().copied().collect();
        let days = &panel.days[s..s + l];

        let mut cov_series = vec![Vec::with_capacity(cfg.t_in); covariates.map_or(0, Covariates::len)];
        if let Some(cov) = covariates {
            for &d in days {
                let Some(row) = cov.get(&panel.region, d) else {
                    debug!("{} {d}: missing covariates, window skipped", panel.region);
                    continue 'start;
                };
                for (series, &v) in cov_series.iter_mut().zip(row) {
                    series.extend(std::iter::repeat_n(v, SLOTS_PER_DAY));
                }
            }
        }

        let text = days
            .iter()
            .map(|&d| DayText {
                day: d,
                sources: Source::ALL.map(|src| {
                    memories
                        .and_then(|m| m.get(src, &panel.region, d))
                        .cloned()
                        .unwrap_or_else(|| DailyEntry::empty(dim))
                }),
            })
            .collect();
        out.push(WindowSample {
            region: panel.region.clone(),
            anchor: days[l - 1],
            input,
            target,
            covariates: cov_series,
            text,
        });
    }
    Ok(out)
}
