use chrono::{Datelike, NaiveDate};
use log::warn;
use serde::{Deserialize, Serialize};

use super::metrics::rmse;
use super::protocol::EvalTask;
use crate::data::{LoadPanel, SLOTS_PER_DAY};
use crate::error::{GraftError, Result};

/// Windows up to this many points use persistence; longer ones use the
/// seasonal profile.
pub const PERSISTENCE_MAX_WINDOW: usize = 12;

/// Mean load per (weekday, half-hour slot), fitted on training history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonalProfile {
    /// `7 × 48`, Monday first; `None` where no history exists.
    pub means: Vec<Option<f64>>,
    pub global_mean: f64,
}

impl SeasonalProfile {
    /// Uses days `≤ until` only.
    pub fn fit(panel: &LoadPanel, until: NaiveDate) -> Result<Self> {
        let mut sum = vec![0.0; 7 * SLOTS_PER_DAY];
        let mut count = vec![0usize; 7 * SLOTS_PER_DAY];
        for (day, vals) in panel.days.iter().zip(&panel.values) {
            if *day > until {
                break;
            }
            let dow = day.weekday().num_days_from_monday() as usize;
            for (s, v) in vals.iter().enumerate() {
                sum[dow * SLOTS_PER_DAY + s] += v;
                count[dow * SLOTS_PER_DAY + s] += 1;
            }
        }
        let total: usize = count.iter().sum();
        if total == 0 {
            return Err(GraftError::Protocol(format!("no history on or before {until}")));
        }
        Ok(Self {
            means: sum
                .iter()
                .zip(&count)
                .map(|(s, &c)| (c > 0).then(|| s / c as f64))
                .collect(),
            global_mean: sum.iter().sum::<f64>() / total as f64,
        })
    }

    pub fn at(&self, day: NaiveDate, slot: usize) -> f64 {
        let dow = day.weekday().num_days_from_monday() as usize;
        match self.means[dow * SLOTS_PER_DAY + slot] {
            Some(m) => m,
            None => {
                warn!("no history for weekday {dow} slot {slot}; using the global mean");
                self.global_mean
            }
        }
    }
}

/// Baseline series for `task` and its RMSE: persistence
/// `ŷ_t = y_{t−1}` when `W ≤ 12`, else the seasonal profile.
pub fn stat_baseline(task: &EvalTask, profile: &SeasonalProfile) -> Result<(Vec<f64>, f64)> {
    let w = task.truth.len();
    let series = if w <= PERSISTENCE_MAX_WINDOW {
        let prev = task.previous.ok_or_else(|| {
            GraftError::Protocol(format!("task {} lacks the observation preceding its window", task.id))
        })?;
        std::iter::once(prev).chain(task.truth[..w - 1].iter().copied()).collect()
    } else {
        (0..w)
            .map(|t| {
                let (day, slot) = task.position(t);
                profile.at(day, slot)
            })
            .collect::<Vec<_>>()
    };
    let r = rmse(&task.truth, &series)?;
    Ok((series, r))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn d(k: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 3, 1).unwrap() + chrono::Days::new(k)
    }

    fn task(truth: Vec<f64>, previous: Option<f64>) -> EvalTask {
        EvalTask {
            id: "t".into(),
            region: "R".into(),
            horizon: "h".into(),
            start: d(14),
            start_slot: 0,
            truth,
            previous,
            predictions: BTreeMap::new(),
        }
    }

    #[test]
    fn persistence_on_constant_series() {
        let p = SeasonalProfile { means: vec![Some(5.0); 336], global_mean: 5.0 };
        let (_, r) = stat_baseline(&task(vec![5.0; 16], None), &p).unwrap();
        assert_eq!(r, 0.0);
        let (_, r) = stat_baseline(&task(vec![5.0; 13], Some(0.0)), &p).unwrap();
        assert_eq!(r, 0.0, "W > 12 ignores the previous observation");
        let (s, r) = stat_baseline(&task(vec![5.0; 12], Some(5.0)), &p).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(s, vec![5.0; 12]);
        let (s, _) = stat_baseline(&task(vec![1.0, 2.0, 3.0], Some(0.0)), &p).unwrap();
        assert_eq!(s, vec![0.0, 1.0, 2.0]);
        assert!(stat_baseline(&task(vec![1.0], None), &p).is_err());
    }

    #[test]
    fn seasonal_naive_reproduces_profile_days() {
        let days: Vec<NaiveDate> = (0..14).map(d).collect();
        let vals: Vec<[f64; 48]> = days
            .iter()
            .map(|x| std::array::from_fn(|s| 100.0 * x.weekday().num_days_from_monday() as f64 + s as f64))
            .collect();
        let panel = LoadPanel::new("R", days, vals).unwrap();
        let p = SeasonalProfile::fit(&panel, d(13)).unwrap();
        let truth: Vec<f64> = (0..48).map(|s| 100.0 * d(14).weekday().num_days_from_monday() as f64 + s as f64).collect();
        let (_, r) = stat_baseline(&task(truth, None), &p).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn missing_cells_fall_back_to_global_mean() {
        let panel = LoadPanel::new("R", vec![d(0)], vec![[2.0; 48]]).unwrap();
        let p = SeasonalProfile::fit(&panel, d(0)).unwrap();
        assert_eq!(p.at(d(1), 3), 2.0);
        assert!(SeasonalProfile::fit(&panel, d(0) - chrono::Days::new(1)).is_err());
    }
}
