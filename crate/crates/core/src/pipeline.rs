//! Dataset assembly shared by the command line and the acceptance checks:
//! documents to memories, windows, splits, normalization, leakage audit and
//! evaluation tasks.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{
    build_memory_store, fit_norm, make_windows, split_by_forecast_end, Covariates, DocumentRecord, LoadPanel,
    MemoryStore, NormStats, PolicyDecay, SplitBoundaries, Splits, WindowConfig, WindowSample, SLOTS_PER_DAY,
};
use crate::error::{GraftError, Result};
use crate::evaluation::{EvalTask, SeasonalProfile};
use crate::training::ForecastTask;

/// Everything `prepare` needs besides the raw files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSettings {
    pub window: WindowConfig,
    pub boundaries: SplitBoundaries,
    pub text_dim: usize,
    pub decay: PolicyDecay,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub panels: Vec<LoadPanel>,
    pub memory: Option<MemoryStore>,
    pub covariates: Option<Covariates>,
}

impl Dataset {
    pub fn calendar(&self) -> BTreeMap<String, Vec<NaiveDate>> {
        self.panels.iter().map(|p| (p.region.clone(), p.days.clone())).collect()
    }

    /// Builds daily memories from `docs`; also returns quarantined documents.
    pub fn from_documents(
        panels: Vec<LoadPanel>,
        docs: &[DocumentRecord],
        covariates: Option<Covariates>,
        decay: &PolicyDecay,
        text_dim: usize,
    ) -> Result<(Self, Vec<DocumentRecord>)> {
        let mut ds = Self { panels, memory: None, covariates };
        let (store, quarantine) = build_memory_store(docs, &ds.calendar(), decay, text_dim)?;
        ds.memory = Some(store);
        Ok((ds, quarantine))
    }

    pub fn panel(&self, region: &str) -> Option<&LoadPanel> {
        self.panels.iter().find(|p| p.region == region)
    }

    /// Number of covariate channels.
    pub fn covariate_count(&self) -> usize {
        self.covariates.as_ref().map_or(0, Covariates::len)
    }

    pub fn samples(&self, window: &WindowConfig) -> Result<Vec<WindowSample>> {
        let mut out = Vec::new();
        for p in &self.panels {
            out.extend(make_windows(p, self.memory.as_ref(), self.covariates.as_ref(), window)?);
        }
        Ok(out)
    }

    /// Seasonal profiles per region from days up to `train_end`.
    pub fn seasonal_profiles(&self, train_end: NaiveDate) -> Result<BTreeMap<String, SeasonalProfile>> {
        self.panels
            .iter()
            .map(|p| Ok((p.region.clone(), SeasonalProfile::fit(p, train_end)?)))
            .collect()
    }

    /// Load at the half-hour immediately before `day`.
    pub fn previous_observation(&self, region: &str, day: NaiveDate) -> Option<f64> {
        let p = self.panel(region)?;
        let i = p.day_index(day.pred_opt()?)?;
        Some(p.values[i][SLOTS_PER_DAY - 1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub splits: Splits,
    pub stats: NormStats,
}

pub fn prepare(dataset: &Dataset, settings: &DataSettings) -> Result<Prepared> {
    let splits = split_by_forecast_end(dataset.samples(&settings.window)?, &settings.boundaries)?;
    if splits.train.is_empty() {
        return Err(GraftError::Config(format!(
            "no training windows end on or before {}",
            settings.boundaries.train_end
        )));
    }
    let stats = fit_norm(&splits.train);
    Ok(Prepared { splits, stats })
}

/// Boundaries placing `train` and `val` fractions of the calendar span
/// `[first, last]` into the first two splits.
pub fn boundaries_by_fraction(first: NaiveDate, last: NaiveDate, train: f64, val: f64) -> Result<SplitBoundaries> {
    if !(train > 0.0 && val >= 0.0 && train + val < 1.0) {
        return Err(GraftError::Config(format!("bad split fractions {train} / {val}")));
    }
    let span = (last - first).num_days() as f64;
    let at = |f: f64| first + chrono::Days::new((span * f).floor() as u64);
    let b = SplitBoundaries { train_end: at(train), val_end: at(train + val) };
    if b.train_end >= b.val_end {
        return Err(GraftError::Config(format!("calendar of {span} days too short to split")));
    }
    Ok(b)
}

/// Recomputes normalization from the training split and compares it bit for
/// bit with `stored`, then checks every sample's end date against its split.
pub fn audit_leakage(splits: &Splits, stored: &NormStats, b: &SplitBoundaries) -> Result<()> {
    if fit_norm(&splits.train) != *stored {
        return Err(GraftError::Protocol("stored normalization differs from a train-only refit".into()));
    }
    let check = |name: &str, samples: &[WindowSample], ok: &dyn Fn(NaiveDate) -> bool| {
        match samples.iter().find(|s| !ok(s.anchor)) {
            Some(s) => Err(GraftError::Protocol(format!("{name} sample {} {} crosses a split boundary", s.region, s.anchor))),
            None => Ok(()),
        }
    };
    check("train", &splits.train, &|d| d <= b.train_end)?;
    check("val", &splits.val, &|d| d > b.train_end && d <= b.val_end)?;
    check("test", &splits.test, &|d| d > b.val_end)
}

/// Joins per-source rolling forecasts into evaluation tasks. Every source
/// must cover the same windows with the same actuals.
pub fn eval_tasks(
    forecasts: &BTreeMap<String, Vec<ForecastTask>>,
    dataset: &Dataset,
    horizon: &str,
) -> Result<Vec<EvalTask>> {
    let mut tasks: BTreeMap<(String, NaiveDate), EvalTask> = BTreeMap::new();
    for (src, list) in forecasts {
        for f in list {
            let task = tasks.entry((f.region.clone(), f.start)).or_insert_with(|| EvalTask {
                id: format!("{}:{}:{horizon}", f.region, f.start),
                region: f.region.clone(),
                horizon: horizon.to_string(),
                start: f.start,
                start_slot: 0,
                truth: f.actuals.clone(),
                previous: dataset.previous_observation(&f.region, f.start),
                predictions: BTreeMap::new(),
            });
            if task.truth != f.actuals {
                return Err(GraftError::Protocol(format!("source {src} disagrees on actuals for task {}", task.id)));
            }
            task.predictions.insert(src.clone(), f.predictions.clone());
        }
    }
    for t in tasks.values() {
        if t.predictions.len() != forecasts.len() {
            return Err(GraftError::Protocol(format!("task {} is missing from some sources", t.id)));
        }
    }
    Ok(tasks.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{generate, SynthConfig};

    fn synth() -> (Dataset, DataSettings) {
        let cfg = SynthConfig { days: 40, event_days: 4, ..SynthConfig::default() };
        let ds = generate(&cfg).unwrap();
        let first = ds.panel.days[0];
        let last = *ds.panel.days.last().unwrap();
        let settings = DataSettings {
            window: WindowConfig::default(),
            boundaries: boundaries_by_fraction(first, last, 0.6, 0.2).unwrap(),
            text_dim: cfg.embed_dim,
            decay: PolicyDecay::default(),
        };
        let (data, q) =
            Dataset::from_documents(vec![ds.panel], &ds.documents, Some(ds.covariates), &settings.decay, 16).unwrap();
        assert!(q.is_empty());
        (data, settings)
    }

    #[test]
    fn prepare_passes_the_audit() {
        let (data, settings) = synth();
        let p = prepare(&data, &settings).unwrap();
        assert_eq!(p.splits.train.len() + p.splits.val.len() + p.splits.test.len(), 40 - 8 + 1);
        audit_leakage(&p.splits, &p.stats, &settings.boundaries).unwrap();

        let mut tampered = p.stats.clone();
        tampered.load.values_mut().next().unwrap().mean += 1e-9;
        assert!(audit_leakage(&p.splits, &tampered, &settings.boundaries).is_err());
        let mut moved = p.splits.clone();
        moved.train.push(moved.test[0].clone());
        assert!(audit_leakage(&moved, &fit_norm(&moved.train), &settings.boundaries).is_err());
    }

    #[test]
    fn fraction_boundaries() {
        let d = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let b = boundaries_by_fraction(d, d + chrono::Days::new(100), 0.6, 0.2).unwrap();
        assert_eq!((b.train_end - d).num_days(), 60);
        assert_eq!((b.val_end - d).num_days(), 80);
        assert!(boundaries_by_fraction(d, d + chrono::Days::new(2), 0.5, 0.1).is_err());
        assert!(boundaries_by_fraction(d, d, 0.9, 0.2).is_err());
    }

    #[test]
    fn tasks_join_sources() {
        let (data, _) = synth();
        let start = data.panels[0].days[10];
        let f = |p: f64| ForecastTask { region: "SYN".into(), start, predictions: vec![p; 48], actuals: vec![1.0; 48] };
        let mut m = BTreeMap::from([("a".to_string(), vec![f(1.0)]), ("b".to_string(), vec![f(2.0)])]);
        let t = eval_tasks(&m, &data, "stlf").unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].previous, Some(data.panels[0].values[9][47]));
        m.get_mut("b").unwrap()[0].actuals[0] = 0.0;
        assert!(eval_tasks(&m, &data, "stlf").is_err());
    }
}
