use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::window::WindowSample;
use crate::error::{GraftError, Result};

/// `train = (−∞, train_end]`, `val = (train_end, val_end]`, `test = (val_end, ∞)`,
/// applied to each sample's anchor date.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitBoundaries {
    pub train_end: NaiveDate,
    pub val_end: NaiveDate,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<WindowSample>,
    pub val: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
}

pub fn split_by_forecast_end(samples: Vec<WindowSample>, b: &SplitBoundaries) -> Result<Splits> {
    if b.train_end >= b.val_end {
        return Err(GraftError::Config(format!(
            "split boundaries overlap: train ends {}, val ends {}",
            b.train_end, b.val_end
        )));
    }
    let mut out = Splits::default();
    for s in samples {
        if s.anchor <= b.train_end {
            out.train.push(s);
        } else if s.anchor <= b.val_end {
            out.val.push(s);
        } else {
            out.test.push(s);
        }
    }
    Ok(out)
}

/// Mean and standard deviation of one series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub mean: f64,
    pub std: f64,
}

impl ZScore {
    fn fit<'a>(values: impl Iterator<Item = &'a f64>) -> Self {
        let (mut n, mut sum, mut sq) = (0usize, 0.0, 0.0);
        for &v in values {
            n += 1;
            sum += v;
            sq += v * v;
        }
        if n == 0 {
            return Self { mean: 0.0, std: 1.0 };
        }
        let mean = sum / n as f64;
        let var = (sq / n as f64 - mean * mean).max(0.0);
        let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        Self { mean, std }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

/// Per-region normalization fitted on the training split only.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub load: BTreeMap<String, ZScore>,
    pub covariates: BTreeMap<String, Vec<ZScore>>,
}

/// Load statistics come from training targets, covariate statistics from
/// training inputs.
pub fn fit_norm(train: &[WindowSample]) -> NormStats {
    let mut by_region: BTreeMap<&str, Vec<&WindowSample>> = BTreeMap::new();
    for s in train {
        by_region.entry(&s.region).or_default().push(s);
    }
    let mut stats = NormStats::default();
    for (region, samples) in by_region {
        stats.load.insert(
            region.to_string(),
            ZScore::fit(samples.iter().flat_map(|s| s.target.iter())),
        );
        let n_cov = samples[0].covariates.len();
        let cov = (0..n_cov)
            .map(|k| ZScore::fit(samples.iter().flat_map(|s| s.covariates[k].iter())))
            .collect();
        stats.covariates.insert(region.to_string(), cov);
    }
    stats
}

impl NormStats {
    pub fn load_for(&self, region: &str) -> Result<ZScore> {
        self.load
            .get(region)
            .copied()
            .ok_or_else(|| GraftError::Input(format!("no normalization statistics for region {region}")))
    }

    /// Input channels `[load, covariates…]`, each z-scored.
    pub fn input_channels(&self, s: &WindowSample) -> Result<Vec<Vec<f64>>> {
        let z = self.load_for(&s.region)?;
        let mut ch = vec![s.input.iter().map(|&v| z.apply(v)).collect::<Vec<_>>()];
        let cov = self.covariates.get(&s.region).map_or(&[][..], Vec::as_slice);
        if cov.len() != s.covariates.len() {
            return Err(GraftError::Dimension(format!(
                "sample has {} covariates, statistics cover {}",
                s.covariates.len(),
                cov.len()
            )));
        }
        for (series, zc) in s.covariates.iter().zip(cov) {
            ch.push(series.iter().map(|&v| zc.apply(v)).collect());
        }
        Ok(ch)
    }

    pub fn target(&self, s: &WindowSample) -> Result<Vec<f64>> {
        let z = self.load_for(&s.region)?;
        Ok(s.target.iter().map(|&v| z.apply(v)).collect())
    }

    pub fn denormalize(&self, region: &str, values: &[f64]) -> Result<Vec<f64>> {
        let z = self.load_for(region)?;
        Ok(values.iter().map(|&v| z.invert(v)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(anchor: NaiveDate, target: f64) -> WindowSample {
        WindowSample {
            region: "SA".into(),
            anchor,
            input: vec![target - 1.0; 48],
            target: vec![target; 48],
            covariates: vec![],
            text: vec![],
        }
    }

    fn d(m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, m, day).unwrap()
    }

    #[test]
    fn boundary_dates_go_to_earlier_split() {
        let b = SplitBoundaries { train_end: d(9, 30), val_end: d(12, 31) };
        let s = split_by_forecast_end(
            vec![sample(d(9, 30), 1.0), sample(d(10, 1), 2.0), sample(d(12, 31), 3.0)],
            &b,
        )
        .unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (1, 2, 0));
        let bad = SplitBoundaries { train_end: d(12, 31), val_end: d(9, 30) };
        assert!(split_by_forecast_end(vec![], &bad).is_err());
    }

    #[test]
    fn norm_uses_training_targets_only() {
        let train = vec![sample(d(1, 1), 10.0), sample(d(1, 2), 20.0)];
        let stats = fit_norm(&train);
        let z = stats.load_for("SA").unwrap();
        assert_eq!(z.mean, 15.0);
        assert_eq!(z.std, 5.0);
        let back = stats.denormalize("SA", &stats.target(&train[1]).unwrap()).unwrap();
        assert_eq!(back, vec![20.0; 48]);
    }
}
