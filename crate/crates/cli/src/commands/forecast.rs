use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::NaiveDate;
use graft_core::training::{rolling_forecast, ForecastTask};
use serde::{Deserialize, Serialize};

use super::train::{open_model, prepared_inputs, CHECKPOINT, MODEL};
use super::Ctx;
use crate::config::invalid;
use crate::prepared::{read_json, write_json, PreparedDir};
use crate::rundir;

pub const FORECASTS: &str = "forecasts.csv";
pub const INFO: &str = "forecast.json";

#[derive(Debug, Serialize, Deserialize)]
pub struct ForecastInfo {
    /// Source switch code of the model, used as the default source name.
    pub source: String,
    pub horizon: String,
    pub split: String,
}

pub fn run(ctx: &Ctx, data: &Path, run: &Path, split: &str) -> Result<PathBuf> {
    let p = PreparedDir::open(data)?;
    let (model, store) = open_model(run, &p)?;
    let horizon = ctx.settings.horizon()?;
    let tasks = rolling_forecast(&store, &model, &p.prepared.stats, p.split(split)?, horizon)?;
    if tasks.is_empty() {
        return Err(invalid(format!("no {split} windows to forecast")));
    }

    let dir = rundir::create(&ctx.out, "forecast")?;
    write_forecasts(&dir.join(FORECASTS), &tasks)?;
    let info = ForecastInfo { source: model.switch.code().to_string(), horizon: horizon.name(), split: split.into() };
    write_json(&dir.join(INFO), &info)?;
    let mut inputs = prepared_inputs(data);
    inputs.extend([run.join(MODEL), run.join(CHECKPOINT)]);
    rundir::write_manifest(&dir, "forecast", &inputs, &[FORECASTS, INFO], serde_json::to_value(&info)?)?;
    log::info!("{} {} tasks", tasks.len(), info.horizon);
    Ok(dir)
}

pub fn write_forecasts(path: &Path, tasks: &[ForecastTask]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["region", "start", "step", "prediction", "actual"])?;
    for t in tasks {
        for (i, (p, a)) in t.predictions.iter().zip(&t.actuals).enumerate() {
            w.write_record([t.region.clone(), t.start.to_string(), (i + 1).to_string(), p.to_string(), a.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_forecasts(path: &Path) -> Result<Vec<ForecastTask>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["region", "start", "step", "prediction", "actual"] {
        return Err(invalid(format!("{}:1: expected header region,start,step,prediction,actual", path.display())));
    }
    let mut tasks: BTreeMap<(String, NaiveDate), ForecastTask> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| invalid(format!("{}:{}: bad {what}", path.display(), i + 2));
        let start = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d").map_err(|_| bad("start date"))?;
        let step: usize = rec[2].parse().map_err(|_| bad("step"))?;
        let pred: f64 = rec[3].parse().map_err(|_| bad("prediction"))?;
        let actual: f64 = rec[4].parse().map_err(|_| bad("actual"))?;
        let t = tasks.entry((rec[0].to_string(), start)).or_insert_with(|| ForecastTask {
            region: rec[0].to_string(),
            start,
            predictions: Vec::new(),
            actuals: Vec::new(),
        });
        if step != t.predictions.len() + 1 {
            return Err(bad("step order"));
        }
        t.predictions.push(pred);
        t.actuals.push(actual);
    }
    Ok(tasks.into_values().collect())
}

/// Forecasts plus metadata from a forecast run directory or a bare CSV.
pub fn open(path: &Path) -> Result<(Vec<ForecastTask>, Option<ForecastInfo>)> {
    if path.is_dir() {
        let info = Some(path.join(INFO)).filter(|p| p.exists()).map(|p| read_json(&p)).transpose()?;
        Ok((read_forecasts(&path.join(FORECASTS))?, info))
    } else {
        Ok((read_forecasts(path)?, None))
    }
}
