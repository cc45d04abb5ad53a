use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use graft_core::evaluation::{protocol, protocol_from_rmse, read_rmse_table, ProtocolReport};
use graft_core::pipeline::eval_tasks;

use super::train::prepared_inputs;
use super::{forecast, Ctx};
use crate::config::invalid;
use crate::prepared::PreparedDir;
use crate::rundir;

pub struct Args {
    pub data: Option<PathBuf>,
    /// `NAME=PATH` or a bare forecast run directory.
    pub predictions: Vec<String>,
    pub rmse_table: Option<PathBuf>,
}

fn from_forecasts(ctx: &Ctx, data: &Path, args: &[String]) -> Result<(ProtocolReport, Vec<PathBuf>)> {
    let p = PreparedDir::open(data)?;
    let mut forecasts = BTreeMap::new();
    let mut order = Vec::new();
    let mut horizon = None;
    let mut inputs = prepared_inputs(data);
    for arg in args {
        let (name, path) = match arg.split_once('=') {
            Some((n, path)) => (Some(n.to_string()), PathBuf::from(path)),
            None => (None, PathBuf::from(arg)),
        };
        let (tasks, info) = forecast::open(&path)?;
        let name = name
            .or_else(|| info.as_ref().map(|i| i.source.clone()))
            .ok_or_else(|| invalid(format!("{arg}: name the source as NAME=PATH")))?;
        if let Some(h) = info.map(|i| i.horizon) {
            if horizon.get_or_insert_with(|| h.clone()) != &h {
                return Err(invalid(format!("{arg}: horizon {h} differs from the other sources")));
            }
        }
        if name == "stat" || forecasts.insert(name.clone(), tasks).is_some() {
            return Err(invalid(format!("source name {name:?} is reserved or repeated")));
        }
        order.push(name);
        inputs.push(if path.is_dir() { path.join(forecast::FORECASTS) } else { path });
    }
    let horizon = match horizon {
        Some(h) => h,
        None => ctx.settings.horizon()?.name(),
    };
    let tasks = eval_tasks(&forecasts, &p.dataset, &horizon)?;
    let profiles = p.dataset.seasonal_profiles(p.settings.boundaries.train_end)?;
    Ok((protocol(&tasks, &order, &profiles)?, inputs))
}

pub fn run(ctx: &Ctx, args: Args) -> Result<PathBuf> {
    let (report, inputs) = match (&args.rmse_table, &args.data) {
        (Some(table), _) if args.predictions.is_empty() => {
            (protocol_from_rmse(&read_rmse_table(table)?)?, vec![table.clone()])
        }
        (None, Some(data)) if !args.predictions.is_empty() => from_forecasts(ctx, data, &args.predictions)?,
        _ => return Err(invalid("pass either --rmse-table, or --data with one or more --predictions")),
    };
    let dir = rundir::create(&ctx.out, "eval")?;
    report.write_json(&dir.join("report.json"))?;
    report.write_csv(&dir.join("report.csv"))?;
    rundir::write_manifest(&dir, "eval", &inputs, &["report.json", "report.csv"], serde_json::Value::Null)?;
    print!("{}", std::fs::read_to_string(dir.join("report.csv"))?);
    if !report.skill_excluded.is_empty() {
        log::warn!("{} tasks with a zero baseline RMSE left out of Skill", report.skill_excluded.len());
    }
    Ok(dir)
}
