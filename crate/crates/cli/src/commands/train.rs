use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use graft_core::model::{init_params, ModelConfig};
use graft_core::numerics::{load_checkpoint, save_checkpoint};
use graft_core::training::{examples, train};
use graft_core::ParamStore;

use super::Ctx;
use crate::config::invalid;
use crate::prepared::{self, read_json, write_json, PreparedDir};
use crate::rundir;

pub const CHECKPOINT: &str = "checkpoint.bin";
pub const MODEL: &str = "model.json";

pub fn run(ctx: &Ctx, data: &Path) -> Result<PathBuf> {
    let p = PreparedDir::open(data)?;
    let model = ctx.settings.model(&p.settings.window, p.channels(), p.settings.text_dim)?;
    let tc = ctx.settings.train()?;
    let train_set = examples(&p.prepared.stats, &p.prepared.splits.train)?;

    let mut store = init_params(&model, tc.seed)?;
    let init = store.checksums();
    let log = train(&train_set, &mut store, &model, &tc, None)?;
    let checksums = BTreeMap::from([("init", init), ("final", store.checksums())]);

    let dir = rundir::create(&ctx.out, "train")?;
    save_checkpoint(&store, &dir.join(CHECKPOINT))?;
    write_json(&dir.join(MODEL), &model)?;
    write_json(&dir.join("train.json"), &tc)?;
    write_json(&dir.join("log.json"), &log)?;
    write_json(&dir.join("checksums.json"), &checksums)?;
    let inputs = prepared_inputs(data);
    let settings = serde_json::json!({ "model": model, "train": tc, "data": data.display().to_string() });
    rundir::write_manifest(
        &dir,
        "train",
        &inputs,
        &[CHECKPOINT, MODEL, "train.json", "log.json", "checksums.json"],
        settings,
    )?;
    if let Some(last) = log.epochs.last() {
        log::info!("{} epochs, final mean loss {:.5}, {:.1}s", log.epochs.len(), last.mean_loss, log.wall_time_secs);
    }
    Ok(dir)
}

/// Files of a prepared directory that a downstream step depends on.
pub fn prepared_inputs(data: &Path) -> Vec<PathBuf> {
    [prepared::LOAD, prepared::MEMORY, prepared::COVARIATES, prepared::NORM, prepared::SETTINGS]
        .iter()
        .map(|f| data.join(f))
        .filter(|p| p.exists())
        .collect()
}

/// A trained model checked against the prepared data it will be applied to.
pub fn open_model(run: &Path, p: &PreparedDir) -> Result<(ModelConfig, ParamStore)> {
    if !run.join(MODEL).exists() {
        return Err(invalid(format!("{} is not a training run (no {MODEL})", run.display())));
    }
    let model: ModelConfig = read_json(&run.join(MODEL))?;
    let w = &p.settings.window;
    if (model.t_in, model.t_out, model.channels, model.text_dim)
        != (w.t_in, w.t_out, p.channels(), p.settings.text_dim)
    {
        return Err(invalid(format!(
            "model shapes (T_in {}, T_out {}, {} channels, text {}) do not match {}",
            model.t_in,
            model.t_out,
            model.channels,
            model.text_dim,
            p.dir.display()
        )));
    }
    let store = load_checkpoint(&run.join(CHECKPOINT))?;
    Ok((model, store))
}
