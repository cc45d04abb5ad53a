use std::path::PathBuf;

use anyhow::Result;
use graft_core::data::synth::generate;

use super::Ctx;
use crate::rundir;

const FILES: [&str; 5] = ["load.csv", "embeddings.csv", "covariates.csv", "events.csv", "synth.json"];

pub fn run(ctx: &Ctx) -> Result<PathBuf> {
    let cfg = ctx.settings.synth()?;
    let ds = generate(&cfg)?;
    let dir = rundir::create(&ctx.out, "synth")?;
    ds.write(&dir, &cfg)?;
    rundir::write_manifest(&dir, "synth", &[], &FILES, serde_json::to_value(&cfg)?)?;
    log::info!("{} days, {} event days, {} documents", ds.panel.days.len(), ds.events.len(), ds.documents.len());
    Ok(dir)
}
