use std::path::{Path, PathBuf};

use anyhow::Result;
use chrono::NaiveDate;
use graft_core::evaluation::{export_attribution, AttributionInput};
use graft_core::training::predict_samples;

use super::train::{open_model, prepared_inputs, CHECKPOINT, MODEL};
use super::Ctx;
use crate::prepared::PreparedDir;
use crate::rundir;

pub fn run(ctx: &Ctx, data: &Path, run: &Path, split: &str) -> Result<PathBuf> {
    let p = PreparedDir::open(data)?;
    let (model, store) = open_model(run, &p)?;
    let samples = p.split(split)?;
    let preds = predict_samples(&store, &model, &p.prepared.stats, samples)?;
    let days: Vec<Vec<NaiveDate>> = samples.iter().map(|s| s.text.iter().map(|t| t.day).collect()).collect();
    let inputs: Vec<AttributionInput> = samples
        .iter()
        .zip(&preds)
        .zip(&days)
        .map(|((s, (_, diag)), d)| AttributionInput { region: &s.region, days: d, diagnostics: diag })
        .collect();
    let tables = export_attribution(&inputs);
    if tables.daily.is_empty() {
        log::warn!("model has no active text sources; attribution tables are empty");
    }

    let dir = rundir::create(&ctx.out, "attr")?;
    tables.write_pi_csv(&dir.join("pi.csv"))?;
    tables.write_gamma_csv(&dir.join("gamma.csv"))?;
    tables.write_daily_csv(&dir.join("heatmap.csv"))?;
    let mut files = prepared_inputs(data);
    files.extend([run.join(MODEL), run.join(CHECKPOINT)]);
    rundir::write_manifest(
        &dir,
        "attr",
        &files,
        &["pi.csv", "gamma.csv", "heatmap.csv"],
        serde_json::json!({ "split": split }),
    )?;
    Ok(dir)
}
