use std::path::{Path, PathBuf};

use anyhow::Result;
use graft_core::data::{
    read_covariates_csv, read_embeddings_csv, read_load_csv, write_covariates_csv, write_embeddings_csv,
    write_load_csv, write_memory_csv, Manifest, ManifestEntry, SplitBoundaries, WindowSample,
};
use graft_core::pipeline::{boundaries_by_fraction, prepare, DataSettings, Dataset};

use super::Ctx;
use crate::config::{invalid, Settings};
use crate::prepared::{self, write_json};
use crate::rundir;

pub struct Args {
    pub load: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
}

fn boundaries(s: &Settings, ds: &Dataset) -> Result<SplitBoundaries> {
    match (s.date("split.train_end")?, s.date("split.val_end")?) {
        (Some(train_end), Some(val_end)) => {
            if train_end >= val_end {
                return Err(invalid(format!("split.train_end {train_end} must precede split.val_end {val_end}")));
            }
            Ok(SplitBoundaries { train_end, val_end })
        }
        (None, None) => {
            let first = ds.panels.iter().filter_map(|p| p.days.first()).min();
            let last = ds.panels.iter().filter_map(|p| p.days.last()).max();
            let (Some(&first), Some(&last)) = (first, last) else {
                return Err(invalid("load file has no complete days"));
            };
            Ok(boundaries_by_fraction(
                first,
                last,
                s.get_or("split.train_frac", 0.6)?,
                s.get_or("split.val_frac", 0.2)?,
            )?)
        }
        _ => Err(invalid("set both split.train_end and split.val_end, or neither")),
    }
}

/// A previous run with identical inputs, settings and untouched outputs.
fn up_to_date(out: &Path, inputs: &[ManifestEntry], settings: &serde_json::Value) -> Result<Option<PathBuf>> {
    for dir in rundir::runs(out, "prepare")?.into_iter().rev() {
        let Ok(m) = Manifest::read(&dir.join("manifest.json")) else { continue };
        if m.inputs == inputs && m.settings == *settings && rundir::outputs_intact(&dir, &m) {
            return Ok(Some(dir));
        }
    }
    Ok(None)
}

fn write_windows(path: &Path, splits: [(&str, &[WindowSample]); 3]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["region", "anchor", "split"])?;
    for (name, samples) in splits {
        for s in samples {
            w.write_record([s.region.as_str(), &s.anchor.to_string(), name])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn run(ctx: &Ctx, args: Args) -> Result<PathBuf> {
    let s = &ctx.settings;
    let path_of = |flag: &Option<PathBuf>, key: &str| flag.clone().or_else(|| s.raw(key).map(PathBuf::from));
    let load = path_of(&args.load, "data.load").ok_or_else(|| invalid("no load file: pass --load or set data.load"))?;
    let embeddings = path_of(&args.embeddings, "data.embeddings");
    let covariates = path_of(&args.covariates, "data.covariates");

    let panels = read_load_csv(&load)?;
    if panels.is_empty() {
        return Err(invalid(format!("{}: no rows", load.display())));
    }
    let docs = embeddings.as_deref().map(read_embeddings_csv).transpose()?;
    let cov = covariates.as_deref().map(read_covariates_csv).transpose()?;
    let text_dim = match s.get("text.dim")? {
        Some(d) => d,
        None => docs.as_ref().and_then(|d| d.first()).map_or(s.text_dim()?, |d| d.dim()),
    };
    let decay = s.decay()?;

    let (dataset, quarantine) = match &docs {
        Some(d) => Dataset::from_documents(panels, d, cov, &decay, text_dim)?,
        None => (Dataset { panels, memory: None, covariates: cov }, Vec::new()),
    };
    let settings = DataSettings { window: s.window()?, boundaries: boundaries(s, &dataset)?, text_dim, decay };
    let settings_json = serde_json::to_value(&settings)?;

    let inputs: Vec<PathBuf> = [Some(load), embeddings, covariates].into_iter().flatten().collect();
    let entries = inputs.iter().map(|p| ManifestEntry::of(p)).collect::<graft_core::Result<Vec<_>>>()?;
    if let Some(dir) = up_to_date(&ctx.out, &entries, &settings_json)? {
        log::info!("inputs and settings unchanged; reusing {}", dir.display());
        return Ok(dir);
    }

    let prep = prepare(&dataset, &settings)?;
    let dir = rundir::create(&ctx.out, "prepare")?;
    let mut outputs = vec![prepared::LOAD];
    write_load_csv(&dataset.panels, &dir.join(prepared::LOAD))?;
    if let Some(m) = &dataset.memory {
        write_memory_csv(m, &dir.join(prepared::MEMORY))?;
        write_embeddings_csv(&quarantine, &dir.join(prepared::QUARANTINE))?;
        outputs.extend([prepared::MEMORY, prepared::QUARANTINE]);
    }
    if let Some(c) = &dataset.covariates {
        write_covariates_csv(c, &dir.join(prepared::COVARIATES))?;
        outputs.push(prepared::COVARIATES);
    }
    let sp = &prep.splits;
    write_windows(&dir.join(prepared::WINDOWS), [("train", &sp.train), ("val", &sp.val), ("test", &sp.test)])?;
    write_json(&dir.join(prepared::NORM), &prep.stats)?;
    write_json(&dir.join(prepared::SETTINGS), &settings)?;
    outputs.extend([prepared::WINDOWS, prepared::NORM, prepared::SETTINGS]);
    rundir::write_manifest(&dir, "prepare", &inputs, &outputs, settings_json)?;
    if !quarantine.is_empty() {
        log::warn!("{} documents quarantined", quarantine.len());
    }
    log::info!("windows: {} train, {} val, {} test", sp.train.len(), sp.val.len(), sp.test.len());
    Ok(dir)
}
