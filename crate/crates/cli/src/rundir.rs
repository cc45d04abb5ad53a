//! Versioned, append-only run directories: `{out}/{command}-{NNN}`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use graft_core::data::{Manifest, ManifestEntry};

/// Existing runs of `command` under `out`, oldest first.
pub fn runs(out: &Path, command: &str) -> Result<Vec<PathBuf>> {
    let mut found: Vec<(u32, PathBuf)> = Vec::new();
    if !out.exists() {
        return Ok(Vec::new());
    }
    let prefix = format!("{command}-");
    for entry in std::fs::read_dir(out).with_context(|| format!("listing {}", out.display()))? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(n) = name.strip_prefix(&prefix).and_then(|n| n.parse::<u32>().ok()) {
            found.push((n, entry.path()));
        }
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

/// Creates the next free run directory. Never reuses an existing one.
pub fn create(out: &Path, command: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let next = runs(out, command)?
        .last()
        .and_then(|p| p.file_name()?.to_str()?.rsplit('-').next()?.parse::<u32>().ok())
        .map_or(1, |n| n + 1);
    for n in next.. {
        let dir = out.join(format!("{command}-{n:03}"));
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
        }
    }
    unreachable!("run numbers exhausted")
}

/// Manifest entry for an output, recorded relative to its run directory.
pub fn output_entry(dir: &Path, name: &str) -> Result<ManifestEntry> {
    let mut e = ManifestEntry::of(&dir.join(name))?;
    e.path = name.to_string();
    Ok(e)
}

pub fn write_manifest(
    dir: &Path,
    command: &str,
    inputs: &[PathBuf],
    outputs: &[&str],
    settings: serde_json::Value,
) -> Result<Manifest> {
    let m = Manifest {
        command: command.to_string(),
        inputs: inputs.iter().map(|p| ManifestEntry::of(p)).collect::<graft_core::Result<_>>()?,
        outputs: outputs.iter().map(|o| output_entry(dir, o)).collect::<Result<_>>()?,
        settings,
    };
    m.write(&dir.join("manifest.json"))?;
    Ok(m)
}

/// True when every output listed in `dir/manifest.json` still has its
/// recorded digest.
pub fn outputs_intact(dir: &Path, manifest: &Manifest) -> bool {
    manifest
        .outputs
        .iter()
        .all(|o| output_entry(dir, &o.path).is_ok_and(|now| now == *o))
}
