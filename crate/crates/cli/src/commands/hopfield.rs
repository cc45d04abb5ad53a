use std::path::PathBuf;

use anyhow::{bail, Result};
use graft_core::hopfield::{
    capacity_trend_experiment, check_sparse_dominates_dense, energy_descent_suite, is_non_decreasing, patterns,
    CapacityConfig, DescentConfig, MemoryBank,
};
use graft_core::Alpha;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Ctx;
use crate::prepared::write_json;
use crate::rundir;

pub struct Args {
    pub runs: usize,
    pub trials: usize,
    pub dims: Vec<usize>,
    pub max_patterns: usize,
}

pub fn run(ctx: &Ctx, args: Args) -> Result<PathBuf> {
    let seed = ctx.settings.seed()?;
    let descent = energy_descent_suite(&DescentConfig { runs: args.runs, seed, ..DescentConfig::default() })?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bank = MemoryBank::new(patterns::unit_patterns(&mut rng, 32, 8), 4.0, Alpha::SPARSEMAX)?;
    let sparse_dense = check_sparse_dominates_dense(&bank, args.trials, seed.wrapping_add(1))?;

    let cap_cfg = CapacityConfig { max_patterns: args.max_patterns, seed, ..CapacityConfig::default() };
    let capacity = capacity_trend_experiment(&args.dims, 0.99, &cap_cfg)?;
    let trend_ok = is_non_decreasing(&capacity);

    let dir = rundir::create(&ctx.out, "hopfield")?;
    let report = serde_json::json!({
        "seed": seed,
        "energy_descent": descent,
        "sparse_vs_dense": sparse_dense,
        "capacity": capacity,
        "capacity_non_decreasing": trend_ok,
    });
    write_json(&dir.join("hopfield.json"), &report)?;
    rundir::write_manifest(&dir, "hopfield-bench", &[], &["hopfield.json"], serde_json::json!({ "seed": seed }))?;
    println!(
        "energy descent: {} runs, {} violations; sparse vs dense: {} trials, {} violations; capacity {}",
        descent.runs,
        descent.descent_violations + descent.fixed_point_violations,
        sparse_dense.trials,
        sparse_dense.violations,
        capacity.iter().map(|r| format!("d={} M={}", r.dim, r.max_patterns)).collect::<Vec<_>>().join(", "),
    );
    let violations = descent.descent_violations + descent.fixed_point_violations + sparse_dense.violations;
    if violations > 0 || !trend_ok {
        bail!("{violations} violations, capacity trend non-decreasing: {trend_ok} (see {})", dir.display());
    }
    Ok(dir)
}
