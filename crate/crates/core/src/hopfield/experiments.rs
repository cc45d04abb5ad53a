//! Property experiments over random memory banks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::bank::MemoryBank;
use super::patterns;
use crate::entmax::Alpha;
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct DescentConfig {
    pub dim: usize,
    pub patterns: usize,
    pub beta: f64,
    pub alphas: Vec<Alpha>,
    pub runs: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub slack: f64,
    pub seed: u64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            patterns: 8,
            beta: 8.0,
            alphas: vec![Alpha::SOFTMAX, Alpha::default(), Alpha::SPARSEMAX],
            runs: 500,
            max_iters: 200,
            tol: 1e-9,
            slack: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DescentReport {
    pub runs: usize,
    pub steps: usize,
    pub descent_violations: usize,
    pub converged_runs: usize,
    pub fixed_point_violations: usize,
    pub max_energy_increase: f64,
}

/// Random `(Ξ, x0, α)` retrieval runs checking energy descent and, for the
/// runs that converge, that the final state is a fixed point within `10·tol`.
pub fn energy_descent_suite(cfg: &DescentConfig) -> Result<DescentReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rep = DescentReport {
        runs: cfg.runs,
        max_energy_increase: f64::NEG_INFINITY,
        ..Default::default()
    };
    for run in 0..cfg.runs {
        let alpha = cfg.alphas[run % cfg.alphas.len()];
        let xi = patterns::gaussian_patterns(&mut rng, cfg.dim, cfg.patterns);
        let bank = MemoryBank::new(xi, cfg.beta, alpha)?;
        let x0 = patterns::gaussian_vec(&mut rng, cfg.dim);
        let trace = bank.retrieve(&x0, cfg.max_iters, cfg.tol)?;
        rep.steps += trace.iterations;
        rep.descent_violations += trace.descent_violations(cfg.slack);
        for w in trace.energies.windows(2) {
            rep.max_energy_increase = rep.max_energy_increase.max(w[1] - w[0]);
        }
        if trace.converged {
            rep.converged_runs += 1;
            let last = trace.last_state();
            let next = bank.retrieve_step(last)?;
            let moved = next
                .iter()
                .zip(last)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if moved >= 10.0 * cfg.tol {
                rep.fixed_point_violations += 1;
            }
        }
    }
    Ok(rep)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SparseDenseReport {
    pub trials: usize,
    pub violations: usize,
    /// Mean of `‖T_dense(x) − ξ_μ‖ − ‖T_sparse(x) − ξ_μ‖`.
    pub mean_gap: f64,
    pub min_gap: f64,
}

/// Compares one-step sparse and dense retrieval error from states sampled
/// inside the separation ball around each pattern: `x = ξ_μ + u·R_min·n̂`
/// with `u ~ U[0, 1)` and a random unit direction `n̂`.
pub fn check_sparse_dominates_dense(
    bank: &MemoryBank,
    trials: usize,
    seed: u64,
) -> Result<SparseDenseReport> {
    let radius = bank.separation_radius()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SparseDenseReport {
        trials,
        min_gap: f64::INFINITY,
        ..Default::default()
    };
    let mut gap_sum = 0.0;
    for t in 0..trials {
        let mu = t % bank.len();
        let dir = patterns::unit_vec(&mut rng, bank.dim());
        let u: f64 = rng.random();
        let x: Vec<f64> = bank
            .pattern(mu)
            .iter()
            .zip(&dir)
            .map(|(p, n)| p + u * radius * n)
            .collect();
        let sparse = bank.distance_to(&bank.retrieve_step(&x)?, mu);
        let dense = bank.distance_to(&bank.dense_step(&x)?, mu);
        if sparse > dense + 1e-12 {
            rep.violations += 1;
        }
        let gap = dense - sparse;
        gap_sum += gap;
        rep.min_gap = rep.min_gap.min(gap);
    }
    rep.mean_gap = if trials > 0 { gap_sum / trials as f64 } else { 0.0 };
    Ok(rep)
}

/// One-step retrieval error `‖T(x) − ξ_μ‖` for each `β` in `betas`.
pub fn one_step_error_vs_beta(
    bank: &MemoryBank,
    x: &[f64],
    mu: usize,
    betas: &[f64],
) -> Result<Vec<f64>> {
    betas
        .iter()
        .map(|&b| {
            let bk = bank.with_beta(b)?;
            Ok(bk.distance_to(&bk.retrieve_step(x)?, mu))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct CapacityConfig {
    pub beta: f64,
    pub alpha: Alpha,
    /// Queries per candidate bank size.
    pub queries: usize,
    /// Query offset as a fraction of the separation radius.
    pub noise_frac: f64,
    pub max_patterns: usize,
    pub seed: u64,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            alpha: Alpha::SPARSEMAX,
            queries: 200,
            noise_frac: 0.1,
            max_patterns: 2048,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacityRow {
    pub dim: usize,
    pub max_patterns: usize,
    pub success_rate: f64,
    /// True when the search stopped at the configured cap.
    pub capped: bool,
}

fn success_rate(dim: usize, m: usize, cfg: &CapacityConfig) -> Result<f64> {
    let seed = cfg.seed ^ ((dim as u64) << 32) ^ m as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // orthogonal init while it fits, random unit patterns beyond
    let xi = if m <= dim {
        patterns::orthonormal_patterns(&mut rng, dim, m)
    } else {
        patterns::unit_patterns(&mut rng, dim, m)
    };
    let bank = MemoryBank::new(xi, cfg.beta, cfg.alpha)?;
    let radius = if m >= 2 { bank.separation_radius()? } else { f64::INFINITY };
    let offset = if radius.is_finite() { cfg.noise_frac * radius } else { cfg.noise_frac };
    let mut ok = 0;
    for _ in 0..cfg.queries {
        let mu = rng.random_range(0..m);
        let dir = patterns::unit_vec(&mut rng, dim);
        let x: Vec<f64> = bank
            .pattern(mu)
            .iter()
            .zip(&dir)
            .map(|(p, n)| p + offset * n)
            .collect();
        if bank.distance_to(&bank.retrieve_step(&x)?, mu) < radius {
            ok += 1;
        }
    }
    Ok(ok as f64 / cfg.queries as f64)
}

/// For each dimension, the largest bank size whose one-step retrieval
/// success rate reaches `target`: doubling search followed by bisection.
pub fn capacity_trend_experiment(
    dims: &[usize],
    target: f64,
    cfg: &CapacityConfig,
) -> Result<Vec<CapacityRow>> {
    dims.iter()
        .map(|&dim| {
            let mut good = 1;
            let mut good_rate = success_rate(dim, 1, cfg)?;
            let mut bad = None;
            let mut m = 2;
            while m <= cfg.max_patterns {
                let rate = success_rate(dim, m, cfg)?;
                if rate >= target {
                    good = m;
                    good_rate = rate;
                    m *= 2;
                } else {
                    bad = Some(m);
                    break;
                }
            }
            if let Some(mut hi) = bad {
                while hi - good > 1 {
                    let mid = (good + hi) / 2;
                    let rate = success_rate(dim, mid, cfg)?;
                    if rate >= target {
                        good = mid;
                        good_rate = rate;
                    } else {
                        hi = mid;
                    }
                }
            }
            Ok(CapacityRow {
                dim,
                max_patterns: good,
                success_rate: good_rate,
                capped: bad.is_none(),
            })
        })
        .collect()
}

pub fn is_non_decreasing(rows: &[CapacityRow]) -> bool {
    rows.windows(2).all(|w| w[1].max_patterns >= w[0].max_patterns)
}
