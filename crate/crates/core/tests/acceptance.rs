//! Acceptance criteria. Runs every criterion, prints one `[PASS]` /
//! `[FAIL]` line each and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::time::Instant;

use chrono::NaiveDate;
use graft_core::data::synth::{generate, SynthConfig};
use graft_core::data::{aggregate_daily, aggregate_policy, DailyEntry, DayText, DocumentRecord, NormStats, PolicyDecay, RegionTag, Source, WindowConfig};
use graft_core::entmax::{conjugate_value, entmax};
use graft_core::evaluation::{protocol, protocol_from_rmse, rmse, RmseTable, TaskRmse};
use graft_core::hopfield::{
    capacity_trend_experiment, check_sparse_dominates_dense, energy_descent_suite, is_non_decreasing, CapacityConfig,
    DescentConfig, MemoryBank,
};
use graft_core::model::{backbone_forward, forward, init_params, loss, predict, ModelConfig, SourceSwitch};
use graft_core::numerics::gradcheck::{numeric_param_gradient, relative_error};
use graft_core::numerics::Ctx;
use graft_core::pipeline::{audit_leakage, boundaries_by_fraction, eval_tasks, prepare, DataSettings, Dataset};
use graft_core::stanhop::StanhopConfig;
use graft_core::training::{examples, predict_samples, rolling_forecast, train, Horizon, TrainConfig};
use graft_core::{Alpha, ParamStore, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(name: &str, pass: bool, detail: String) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn alpha(v: f64) -> Alpha {
    Alpha::new(v).unwrap()
}

/// Euclidean projection onto the simplex by enumerating every candidate
/// support and keeping the closest feasible point.
fn brute_force_projection(z: &[f64]) -> Vec<f64> {
    let m = z.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << m) {
        let support: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let tau = (support.iter().map(|&i| z[i]).sum::<f64>() - 1.0) / support.len() as f64;
        if support.iter().any(|&i| z[i] - tau < 0.0) {
            continue;
        }
        let mut p = vec![0.0; m];
        for &i in &support {
            p[i] = z[i] - tau;
        }
        let dist: f64 = p.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, p));
        }
    }
    best.expect("some support is feasible").1
}

fn naive_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn entmax_oracle_equivalence() -> bool {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut err2, mut err1) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let m = rng.random_range(1..=12);
        let z: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = entmax(&z, Alpha::SPARSEMAX).unwrap();
        let q = brute_force_projection(&z);
        err2 = err2.max(p.probs().iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let s = entmax(&z, Alpha::SOFTMAX).unwrap();
        let n = naive_softmax(&z);
        err1 = err1.max(s.probs().iter().zip(&n).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = err2 < 1e-9 && err1 < 1e-10 && secs < 30.0;
    report("EntMax oracle equivalence", pass, format!("sparsemax max err {err2:.2e}, softmax max err {err1:.2e}, {secs:.1}s"));
    pass
}

fn conjugate_gradient_identity() -> bool {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for a in [1.0, 1.5, 2.0] {
        for _ in 0..200 {
            let m = rng.random_range(2..=10);
            let z: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = entmax(&z, alpha(a)).unwrap();
            let h = 1e-5;
            let fd: Vec<f64> = (0..m)
                .map(|i| {
                    let mut zp = z.clone();
                    zp[i] += h;
                    let mut zm = z.clone();
                    zm[i] -= h;
                    (conjugate_value(&zp, alpha(a)).unwrap() - conjugate_value(&zm, alpha(a)).unwrap()) / (2.0 * h)
                })
                .collect();
            let diff: f64 = fd.iter().zip(p.probs()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            let norm: f64 = p.probs().iter().map(|x| x * x).sum::<f64>().sqrt();
            worst = worst.max(diff / norm);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = worst < 1e-6 && secs < 30.0;
    report("Conjugate gradient identity", pass, format!("max rel err {worst:.2e}, {secs:.1}s"));
    pass
}

fn energy_descent() -> bool {
    let t = Instant::now();
    let rep = energy_descent_suite(&DescentConfig::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = rep.runs == 500 && rep.descent_violations == 0 && rep.fixed_point_violations == 0 && secs < 60.0;
    report(
        "Energy descent",
        pass,
        format!(
            "{} runs, {} steps, {} descent violations, {}/{} converged runs off fixed point, {secs:.1}s",
            rep.runs, rep.steps, rep.descent_violations, rep.fixed_point_violations, rep.converged_runs
        ),
    );
    pass
}

fn sparse_retrieval_beats_dense() -> bool {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let xi = graft_core::hopfield::patterns::unit_patterns(&mut rng, 32, 8);
    let bank = MemoryBank::new(xi, 4.0, Alpha::SPARSEMAX).unwrap();
    let rep = check_sparse_dominates_dense(&bank, 1000, 105).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = rep.trials == 1000 && rep.violations == 0 && secs < 60.0;
    report(
        "Sparse vs dense retrieval",
        pass,
        format!("{} trials, {} violations, mean gap {:.3e}, {secs:.1}s", rep.trials, rep.violations, rep.mean_gap),
    );
    pass
}

fn capacity_trend() -> bool {
    let t = Instant::now();
    let rows = capacity_trend_experiment(&[8, 16, 32, 64], 0.99, &CapacityConfig::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = is_non_decreasing(&rows) && secs < 300.0;
    let trend: Vec<String> = rows.iter().map(|r| format!("d={} M={}", r.dim, r.max_patterns)).collect();
    report("Capacity trend", pass, format!("{}, {secs:.1}s", trend.join(", ")));
    pass
}

fn toy_model() -> ModelConfig {
    ModelConfig {
        backbone: StanhopConfig {
            d_model: 16,
            d_ff: 32,
            n_heads: 4,
            e_layers: 1,
            dropout: 0.0,
            pool_k: 2,
            ..StanhopConfig::default()
        },
        t_in: 96,
        t_out: 48,
        channels: 2,
        text_dim: 8,
        switch: SourceSwitch::All,
        ..ModelConfig::default()
    }
}

fn random_text(rng: &mut ChaCha8Rng, days: usize, dim: usize, masks: &[[bool; 3]]) -> Vec<DayText> {
    (0..days)
        .map(|k| DayText {
            day: NaiveDate::from_ymd_opt(2021, 6, 1).unwrap() + chrono::Days::new(k as u64),
            sources: masks[k].map(|m| {
                if m {
                    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    DailyEntry { vector: v.into_iter().map(|x| x / n).collect(), mask: true }
                } else {
                    DailyEntry::empty(dim)
                }
            }),
        })
        .collect()
}

fn random_tensor(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::new(&[r, c], (0..r * c).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

fn full_model_gradient_check() -> bool {
    let t = Instant::now();
    let cfg = toy_model();
    let store = init_params(&cfg, 106).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let x = random_tensor(&mut rng, cfg.channels, cfg.t_in);
    let y = random_tensor(&mut rng, 1, cfg.t_out);
    let exemplars = random_tensor(&mut rng, 3, cfg.backbone.d_model);
    let text = random_text(&mut rng, 2, cfg.text_dim, &[[true, true, false], [true, true, true]]);
    let objective = |s: &ParamStore| {
        let tape = Tape::new();
        let ctx = Ctx::eval(&tape, s);
        let out = forward(&ctx, &cfg, &x, &text, Some(&exemplars)).unwrap();
        loss(out.prediction, &y, &out.gates, &cfg.loss).value().data()[0]
    };
    let tape = Tape::new();
    let ctx = Ctx::eval(&tape, &store);
    let out = forward(&ctx, &cfg, &x, &text, Some(&exemplars)).unwrap();
    let grads = loss(out.prediction, &y, &out.gates, &cfg.loss).backward().params();

    let mut worst = (0.0f64, String::new());
    let mut groups = 0;
    for (name, value) in store.iter() {
        let n = value.len();
        let entries: Vec<usize> = (0..n).step_by((n / 6).max(1)).collect();
        let numeric = numeric_param_gradient(&objective, &store, name, &entries, 1e-6);
        let analytic: Vec<f64> = entries.iter().map(|&i| grads.get(name).map_or(0.0, |g| g.data()[i])).collect();
        let err = relative_error(&analytic, &numeric, 1e-8);
        if err >= worst.0 {
            worst = (err, name.to_string());
        }
        groups += 1;
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = worst.0 < 1e-4 && secs < 120.0;
    report(
        "Full-model gradient check",
        pass,
        format!("{groups} parameter groups, worst rel err {:.2e} ({}), {secs:.1}s", worst.0, worst.1),
    );
    pass
}

fn noext_equivalence_and_masked_isolation() -> bool {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let cfg = toy_model();
    let cfg0 = ModelConfig { switch: SourceSwitch::NoExt, ..cfg.clone() };
    let store = init_params(&cfg, 107).unwrap();
    let mut identical = true;
    for _ in 0..20 {
        let x = random_tensor(&mut rng, cfg.channels, cfg.t_in);
        let text = random_text(&mut rng, 2, cfg.text_dim, &[[true; 3], [true; 3]]);
        let tape = Tape::new();
        let ctx = Ctx::eval(&tape, &store);
        let base = backbone_forward(&ctx, &cfg0, &x).unwrap().value();
        let noext = forward(&ctx, &cfg0, &x, &text, None).unwrap().prediction.value();
        identical &= base.data() == noext.data();
    }
    let mut untouched = true;
    for trial in 0..100 {
        let x = random_tensor(&mut rng, cfg.channels, cfg.t_in);
        let masks = [[trial % 2 == 0, false, true], [false, trial % 3 == 0, false]];
        let text = random_text(&mut rng, 2, cfg.text_dim, &masks);
        let reference = predict(&store, &cfg, &x, &text, None).unwrap().0;
        let mut fuzzed = text.clone();
        for day in &mut fuzzed {
            for e in day.sources.iter_mut().filter(|e| !e.mask) {
                e.vector = (0..cfg.text_dim).map(|_| rng.random_range(-1e3..1e3)).collect();
            }
        }
        let out = predict(&store, &cfg, &x, &fuzzed, None).unwrap().0;
        untouched &= out.iter().zip(&reference).all(|(a, b)| a.to_bits() == b.to_bits());
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = identical && untouched && secs < 60.0;
    report(
        "NoExt equivalence and masked isolation",
        pass,
        format!("switch-0 bit-identical: {identical}, masked fuzz unchanged: {untouched}, {secs:.1}s"),
    );
    pass
}

fn protocol_fixture() -> bool {
    // task t1: a and c tie for best; task t2: b best.
    let sources: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let row = |id: &str, stat: f64, v: [f64; 3]| TaskRmse {
        id: id.into(),
        rmse_stat: stat,
        rmse: sources.iter().cloned().zip(v).collect(),
    };
    let table = RmseTable {
        sources: sources.clone(),
        tasks: vec![row("t1", 200.0, [100.0, 150.0, 100.0]), row("t2", 100.0, [80.0, 60.0, 120.0])],
    };
    let rep = protocol_from_rmse(&table).unwrap();
    let expected = [
        ("a", ((1.0 - 100.0 / 200.0) + (1.0 - 80.0 / 100.0)) / 2.0, (1.0 + 2.0) / 2.0, 1),
        ("b", ((1.0 - 150.0 / 200.0) + (1.0 - 60.0 / 100.0)) / 2.0, (3.0 + 1.0) / 2.0, 1),
        ("c", ((1.0 - 100.0 / 200.0) + (1.0 - 120.0 / 100.0)) / 2.0, (1.0 + 3.0) / 2.0, 1),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (src, skill, rank, wins) in expected {
        let r = rep.row(src).unwrap();
        pass &= r.skill == Some(skill) && r.rank_rmse == rank && r.wins == wins;
        detail.push(format!("{src}: skill {:?} rank {} wins {}", r.skill, r.rank_rmse, r.wins));
    }
    report("Protocol fixture", pass, detail.join("; "));
    pass
}

fn policy_decay_fixture() -> bool {
    let day = NaiveDate::from_ymd_opt(2021, 3, 10).unwrap();
    let doc = |age: u64, e: Vec<f64>| {
        DocumentRecord::new(Source::Policy, RegionTag::National, day - chrono::Days::new(age), 1.0, e).unwrap()
    };
    let (d0, d1) = (doc(0, vec![1.0, 0.0]), doc(1, vec![0.0, 1.0]));
    let decay = PolicyDecay { rho: 0.5, ..PolicyDecay::default() };
    let w = aggregate_policy(&[&d0, &d1], day, &decay, 2).unwrap().vector;
    let decayed = (w[0] - 2.0 / 3.0).abs() < 1e-12 && (w[1] - 1.0 / 3.0).abs() < 1e-12;
    let flat = aggregate_policy(&[&d0, &d1], day, &PolicyDecay { rho: 1.0, ..decay }, 2).unwrap().vector;
    let plain = aggregate_daily(&[&d0, &d1], 2).unwrap().vector;
    let reduces = flat.iter().zip(&plain).all(|(a, b)| (a - b).abs() < 1e-12);
    let pass = decayed && reduces;
    report("Policy decay", pass, format!("rho=0.5 weights {w:?}, rho=1 {flat:?} vs plain {plain:?}"));
    pass
}

struct SeedOutcome {
    event_rmse: [f64; 2],
    skill: [f64; 2],
}

fn synth_seed(seed: u64) -> SeedOutcome {
    let synth = SynthConfig { seed, ..SynthConfig::default() };
    let ds = generate(&synth).unwrap();
    let events = ds.events.clone();
    let (first, last) = (ds.panel.days[0], *ds.panel.days.last().unwrap());
    let settings = DataSettings {
        window: WindowConfig::default(),
        boundaries: boundaries_by_fraction(first, last, 0.6, 0.2).unwrap(),
        text_dim: synth.embed_dim,
        decay: PolicyDecay::default(),
    };
    let (data, _) =
        Dataset::from_documents(vec![ds.panel], &ds.documents, Some(ds.covariates), &settings.decay, synth.embed_dim)
            .unwrap();
    let prep = prepare(&data, &settings).unwrap();
    let train_set = examples(&prep.stats, &prep.splits.train).unwrap();
    let event_samples: Vec<_> = prep.splits.test.iter().filter(|s| events.contains(&s.anchor)).cloned().collect();
    assert!(!event_samples.is_empty(), "seed {seed}: no event-day forecasts in the test split");

    let mut out = SeedOutcome { event_rmse: [0.0; 2], skill: [0.0; 2] };
    let mut forecasts = BTreeMap::new();
    for (k, switch) in [SourceSwitch::NoExt, SourceSwitch::All].into_iter().enumerate() {
        let model = ModelConfig {
            backbone: StanhopConfig { d_model: 16, d_ff: 32, dropout: 0.1, ..StanhopConfig::default() },
            channels: 1 + data.covariate_count(),
            text_dim: synth.embed_dim,
            switch,
            ..ModelConfig::default()
        };
        let tc = TrainConfig { lr: 1e-3, batch_size: 8, epochs: 15, seed, ..TrainConfig::default() };
        let mut store = init_params(&model, seed).unwrap();
        train(&train_set, &mut store, &model, &tc, None).unwrap();
        let preds = predict_samples(&store, &model, &prep.stats, &event_samples).unwrap();
        let errs: Vec<f64> = event_samples.iter().zip(&preds).map(|(s, (p, _))| rmse(&s.target, p).unwrap()).collect();
        out.event_rmse[k] = errs.iter().sum::<f64>() / errs.len() as f64;
        let tasks = rolling_forecast(&store, &model, &prep.stats, &prep.splits.test, Horizon::Stlf).unwrap();
        forecasts.insert(switch.code().to_string(), tasks);
    }
    let tasks = eval_tasks(&forecasts, &data, "stlf").unwrap();
    let profiles = data.seasonal_profiles(settings.boundaries.train_end).unwrap();
    let rep = protocol(&tasks, &["0".into(), "123".into()], &profiles).unwrap();
    out.skill = [rep.row("0").unwrap().skill.unwrap(), rep.row("123").unwrap().skill.unwrap()];
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn directional_end_to_end() -> bool {
    let t = Instant::now();
    let runs: Vec<SeedOutcome> = (0..5).map(synth_seed).collect();
    let med = |k: usize| median(runs.iter().map(|r| r.event_rmse[k]).collect());
    let mean_skill = |k: usize| runs.iter().map(|r| r.skill[k]).sum::<f64>() / runs.len() as f64;
    let (rmse0, rmse123) = (med(0), med(1));
    let (skill0, skill123) = (mean_skill(0), mean_skill(1));
    let secs = t.elapsed().as_secs_f64();
    let pass = rmse123 < rmse0 && skill123 > skill0 && secs < 900.0;
    report(
        "Directional end-to-end",
        pass,
        format!(
            "median event-day RMSE 123={rmse123:.2} vs 0={rmse0:.2}; Skill 123={skill123:.4} vs 0={skill0:.4}; {secs:.0}s"
        ),
    );
    pass
}

fn leakage_audit() -> bool {
    let synth = SynthConfig { seed: 7, ..SynthConfig::default() };
    let ds = generate(&synth).unwrap();
    let (first, last) = (ds.panel.days[0], *ds.panel.days.last().unwrap());
    let settings = DataSettings {
        window: WindowConfig::default(),
        boundaries: boundaries_by_fraction(first, last, 0.6, 0.2).unwrap(),
        text_dim: synth.embed_dim,
        decay: PolicyDecay::default(),
    };
    let (data, _) =
        Dataset::from_documents(vec![ds.panel], &ds.documents, Some(ds.covariates), &settings.decay, synth.embed_dim)
            .unwrap();
    let prep = prepare(&data, &settings).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("norm.json");
    std::fs::write(&path, serde_json::to_string(&prep.stats).unwrap()).unwrap();
    let stored: NormStats = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let audit = audit_leakage(&prep.splits, &stored, &settings.boundaries);
    let pass = audit.is_ok() && !prep.splits.val.is_empty() && !prep.splits.test.is_empty();
    report(
        "Leakage audit",
        pass,
        format!(
            "{} / {} / {} samples, {:?}",
            prep.splits.train.len(),
            prep.splits.val.len(),
            prep.splits.test.len(),
            audit.map_err(|e| e.to_string())
        ),
    );
    pass
}

fn main() {
    let criteria: [(&str, fn() -> bool); 11] = [
        ("EntMax oracle equivalence", entmax_oracle_equivalence),
        ("Conjugate gradient identity", conjugate_gradient_identity),
        ("Energy descent", energy_descent),
        ("Sparse vs dense retrieval", sparse_retrieval_beats_dense),
        ("Capacity trend", capacity_trend),
        ("Full-model gradient check", full_model_gradient_check),
        ("NoExt equivalence and masked isolation", noext_equivalence_and_masked_isolation),
        ("Protocol fixture", protocol_fixture),
        ("Policy decay", policy_decay_fixture),
        ("Directional end-to-end", directional_end_to_end),
        ("Leakage audit", leakage_audit),
    ];
    let results: Vec<(&str, bool)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|(name, f)| (*name, s.spawn(f))).collect();
        handles
            .into_iter()
            .map(|(name, h)| {
                let ok = h.join().unwrap_or_else(|_| {
                    report(name, false, "panicked".into());
                    false
                });
                (name, ok)
            })
            .collect()
    });
    let failed: Vec<&str> = results.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    println!("acceptance: {} passed, {} failed", results.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
