use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{DailyEntry, DayText, Source};
use crate::entmax::Alpha;
use crate::numerics::gradcheck::{numeric_param_gradient, relative_error};
use crate::numerics::{Ctx, ParamStore, Tape, Tensor};
use crate::stanhop::StanhopConfig;

fn toy_cfg(switch: SourceSwitch) -> ModelConfig {
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
        text_dim: 6,
        switch,
        ..ModelConfig::default()
    }
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn day_text(rng: &mut ChaCha8Rng, k: u32, masks: [bool; 3], dim: usize) -> DayText {
    DayText {
        day: NaiveDate::from_ymd_opt(2021, 1, k + 1).unwrap(),
        sources: masks.map(|m| if m { DailyEntry { vector: unit(rng, dim), mask: true } } else { DailyEntry::empty(dim) }),
    }
}

fn input(rng: &mut ChaCha8Rng, cfg: &ModelConfig) -> Tensor {
    let data = (0..cfg.channels * cfg.t_in).map(|_| rng.random_range(-2.0..2.0)).collect();
    Tensor::new(&[cfg.channels, cfg.t_in], data).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
    Tensor::new(&[r, c], (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn text_memory_counts_available_sources() {
    let cfg = toy_cfg(SourceSwitch::All);
    let store = init_params(&cfg, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tape = Tape::new();
    let ctx = Ctx::eval(&tape, &store);
    let all = day_text(&mut rng, 0, [true; 3], 6);
    assert_eq!(build_text_memory(&ctx, &all, cfg.switch).unwrap().entries.shape(), (3, 16));
    let news = day_text(&mut rng, 0, [true, false, false], 6);
    let m = build_text_memory(&ctx, &news, cfg.switch).unwrap();
    assert_eq!(m.sources, vec![Source::News]);
    assert!(build_text_memory(&ctx, &day_text(&mut rng, 0, [false; 3], 6), cfg.switch).is_none());
    assert!(build_text_memory(&ctx, &all, SourceSwitch::NoExt).is_none());
}

/// Largest singular value by power iteration on `WᵀW`.
fn spectral_norm(w: &Tensor) -> f64 {
    let wtw = w.transpose().matmul(w).unwrap();
    let mut v = Tensor::full(&[wtw.rows(), 1], 1.0);
    for _ in 0..500 {
        let u = wtw.matmul(&v).unwrap();
        v = u.scale(1.0 / u.norm());
    }
    wtw.matmul(&v).unwrap().norm().sqrt()
}

#[test]
fn projection_norm_is_bounded_by_operator_norm() {
    let cfg = toy_cfg(SourceSwitch::All);
    let store = init_params(&cfg, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let bound = spectral_norm(store.get("text.proj.news").unwrap());
    for _ in 0..100 {
        let tape = Tape::new();
        let ctx = Ctx::eval(&tape, &store);
        let m = build_text_memory(&ctx, &day_text(&mut rng, 0, [true, false, false], 6), cfg.switch).unwrap();
        let n = m.entries.value().norm();
        assert!(n.is_finite() && n <= bound * (1.0 + 1e-9), "{n} > {bound}");
    }
}

#[test]
fn gate_fixtures() {
    let cfg = toy_cfg(SourceSwitch::All);
    let mut store = init_params(&cfg, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r_bar = random_matrix(&mut rng, 1, 16);

    let tape = Tape::new();
    let ctx = Ctx::eval(&tape, &store);
    let only = build_text_memory(&ctx, &day_text(&mut rng, 0, [false, true, false], 6), cfg.switch).unwrap();
    let g = source_gate(&ctx, tape.var(&r_bar), &only, "fusion.l0", cfg.alpha);
    assert_eq!(g.simplex(&only), [0.0, 1.0, 0.0]);

    *store.get_mut("fusion.l0.gate").unwrap() = Tensor::zeros(&[32, 3]);
    let tape = Tape::new();
    let ctx = Ctx::eval(&tape, &store);
    let two = build_text_memory(&ctx, &day_text(&mut rng, 0, [true, false, true], 6), cfg.switch).unwrap();
    let g = source_gate(&ctx, tape.var(&r_bar), &two, "fusion.l0", cfg.alpha);
    assert_eq!(g.simplex(&two), [0.5, 0.0, 0.5]);
    let three = build_text_memory(&ctx, &day_text(&mut rng, 0, [true; 3], 6), cfg.switch).unwrap();
    let g = source_gate(&ctx, tape.var(&r_bar), &three, "fusion.l0", cfg.alpha);
    assert!(g.simplex(&three).iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-12));
    let mixed = g.mixed.value();
    let entries = three.entries.value();
    assert!(mixed.max_abs_diff(&entries.scale(1.0 / 3.0)) < 1e-12);

    // one dominant score under sparsemax
    let mut u = Tensor::zeros(&[32, 3]);
    u.data_mut()[0] = 5.0;
    *store.get_mut("fusion.l0.gate").unwrap() = u;
    let tape = Tape::new();
    let ctx = Ctx::eval(&tape, &store);
    let three = build_text_memory(&ctx, &day_text(&mut rng, 0, [true; 3], 6), cfg.switch).unwrap();
    let r1 = Tensor::new(&[1, 16], {
        let mut v = vec![0.0; 16];
        v[0] = 1.0;
        v
    })
    .unwrap();
    let g = source_gate(&ctx, tape.var(&r1), &three, "fusion.l0", Alpha::SPARSEMAX);
    let gamma = g.simplex(&three);
    assert_eq!(gamma, [1.0, 0.0, 0.0]);
}

#[test]
fn retrieval_fixtures() {
    let cfg = toy_cfg(SourceSwitch::All);
    let mut store = init_params(&cfg, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tape = Tape::new();
    let ctx = Ctx::eval(&tape, &store);
    let r = tape.var(&random_matrix(&mut rng, 5, 16));
    let y = tape.var(&random_matrix(&mut rng, 1, 16));
    let (z, pi) = cross_modal_retrieve(&ctx, r, y, "fusion.l0", 1.0, cfg.alpha);
    assert!(pi.value().data().iter().all(|&p| p == 1.0));
    let v = y.matmul(&ctx.p("fusion.l0.wv")).value();
    for i in 0..5 {
        assert_eq!(z.value().row(i), v.row(0));
    }

    for w in ["wq", "wk", "wv"] {
        *store.get_mut(&format!("fusion.l0.{w}")).unwrap() = Tensor::identity(16);
    }
    let tape = Tape::new();
    let ctx = Ctx::eval(&tape, &store);
    let mut keys = Tensor::zeros(&[3, 16]);
    for k in 0..3 {
        keys.data_mut()[k * 16 + k] = 1.0;
    }
    let q = Tensor::new(&[1, 16], keys.row(1).to_vec()).unwrap();
    let (_, pi) = cross_modal_retrieve(&ctx, tape.var(&q), tape.var(&keys), "fusion.l0", 200.0, cfg.alpha);
    assert_eq!(pi.value().data(), &[0.0, 1.0, 0.0]);

    for _ in 0..10_000 {
        let tape = Tape::new();
        let ctx = Ctx::eval(&tape, &store);
        let r = tape.var(&random_matrix(&mut rng, 1, 16));
        let y = tape.var(&random_matrix(&mut rng, 3, 16));
        let (_, pi) = cross_modal_retrieve(&ctx, r, y, "fusion.l0", 4.0, cfg.alpha);
        let p = pi.value();
        assert!(p.data().iter().all(|&x| x >= 0.0));
        assert!((p.sum() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn noext_and_all_masked_match_backbone_bit_for_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg0 = toy_cfg(SourceSwitch::NoExt);
    let store = init_params(&toy_cfg(SourceSwitch::All), 5).unwrap();
    let x = input(&mut rng, &cfg0);
    let text: Vec<DayText> = (0..2).map(|k| day_text(&mut rng, k, [true; 3], 6)).collect();
    let tape = Tape::new();
    let ctx = Ctx::eval(&tape, &store);
    let base = backbone_forward(&ctx, &cfg0, &x).unwrap().value();
    let noext = forward(&ctx, &cfg0, &x, &text, None).unwrap();
    assert_eq!(base.data(), noext.prediction.value().data());
    assert!(noext.gates.is_empty());

    let cfg = toy_cfg(SourceSwitch::All);
    let masked: Vec<DayText> = (0..2).map(|k| day_text(&mut rng, k, [false; 3], 6)).collect();
    let out = forward(&ctx, &cfg, &x, &masked, None).unwrap();
    assert_eq!(base.data(), out.prediction.value().data());
    let with_text = forward(&ctx, &cfg, &x, &text, None).unwrap();
    assert_ne!(base.data(), with_text.prediction.value().data());
}

#[test]
fn masked_entries_never_change_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = toy_cfg(SourceSwitch::All);
    let store = init_params(&cfg, 6).unwrap();
    let x = input(&mut rng, &cfg);
    let text = vec![day_text(&mut rng, 0, [true, false, true], 6), day_text(&mut rng, 1, [false; 3], 6)];
    let reference = predict(&store, &cfg, &x, &text, None).unwrap().0;
    for _ in 0..50 {
        let mut fuzzed = text.clone();
        for day in &mut fuzzed {
            for e in day.sources.iter_mut().filter(|e| !e.mask) {
                e.vector = (0..6).map(|_| rng.random_range(-1e6..1e6)).collect();
            }
        }
        assert_eq!(predict(&store, &cfg, &x, &fuzzed, None).unwrap().0, reference);
    }
}

#[test]
fn diagnostics_contracts_and_single_source_isolation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = toy_cfg(SourceSwitch::Reddit);
    let store = init_params(&cfg, 7).unwrap();
    assert!(store.contains("text.proj.reddit"));
    assert!(!store.contains("text.proj.news"));
    let x = input(&mut rng, &cfg);
    let text: Vec<DayText> = (0..2).map(|k| day_text(&mut rng, k, [true; 3], 6)).collect();
    let (a, diag) = predict(&store, &cfg, &x, &text, None).unwrap();
    let (b, _) = predict(&store, &cfg, &x, &text, None).unwrap();
    assert_eq!(a, b);
    assert!(!diag.nan);
    assert!(!diag.pi.is_empty());
    for p in &diag.pi {
        assert_eq!(p.sources, vec![Source::Reddit]);
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.slots.0 < p.slots.1 && p.slots.1 <= 96);
        assert!(p.slots.0 >= p.day * 48 && p.slots.1 <= (p.day + 1) * 48);
    }
    for g in &diag.gamma {
        assert_eq!(g.gamma, [0.0, 1.0, 0.0]);
    }
    // 8 segments, 4 per day: every position and channel is fused exactly once.
    assert_eq!(diag.pi.len(), 8 * 2);
}

#[test]
fn tune_memory_flag() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = toy_cfg(SourceSwitch::NoExt);
    let store = init_params(&cfg, 8).unwrap();
    let x = input(&mut rng, &cfg);
    let ex = random_matrix(&mut rng, 4, 16);
    let (plain, d0) = predict(&store, &cfg, &x, &[], None).unwrap();
    let (tuned, d1) = predict(&store, &cfg, &x, &[], Some(&ex)).unwrap();
    assert!(!d0.tune_memory && d1.tune_memory);
    assert_ne!(plain, tuned);
    assert!(predict(&store, &cfg, &x, &[], Some(&random_matrix(&mut rng, 4, 5))).is_err());
}

#[test]
fn loss_identities() {
    let tape = Tape::new();
    let y = Tensor::new(&[1, 3], vec![1.0, 2.0, 3.0]).unwrap();
    let gate = tape.var(&Tensor::new(&[1, 2], vec![0.25, 0.75]).unwrap());
    let h = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
    let lc = LossConfig::default();
    let l = loss(tape.var(&y), &y, &[gate], &lc).value().data()[0];
    assert!((l + lc.lambda_gamma * h).abs() < 1e-15);
    let added = LossConfig { entropy_bonus: false, ..lc.clone() };
    assert!((loss(tape.var(&y), &y, &[gate], &added).value().data()[0] - added.lambda_gamma * h).abs() < 1e-15);

    let yh = Tensor::new(&[1, 3], vec![1.5, 1.0, 3.0]).unwrap();
    let mae = (0.5 + 1.0 + 0.0) / 3.0;
    let p = tape.var(&yh).pinball(&y, 0.5).value().data()[0];
    assert!((p - mae / 2.0).abs() < 1e-15);

    let pure = LossConfig { lambda_tau: 0.0, lambda_gamma: 0.0, ..lc };
    let l = loss(tape.var(&yh), &y, &[gate], &pure).value().data()[0];
    assert!((l - (0.25 + 1.0 + 0.0) / 3.0).abs() < 1e-15);
}

#[test]
fn switches_share_backbone_initialization() {
    let s0 = init_params(&toy_cfg(SourceSwitch::NoExt), 9).unwrap().checksums();
    let s2 = init_params(&toy_cfg(SourceSwitch::Reddit), 9).unwrap().checksums();
    for (name, sum) in &s0 {
        assert_eq!(s2.get(name), Some(sum), "{name}");
    }
    for name in s2.keys().filter(|n| !s0.contains_key(*n)) {
        assert!(name.starts_with("text.") || name.starts_with("fusion."), "{name}");
    }
}

#[test]
fn small_model_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cfg = toy_cfg(SourceSwitch::All);
    let store = init_params(&cfg, 10).unwrap();
    let x = input(&mut rng, &cfg);
    let y = random_matrix(&mut rng, 1, 48);
    let text = vec![day_text(&mut rng, 0, [true, true, false], 6), day_text(&mut rng, 1, [true; 3], 6)];
    let run = |s: &ParamStore, x: &Tensor| {
        let tape = Tape::new();
        let ctx = Ctx::eval(&tape, s);
        let out = forward(&ctx, &cfg, x, &text, None).unwrap();
        loss(out.prediction, &y, &out.gates, &cfg.loss).value().data()[0]
    };
    let tape = Tape::new();
    let ctx = Ctx::eval(&tape, &store);
    let out = forward(&ctx, &cfg, &x, &text, None).unwrap();
    let g = loss(out.prediction, &y, &out.gates, &cfg.loss).backward().params();
    for name in ["text.proj.news", "fusion.l0.gate", "fusion.l0.wk", "fusion.l0.wo", "head.w"] {
        let n = store.get(name).unwrap().len();
        let entries: Vec<usize> = (0..n).step_by((n / 5).max(1)).collect();
        let num = numeric_param_gradient(&|s| run(s, &x), &store, name, &entries, 1e-6);
        let ana: Vec<f64> = entries.iter().map(|&i| g[name].data()[i]).collect();
        let err = relative_error(&ana, &num, 1e-10);
        assert!(err < 1e-4, "{name}: {err}");
    }
}
