use log::warn;

use super::{Seq, StanhopConfig};
use crate::error::{dim_err, Result};
use crate::hopfield::gsh_attend;
use crate::numerics::{Ctx, Init, ParamStore, Tensor, Var};

/// Sub-operation markers recorded by [`stanhop_block`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    TimeGsh,
    SeriesGsh,
    PlugMemory,
    TuneMemory,
    Hook,
    CoarseGrain,
}

/// External memory attached to a block.
#[derive(Clone, Copy, Debug)]
pub enum MemoryPlugin<'t> {
    None,
    Plug(Var<'t>),
    Tune {
        base: Option<Var<'t>>,
        labeled: Option<Var<'t>>,
    },
}

/// Runs after the memory plug-in and before coarse-graining; receives the
/// state and the layer index.
pub type BlockHook<'a, 't> = dyn FnMut(Seq<'t>, usize) -> Seq<'t> + 'a;

fn init_attn(store: &mut ParamStore, prefix: &str, d: usize, seed: u64) {
    for w in ["wq", "wk", "wv"] {
        store.init(&format!("{prefix}.{w}"), d, d, Init::Xavier, seed);
    }
}

fn init_ln(store: &mut ParamStore, prefix: &str, d: usize, seed: u64) {
    store.init(&format!("{prefix}.gain"), 1, d, Init::Ones, seed);
    store.init(&format!("{prefix}.bias"), 1, d, Init::Zeros, seed);
}

pub(crate) fn init_ffn(store: &mut ParamStore, prefix: &str, d: usize, d_ff: usize, seed: u64) {
    store.init(&format!("{prefix}.fc1.w"), d, d_ff, Init::Xavier, seed);
    store.init(&format!("{prefix}.fc1.b"), 1, d_ff, Init::Zeros, seed);
    store.init(&format!("{prefix}.fc2.w"), d_ff, d, Init::Xavier, seed);
    store.init(&format!("{prefix}.fc2.b"), 1, d, Init::Zeros, seed);
}

pub(crate) fn layer_prefix(layer: usize) -> String {
    format!("stanhop.l{layer}")
}

/// Creates every backbone parameter for `channels` input series of length `t_in`.
pub fn init_params(
    store: &mut ParamStore,
    cfg: &StanhopConfig,
    channels: usize,
    t_in: usize,
    seed: u64,
) -> Result<()> {
    cfg.validate(t_in)?;
    let d = cfg.d_model;
    store.init("embed.w", cfg.seg_len, d, Init::Xavier, seed);
    store.init("embed.b", 1, d, Init::Zeros, seed);
    store.init("embed.pos", cfg.segments(t_in), d, Init::Normal(0.1), seed);
    store.init("embed.chan", channels, d, Init::Normal(0.1), seed);
    for l in 0..cfg.e_layers {
        let p = layer_prefix(l);
        init_attn(store, &format!("{p}.time.attn"), d, seed);
        init_ln(store, &format!("{p}.time.ln1"), d, seed);
        init_ffn(store, &format!("{p}.time.ffn"), d, cfg.d_ff, seed);
        init_ln(store, &format!("{p}.time.ln2"), d, seed);

        store.init(&format!("{p}.series.proto"), cfg.pool_k, d, Init::Normal(0.5), seed);
        init_attn(store, &format!("{p}.series.pool"), d, seed);
        init_attn(store, &format!("{p}.series.unpool"), d, seed);
        init_ln(store, &format!("{p}.series.ln1"), d, seed);
        init_ffn(store, &format!("{p}.series.ffn"), d, cfg.d_ff, seed);
        init_ln(store, &format!("{p}.series.ln2"), d, seed);

        init_attn(store, &format!("{p}.plug"), d, seed);
        init_ln(store, &format!("{p}.plug.ln"), d, seed);
        init_attn(store, &format!("{p}.tune"), d, seed);
        init_ffn(store, &format!("{p}.tune.ffn"), d, cfg.d_ff, seed);
        init_ln(store, &format!("{p}.tune.ln"), d, seed);

        store.init(&format!("{p}.cg.w"), 2 * d, d, Init::Xavier, seed);
        store.init(&format!("{p}.cg.b"), 1, d, Init::Zeros, seed);
    }
    Ok(())
}

fn attend<'t>(
    ctx: &Ctx<'t, '_>,
    r: Var<'t>,
    y: Var<'t>,
    prefix: &str,
    cfg: &StanhopConfig,
) -> Var<'t> {
    gsh_attend(
        r,
        y,
        ctx.p(&format!("{prefix}.wq")),
        ctx.p(&format!("{prefix}.wk")),
        ctx.p(&format!("{prefix}.wv")),
        cfg.beta(),
        cfg.alpha,
        cfg.n_heads,
    )
    .0
}

/// Residual + norm + feed-forward + norm around an update `u` of `z`.
fn post_block<'t>(ctx: &Ctx<'t, '_>, z: Var<'t>, u: Var<'t>, prefix: &str) -> Var<'t> {
    let z1 = ctx.layer_norm(z.add(&ctx.dropout(u)), &format!("{prefix}.ln1"));
    let f = ctx.ffn(z1, &format!("{prefix}.ffn"));
    ctx.layer_norm(z1.add(&ctx.dropout(f)), &format!("{prefix}.ln2"))
}

/// Turns `channels × t_in` raw series into segment tokens `(t_in/seg_len) × C × D`.
pub fn embed_segments<'t>(
    ctx: &Ctx<'t, '_>,
    x: &Tensor,
    cfg: &StanhopConfig,
) -> Result<Seq<'t>> {
    if x.shape().len() != 2 {
        return dim_err("input must be channels × steps");
    }
    let (c, t_in) = (x.rows(), x.cols());
    if t_in % cfg.seg_len != 0 {
        return dim_err(format!("T_in {t_in} not a multiple of seg_len {}", cfg.seg_len));
    }
    let n_seg = t_in / cfg.seg_len;
    let mut data = Vec::with_capacity(t_in * c);
    let mut pos_idx = Vec::with_capacity(n_seg * c);
    let mut chan_idx = Vec::with_capacity(n_seg * c);
    for t in 0..n_seg {
        for ch in 0..c {
            data.extend_from_slice(&x.row(ch)[t * cfg.seg_len..(t + 1) * cfg.seg_len]);
            pos_idx.push(t);
            chan_idx.push(ch);
        }
    }
    let segs = Tensor::new(&[n_seg * c, cfg.seg_len], data)?;
    let pos = ctx.p("embed.pos");
    if pos.shape().0 < n_seg {
        return dim_err(format!("positional table has {} rows, need {n_seg}", pos.shape().0));
    }
    let chan = ctx.p("embed.chan");
    if chan.shape().0 < c {
        return dim_err(format!("channel table has {} rows, need {c}", chan.shape().0));
    }
    let z = ctx
        .linear(ctx.tape.constant(&segs), "embed")
        .add(&pos.gather_rows(&pos_idx))
        .add(&chan.gather_rows(&chan_idx));
    Ok(Seq::new(z, n_seg, c))
}

/// Self-retrieval along time, independently per channel, then residual,
/// layer norm and feed-forward.
pub fn time_gsh<'t>(ctx: &Ctx<'t, '_>, s: Seq<'t>, prefix: &str, cfg: &StanhopConfig) -> Seq<'t> {
    let attn = format!("{prefix}.attn");
    let mut outs = Vec::with_capacity(s.channels);
    for c in 0..s.channels {
        let xc = s.z.gather_rows(&s.channel_rows(c));
        outs.push(attend(ctx, xc, xc, &attn, cfg));
    }
    // channel-major back to time-major
    let stacked = ctx.tape.concat_rows(&outs);
    let perm: Vec<usize> = (0..s.steps * s.channels)
        .map(|row| {
            let (t, c) = (row / s.channels, row % s.channels);
            c * s.steps + t
        })
        .collect();
    let u = if s.channels == 1 { stacked } else { stacked.gather_rows(&perm) };
    Seq::new(post_block(ctx, s.z, u, prefix), s.steps, s.channels)
}

/// Prototype pooling: `K` learnable queries attend over the channels of one
/// time step (`C × D`), giving `K × D`.
pub fn series_pool<'t>(ctx: &Ctx<'t, '_>, xt: Var<'t>, prefix: &str, cfg: &StanhopConfig) -> Var<'t> {
    let proto = ctx.p(&format!("{prefix}.proto"));
    attend(ctx, proto, xt, &format!("{prefix}.pool"), cfg)
}

/// Cross-channel retrieval: pool channels into prototypes, let the channels
/// query the pooled summary, then residual, layer norm and feed-forward.
pub fn series_gsh<'t>(ctx: &Ctx<'t, '_>, s: Seq<'t>, prefix: &str, cfg: &StanhopConfig) -> Seq<'t> {
    let unpool = format!("{prefix}.unpool");
    let mut outs = Vec::with_capacity(s.steps);
    for t in 0..s.steps {
        let xt = s.z.rows_range(t * s.channels, (t + 1) * s.channels);
        let pooled = series_pool(ctx, xt, prefix, cfg);
        outs.push(attend(ctx, xt, pooled, &unpool, cfg));
    }
    let u = ctx.tape.concat_rows(&outs);
    Seq::new(post_block(ctx, s.z, u, prefix), s.steps, s.channels)
}

/// `LN(R + GSH(R, Y))`. Without memory returns `LN(R)` and `true`.
pub fn plug_memory<'t>(
    ctx: &Ctx<'t, '_>,
    r: Var<'t>,
    y: Option<Var<'t>>,
    prefix: &str,
    cfg: &StanhopConfig,
) -> (Var<'t>, bool) {
    let ln = format!("{prefix}.ln");
    match y {
        Some(y) => {
            let g = attend(ctx, r, y, prefix, cfg);
            (ctx.layer_norm(r.add(&g), &ln), false)
        }
        None => (ctx.layer_norm(r, &ln), true),
    }
}

/// `LN(FFN(GSH(R̃, Y ⊕ Y_label)) + R̃)`. Without any memory returns `LN(R̃)`
/// and `true`.
pub fn tune_memory<'t>(
    ctx: &Ctx<'t, '_>,
    r: Var<'t>,
    base: Option<Var<'t>>,
    labeled: Option<Var<'t>>,
    prefix: &str,
    cfg: &StanhopConfig,
) -> (Var<'t>, bool) {
    let ln = format!("{prefix}.ln");
    let mem = match (base, labeled) {
        (Some(a), Some(b)) => ctx.tape.concat_rows(&[a, b]),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => return (ctx.layer_norm(r, &ln), true),
    };
    let ret = attend(ctx, r, mem, prefix, cfg);
    let mix = ctx.ffn(ret, &format!("{prefix}.ffn")).add(&r);
    (ctx.layer_norm(mix, &ln), false)
}

/// The `(t, t + Δ)` step pairs merged by [`coarse_grain`], in output order.
/// Empty when `steps < 2Δ`.
pub fn coarse_pairs(steps: usize, delta: usize) -> Vec<(usize, usize)> {
    let block = 2 * delta;
    (0..steps / block)
        .flat_map(|b| (0..delta).map(move |k| (b * block + k, b * block + k + delta)))
        .collect()
}

/// Pairs step `t` with `t + Δ` inside non-overlapping blocks of `2Δ` steps,
/// concatenates features and projects back to `D`. Trailing steps that do
/// not fill a block are dropped; `T < 2Δ` is a no-op.
pub fn coarse_grain<'t>(ctx: &Ctx<'t, '_>, s: Seq<'t>, prefix: &str, delta: usize) -> Seq<'t> {
    let block = 2 * delta;
    if s.steps < block {
        warn!("coarse_grain: {} steps < {block}, skipping", s.steps);
        return s;
    }
    let blocks = s.steps / block;
    if s.steps % block != 0 {
        warn!("coarse_grain: dropping {} trailing steps", s.steps % block);
    }
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (a, b) in coarse_pairs(s.steps, delta) {
        for c in 0..s.channels {
            left.push(a * s.channels + c);
            right.push(b * s.channels + c);
        }
    }
    let pairs = ctx
        .tape
        .concat_cols(&[s.z.gather_rows(&left), s.z.gather_rows(&right)]);
    let out = ctx.linear(pairs, &format!("{prefix}.cg"));
    Seq::new(out, blocks * delta, s.channels)
}

/// TimeGSH → SeriesGSH → memory plug-in → optional hook → coarse-grain.
#[allow(clippy::too_many_arguments)]
pub fn stanhop_block<'t>(
    ctx: &Ctx<'t, '_>,
    s: Seq<'t>,
    layer: usize,
    cfg: &StanhopConfig,
    memory: MemoryPlugin<'t>,
    hook: Option<&mut BlockHook<'_, 't>>,
    mut trace: Option<&mut Vec<Stage>>,
) -> Seq<'t> {
    let mut mark = |st: Stage| {
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(st);
        }
    };
    let p = layer_prefix(layer);
    let s = time_gsh(ctx, s, &format!("{p}.time"), cfg);
    mark(Stage::TimeGsh);
    let s = series_gsh(ctx, s, &format!("{p}.series"), cfg);
    mark(Stage::SeriesGsh);
    let z = match memory {
        MemoryPlugin::None => plug_memory(ctx, s.z, None, &format!("{p}.plug"), cfg).0,
        MemoryPlugin::Plug(y) => plug_memory(ctx, s.z, Some(y), &format!("{p}.plug"), cfg).0,
        MemoryPlugin::Tune { base, labeled } => {
            let out = tune_memory(ctx, s.z, base, labeled, &format!("{p}.tune"), cfg).0;
            mark(Stage::TuneMemory);
            out
        }
    };
    if !matches!(memory, MemoryPlugin::Tune { .. }) {
        mark(Stage::PlugMemory);
    }
    let mut s = Seq::new(z, s.steps, s.channels);
    if let Some(h) = hook {
        s = h(s, layer);
        mark(Stage::Hook);
    }
    let s = coarse_grain(ctx, s, &p, cfg.coarsen_stride);
    mark(Stage::CoarseGrain);
    s
}

/// Embeds `x` (channels × T_in) and runs every block.
pub fn encode<'t>(
    ctx: &Ctx<'t, '_>,
    x: &Tensor,
    cfg: &StanhopConfig,
    memory: MemoryPlugin<'t>,
    mut hook: Option<&mut BlockHook<'_, 't>>,
) -> Result<Seq<'t>> {
    let mut s = embed_segments(ctx, x, cfg)?;
    for l in 0..cfg.e_layers {
        s = stanhop_block(ctx, s, l, cfg, memory, hook.as_deref_mut(), None);
    }
    Ok(s)
}
