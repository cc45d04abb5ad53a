use std::collections::BTreeMap;

use serde::Serialize;

use super::fusion::{build_text_memory, cross_modal_retrieve, projection_name, source_gate, TextMemory};
use super::{LossConfig, ModelConfig};
use crate::data::{DayText, NormStats, Source, WindowSample, SLOTS_PER_DAY};
use crate::error::{dim_err, Result};
use crate::numerics::{Ctx, Init, ParamStore, Tensor, Var};
use crate::stanhop::{self, coarse_pairs, encode, MemoryPlugin, Seq};

pub(crate) fn fusion_prefix(layer: usize) -> String {
    format!("fusion.l{layer}")
}

/// Backbone, decoder head and the text path for the configured sources.
/// Sources outside the switch get no parameters, so NoExt stores contain
/// none of the text path.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ParamStore> {
    cfg.validate()?;
    let mut store = ParamStore::default();
    stanhop::init_params(&mut store, &cfg.backbone, cfg.channels, cfg.t_in, seed)?;
    let d = cfg.backbone.d_model;
    for &s in cfg.switch.sources() {
        store.init(&projection_name(s), cfg.text_dim, d, Init::Xavier, seed);
    }
    if !cfg.switch.sources().is_empty() {
        for l in 0..cfg.backbone.e_layers {
            let p = fusion_prefix(l);
            for w in ["wq", "wk", "wv", "wo"] {
                store.init(&format!("{p}.{w}"), d, d, Init::Xavier, seed);
            }
            store.init(&format!("{p}.gate"), 2 * d, 3, Init::Xavier, seed);
            store.init(&format!("{p}.ln.gain"), 1, d, Init::Ones, seed);
            store.init(&format!("{p}.ln.bias"), 1, d, Init::Zeros, seed);
        }
    }
    store.init("head.w", cfg.head_width(), cfg.t_out, Init::Xavier, seed);
    store.init("head.b", 1, cfg.t_out, Init::Zeros, seed);
    Ok(store)
}

/// Retrieval weights of one backbone position over that day's text entries.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PiRecord {
    pub layer: usize,
    /// Window day index, oldest first.
    pub day: usize,
    pub step: usize,
    pub channel: usize,
    /// Window-relative half-hour slots `[start, end)` this position covers on `day`.
    pub slots: (usize, usize),
    pub sources: Vec<Source>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaRecord {
    pub layer: usize,
    pub day: usize,
    /// News, Reddit, Policy.
    pub gamma: [f64; 3],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FusionDiagnostics {
    pub pi: Vec<PiRecord>,
    pub gamma: Vec<GammaRecord>,
    /// Norm of each fused text context row.
    pub text_norms: Vec<f64>,
    pub tune_memory: bool,
    /// Set when the prediction holds NaN or ±∞.
    pub nan: bool,
}

pub struct ForwardOutput<'t> {
    /// `1 × T_out`, normalized units.
    pub prediction: Var<'t>,
    /// Gate weights of every fused (layer, day), over available sources.
    pub gates: Vec<Var<'t>>,
    pub diagnostics: FusionDiagnostics,
}

fn check_input(cfg: &ModelConfig, input: &Tensor) -> Result<()> {
    if input.shape() != [cfg.channels, cfg.t_in] {
        return dim_err(format!(
            "input is {:?}, model expects [{}, {}]",
            input.shape(),
            cfg.channels,
            cfg.t_in
        ));
    }
    Ok(())
}

fn decode<'t>(ctx: &Ctx<'t, '_>, s: Seq<'t>) -> Var<'t> {
    let (r, c) = s.z.shape();
    ctx.linear(s.z.reshape(1, r * c), "head")
}

/// The STanHop encoder and decoder head with no text path.
pub fn backbone_forward<'t>(ctx: &Ctx<'t, '_>, cfg: &ModelConfig, input: &Tensor) -> Result<Var<'t>> {
    check_input(cfg, input)?;
    let s = encode(ctx, input, &cfg.backbone, MemoryPlugin::None, None)?;
    Ok(decode(ctx, s))
}

struct Fusion<'a, 't, 's> {
    ctx: &'a Ctx<'t, 's>,
    cfg: &'a ModelConfig,
    memories: Vec<Option<TextMemory<'t>>>,
    /// First and last original segment covered by each current step.
    cover: Vec<(usize, usize)>,
    gates: Vec<Var<'t>>,
    diag: FusionDiagnostics,
}

impl<'t> Fusion<'_, 't, '_> {
    fn apply(&mut self, s: Seq<'t>, layer: usize) -> Seq<'t> {
        let seg = self.cfg.backbone.seg_len;
        let mut by_day: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (t, &(_, hi)) in self.cover.iter().enumerate().take(s.steps) {
            by_day.entry(((hi + 1) * seg - 1) / SLOTS_PER_DAY).or_default().push(t);
        }
        let prefix = fusion_prefix(layer);
        let beta = self.cfg.retrieval_beta();
        let c = s.channels;
        let mut parts = vec![s.z];
        let mut index: Vec<usize> = (0..s.steps * c).collect();
        let mut offset = s.steps * c;
        for (day, steps) in by_day {
            let Some(mem) = self.memories.get(day).and_then(Option::as_ref) else {
                continue;
            };
            let rows: Vec<usize> = steps.iter().flat_map(|&t| (0..c).map(move |ch| t * c + ch)).collect();
            let r = s.z.gather_rows(&rows);
            let gate = source_gate(self.ctx, r.mean_rows(), mem, &prefix, self.cfg.alpha);
            let (z_text, pi) = cross_modal_retrieve(self.ctx, r, gate.mixed, &prefix, beta, self.cfg.alpha);
            let ctxt = z_text.matmul(&self.ctx.p(&format!("{prefix}.wo")));
            let fused = self.ctx.layer_norm(r.add(&ctxt), &format!("{prefix}.ln"));

            let pi_v = pi.value();
            let zt = z_text.value();
            for (j, &row) in rows.iter().enumerate() {
                index[row] = offset + j;
                let (t, ch) = (row / c, row % c);
                let (lo, hi) = self.cover[t];
                let start = (lo * seg).max(day * SLOTS_PER_DAY);
                let end = ((hi + 1) * seg).min((day + 1) * SLOTS_PER_DAY);
                self.diag.pi.push(PiRecord {
                    layer,
                    day,
                    step: t,
                    channel: ch,
                    slots: (start, end),
                    sources: mem.sources.clone(),
                    weights: pi_v.row(j).to_vec(),
                });
                self.diag.text_norms.push(zt.row(j).iter().map(|v| v * v).sum::<f64>().sqrt());
            }
            self.diag.gamma.push(GammaRecord {
                layer,
                day,
                gamma: gate.simplex(mem),
            });
            self.gates.push(gate.weights);
            offset += rows.len();
            parts.push(fused);
        }

        let pairs = coarse_pairs(s.steps, self.cfg.backbone.coarsen_stride);
        if !pairs.is_empty() {
            self.cover = pairs
                .iter()
                .map(|&(a, b)| (self.cover[a].0.min(self.cover[b].0), self.cover[a].1.max(self.cover[b].1)))
                .collect();
        }
        if parts.len() == 1 {
            return s;
        }
        let all = self.ctx.tape.concat_rows(&parts);
        Seq::new(all.gather_rows(&index), s.steps, c)
    }
}

/// Full forward pass. `text` holds the window's daily memories, oldest
/// first; `exemplars` (rows × d) switches on the tune-memory plug-in.
pub fn forward<'t>(
    ctx: &Ctx<'t, '_>,
    cfg: &ModelConfig,
    input: &Tensor,
    text: &[DayText],
    exemplars: Option<&Tensor>,
) -> Result<ForwardOutput<'t>> {
    check_input(cfg, input)?;
    let plugin = match exemplars {
        Some(ex) => {
            if ex.shape().len() != 2 || ex.cols() != cfg.backbone.d_model {
                return dim_err(format!("exemplars must be rows × {}", cfg.backbone.d_model));
            }
            MemoryPlugin::Tune {
                base: None,
                labeled: Some(ctx.tape.constant(ex)),
            }
        }
        None => MemoryPlugin::None,
    };

    let memories: Vec<Option<TextMemory<'t>>> = if cfg.switch.sources().is_empty() {
        Vec::new()
    } else {
        if text.len() != cfg.input_days() {
            return dim_err(format!("{} text days for a {}-day window", text.len(), cfg.input_days()));
        }
        for day in text {
            for &src in cfg.switch.sources() {
                if let Some(v) = day.entry(src).signal() {
                    if v.len() != cfg.text_dim {
                        return dim_err(format!("{src} vector has {} dims, expected {}", v.len(), cfg.text_dim));
                    }
                }
            }
        }
        text.iter().map(|d| build_text_memory(ctx, d, cfg.switch)).collect()
    };

    let mut diagnostics = FusionDiagnostics {
        tune_memory: exemplars.is_some(),
        ..FusionDiagnostics::default()
    };
    let mut gates = Vec::new();
    let s = if memories.iter().all(Option::is_none) {
        encode(ctx, input, &cfg.backbone, plugin, None)?
    } else {
        let mut fusion = Fusion {
            ctx,
            cfg,
            memories,
            cover: (0..cfg.backbone.segments(cfg.t_in)).map(|j| (j, j)).collect(),
            gates: Vec::new(),
            diag: FusionDiagnostics::default(),
        };
        let mut hook = |s: Seq<'t>, layer: usize| fusion.apply(s, layer);
        let s = encode(ctx, input, &cfg.backbone, plugin, Some(&mut hook))?;
        diagnostics.pi = std::mem::take(&mut fusion.diag.pi);
        diagnostics.gamma = std::mem::take(&mut fusion.diag.gamma);
        diagnostics.text_norms = std::mem::take(&mut fusion.diag.text_norms);
        gates = fusion.gates;
        s
    };
    let prediction = decode(ctx, s);
    diagnostics.nan = !prediction.value().is_finite();
    Ok(ForwardOutput {
        prediction,
        gates,
        diagnostics,
    })
}

/// `MSE + λ_τ Σ_τ pinball_τ ∓ λ_γ · mean H(γ)`; the entropy term is
/// subtracted when `entropy_bonus` is set.
pub fn loss<'t>(prediction: Var<'t>, target: &Tensor, gates: &[Var<'t>], lc: &LossConfig) -> Var<'t> {
    let mut total = prediction.mse(target);
    if lc.lambda_tau != 0.0 {
        for &q in &lc.quantiles {
            total = total.add(&prediction.pinball(target, q).scale(lc.lambda_tau));
        }
    }
    if lc.lambda_gamma != 0.0 && !gates.is_empty() {
        let sign = if lc.entropy_bonus { -1.0 } else { 1.0 };
        let w = sign * lc.lambda_gamma / gates.len() as f64;
        for g in gates {
            total = total.add(&g.entropy().scale(w));
        }
    }
    total
}

/// Normalized `(input, target)` tensors of a sample.
pub fn sample_tensors(stats: &NormStats, s: &WindowSample) -> Result<(Tensor, Tensor)> {
    let ch = stats.input_channels(s)?;
    let (c, t) = (ch.len(), ch[0].len());
    let input = Tensor::new(&[c, t], ch.into_iter().flatten().collect())?;
    let y = stats.target(s)?;
    let target = Tensor::new(&[1, y.len()], y)?;
    Ok((input, target))
}
