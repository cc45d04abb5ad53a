use crate::data::{DayText, Source};
use crate::entmax::Alpha;
use crate::hopfield::gsh_attend;
use crate::numerics::{Ctx, Tensor, Var};

use super::SourceSwitch;

pub(crate) fn projection_name(s: Source) -> String {
    format!("text.proj.{s}")
}

/// One day's projected text entries, one row per available source.
#[derive(Clone, Debug)]
pub struct TextMemory<'t> {
    pub sources: Vec<Source>,
    pub entries: Var<'t>,
}

/// Projects every active, unmasked source of `day` to `d` and stacks the
/// rows. `None` when nothing is available.
pub fn build_text_memory<'t>(ctx: &Ctx<'t, '_>, day: &DayText, switch: SourceSwitch) -> Option<TextMemory<'t>> {
    let mut sources = Vec::new();
    let mut rows = Vec::new();
    for &src in switch.sources() {
        if let Some(v) = day.entry(src).signal() {
            let e = Tensor::new(&[1, v.len()], v.to_vec()).expect("nonempty row");
            rows.push(ctx.tape.constant(&e).matmul(&ctx.p(&projection_name(src))));
            sources.push(src);
        }
    }
    if rows.is_empty() {
        return None;
    }
    let entries = if rows.len() == 1 { rows[0] } else { ctx.tape.concat_rows(&rows) };
    Some(TextMemory { sources, entries })
}

/// Gate output: weights over the available sources and the rescaled memory.
#[derive(Clone, Debug)]
pub struct Gate<'t> {
    pub weights: Var<'t>,
    pub mixed: Var<'t>,
}

impl Gate<'_> {
    /// The weights scattered onto all three sources (absent sources get 0).
    pub fn simplex(&self, mem: &TextMemory<'_>) -> [f64; 3] {
        let w = self.weights.value();
        let mut out = [0.0; 3];
        for (s, v) in mem.sources.iter().zip(w.data()) {
            out[s.index()] = *v;
        }
        out
    }
}

/// `γ = entmax([R̄, Ȳ]·U)` restricted to the available sources, then each
/// memory row scaled by its gate weight. `U` is `{prefix}.gate` (`2d × 3`).
pub fn source_gate<'t>(
    ctx: &Ctx<'t, '_>,
    r_bar: Var<'t>,
    mem: &TextMemory<'t>,
    prefix: &str,
    alpha: Alpha,
) -> Gate<'t> {
    let y_bar = mem.entries.mean_rows();
    let scores = ctx
        .tape
        .concat_cols(&[r_bar, y_bar])
        .matmul(&ctx.p(&format!("{prefix}.gate")));
    let idx: Vec<usize> = mem.sources.iter().map(|s| s.index()).collect();
    let avail = scores.transpose().gather_rows(&idx).transpose();
    let weights = avail.entmax_rows(alpha);
    let d = mem.entries.shape().1;
    let spread = weights.transpose().matmul(&ctx.tape.constant(&Tensor::full(&[1, d], 1.0)));
    Gate {
        weights,
        mixed: spread.mul(&mem.entries),
    }
}

/// `π = entmax(β (R W_Q)(Ỹ W_K)ᵀ)`, `Z_text = π (Ỹ W_V)`. Returns `(Z_text, π)`.
pub fn cross_modal_retrieve<'t>(
    ctx: &Ctx<'t, '_>,
    r: Var<'t>,
    mixed: Var<'t>,
    prefix: &str,
    beta: f64,
    alpha: Alpha,
) -> (Var<'t>, Var<'t>) {
    let (z, mut w) = gsh_attend(
        r,
        mixed,
        ctx.p(&format!("{prefix}.wq")),
        ctx.p(&format!("{prefix}.wk")),
        ctx.p(&format!("{prefix}.wv")),
        beta,
        alpha,
        1,
    );
    (z, w.remove(0))
}
