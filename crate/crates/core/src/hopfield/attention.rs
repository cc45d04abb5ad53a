use crate::entmax::Alpha;
use crate::error::{dim_err, Result};
use crate::numerics::{Tape, Tensor, Var};

/// Sparse Hopfield attention on the tape:
/// `entmax_rows(β · (R W_Q)(Y W_K)ᵀ) · (Y W_V)`.
///
/// With `heads > 1` the projected features are split into equal column
/// slices, attended independently and concatenated. Returns the output and
/// the per-head weight matrices (`T × M` each).
#[allow(clippy::too_many_arguments)]
pub fn gsh_attend<'t>(
    r: Var<'t>,
    y: Var<'t>,
    wq: Var<'t>,
    wk: Var<'t>,
    wv: Var<'t>,
    beta: f64,
    alpha: Alpha,
    heads: usize,
) -> (Var<'t>, Vec<Var<'t>>) {
    let q = r.matmul(&wq);
    let k = y.matmul(&wk);
    let v = y.matmul(&wv);
    if heads <= 1 {
        let w = q.matmul(&k.transpose()).scale(beta).entmax_rows(alpha);
        return (w.matmul(&v), vec![w]);
    }
    let d = q.shape().1;
    assert_eq!(d % heads, 0, "width {d} not divisible by {heads} heads");
    let dh = d / heads;
    let mut outs = Vec::with_capacity(heads);
    let mut weights = Vec::with_capacity(heads);
    for h in 0..heads {
        let (s, e) = (h * dh, (h + 1) * dh);
        let qh = q.slice_cols(s, e);
        let kh = k.slice_cols(s, e);
        let vh = v.slice_cols(s, e);
        let w = qh.matmul(&kh.transpose()).scale(beta).entmax_rows(alpha);
        outs.push(w.matmul(&vh));
        weights.push(w);
    }
    (r.tape().concat_cols(&outs), weights)
}

/// Single-head sparse Hopfield attention on plain tensors.
///
/// `r: T×d` queries, `y: M×d` memories, projections `d×d`.
pub fn gsh_attention(
    r: &Tensor,
    y: &Tensor,
    wq: &Tensor,
    wk: &Tensor,
    wv: &Tensor,
    beta: f64,
    alpha: Alpha,
) -> Result<Tensor> {
    let d = r.cols();
    if r.shape().len() != 2 || y.shape().len() != 2 {
        return dim_err("gsh_attention expects 2-d queries and memories");
    }
    if y.cols() != d {
        return dim_err(format!("memory width {} vs query width {d}", y.cols()));
    }
    for (name, w) in [("W_Q", wq), ("W_K", wk), ("W_V", wv)] {
        if w.shape().len() != 2 || w.shape()[0] != d {
            return dim_err(format!("{name} must have {d} rows"));
        }
    }
    if wq.cols() != wk.cols() {
        return dim_err("W_Q and W_K must project to the same width");
    }
    let tape = Tape::new();
    let (out, _) = gsh_attend(
        tape.constant(r),
        tape.constant(y),
        tape.constant(wq),
        tape.constant(wk),
        tape.constant(wv),
        beta,
        alpha,
        1,
    );
    let v = out.value();
    Ok((*v).clone())
}
