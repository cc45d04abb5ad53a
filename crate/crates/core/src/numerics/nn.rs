use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::optim::ParamStore;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{dim_err, Result};

pub const LN_EPS: f64 = 1e-5;

/// Row-wise layer normalization of a plain tensor.
pub fn layer_norm(x: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor> {
    let d = x.cols();
    if x.is_empty() || d == 0 {
        return dim_err("layer_norm over an empty last axis");
    }
    if gain.len() != d || bias.len() != d {
        return dim_err(format!("layer_norm affine width must be {d}"));
    }
    let tape = Tape::new();
    let g = tape.constant(&gain.reshape(&[1, d])?);
    let b = tape.constant(&bias.reshape(&[1, d])?);
    let y = tape.constant(x).layer_norm(&g, &b, eps);
    let out = y.value().reshape(x.shape())?;
    Ok(out)
}

/// Forward-pass context: binds stored parameters onto a tape and owns the
/// dropout stream.
pub struct Ctx<'t, 's> {
    pub tape: &'t Tape,
    pub store: &'s ParamStore,
    training: bool,
    dropout: f64,
    frozen: bool,
    rng: RefCell<ChaCha8Rng>,
}

impl<'t, 's> Ctx<'t, 's> {
    /// Inference context: dropout disabled.
    pub fn eval(tape: &'t Tape, store: &'s ParamStore) -> Self {
        Self {
            tape,
            store,
            training: false,
            dropout: 0.0,
            frozen: false,
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(0)),
        }
    }

    /// Training context with inverted dropout at `rate`, masks drawn from `seed`.
    pub fn train(tape: &'t Tape, store: &'s ParamStore, rate: f64, seed: u64) -> Self {
        Self {
            tape,
            store,
            training: true,
            dropout: rate,
            frozen: false,
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    /// Parameters are bound as constants, so no gradient reaches them.
    pub fn frozen(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    /// Binds parameter `name`. Panics when the store lacks it.
    pub fn p(&self, name: &str) -> Var<'t> {
        let t = self
            .store
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"));
        if self.frozen {
            self.tape.constant(t)
        } else {
            self.tape.param(name, t)
        }
    }

    pub fn has(&self, name: &str) -> bool {
        self.store.contains(name)
    }

    pub fn dropout(&self, x: Var<'t>) -> Var<'t> {
        if !self.training || self.dropout <= 0.0 {
            return x;
        }
        let keep = 1.0 - self.dropout;
        let (r, c) = x.shape();
        let mut rng = self.rng.borrow_mut();
        let mask: Vec<f64> = (0..r * c)
            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        x.mul_const(Tensor::new(&[r, c], mask).expect("mask shape"))
    }

    /// `x · W + b` with parameters `{prefix}.w` and `{prefix}.b`.
    pub fn linear(&self, x: Var<'t>, prefix: &str) -> Var<'t> {
        let w = self.p(&format!("{prefix}.w"));
        let y = x.matmul(&w);
        let bname = format!("{prefix}.b");
        if self.has(&bname) {
            y.add_row(&self.p(&bname))
        } else {
            y
        }
    }

    pub fn layer_norm(&self, x: Var<'t>, prefix: &str) -> Var<'t> {
        let g = self.p(&format!("{prefix}.gain"));
        let b = self.p(&format!("{prefix}.bias"));
        x.layer_norm(&g, &b, LN_EPS)
    }

    /// Two-layer GELU feed-forward block.
    pub fn ffn(&self, x: Var<'t>, prefix: &str) -> Var<'t> {
        let h = self.linear(x, &format!("{prefix}.fc1")).gelu();
        let h = self.dropout(h);
        self.linear(h, &format!("{prefix}.fc2"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_row_normalizes_to_zero() {
        let x = Tensor::new(&[1, 3], vec![5.0; 3]).unwrap();
        let y = layer_norm(&x, &Tensor::full(&[3], 1.0), &Tensor::zeros(&[3]), LN_EPS).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn two_point_closed_form() {
        let x = Tensor::new(&[2], vec![1.0, 3.0]).unwrap();
        let y = layer_norm(&x, &Tensor::full(&[2], 1.0), &Tensor::zeros(&[2]), 1e-14).unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-12);
        assert!((y.data()[1] - 1.0).abs() < 1e-12);
        assert_eq!(y.shape(), &[2]);
    }

    #[test]
    fn affine_width_must_match() {
        let x = Tensor::zeros(&[2, 3]);
        assert!(layer_norm(&x, &Tensor::zeros(&[2]), &Tensor::zeros(&[3]), LN_EPS).is_err());
    }

    #[test]
    fn dropout_is_seeded_and_off_at_eval() {
        let mut store = ParamStore::new();
        store.insert("x", Tensor::full(&[4, 8], 1.0));
        let run = |seed| {
            let tape = Tape::new();
            let ctx = Ctx::train(&tape, &store, 0.5, seed);
            let v = ctx.dropout(ctx.p("x")).value();
            (*v).clone()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
        assert!(run(3).data().iter().all(|&v| v == 0.0 || v == 2.0));

        let tape = Tape::new();
        let ctx = Ctx::eval(&tape, &store);
        assert_eq!(*ctx.dropout(ctx.p("x")).value(), *store.get("x").unwrap());
    }
}
