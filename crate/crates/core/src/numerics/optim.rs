use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::tensor::Tensor;
use crate::error::{GraftError, Result};

pub type GradMap = BTreeMap<String, Tensor>;

/// A trainable tensor with its Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    m: Tensor,
    v: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let m = Tensor::zeros(value.shape());
        let v = Tensor::zeros(value.shape());
        Self { value, m, v }
    }

    pub fn first_moment(&self) -> &Tensor {
        &self.m
    }

    pub fn second_moment(&self) -> &Tensor {
        &self.v
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))` over a `fan_in × fan_out` matrix.
    Xavier,
    Normal(f64),
}

/// Named parameters plus optimizer state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
    step: u64,
}

/// Stable 64-bit seed derived from a run seed and a parameter name.
pub(crate) fn name_seed(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        self.params.insert(name.into(), Param::new(value));
    }

    /// Inserts a freshly initialized matrix. The draw depends only on
    /// `seed` and `name`, so adding other parameters never shifts it.
    pub fn init(&mut self, name: &str, rows: usize, cols: usize, init: Init, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(name_seed(seed, name));
        let n = rows * cols;
        let data: Vec<f64> = match init {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::Xavier => {
                let a = (6.0 / (rows + cols) as f64).sqrt();
                (0..n).map(|_| rng.random_range(-a..a)).collect()
            }
            Init::Normal(std) => (0..n)
                .map(|_| {
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    std * z
                })
                .collect(),
        };
        self.insert(name, Tensor::new(&[rows, cols], data).expect("positive extents"));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name).map(|p| &p.value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name).map(|p| &mut p.value)
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, p)| (k.as_str(), &p.value))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn num_scalars(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    /// SHA-256 of each parameter's little-endian bytes.
    pub fn checksums(&self) -> BTreeMap<String, String> {
        self.params
            .iter()
            .map(|(k, p)| {
                let mut h = Sha256::new();
                for v in p.value.data() {
                    h.update(v.to_le_bytes());
                }
                (k.clone(), hex::encode(h.finalize()))
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. Parameters absent from `grads` are left
/// untouched, moments included.
pub fn adam_step(store: &mut ParamStore, grads: &GradMap, cfg: &AdamConfig) -> Result<()> {
    for (name, g) in grads {
        let Some(p) = store.params.get(name) else {
            return Err(GraftError::Input(format!("gradient for unknown parameter {name}")));
        };
        if g.len() != p.value.len() {
            return Err(GraftError::Dimension(format!(
                "gradient for {name} has {} entries, parameter has {}",
                g.len(),
                p.value.len()
            )));
        }
        if !g.is_finite() {
            return Err(GraftError::Input(format!("non-finite gradient for {name}")));
        }
    }
    store.step += 1;
    let t = store.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (name, g) in grads {
        let p = store.params.get_mut(name).expect("checked above");
        let value = p.value.data_mut();
        let m = p.m.data_mut();
        let v = p.v.data_mut();
        for (i, &gi) in g.data().iter().enumerate() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let mh = m[i] / bc1;
            let vh = v[i] / bc2;
            value[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Rescales all gradients so their joint L2 norm is at most `threshold`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut GradMap, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(GraftError::Config(format!("clip threshold {threshold} must be positive")));
    }
    let norm = grads.values().map(Tensor::norm_sq).sum::<f64>().sqrt();
    if norm > threshold {
        let s = threshold / norm;
        for g in grads.values_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= s);
        }
    }
    Ok(norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grads_of(pairs: &[(&str, Vec<f64>)]) -> GradMap {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), Tensor::new(&[1, v.len()], v.clone()).unwrap()))
            .collect()
    }

    #[test]
    fn zero_gradient_leaves_fresh_parameters() {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::new(&[1, 2], vec![0.3, -0.1]).unwrap());
        let before = s.get("w").unwrap().clone();
        adam_step(&mut s, &grads_of(&[("w", vec![0.0, 0.0])]), &AdamConfig::default()).unwrap();
        assert_eq!(s.get("w").unwrap(), &before);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::scalar(2.0));
        let cfg = AdamConfig {
            lr: 1e-3,
            ..AdamConfig::default()
        };
        adam_step(&mut s, &grads_of(&[("w", vec![1.0])]), &cfg).unwrap();
        // m̂ = 1, v̂ = 1 → Δ = lr / (1 + eps)
        let moved = 2.0 - s.get("w").unwrap().data()[0];
        assert!((moved - 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_rejected_without_side_effects() {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::scalar(1.0));
        let err = adam_step(&mut s, &grads_of(&[("w", vec![f64::NAN])]), &AdamConfig::default());
        assert!(err.is_err());
        assert_eq!(s.step(), 0);
        assert_eq!(s.get("w").unwrap().data()[0], 1.0);
    }

    #[test]
    fn adam_runs_are_deterministic() {
        let run = || {
            let mut s = ParamStore::new();
            s.init("a", 3, 4, Init::Xavier, 7);
            for k in 0..10 {
                let g = grads_of(&[("a", (0..12).map(|i| ((i * k) as f64).sin()).collect())]);
                adam_step(&mut s, &g, &AdamConfig::default()).unwrap();
            }
            s
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn clip_examples() {
        let mut g = grads_of(&[("a", vec![0.3, 0.4])]);
        clip_global_norm(&mut g, 1.0).unwrap();
        assert_eq!(g["a"].data(), &[0.3, 0.4]);

        let mut g = grads_of(&[("a", vec![3.0, 4.0])]);
        let n = clip_global_norm(&mut g, 1.0).unwrap();
        assert_eq!(n, 5.0);
        assert!((g["a"].data()[0] - 0.6).abs() < 1e-15);
        assert!((g["a"].data()[1] - 0.8).abs() < 1e-15);

        assert!(clip_global_norm(&mut g, 0.0).is_err());
    }

    #[test]
    fn init_depends_only_on_seed_and_name() {
        let mut a = ParamStore::new();
        a.init("x", 2, 2, Init::Xavier, 1);
        let mut b = ParamStore::new();
        b.init("other", 5, 5, Init::Xavier, 1);
        b.init("x", 2, 2, Init::Xavier, 1);
        assert_eq!(a.get("x"), b.get("x"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn clipping_bounds_norm_and_is_idempotent(
                v in proptest::collection::vec(-100.0f64..100.0, 1..20),
                th in 0.01f64..10.0,
            ) {
                let mut g = grads_of(&[("a", v)]);
                clip_global_norm(&mut g, th).unwrap();
                let once = g.clone();
                let n = clip_global_norm(&mut g, th).unwrap();
                prop_assert!(n <= th + 1e-12);
                for (k, t) in &g {
                    prop_assert!(t.max_abs_diff(&once[k]) <= 1e-12 * th.max(1.0));
                }
            }
        }
    }
}
