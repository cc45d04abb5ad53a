//! Exact α-EntMax, the Tsallis α-entropy and its convex conjugate.
//!
//! For `z ∈ ℝ^M` and `1 ≤ α ≤ 2`, α-EntMax solves
//! `argmax_{p ∈ Δ_M} ⟨p, z⟩ − Ψ_α(p)` with the Tsallis entropy
//!
//! ```text
//! Ψ_α(p) = 1/(α(α−1)) Σ (p_i − p_i^α)     α ≠ 1
//! Ψ_1(p) = −Σ p_i ln p_i
//! ```
//!
//! The solution has the threshold form `p_i = [(α−1) z_i − τ]_+^{1/(α−1)}`.
//! `α = 1` is softmax and `α = 2` is sparsemax (Euclidean projection onto the
//! simplex); both are computed in closed form. Every other `α` bisects on τ.

use crate::error::{GraftError, Result};

const BISECT_MAX_ITERS: usize = 200;
const BISECT_TOL: f64 = 1e-12;
const SIMPLEX_TOL: f64 = 1e-9;

/// Entropy index, restricted to `[1, 2]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub const SOFTMAX: Alpha = Alpha(1.0);
    pub const SPARSEMAX: Alpha = Alpha(2.0);

    pub fn new(value: f64) -> Result<Self> {
        if !(1.0..=2.0).contains(&value) {
            return Err(GraftError::Config(format!("alpha {value} outside [1, 2]")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Alpha {
    fn default() -> Self {
        Alpha(1.5)
    }
}

impl TryFrom<f64> for Alpha {
    type Error = GraftError;

    fn try_from(v: f64) -> Result<Self> {
        Alpha::new(v)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

/// A probability vector: nonnegative entries summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs)?;
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Number of strictly positive entries.
    pub fn support_size(&self) -> usize {
        self.0.iter().filter(|&&p| p > 0.0).count()
    }
}

fn check_simplex(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(GraftError::Dimension("empty probability vector".into()));
    }
    if p.iter().any(|&v| !v.is_finite() || v < -SIMPLEX_TOL) {
        return Err(GraftError::Input("negative or non-finite probability".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(GraftError::Input(format!("probabilities sum to {s}")));
    }
    Ok(())
}

fn check_scores(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(GraftError::Dimension("entmax over zero entries".into()));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(GraftError::Input("non-finite score".into()));
    }
    Ok(())
}

/// α-EntMax of `z`.
pub fn entmax(z: &[f64], alpha: Alpha) -> Result<SimplexVector> {
    check_scores(z)?;
    Ok(SimplexVector(entmax_unchecked(z, alpha)))
}

/// α-EntMax without input validation. `z` must be non-empty and finite.
pub(crate) fn entmax_unchecked(z: &[f64], alpha: Alpha) -> Vec<f64> {
    let a = alpha.value();
    if a == 1.0 {
        softmax(z)
    } else if a == 2.0 {
        sparsemax(z)
    } else {
        entmax_bisect(z, a)
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    out
}

/// Euclidean projection onto the simplex via the sorted-threshold rule.
pub(crate) fn sparsemax(z: &[f64]) -> Vec<f64> {
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = sorted[0] - 1.0;
    for (k, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if v > t {
            tau = t;
        } else {
            break;
        }
    }
    z.iter().map(|&v| (v - tau).max(0.0)).collect()
}

fn entmax_bisect(z: &[f64], a: f64) -> Vec<f64> {
    let am1 = a - 1.0;
    let inv = 1.0 / am1;
    let x: Vec<f64> = z.iter().map(|&v| v * am1).collect();
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = x.len() as f64;

    let mass = |tau: f64| -> f64 { x.iter().map(|&v| (v - tau).max(0.0).powf(inv)).sum() };

    // mass(lo) ≥ 1 ≥ mass(hi)
    let mut lo = max - 1.0;
    let mut hi = max - m.powf(-am1);
    for _ in 0..BISECT_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let f = mass(mid) - 1.0;
        if f.abs() < BISECT_TOL {
            lo = mid;
            hi = mid;
            break;
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    let mut p: Vec<f64> = x.iter().map(|&v| (v - tau).max(0.0).powf(inv)).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

/// Vector-Jacobian product of α-EntMax: given `p = entmax(z)` and the
/// upstream gradient `g = ∂L/∂p`, returns `∂L/∂z`.
///
/// With `s_i = p_i^{2−α}` on the support and 0 elsewhere,
/// `∂L/∂z = s ⊙ g − (⟨s, g⟩ / Σ s) s`.
pub fn entmax_backward(p: &[f64], grad_out: &[f64], alpha: Alpha) -> Vec<f64> {
    let a = alpha.value();
    let s: Vec<f64> = p
        .iter()
        .map(|&pi| {
            if pi <= 0.0 {
                0.0
            } else if a == 1.0 {
                pi
            } else if a == 2.0 {
                1.0
            } else {
                pi.powf(2.0 - a)
            }
        })
        .collect();
    let ssum: f64 = s.iter().sum();
    let dot: f64 = s.iter().zip(grad_out).map(|(si, gi)| si * gi).sum();
    let q = if ssum > 0.0 { dot / ssum } else { 0.0 };
    s.iter()
        .zip(grad_out)
        .map(|(si, gi)| si * (gi - q))
        .collect()
}

/// Tsallis α-entropy `Ψ_α(p)`.
pub fn tsallis_entropy(p: &[f64], alpha: Alpha) -> Result<f64> {
    check_simplex(p)?;
    Ok(tsallis_unchecked(p, alpha))
}

fn tsallis_unchecked(p: &[f64], alpha: Alpha) -> f64 {
    let a = alpha.value();
    if a == 1.0 {
        -p.iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| v * v.ln())
            .sum::<f64>()
    } else {
        p.iter()
            .map(|&v| {
                let v = v.max(0.0);
                v - v.powf(a)
            })
            .sum::<f64>()
            / (a * (a - 1.0))
    }
}

/// Convex conjugate `Ψ*_α(z) = max_p ⟨p, z⟩ + Ψ_α(p) = ⟨p*, z⟩ + Ψ_α(p*)`
/// with `p* = entmax(z, α)`, so that `∇Ψ*_α = entmax`.
pub fn conjugate_value(z: &[f64], alpha: Alpha) -> Result<f64> {
    check_scores(z)?;
    Ok(conjugate_unchecked(z, alpha))
}

pub(crate) fn conjugate_unchecked(z: &[f64], alpha: Alpha) -> f64 {
    if alpha.value() == 1.0 {
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    }
    let p = entmax_unchecked(z, alpha);
    let inner: f64 = p.iter().zip(z).map(|(a, b)| a * b).sum();
    inner + tsallis_unchecked(&p, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(v: f64) -> Alpha {
        Alpha::new(v).unwrap()
    }

    #[test]
    fn symmetric_softmax() {
        let p = entmax(&[0.0, 0.0], Alpha::SOFTMAX).unwrap();
        assert_eq!(p.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn sparsemax_fixtures() {
        let p = entmax(&[2.0, 1.0], Alpha::SPARSEMAX).unwrap();
        assert_eq!(p.probs(), &[1.0, 0.0]);
        let p = entmax(&[1.0, 0.8], Alpha::SPARSEMAX).unwrap();
        assert!((p.probs()[0] - 0.6).abs() < 1e-15);
        assert!((p.probs()[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn alpha_range_is_enforced() {
        assert!(Alpha::new(0.99).is_err());
        assert!(Alpha::new(2.01).is_err());
        assert!(Alpha::new(f64::NAN).is_err());
    }

    #[test]
    fn empty_and_non_finite_scores_rejected() {
        assert!(matches!(entmax(&[], a(1.5)), Err(GraftError::Dimension(_))));
        assert!(matches!(
            entmax(&[1.0, f64::INFINITY], a(1.5)),
            Err(GraftError::Input(_))
        ));
    }

    #[test]
    fn ties_get_equal_mass() {
        for al in [1.0, 1.25, 1.5, 2.0] {
            let p = entmax(&[0.3, 1.2, 1.2, -0.4], a(al)).unwrap();
            assert_eq!(p.probs()[1], p.probs()[2]);
        }
    }

    #[test]
    fn entropy_fixtures() {
        assert_eq!(tsallis_entropy(&[1.0, 0.0], a(1.0)).unwrap(), 0.0);
        assert_eq!(tsallis_entropy(&[1.0, 0.0], a(1.7)).unwrap(), 0.0);
        let h = tsallis_entropy(&[0.5, 0.5], a(1.0)).unwrap();
        assert!((h - std::f64::consts::LN_2).abs() < 1e-15);
        let h = tsallis_entropy(&[0.5, 0.5], a(2.0)).unwrap();
        assert!((h - 0.25).abs() < 1e-15);
        assert!(tsallis_entropy(&[0.6, 0.6], a(1.5)).is_err());
    }

    #[test]
    fn entropy_continuous_at_one() {
        let p = [0.2, 0.3, 0.5];
        let h1 = tsallis_entropy(&p, a(1.0)).unwrap();
        let h = tsallis_entropy(&p, a(1.0 + 1e-7)).unwrap();
        assert!((h - h1).abs() < 1e-6);
    }

    #[test]
    fn conjugate_fixtures() {
        let v = conjugate_value(&[0.0, 0.0], a(1.0)).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        for al in [1.0, 1.5, 2.0] {
            assert!((conjugate_value(&[3.25], a(al)).unwrap() - 3.25).abs() < 1e-15);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let z = [0.4, -0.2, 0.9, 0.1, 0.85];
        let g = [0.3, -1.0, 0.5, 2.0, -0.7];
        for al in [1.0, 1.5, 2.0] {
            let alpha = a(al);
            let p = entmax_unchecked(&z, alpha);
            let analytic = entmax_backward(&p, &g, alpha);
            let h = 1e-6;
            for i in 0..z.len() {
                let mut zp = z;
                zp[i] += h;
                let mut zm = z;
                zm[i] -= h;
                let fp: f64 = entmax_unchecked(&zp, alpha)
                    .iter()
                    .zip(&g)
                    .map(|(x, y)| x * y)
                    .sum();
                let fm: f64 = entmax_unchecked(&zm, alpha)
                    .iter()
                    .zip(&g)
                    .map(|(x, y)| x * y)
                    .sum();
                let fd = (fp - fm) / (2.0 * h);
                assert!((fd - analytic[i]).abs() < 1e-6, "alpha {al} i {i}");
            }
        }
    }
}
