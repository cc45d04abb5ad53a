use crate::entmax::{self, Alpha};
use crate::error::{dim_err, GraftError, Result};
use crate::numerics::Tensor;

/// Stored patterns `Ξ ∈ ℝ^{d×M}` (one pattern per column) with inverse
/// temperature `β` and sparsity `α`.
#[derive(Clone, Debug)]
pub struct MemoryBank {
    patterns: Tensor,
    // row μ holds ξ_μ
    rows: Vec<Vec<f64>>,
    beta: f64,
    alpha: Alpha,
}

/// States and energies visited by [`MemoryBank::retrieve`].
#[derive(Clone, Debug)]
pub struct RetrievalTrace {
    pub states: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl RetrievalTrace {
    /// Steps whose energy rose by more than `slack`.
    pub fn descent_violations(&self, slack: f64) -> usize {
        self.energies
            .windows(2)
            .filter(|w| w[1] > w[0] + slack)
            .count()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trace holds the initial state")
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl MemoryBank {
    pub fn new(patterns: Tensor, beta: f64, alpha: Alpha) -> Result<Self> {
        if patterns.shape().len() != 2 {
            return dim_err("pattern matrix must be d×M");
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(GraftError::Config(format!("beta {beta} must be positive")));
        }
        if !patterns.is_finite() {
            return Err(GraftError::Input("non-finite pattern".into()));
        }
        let t = patterns.transpose();
        let rows = (0..t.rows()).map(|i| t.row(i).to_vec()).collect();
        Ok(Self {
            patterns,
            rows,
            beta,
            alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.patterns.shape()[0]
    }

    pub fn len(&self) -> usize {
        self.patterns.shape()[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn patterns(&self) -> &Tensor {
        &self.patterns
    }

    pub fn pattern(&self, mu: usize) -> &[f64] {
        &self.rows[mu]
    }

    pub fn with_alpha(&self, alpha: Alpha) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.patterns.clone(), beta, self.alpha)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return dim_err(format!("state has {} entries, patterns have {}", x.len(), self.dim()));
        }
        Ok(())
    }

    /// `β Ξᵀ x`.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|xi| self.beta * xi.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    /// Retrieval weights `entmax(β Ξᵀ x, α)`.
    pub fn weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(entmax::entmax(&self.scores(x), self.alpha)?.into_vec())
    }

    fn combine(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (wi, xi) in w.iter().zip(&self.rows) {
            if *wi != 0.0 {
                out.iter_mut().zip(xi).for_each(|(o, v)| *o += wi * v);
            }
        }
        out
    }

    /// `H(x) = −Ψ*_α(β Ξᵀ x) + ½⟨x, x⟩`.
    pub fn energy(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let conj = entmax::conjugate_value(&self.scores(x), self.alpha)?;
        Ok(-conj + 0.5 * x.iter().map(|v| v * v).sum::<f64>())
    }

    /// One update `x′ = Ξ · entmax(β Ξᵀ x, α)`.
    pub fn retrieve_step(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w = self.weights(x)?;
        Ok(self.combine(&w))
    }

    /// The same update with softmax weights at the same `β`.
    pub fn dense_step(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.with_alpha(Alpha::SOFTMAX).retrieve_step(x)
    }

    /// Iterates [`Self::retrieve_step`] until successive states are closer
    /// than `tol` or `max_iters` updates have run.
    pub fn retrieve(&self, x0: &[f64], max_iters: usize, tol: f64) -> Result<RetrievalTrace> {
        if max_iters == 0 || !(tol > 0.0) {
            return Err(GraftError::Config("retrieve needs max_iters ≥ 1 and tol > 0".into()));
        }
        self.check(x0)?;
        let mut states = vec![x0.to_vec()];
        let mut energies = vec![self.energy(x0)?];
        let mut converged = false;
        let mut iterations = 0;
        while iterations < max_iters {
            let cur = states.last().expect("non-empty");
            let next = self.retrieve_step(cur)?;
            let moved = dist(&next, cur);
            energies.push(self.energy(&next)?);
            states.push(next);
            iterations += 1;
            if moved < tol {
                converged = true;
                break;
            }
        }
        Ok(RetrievalTrace {
            states,
            energies,
            converged,
            iterations,
        })
    }

    /// Half the smallest pairwise distance between stored patterns.
    pub fn separation_radius(&self) -> Result<f64> {
        if self.len() < 2 {
            return Err(GraftError::Input(
                "separation radius needs at least two patterns".into(),
            ));
        }
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                best = best.min(dist(&self.rows[i], &self.rows[j]));
            }
        }
        Ok(0.5 * best)
    }

    /// `‖x − ξ_μ‖₂`.
    pub fn distance_to(&self, x: &[f64], mu: usize) -> f64 {
        dist(x, &self.rows[mu])
    }
}
