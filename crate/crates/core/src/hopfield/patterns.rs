//! Pattern generators for experiments and tests.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::numerics::Tensor;

pub fn gaussian_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn unit_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, n);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `d × m` matrix with i.i.d. standard normal entries.
pub fn gaussian_patterns(rng: &mut impl Rng, d: usize, m: usize) -> Tensor {
    Tensor::new(&[d, m], gaussian_vec(rng, d * m)).expect("positive extents")
}

/// `d × m` matrix whose columns are independent random unit vectors.
pub fn unit_patterns(rng: &mut impl Rng, d: usize, m: usize) -> Tensor {
    columns_to_matrix(d, (0..m).map(|_| unit_vec(rng, d)).collect())
}

/// `d × m` matrix with orthonormal columns (`m ≤ d`), by Gram–Schmidt.
pub fn orthonormal_patterns(rng: &mut impl Rng, d: usize, m: usize) -> Tensor {
    assert!(m <= d, "cannot place {m} orthonormal vectors in {d} dimensions");
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    while cols.len() < m {
        let mut v = gaussian_vec(rng, d);
        for c in &cols {
            let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    columns_to_matrix(d, cols)
}

pub fn columns_to_matrix(d: usize, cols: Vec<Vec<f64>>) -> Tensor {
    let m = cols.len();
    let mut data = vec![0.0; d * m];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..d {
            data[i * m + j] = c[i];
        }
    }
    Tensor::new(&[d, m], data).expect("positive extents")
}
