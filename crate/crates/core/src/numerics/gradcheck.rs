//! Central finite-difference oracle for gradient tests.

use super::optim::ParamStore;
use super::tensor::Tensor;

/// Central-difference gradient of a scalar function of one tensor.
pub fn numeric_gradient(f: impl Fn(&Tensor) -> f64, x: &Tensor, h: f64) -> Tensor {
    let mut out = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let fp = f(&probe);
        probe.data_mut()[i] = orig - h;
        let fm = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (fp - fm) / (2.0 * h);
    }
    out
}

/// `‖a − b‖ / max(‖a‖ + ‖b‖, floor)` over matching entry lists.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / (na + nb).max(floor)
}

/// Central differences of `loss(store)` with respect to selected entries of
/// parameter `name`.
pub fn numeric_param_gradient(
    loss: &dyn Fn(&ParamStore) -> f64,
    store: &ParamStore,
    name: &str,
    entries: &[usize],
    h: f64,
) -> Vec<f64> {
    let mut probe = store.clone();
    entries
        .iter()
        .map(|&i| {
            let orig = probe.get(name).expect("parameter").data()[i];
            probe.get_mut(name).unwrap().data_mut()[i] = orig + h;
            let fp = loss(&probe);
            probe.get_mut(name).unwrap().data_mut()[i] = orig - h;
            let fm = loss(&probe);
            probe.get_mut(name).unwrap().data_mut()[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}
