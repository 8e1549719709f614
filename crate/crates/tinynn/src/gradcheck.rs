//! Central finite-difference oracle for gradient tests.
//!
//! Deliberately knows nothing about the backward passes it is used to check.

use crate::params::ParamStore;
use crate::tensor::Tensor2;

/// Step size `1e-5 * max(1, |theta|)`.
pub fn step_for(theta: f64) -> f64 {
    1e-5 * theta.abs().max(1.0)
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = step_for(x[i]);
        probe[i] = x[i] + h;
        let plus = f(&probe);
        probe[i] = x[i] - h;
        let minus = f(&probe);
        probe[i] = x[i];
        out.push((plus - minus) / (2.0 * h));
    }
    out
}

/// Central-difference gradient of `f` with respect to the named parameter.
pub fn numeric_param_grad(
    store: &ParamStore,
    name: &str,
    mut f: impl FnMut(&ParamStore) -> f64,
) -> Tensor2 {
    let base = store.get(name).expect("parameter exists").clone();
    let mut probe = store.clone();
    let mut out = Tensor2::zeros(base.rows(), base.cols());
    for i in 0..base.data().len() {
        let theta = base.data()[i];
        let h = step_for(theta);
        probe.get_mut(name).unwrap().data_mut()[i] = theta + h;
        let plus = f(&probe);
        probe.get_mut(name).unwrap().data_mut()[i] = theta - h;
        let minus = f(&probe);
        probe.get_mut(name).unwrap().data_mut()[i] = theta;
        out.data_mut()[i] = (plus - minus) / (2.0 * h);
    }
    out
}

/// Norm-wise relative error `|a - n| / max(|a|, |n|)`; zero when both vanish.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    let na = analytic.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
    let denom = na.max(nn);
    if denom < 1e-10 {
        diff
    } else {
        diff / denom
    }
}
