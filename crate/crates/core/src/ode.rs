//! Fixed-step classical Runge-Kutta integration.

use alloc::vec::Vec;

/// Integrates `x' = f(x)` from `x0` with `steps` fourth-order Runge-Kutta
/// steps of size `h`. Returns `steps + 1` states, the first being `x0`.
pub fn rk4<F>(f: F, x0: &[f64], h: f64, steps: usize) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    out.push(x.clone());
    let mut tmp = alloc::vec![0.0; n];
    for _ in 0..steps {
        let k1 = f(&x);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        let k2 = f(&tmp);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        let k3 = f(&tmp);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        let k4 = f(&tmp);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(x.clone());
    }
    out
}

/// Integrates with step `h` and keeps every `stride`-th state, so the
/// output grid has spacing `h * stride`.
pub fn rk4_sampled<F>(f: F, x0: &[f64], h: f64, stride: usize, samples: usize) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let stride = stride.max(1);
    let full = rk4(f, x0, h, (samples.saturating_sub(1)) * stride);
    full.into_iter().step_by(stride).take(samples).collect()
}
