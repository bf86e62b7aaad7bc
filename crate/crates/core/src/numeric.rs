//! Small vector kernels shared by the solvers.
//!
//! Reductions use Neumaier-compensated summation so results do not depend on
//! the magnitude ordering of the terms and stay reproducible run to run.

/// Compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn sum(values: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = NeumaierSum::new();
    for (x, y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.value()
}

pub fn norm2(v: &[f64]) -> f64 {
    // scale to avoid overflow on huge entries
    let scale = max_abs(v);
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let mut acc = NeumaierSum::new();
    for &x in v {
        let y = x / scale;
        acc.add(y * y);
    }
    scale * acc.value().sqrt()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    norm2(&sub(a, b))
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        sum(v) / v.len() as f64
    }
}

/// Spectral norm estimate of a linear map `A: R^cols -> R^rows` by power
/// iteration on `A^T A`.
///
/// Stops after `max_iters` steps or when the relative change of the estimate
/// falls below `rel_tol`.
pub fn power_norm<F, G>(cols: usize, apply: F, apply_t: G, max_iters: usize, rel_tol: f64) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if cols == 0 {
        return 0.0;
    }
    // deterministic start with mass on every coordinate
    let mut v: Vec<f64> = (0..cols)
        .map(|i| 1.0 + 0.01 * (i as f64 + 1.0).sqrt())
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut estimate = 0.0;
    for _ in 0..max_iters {
        let av = apply(&v);
        let sigma = norm2(&av);
        if sigma == 0.0 {
            return 0.0;
        }
        let mut w = apply_t(&av);
        let nw = norm2(&w);
        if nw == 0.0 {
            return sigma;
        }
        w.iter_mut().for_each(|x| *x /= nw);
        v = w;
        let change = (sigma - estimate).abs();
        estimate = sigma;
        if change <= rel_tol * sigma {
            break;
        }
    }
    // one final Rayleigh step on the converged direction
    estimate.max(norm2(&apply(&v)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum(&v), 2.0);
    }

    #[test]
    fn norm_of_tiny_and_huge_entries() {
        assert!((norm2(&[3e200, 4e200]) / 5e200 - 1.0).abs() < 1e-15);
        assert!((norm2(&[3e-200, 4e-200]) - 5e-200).abs() < 1e-214);
        assert_eq!(norm2(&[]), 0.0);
    }

    #[test]
    fn power_norm_diagonal() {
        let d = [3.0, -7.0, 2.0];
        let f = |v: &[f64]| v.iter().zip(&d).map(|(x, s)| x * s).collect::<Vec<_>>();
        let est = power_norm(3, f, f, 200, 1e-14);
        assert!((est - 7.0).abs() < 1e-9, "{est}");
    }
}
