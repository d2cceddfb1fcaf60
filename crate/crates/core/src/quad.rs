//! Quadrature, interpolation and root-finding helpers shared by the modules.

use crate::error::{Error, Result};
use roots::{find_root_brent, SimpleConvergency};

/// Adaptive integral of `f` over `[a, b]` (tanh-sinh, tolerant of algebraic
/// endpoint singularities).
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let out = quadrature::double_exponential::integrate(&f, a, b, abs_tol);
    let scale = out.integral.abs().max(1.0);
    if !out.integral.is_finite() || !(out.error_estimate <= 1e-6 * scale) {
        return Err(Error::Numeric(format!(
            "adaptive quadrature on [{a:e}, {b:e}] did not converge (value {:e}, error estimate {:e})",
            out.integral, out.error_estimate
        )));
    }
    Ok(out.integral)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Weights `w_k` with `∫_{x[j]}^{x[j+1]} p(x) dx = Σ w_k f(stencil_k)` where `p` is
/// the Lagrange interpolant through the stencil points.
pub(crate) fn interval_weights(stencil: &[f64], a: f64, b: f64) -> Vec<f64> {
    let n = stencil.len();
    let mut weights = Vec::with_capacity(n);
    for k in 0..n {
        // coefficients of prod_{m != k} (x - x_m) / (x_k - x_m), shifted to origin a
        let mut coef = vec![1.0];
        let mut denom = 1.0;
        for (m, &xm) in stencil.iter().enumerate() {
            if m == k {
                continue;
            }
            denom *= stencil[k] - xm;
            let shift = xm - a;
            let mut next = vec![0.0; coef.len() + 1];
            for (p, &c) in coef.iter().enumerate() {
                next[p + 1] += c;
                next[p] -= c * shift;
            }
            coef = next;
        }
        let h = b - a;
        let mut integral = 0.0;
        let mut hp = h;
        for (p, &c) in coef.iter().enumerate() {
            integral += c * hp / (p + 1) as f64;
            hp *= h;
        }
        weights.push(integral / denom);
    }
    weights
}

/// Lagrange interpolation through the given points, evaluated at `x`.
pub(crate) fn lagrange_eval(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut sum = 0.0;
    for k in 0..xs.len() {
        let mut l = 1.0;
        for m in 0..xs.len() {
            if m != k {
                l *= (x - xs[m]) / (xs[k] - xs[m]);
            }
        }
        sum += l * ys[k];
    }
    sum
}

/// Fritsch–Carlson monotone cubic interpolant; preserves monotonicity and sign
/// of the data between nodes.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
        let mut d = vec![0.0; n];
        d[0] = delta[0];
        d[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                let h0 = x[i] - x[i - 1];
                let h1 = x[i + 1] - x[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        for i in 0..n - 1 {
            if delta[i] == 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
            }
        }
        Self { x: x.to_vec(), y: y.to_vec(), d }
    }

    /// Value at `t`; outside the node range the end values are held constant.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.x.partition_point(|&xi| xi <= t) - 1;
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

/// Cubic Hermite interpolation on `[x0, x1]` from values and derivatives.
pub(crate) fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> (f64, f64) {
    let h = x1 - x0;
    let s = (t - x0) / h;
    let (s2, s3) = (s * s, s * s * s);
    let y = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1;
    let dy = (6.0 * s2 - 6.0 * s) / h * y0
        + (3.0 * s2 - 4.0 * s + 1.0) * d0
        + (-6.0 * s2 + 6.0 * s) / h * y1
        + (3.0 * s2 - 2.0 * s) * d1;
    (y, dy)
}

/// Least-squares fit of `ln y = slope · ln x + intercept`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// `n` logarithmically spaced points covering `[lo, hi]`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Brent root of `f` bracketed by `[a, b]`, converged to `tol` in both x and f.
pub fn brent<F: FnMut(f64) -> f64>(a: f64, b: f64, f: F, tol: f64) -> Result<f64> {
    let mut conv = SimpleConvergency { eps: tol, max_iter: 400 };
    find_root_brent(a, b, f, &mut conv)
        .map_err(|e| Error::Numeric(format!("root search in [{a:e}, {b:e}] failed: {e:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((int - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn interval_weights_are_simpson_like_on_uniform_stencil() {
        let w = interval_weights(&[0.0, 1.0, 2.0, 3.0], 1.0, 2.0);
        let expect = [-1.0 / 24.0, 13.0 / 24.0, 13.0 / 24.0, -1.0 / 24.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn monotone_cubic_stays_nonnegative() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 1.0, 0.0, 0.0, 0.0];
        let m = MonotoneCubic::new(&x, &y);
        for i in 0..=400 {
            assert!(m.eval(i as f64 * 0.01) >= 0.0);
        }
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let v = adaptive(|x: f64| x.sqrt(), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let xs = logspace(1e-3, 1e3, 20);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(1.4)).collect();
        let (s, c) = fit_power_law(&xs, &ys);
        assert!((s - 1.4).abs() < 1e-12);
        assert!((c.exp() - 3.0).abs() < 1e-10);
    }
}
