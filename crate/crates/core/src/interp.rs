//! Uniform-grid interpolation, finite-difference weights and smooth cutoffs.

/// Finite-difference weights (Fornberg) for derivatives `0..=m` at `z` from
/// the nodes `x`. Entry `[d][j]` multiplies `f(x_j)` in the `d`-th derivative.
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Stencil of `len` consecutive nodes of a grid with `n + 1` nodes, as
/// centred on `k` as the grid allows.
pub fn window(n_nodes: usize, k: usize, len: usize) -> usize {
    let len = len.min(n_nodes);
    let half = len / 2;
    k.saturating_sub(half).min(n_nodes - len)
}

/// Weights for the `d`-th derivative at node `k` of a uniform grid (spacing
/// `h`, `n_nodes` nodes) using `len` nodes. Returns `(start, weights)`.
pub fn node_derivative_weights(n_nodes: usize, k: usize, h: f64, d: usize, len: usize) -> (usize, Vec<f64>) {
    let start = window(n_nodes, k, len);
    let len = len.min(n_nodes);
    let xs: Vec<f64> = (0..len).map(|j| (start + j) as f64 * h).collect();
    let w = fd_weights(k as f64 * h, &xs, d);
    (start, w[d].clone())
}

/// Six-point Lagrange interpolation weights at `r` for a uniform grid
/// `r_j = r0 + j h`, `j = 0..n_nodes`. Returns `(start, weights)`.
pub fn lagrange_weights(r: f64, r0: f64, h: f64, n_nodes: usize) -> (usize, Vec<f64>) {
    let len = 6.min(n_nodes);
    let u = (r - r0) / h;
    let k = u.floor().max(0.0) as usize;
    let start = (k + 1).saturating_sub(len / 2).min(n_nodes - len);
    let xs: Vec<f64> = (0..len).map(|j| (start + j) as f64).collect();
    let w = fd_weights(u, &xs, 0);
    (start, w[0].clone())
}

/// `C^∞` step: 0 for `x ≤ 0`, 1 for `x ≥ 1`.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_deriv(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        let da = a / (x * x);
        let db = -b / ((1.0 - x) * (1.0 - x));
        (da * (a + b) - a * (da + db)) / ((a + b) * (a + b))
    }
}

/// Temporal cutoff: 0 on `[0, τ] ∪ [T − τ, T]`, 1 on `[2τ, T − 2τ]`, smooth in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeCutoff {
    pub horizon: f64,
    pub margin: f64,
}

impl TimeCutoff {
    pub fn new(horizon: f64, margin: f64) -> Self {
        assert!(margin > 0.0 && 4.0 * margin < horizon, "cutoff margin must satisfy 0 < 4τ < T");
        Self { horizon, margin }
    }

    /// Default margin `τ = T/8`.
    pub fn standard(horizon: f64) -> Self {
        Self::new(horizon, horizon / 8.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        let tau = self.margin;
        smooth_step((t - tau) / tau) * smooth_step((self.horizon - tau - t) / tau)
    }
}

/// Spatial cutoff `χ(y/δ′)`: 1 for `|y| ≤ δ′/4`, 0 for `|y| ≥ δ′/2`.
pub fn tube_cutoff(y: f64, width: f64) -> f64 {
    let u = y.abs() / width;
    smooth_step((0.5 - u) / 0.25)
}

/// Derivatives `(χ, χ', χ'')` of [`tube_cutoff`] in `y`; the second derivative
/// is a central difference of the closed-form first derivative.
pub fn tube_cutoff_derivs(y: f64, width: f64) -> (f64, f64, f64) {
    let d1 = |y: f64| {
        let u = y.abs() / width;
        -smooth_step_deriv((0.5 - u) / 0.25) / (0.25 * width) * y.signum()
    };
    let h = 1e-5 * width;
    (tube_cutoff(y, width), d1(y), (d1(y + h) - d1(y - h)) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_polynomial_derivatives() {
        let xs: Vec<f64> = (0..7).map(|j| j as f64 * 0.1).collect();
        let w = fd_weights(0.23, &xs, 2);
        let f = |x: f64| x.powi(5) - 2.0 * x.powi(3) + x;
        let val: f64 = (0..7).map(|j| w[0][j] * f(xs[j])).sum();
        let d1: f64 = (0..7).map(|j| w[1][j] * f(xs[j])).sum();
        let d2: f64 = (0..7).map(|j| w[2][j] * f(xs[j])).sum();
        let z: f64 = 0.23;
        assert!((val - f(z)).abs() < 1e-13);
        assert!((d1 - (5.0 * z.powi(4) - 6.0 * z * z + 1.0)).abs() < 1e-10);
        assert!((d2 - (20.0 * z.powi(3) - 12.0 * z)).abs() < 1e-8);
    }

    #[test]
    fn lagrange_is_exact_for_quintics() {
        let h = 0.05;
        let n = 30;
        let f = |r: f64| 0.3 + r - r.powi(4) + 2.0 * r.powi(5);
        let vals: Vec<f64> = (0..n).map(|j| f(1.0 + j as f64 * h)).collect();
        for &r in &[1.0, 1.013, 1.5, 2.44, 1.0 + (n - 1) as f64 * h] {
            let (s, w) = lagrange_weights(r, 1.0, h, n);
            let v: f64 = w.iter().enumerate().map(|(j, w)| w * vals[s + j]).sum();
            assert!((v - f(r)).abs() < 1e-11, "r={r}");
        }
    }

    #[test]
    fn cutoffs_have_the_right_plateaus() {
        let c = TimeCutoff::standard(1.0);
        assert_eq!(c.value(0.05), 0.0);
        assert_eq!(c.value(0.3), 1.0);
        assert_eq!(c.value(0.74), 1.0);
        assert_eq!(c.value(0.9), 0.0);
        assert!(c.value(0.2) > 0.0 && c.value(0.2) < 1.0);
        assert_eq!(tube_cutoff(0.2, 1.0), 1.0);
        assert_eq!(tube_cutoff(0.6, 1.0), 0.0);
    }

    #[test]
    fn smooth_step_derivative_matches_difference() {
        for &x in &[0.1, 0.4, 0.77] {
            let h = 1e-6;
            let fd = (smooth_step(x + h) - smooth_step(x - h)) / (2.0 * h);
            assert!((fd - smooth_step_deriv(x)).abs() < 1e-8);
        }
    }
}
