//! Gauss–Legendre rules and composite rules on uniform grids.

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
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

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` panels of `order` points.
pub fn composite_gauss(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(mid + 0.5 * h * xi);
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

/// Composite Simpson weights for `n` (even) intervals of width `h`.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2 && n % 2 == 0, "Simpson needs an even number of intervals");
    let mut w = vec![0.0; n + 1];
    for (k, wk) in w.iter_mut().enumerate() {
        *wk = h / 3.0
            * if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
    }
    w
}

/// Weights of a fourth-order rule for `∫_{r_k}^{r_{k+1}} f` on a uniform grid
/// with `n ≥ 3` intervals. Returns `(first node index, four weights)`.
pub fn interval_weights(n: usize, k: usize, h: f64) -> (usize, [f64; 4]) {
    assert!(n >= 3 && k < n);
    let s = h / 24.0;
    if k == 0 {
        (0, [9.0 * s, 19.0 * s, -5.0 * s, s])
    } else if k == n - 1 {
        (n - 3, [s, -5.0 * s, 19.0 * s, 9.0 * s])
    } else {
        (k - 1, [-s, 13.0 * s, 13.0 * s, -s])
    }
}

/// Node weights of the full-interval rule obtained by summing [`interval_weights`].
pub fn fourth_order_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    for k in 0..n {
        let (start, iw) = interval_weights(n, k, h);
        for j in 0..4 {
            w[start + j] += iw[j];
        }
    }
    w
}
