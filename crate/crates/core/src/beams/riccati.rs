use crate::{Error, Result, C64};

/// Solution of the scalar Riccati equation `H′ + H² = F` on a uniform grid,
/// together with `∫_{r₀}^r H`.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub nodes: Vec<f64>,
    pub h: Vec<C64>,
    /// `∫_{r₀}^{r_k} H`.
    pub integral: Vec<C64>,
    pub f: Vec<f64>,
    pub anchor: usize,
}

fn rk4(f: &dyn Fn(f64) -> f64, r: f64, h: f64, s: (C64, C64)) -> (C64, C64) {
    let rhs = |r: f64, (hh, _): (C64, C64)| (f(r) - hh * hh, hh);
    let k1 = rhs(r, s);
    let k2 = rhs(r + h / 2.0, (s.0 + k1.0 * (h / 2.0), s.1));
    let k3 = rhs(r + h / 2.0, (s.0 + k2.0 * (h / 2.0), s.1));
    let k4 = rhs(r + h, (s.0 + k3.0 * h, s.1));
    (s.0 + (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (h / 6.0), s.1 + (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (h / 6.0))
}

fn interval(f: &dyn Fn(f64) -> f64, r: f64, h: f64, s: (C64, C64), tol: f64) -> Result<(C64, C64)> {
    let mut m = 1usize;
    let mut coarse = rk4(f, r, h, s);
    loop {
        let sub = h / (2 * m) as f64;
        let mut fine = s;
        for i in 0..2 * m {
            fine = rk4(f, r + i as f64 * sub, sub, fine);
        }
        if (fine.0 - coarse.0).norm() <= tol || m >= 4096 {
            if (fine.0 - coarse.0).norm() > tol {
                return Err(Error::Accuracy(format!("Riccati step control failed at r = {r}")));
            }
            return Ok(fine);
        }
        coarse = fine;
        m *= 2;
    }
}

/// Integrates `H′ = F − H²`, `H(r_anchor) = h0`, forwards and backwards over
/// the uniform grid `nodes`, halving substeps until a step-doubling estimate
/// falls below `tol` on every interval.
pub fn solve_riccati(f: &dyn Fn(f64) -> f64, h0: C64, nodes: &[f64], anchor: usize, tol: f64) -> Result<RiccatiSolution> {
    if !(h0.im > 0.0) {
        return Err(Error::Invalid(format!("Im H0 must be positive, got {}", h0.im)));
    }
    if nodes.len() < 2 || anchor >= nodes.len() {
        return Err(Error::Invalid("Riccati grid needs at least two nodes and a valid anchor".into()));
    }
    let n = nodes.len();
    let mut h = vec![C64::from(0.0); n];
    let mut integral = vec![C64::from(0.0); n];
    h[anchor] = h0;
    let mut s = (h0, C64::from(0.0));
    for k in anchor..n - 1 {
        s = interval(f, nodes[k], nodes[k + 1] - nodes[k], s, tol)?;
        h[k + 1] = s.0;
        integral[k + 1] = s.1;
    }
    s = (h0, C64::from(0.0));
    for k in (1..=anchor).rev() {
        s = interval(f, nodes[k], nodes[k - 1] - nodes[k], s, tol)?;
        h[k - 1] = s.0;
        integral[k - 1] = s.1;
    }
    let sol = RiccatiSolution { nodes: nodes.to_vec(), h, integral, f: nodes.iter().map(|r| f(*r)).collect(), anchor };
    if let Some(k) = sol.h.iter().position(|v| !(v.im > 0.0)) {
        return Err(Error::Accuracy(format!("Im H lost positivity at r = {}", nodes[k])));
    }
    Ok(sol)
}

impl RiccatiSolution {
    pub fn h0(&self) -> C64 {
        self.h[self.anchor]
    }

    /// `max_k |Im H(r_k) e^{2∫Re H} − Im H(r₀)|`.
    pub fn determinant_defect(&self) -> f64 {
        let h0 = self.h0().im;
        self.h.iter().zip(&self.integral).map(|(h, i)| (h.im * (2.0 * i.re).exp() - h0).abs()).fold(0.0, f64::max)
    }

    pub fn min_imag(&self) -> f64 {
        self.h.iter().map(|h| h.im).fold(f64::INFINITY, f64::min)
    }

    pub fn max_imag(&self) -> f64 {
        self.h.iter().map(|h| h.im).fold(0.0, f64::max)
    }

    /// Normalisation `c₀ = (Im H(r₀))^{1/4} / π^{1/4}`.
    pub fn c0(&self) -> f64 {
        (self.h0().im / std::f64::consts::PI).powf(0.25)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect()
    }

    #[test]
    fn flat_closed_form() {
        let nodes = grid(0.0, 3.0, 300);
        let sol = solve_riccati(&|_| 0.0, C64::new(0.0, 1.0), &nodes, 0, 1e-13).unwrap();
        for (r, h) in nodes.iter().zip(&sol.h) {
            assert!((h.re - r / (1.0 + r * r)).abs() < 1e-10);
            assert!((h.im - 1.0 / (1.0 + r * r)).abs() < 1e-10);
        }
        assert!(sol.determinant_defect() < 1e-10);
        assert!((sol.c0() - std::f64::consts::PI.powf(-0.25)).abs() < 1e-15);
        assert!((sol.c0() - 0.7511).abs() < 1e-4);
    }

    #[test]
    fn backward_from_midpoint() {
        let nodes = grid(0.0, 2.0, 200);
        let sol = solve_riccati(&|_| 0.0, C64::new(0.0, 1.0), &nodes, 100, 1e-13).unwrap();
        for (r, h) in nodes.iter().zip(&sol.h) {
            let u = r - 1.0;
            assert!((h - C64::new(u, 1.0) / (1.0 + u * u)).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_initial_value() {
        let nodes = grid(0.0, 1.0, 10);
        assert!(solve_riccati(&|_| 0.0, C64::new(1.0, -0.5), &nodes, 0, 1e-12).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn determinant_identity_and_positivity(a in -2.0f64..2.0, w in 0.5f64..4.0, re in -1.0f64..1.0, im in 0.2f64..3.0) {
            let f = move |r: f64| a * (w * r).cos();
            let nodes = grid(0.0, 2.5, 250);
            let sol = solve_riccati(&f, C64::new(re, im), &nodes, 0, 1e-12).unwrap();
            prop_assert!(sol.min_imag() > 0.0);
            prop_assert!(sol.determinant_defect() <= 1e-8 * im.max(1.0));
        }
    }
}
