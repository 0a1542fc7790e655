use super::riccati::{solve_riccati, RiccatiSolution};
use super::series::{eval3, mul, real};
use crate::geometry::FermiChart;
use crate::interp::node_derivative_weights;
use crate::{Error, Result, C64};

/// Initial data of the phase hierarchy at a grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseInit {
    /// Arc length of the anchor; must be a node of the chart grid.
    pub r: f64,
    /// `c_p`, `p = 0..=N`, of `Ψ = r + Σ_{p≥2} c_p y^p` (entries 0 and 1 ignored).
    pub coeffs: Vec<C64>,
    /// Value of `∫ H` at the anchor.
    pub integral: C64,
}

/// Phase `Ψ(r, y) = r + Σ_{p=2}^{N} c_p(r) y^p` on the half-spacing grid of a chart.
#[derive(Debug, Clone)]
pub struct BeamPhase {
    pub order: usize,
    r_start: f64,
    h: f64,
    anchor: usize,
    /// Per fine node: `c_p`, `c_p′`, `c_p″`.
    pub coeffs: Vec<Vec<C64>>,
    pub derivs: Vec<Vec<C64>>,
    pub second: Vec<Vec<C64>>,
    /// `∫ H` (offset by the anchor value of [`PhaseInit::integral`]).
    pub integral: Vec<C64>,
    pub riccati: RiccatiSolution,
}

/// `c_p′` for `p = 0..=N` from the Eikonal expansion at one `r`: the
/// coefficient of `y^p` in `(dΨ, dΨ)_g − 1` is linear in `c_p′` with slope
/// `2 g^{rr}_0` and involves only lower derivatives, so the system is solved
/// in increasing `p`.
pub fn phase_rhs(metric: &[Vec<f64>; 3], c: &[C64]) -> Vec<C64> {
    let n = c.len() - 1;
    let g: Vec<Vec<C64>> = metric.iter().map(|s| real(&s[..s.len().min(n + 1)])).collect();
    let mut d = vec![C64::from(0.0); n + 1];
    let psi_y: Vec<C64> = (0..n).map(|k| c[k + 1] * (k + 1) as f64).collect();
    for p in 2..=n {
        let e = eikonal_series(&g, &d, &psi_y, n);
        d[p] = -e[p] / (2.0 * g[0][0]);
    }
    d
}

/// Coefficients of `(dΨ, dΨ)_g − 1` given `ψ_r = Σ d_p y^p` and `ψ_y`.
fn eikonal_series(g: &[Vec<C64>], d: &[C64], psi_y: &[C64], deg: usize) -> Vec<C64> {
    let mut one_r = d.to_vec();
    one_r[0] += 1.0;
    let a = mul(&g[0], &mul(&one_r, &one_r, deg), deg);
    let b = mul(&g[1], &mul(&one_r, psi_y, deg), deg);
    let c = mul(&g[2], &mul(psi_y, psi_y, deg), deg);
    let mut e: Vec<C64> = (0..=deg).map(|k| a[k] + b[k] * 2.0 + c[k]).collect();
    e[0] -= 1.0;
    e
}

fn add_scaled(a: &[C64], b: &[C64], f: f64) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x + y * f).collect()
}

/// Phase with `H(r_anchor) = h0` at the chart node nearest the middle of the chart.
pub fn build_phase(chart: &FermiChart, h0: C64, order: usize) -> Result<BeamPhase> {
    let mid = chart.node(chart.intervals() / 2);
    let mut coeffs = vec![C64::from(0.0); order + 1];
    if order >= 2 {
        coeffs[2] = h0 * 0.5;
    }
    build_phase_with(chart, order, PhaseInit { r: mid, coeffs, integral: C64::from(0.0) })
}

/// Phase hierarchy from explicit initial data (used for hand-off between charts).
pub fn build_phase_with(chart: &FermiChart, order: usize, init: PhaseInit) -> Result<BeamPhase> {
    if !(2..=5).contains(&order) {
        return Err(Error::Order(format!("phase order must be in 2..=5, got {order}")));
    }
    if chart.order() < order {
        return Err(Error::Order(format!("chart carries metric Taylor order {} < phase order {order}", chart.order())));
    }
    if init.coeffs.len() != order + 1 {
        return Err(Error::Invalid("initial phase coefficients must have length N + 1".into()));
    }
    let k_anchor = chart.nearest_node(init.r);
    if (chart.node(k_anchor) - init.r).abs() > 1e-9 * chart.spacing().max(1.0) {
        return Err(Error::Invalid(format!("phase anchor {} is not a chart node", init.r)));
    }
    let h = 0.5 * chart.spacing();
    let n_fine = 2 * chart.intervals() + 1;
    let anchor = 2 * k_anchor;
    let nodes: Vec<f64> = (0..n_fine).map(|j| chart.r_start() + j as f64 * h).collect();
    let f = |r: f64| chart.curvature_datum(r);
    let riccati = solve_riccati(&f, init.coeffs[2] * 2.0, &nodes, anchor, 1e-13)?;

    let rhs = |r: f64, c: &[C64]| phase_rhs(&chart.series_at(r), c);
    let step = |r: f64, c: &[C64], dt: f64| -> Vec<C64> {
        let k1 = rhs(r, c);
        let k2 = rhs(r + dt / 2.0, &add_scaled(c, &k1, dt / 2.0));
        let k3 = rhs(r + dt / 2.0, &add_scaled(c, &k2, dt / 2.0));
        let k4 = rhs(r + dt, &add_scaled(c, &k3, dt));
        (0..c.len()).map(|i| c[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0)).collect()
    };
    let mut coeffs = vec![Vec::new(); n_fine];
    let mut c0 = init.coeffs.clone();
    c0[0] = C64::from(0.0);
    c0[1] = C64::from(0.0);
    coeffs[anchor] = c0.clone();
    let mut c = c0.clone();
    for j in anchor..n_fine - 1 {
        c = step(nodes[j], &c, h);
        coeffs[j + 1] = c.clone();
    }
    c = c0;
    for j in (1..=anchor).rev() {
        c = step(nodes[j], &c, -h);
        coeffs[j - 1] = c.clone();
    }
    for (j, cj) in coeffs.iter_mut().enumerate() {
        let drift = (cj[2] * 2.0 - riccati.h[j]).norm();
        if drift > 1e-8 {
            return Err(Error::Accuracy(format!("phase and Riccati solutions drift apart by {drift:.2e}")));
        }
        cj[2] = riccati.h[j] * 0.5;
    }
    let derivs: Vec<Vec<C64>> = (0..n_fine).map(|j| rhs(nodes[j], &coeffs[j])).collect();
    let second: Vec<Vec<C64>> = (0..n_fine)
        .map(|j| {
            let (s, w) = node_derivative_weights(n_fine, j, h, 1, 7);
            (0..=order).map(|p| w.iter().enumerate().map(|(i, wi)| derivs[s + i][p] * *wi).sum()).collect()
        })
        .collect();
    let integral = riccati.integral.iter().map(|v| v + init.integral).collect();
    Ok(BeamPhase { order, r_start: chart.r_start(), h, anchor, coeffs, derivs, second, integral, riccati })
}

/// Derivatives of `Ψ̃ = Ψ − r` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseJet {
    pub value: C64,
    pub r: C64,
    pub y: C64,
    pub rr: C64,
    pub yy: C64,
}

impl BeamPhase {
    /// Fine-grid spacing (half the chart spacing).
    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn fine_nodes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn fine_node(&self, j: usize) -> f64 {
        self.r_start + self.h * j as f64
    }

    /// Fine index of the anchor.
    pub fn anchor(&self) -> usize {
        self.anchor
    }

    /// `H(r)` at fine node `j`.
    pub fn h(&self, j: usize) -> C64 {
        self.coeffs[j][2] * 2.0
    }

    /// `Ψ̃` and its derivatives at fine node `j` and normal offset `y`.
    pub fn jet(&self, j: usize, y: f64) -> PhaseJet {
        let (value, py, pyy) = eval3(&self.coeffs[j], y);
        let (pr, _, _) = eval3(&self.derivs[j], y);
        let (prr, _, _) = eval3(&self.second[j], y);
        PhaseJet { value, r: pr, y: py, rr: prr, yy: pyy }
    }

    /// `(dΨ, dΨ)_g − 1` at `(r_j, y)` for the inverse metric `ginv` (written
    /// to avoid cancellation between `1` and the leading terms).
    pub fn eikonal_residual(&self, j: usize, y: f64, ginv: [[f64; 2]; 2]) -> C64 {
        let p = self.jet(j, y);
        let one_r = p.r + 1.0;
        (one_r * one_r) * (ginv[0][0] - 1.0) + p.r * 2.0 + p.r * p.r + one_r * p.y * (2.0 * ginv[0][1]) + p.y * p.y * (ginv[1][1] - 1.0) + p.y * p.y
    }

    /// Phase state at fine node `j`, usable as [`PhaseInit`] for a neighbouring chart.
    pub fn handoff(&self, j: usize) -> PhaseInit {
        PhaseInit { r: self.fine_node(j), coeffs: self.coeffs[j].clone(), integral: self.integral[j] }
    }
}
