use super::{Field, NodeKind, Solution};
use crate::C64;
use serde::Serialize;
use std::fmt;

/// Quotient of two norms, with `0/0` kept distinct from a finite value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ratio {
    Value(f64),
    Vacuous,
    Unbounded,
}

impl Ratio {
    pub fn of(num: f64, den: f64) -> Self {
        match (num == 0.0, den == 0.0) {
            (true, true) => Ratio::Vacuous,
            (false, true) => Ratio::Unbounded,
            _ => Ratio::Value(num / den),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Ratio::Value(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Value(v) => write!(f, "{v:.6e}"),
            Ratio::Vacuous => write!(f, "vacuous"),
            Ratio::Unbounded => write!(f, "unbounded"),
        }
    }
}

/// Discrete space-time norms of a source problem and the four estimate ratios
/// `‖u‖_{L∞L²}/‖F‖_{L²}`, `‖u‖_{L∞H¹}/‖F‖_{H^{1,0}}`, `‖∂_t u‖_{L∞L²}/‖F‖_{H^{1,0}}`
/// and `‖u‖_{H^{1,2}}/‖F‖_{H^{1,0}}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub u_linf_l2: f64,
    pub u_linf_h1: f64,
    pub ut_linf_l2: f64,
    pub u_h12: f64,
    pub f_l2: f64,
    pub f_h10: f64,
    pub ratios: [Ratio; 4],
}

impl EnergyReport {
    pub const NAMES: [&'static str; 4] = ["u_Linf_L2/F_L2", "u_Linf_H1/F_H10", "ut_Linf_L2/F_H10", "u_H12/F_H10"];
}

/// Trapezoid weights on the solution's time levels.
fn time_weights(sol: &Solution) -> Vec<f64> {
    let m = sol.times.len();
    (0..m).map(|k| if k == 0 || k + 1 == m { 0.5 * sol.dt } else { sol.dt }).collect()
}

struct Differences<'a> {
    sol: &'a Solution,
}

impl Differences<'_> {
    fn at(&self, state: &[C64], i: i64, j: i64, c: usize) -> C64 {
        let s = self.sol.mesh.side() as i64;
        if i < 0 || j < 0 || i >= s || j >= s {
            return C64::from(0.0);
        }
        state[self.sol.mesh.node(i as usize, j as usize) * self.sol.rank + c]
    }

    /// `Σ h² (|D_x u|² + |D_y u|²)` over edges touching the interior.
    fn gradient_sq(&self, state: &[C64]) -> f64 {
        let mesh = &self.sol.mesh;
        let mut total = 0.0;
        for node in 0..mesh.len() {
            let (i, j) = mesh.coords(node);
            for (di, dj) in [(1usize, 0usize), (0, 1)] {
                if i + di >= mesh.side() || j + dj >= mesh.side() {
                    continue;
                }
                let q = mesh.node(i + di, j + dj);
                let touches = matches!(mesh.kind(node), NodeKind::Interior(_)) || matches!(mesh.kind(q), NodeKind::Interior(_));
                if !touches {
                    continue;
                }
                // |∇u|² dV is conformally invariant in two dimensions.
                for c in 0..self.sol.rank {
                    total += (state[q * self.sol.rank + c] - state[node * self.sol.rank + c]).norm_sqr();
                }
            }
        }
        total
    }

    /// `Σ h² (|D_xx u|² + |D_yy u|² + 2|D_xy u|²)` over interior nodes.
    fn hessian_sq(&self, state: &[C64]) -> f64 {
        let h2 = self.sol.mesh.spacing().powi(2);
        self.sol.weighted_sum(|p| {
            let (i, j) = self.sol.mesh.coords(p);
            let (i, j) = (i as i64, j as i64);
            let c2 = self.sol.weight(p);
            (0..self.sol.rank)
                .map(|c| {
                    let u = |di: i64, dj: i64| self.at(state, i + di, j + dj, c);
                    let xx = (u(1, 0) - u(0, 0) * 2.0 + u(-1, 0)) / h2;
                    let yy = (u(0, 1) - u(0, 0) * 2.0 + u(0, -1)) / h2;
                    let xy = (u(1, 1) - u(1, -1) - u(-1, 1) + u(-1, -1)) / (4.0 * h2);
                    (xx.norm_sqr() + yy.norm_sqr() + 2.0 * xy.norm_sqr()) / c2
                })
                .sum()
        })
    }
}

/// Norms of the computed `u` and of the source `F`, sampled on the same
/// space-time grid. Time derivatives are forward differences between levels.
pub fn energy_report(sol: &Solution, source: Option<Field<'_>>) -> EnergyReport {
    let diffs = Differences { sol };
    let levels = sol.times.len();
    let l2_sq = |state: &[C64]| {
        sol.weighted_sum(|p| (0..sol.rank).map(|c| state[p * sol.rank + c].norm_sqr()).sum())
    };
    let tw = time_weights(sol);
    let mut u_linf_l2 = 0.0f64;
    let mut u_linf_h1 = 0.0f64;
    let mut ut_linf_l2 = 0.0f64;
    let mut h12_sq = 0.0;
    for k in 0..levels {
        let s = &sol.states[k];
        let (l2, g) = (l2_sq(s), diffs.gradient_sq(s));
        u_linf_l2 = u_linf_l2.max(l2.sqrt());
        u_linf_h1 = u_linf_h1.max((l2 + g).sqrt());
        h12_sq += tw[k] * (l2 + g + diffs.hessian_sq(s));
        if k + 1 < levels {
            let ut: Vec<C64> = sol.states[k + 1].iter().zip(s).map(|(a, b)| (a - b) / sol.dt).collect();
            let n = l2_sq(&ut);
            ut_linf_l2 = ut_linf_l2.max(n.sqrt());
            h12_sq += sol.dt * n;
        }
    }
    let (mut f_l2_sq, mut ft_sq) = (0.0, 0.0);
    if let Some(f) = source {
        let sampled: Vec<Vec<C64>> = sol
            .times
            .iter()
            .map(|&t| {
                let mut state = vec![C64::from(0.0); sol.mesh.len() * sol.rank];
                for &p in sol.mesh.interior() {
                    let v = f(t, sol.mesh.position(p));
                    state[p * sol.rank..(p + 1) * sol.rank].copy_from_slice(v.as_slice());
                }
                state
            })
            .collect();
        for k in 0..levels {
            f_l2_sq += tw[k] * l2_sq(&sampled[k]);
            if k + 1 < levels {
                let d: Vec<C64> = sampled[k + 1].iter().zip(&sampled[k]).map(|(a, b)| (a - b) / sol.dt).collect();
                ft_sq += sol.dt * l2_sq(&d);
            }
        }
    }
    let f_l2 = f_l2_sq.sqrt();
    let f_h10 = (f_l2_sq + ft_sq).sqrt();
    let u_h12 = h12_sq.sqrt();
    EnergyReport {
        u_linf_l2,
        u_linf_h1,
        ut_linf_l2,
        u_h12,
        f_l2,
        f_h10,
        ratios: [
            Ratio::of(u_linf_l2, f_l2),
            Ratio::of(u_linf_h1, f_h10),
            Ratio::of(ut_linf_l2, f_h10),
            Ratio::of(u_h12, f_h10),
        ],
    }
}
