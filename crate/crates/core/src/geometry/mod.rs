//! Conformal metrics `g = c(x)² δ` on a disk, geodesics and Fermi charts.

mod fermi;
mod geodesic;

pub use fermi::{build_fermi_chart, build_fermi_chart_with, ChartOptions, FermiChart, TubePoint};
pub use geodesic::{
    exit_time, sample_inflow, sample_parallel, trace_from_interior, trace_geodesic, trace_geodesic_with, write_path_csv, GeodesicPath, InflowSample,
    PathSample, DEFAULT_STEP, GRAZING_MARGIN,
};

use crate::{Error, Point, Result};
use std::fmt;
use std::sync::Arc;

/// Christoffel symbols `Γ[k][i][j] = Γ^k_{ij}`.
pub type Christoffel = [[[f64; 2]; 2]; 2];

/// Scalar conformal factor `c(x) > 0`.
#[derive(Clone)]
pub enum ConformalFactor {
    /// `c ≡ 1`.
    Flat,
    /// `c = 1 + a·exp(−|x|²/σ²)`.
    RadialBump { amplitude: f64, width: f64 },
    /// `c = exp(a·exp(−|x|²/σ²))`.
    LogRadial { amplitude: f64, width: f64 },
    /// User-supplied factor; derivatives by Richardson-extrapolated differences.
    Custom(Arc<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl fmt::Debug for ConformalFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Flat => write!(f, "flat"),
            Self::RadialBump { amplitude, width } => write!(f, "radial-bump({amplitude},{width})"),
            Self::LogRadial { amplitude, width } => write!(f, "log-radial({amplitude},{width})"),
            Self::Custom(_) => write!(f, "custom"),
        }
    }
}

/// How metric derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeScheme {
    ClosedForm,
    /// Central differences of `ln c` with step `h`, one Richardson level.
    FiniteDifference { step: f64 },
}

/// Conformal metric on the disk of radius `radius` centred at the origin.
#[derive(Debug, Clone)]
pub struct Metric {
    radius: f64,
    factor: ConformalFactor,
    scheme: DerivativeScheme,
}

impl Metric {
    pub fn new(radius: f64, factor: ConformalFactor) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Invalid(format!("radius must be positive, got {radius}")));
        }
        let scheme = match factor {
            ConformalFactor::Custom(_) => DerivativeScheme::FiniteDifference { step: 1e-3 },
            _ => DerivativeScheme::ClosedForm,
        };
        let m = Self { radius, factor, scheme };
        // Positivity on a polar sample of the closed domain.
        for i in 0..=16 {
            for j in 0..32 {
                let rho = radius * i as f64 / 16.0;
                let phi = std::f64::consts::TAU * j as f64 / 32.0;
                let c = m.factor_at(Point::new(rho * phi.cos(), rho * phi.sin()));
                if !(c > 0.0) {
                    return Err(Error::InvariantViolation(format!("conformal factor {c} is not positive")));
                }
            }
        }
        Ok(m)
    }

    /// Euclidean unit disk.
    pub fn flat() -> Self {
        Self::new(1.0, ConformalFactor::Flat).expect("flat metric")
    }

    pub fn radial_bump(amplitude: f64, width: f64) -> Result<Self> {
        Self::new(1.0, ConformalFactor::RadialBump { amplitude, width })
    }

    /// Parses registry names: `flat`, `radial-bump(a,σ)`, `log-radial(a,σ)`.
    pub fn from_name(name: &str) -> Result<Self> {
        let name = name.trim();
        if name == "flat" {
            return Ok(Self::flat());
        }
        let parse_pair = |s: &str| -> Result<(f64, f64)> {
            let inner = s
                .strip_suffix(')')
                .ok_or_else(|| Error::Invalid(format!("malformed metric name {name:?}")))?;
            let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(Error::Invalid(format!("metric {name:?} needs two parameters")));
            }
            let a = parts[0].parse::<f64>().map_err(|e| Error::Invalid(e.to_string()))?;
            let b = parts[1].parse::<f64>().map_err(|e| Error::Invalid(e.to_string()))?;
            Ok((a, b))
        };
        if let Some(rest) = name.strip_prefix("radial-bump(") {
            let (amplitude, width) = parse_pair(rest)?;
            return Self::new(1.0, ConformalFactor::RadialBump { amplitude, width });
        }
        if let Some(rest) = name.strip_prefix("log-radial(") {
            let (amplitude, width) = parse_pair(rest)?;
            return Self::new(1.0, ConformalFactor::LogRadial { amplitude, width });
        }
        Err(Error::Invalid(format!("unknown metric {name:?}")))
    }

    /// Forces finite-difference derivatives (used to cross-check closed forms).
    pub fn with_scheme(mut self, scheme: DerivativeScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn name(&self) -> String {
        format!("{:?}", self.factor)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn factor(&self) -> &ConformalFactor {
        &self.factor
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.factor, ConformalFactor::Flat)
            || matches!(self.factor, ConformalFactor::RadialBump { amplitude, .. } | ConformalFactor::LogRadial { amplitude, .. } if amplitude == 0.0)
    }

    /// `c(x)`.
    pub fn factor_at(&self, x: Point) -> f64 {
        match &self.factor {
            ConformalFactor::Flat => 1.0,
            ConformalFactor::RadialBump { amplitude, width } => 1.0 + amplitude * (-x.norm_squared() / (width * width)).exp(),
            ConformalFactor::LogRadial { amplitude, width } => (amplitude * (-x.norm_squared() / (width * width)).exp()).exp(),
            ConformalFactor::Custom(f) => f(x),
        }
    }

    /// `λ = ln c`.
    pub fn log_factor(&self, x: Point) -> f64 {
        self.factor_at(x).ln()
    }

    /// Gradient and Hessian of `λ = ln c`.
    pub fn log_jet(&self, x: Point) -> (Point, [[f64; 2]; 2]) {
        match (self.scheme, &self.factor) {
            (DerivativeScheme::ClosedForm, ConformalFactor::Flat) => (Point::zeros(), [[0.0; 2]; 2]),
            (DerivativeScheme::ClosedForm, ConformalFactor::RadialBump { amplitude, width }) => {
                let s2 = width * width;
                let e = amplitude * (-x.norm_squared() / s2).exp();
                let c = 1.0 + e;
                let dc = x * (-2.0 * e / s2);
                let mut hess = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        let dcij = e * (4.0 * x[i] * x[j] / (s2 * s2) - 2.0 * delta / s2);
                        hess[i][j] = dcij / c - dc[i] * dc[j] / (c * c);
                    }
                }
                (dc / c, hess)
            }
            (DerivativeScheme::ClosedForm, ConformalFactor::LogRadial { amplitude, width }) => {
                let s2 = width * width;
                let e = amplitude * (-x.norm_squared() / s2).exp();
                let mut hess = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        hess[i][j] = e * (4.0 * x[i] * x[j] / (s2 * s2) - 2.0 * delta / s2);
                    }
                }
                (x * (-2.0 * e / s2), hess)
            }
            (DerivativeScheme::FiniteDifference { .. }, _) | (DerivativeScheme::ClosedForm, ConformalFactor::Custom(_)) => {
                let step = match self.scheme {
                    DerivativeScheme::FiniteDifference { step } => step,
                    DerivativeScheme::ClosedForm => 1e-3,
                };
                self.log_jet_fd(x, step)
            }
        }
    }

    fn log_jet_fd(&self, x: Point, h: f64) -> (Point, [[f64; 2]; 2]) {
        let e = [Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let f = |p: Point| self.log_factor(p);
        let grad_at = |h: f64, p: Point| -> Point {
            let mut g = Point::zeros();
            for i in 0..2 {
                g[i] = (f(p + e[i] * h) - f(p - e[i] * h)) / (2.0 * h);
            }
            g
        };
        let grad = (grad_at(h / 2.0, x) * 4.0 - grad_at(h, x)) / 3.0;
        let hess_at = |h: f64| -> [[f64; 2]; 2] {
            let mut m = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] = if i == j {
                        (f(x + e[i] * h) - 2.0 * f(x) + f(x - e[i] * h)) / (h * h)
                    } else {
                        (f(x + (e[i] + e[j]) * h) - f(x + (e[i] - e[j]) * h) - f(x - (e[i] - e[j]) * h)
                            + f(x - (e[i] + e[j]) * h))
                            / (4.0 * h * h)
                    };
                }
            }
            m
        };
        let (a, b) = (hess_at(h), hess_at(h / 2.0));
        let mut hess = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                hess[i][j] = (4.0 * b[i][j] - a[i][j]) / 3.0;
            }
        }
        (grad, hess)
    }

    pub fn contains(&self, x: Point) -> bool {
        x.norm() < self.radius
    }

    /// Christoffel symbols at an interior point.
    pub fn christoffel(&self, x: Point) -> Result<Christoffel> {
        if !self.contains(x) {
            return Err(Error::Domain(format!("({}, {}) is not in the open disk of radius {}", x[0], x[1], self.radius)));
        }
        Ok(self.christoffel_unchecked(x))
    }

    /// Christoffel symbols of the smooth extension of `g` beyond the disk.
    pub fn christoffel_unchecked(&self, x: Point) -> Christoffel {
        let (dl, _) = self.log_jet(x);
        let mut gamma = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                    gamma[k][i][j] = d(k, i) * dl[j] + d(k, j) * dl[i] - d(i, j) * dl[k];
                }
            }
        }
        gamma
    }

    /// Geodesic acceleration `−Γ(x)(v, v)`.
    pub fn geodesic_accel(&self, x: Point, v: Point) -> Point {
        let (dl, _) = self.log_jet(x);
        -v * (2.0 * dl.dot(&v)) + dl * v.norm_squared()
    }

    /// `|v|_g`.
    pub fn norm(&self, x: Point, v: Point) -> f64 {
        self.factor_at(x) * v.norm()
    }

    /// `⟨u, v⟩_g`.
    pub fn inner(&self, x: Point, u: Point, v: Point) -> f64 {
        let c = self.factor_at(x);
        c * c * u.dot(&v)
    }

    /// Gaussian curvature `K = −Δλ / c²`.
    pub fn gaussian_curvature(&self, x: Point) -> f64 {
        let (_, h) = self.log_jet(x);
        let c = self.factor_at(x);
        -(h[0][0] + h[1][1]) / (c * c)
    }

    /// Outward Euclidean unit normal at a boundary point.
    pub fn outward_normal(&self, x: Point) -> Point {
        x / x.norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_christoffel_vanishes() {
        let g = Metric::flat();
        let gamma = g.christoffel(Point::new(0.3, -0.2)).unwrap();
        assert!(gamma.iter().flatten().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn outside_domain_is_an_error() {
        let g = Metric::flat();
        assert!(matches!(g.christoffel(Point::new(1.0, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(g.christoffel(Point::new(0.9, 0.9)), Err(Error::Domain(_))));
    }

    #[test]
    fn christoffel_matches_metric_derivative_oracle() {
        // Independent formula Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij),
        // with ∂g from central differences of g_ij = c² δ_ij at step 1e-5.
        for metric in [
            Metric::from_name("log-radial(0.4,0.6)").unwrap(),
            Metric::from_name("radial-bump(0.3,0.5)").unwrap(),
        ] {
            let h = 1e-5;
            let gij = |x: Point| metric.factor_at(x).powi(2);
            for &(a, b) in &[(0.1, 0.2), (-0.45, 0.3), (0.6, -0.55), (0.0, 0.0)] {
                let x = Point::new(a, b);
                let gamma = metric.christoffel(x).unwrap();
                let e = [Point::new(h, 0.0), Point::new(0.0, h)];
                let dg: Vec<f64> = (0..2).map(|l| (gij(x + e[l]) - gij(x - e[l])) / (2.0 * h)).collect();
                let ginv = 1.0 / gij(x);
                for k in 0..2 {
                    for i in 0..2 {
                        for j in 0..2 {
                            let d = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
                            let oracle = 0.5 * ginv * (dg[i] * d(j, k) + dg[j] * d(i, k) - dg[k] * d(i, j));
                            assert!((gamma[k][i][j] - oracle).abs() < 1e-6);
                            assert_eq!(gamma[k][i][j], gamma[k][j][i]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn finite_difference_scheme_matches_closed_form() {
        let closed = Metric::radial_bump(0.3, 0.5).unwrap();
        let fd = closed.clone().with_scheme(DerivativeScheme::FiniteDifference { step: 1e-3 });
        let x = Point::new(0.21, -0.37);
        let (g1, h1) = closed.log_jet(x);
        let (g2, h2) = fd.log_jet(x);
        assert!((g1 - g2).norm() < 1e-9);
        for i in 0..2 {
            for j in 0..2 {
                assert!((h1[i][j] - h2[i][j]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn registry_names_round_trip() {
        let m = Metric::from_name("radial-bump(0.3, 0.5)").unwrap();
        assert_eq!(m.name(), "radial-bump(0.3,0.5)");
        assert!(Metric::from_name("nope").is_err());
        assert!(Metric::from_name("radial-bump(-2,0.5)").is_err());
        assert!(Metric::flat().is_flat());
    }
}
