//! Attenuated matrix-weighted ray transforms: the transport solve
//! `Xw + Bw = −F`, `w = 0` at the exit point, its pixel discretisation and
//! regularised inversion, and the candidate gauge `G = U_{A₁}U_{A₂}⁻¹`.

mod gauge;
mod system;

pub use gauge::{boundary_gauge_defect, gauge_sample, reconstruct_gauge, GaugeOptions, GaugePoint, GaugeReconstruction};
pub use system::{
    assemble_system, invert, normal_eigenvalue_max, AssemblyOptions, FieldKind, Inversion, InversionOptions, PixelField, PixelGrid, RayTransformSystem,
};

use crate::bundle::{transport, BumpConnection, ConnectionForm, TransportOptions, TransportSolution};
use crate::geometry::GeodesicPath;
use crate::linalg::fro;
use crate::quadrature::{fourth_order_weights, interval_weights};
use crate::{CMat, Error, Point, Result};
use rayon::prelude::*;
use std::sync::Arc;

/// Connection `B` on `n × m` matrix sections, `BW = A₁W − WA₂`. The vector
/// case (`m = 1`) has no right factor and acts by left multiplication.
#[derive(Clone)]
pub struct AttenuationField {
    left: Arc<dyn ConnectionForm>,
    right: Option<Arc<dyn ConnectionForm>>,
}

impl AttenuationField {
    /// Left multiplication by `A` on `C^n`-valued sections.
    pub fn vector(a: Arc<dyn ConnectionForm>) -> Self {
        Self { left: a, right: None }
    }

    /// `B = 0` on `C^n` (`endomorphism = false`) or on `n × n` matrices.
    pub fn zero(rank: usize, endomorphism: bool) -> Self {
        let z: Arc<dyn ConnectionForm> = Arc::new(BumpConnection::zero(rank));
        Self { left: z.clone(), right: endomorphism.then_some(z) }
    }

    /// Section shape `(n, m)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.left.rank(), self.right.as_ref().map_or(1, |a| a.rank()))
    }

    pub fn is_endomorphism(&self) -> bool {
        self.right.is_some()
    }

    pub fn left(&self) -> &Arc<dyn ConnectionForm> {
        &self.left
    }

    pub fn right(&self) -> Option<&Arc<dyn ConnectionForm>> {
        self.right.as_ref()
    }

    /// `B(v)W`.
    pub fn apply(&self, t: f64, x: Point, v: Point, w: &CMat) -> CMat {
        let mut out = self.left.along(t, x, v) * w;
        if let Some(a2) = &self.right {
            out -= w * a2.along(t, x, v);
        }
        out
    }

    /// Left and right transports on `n` uniform intervals of `path`.
    fn transports(&self, path: &GeodesicPath, t: f64, n: usize) -> Result<(TransportSolution, Option<TransportSolution>)> {
        let opts = TransportOptions { intervals: Some(n), ..TransportOptions::default() };
        let u1 = transport(&*self.left, path, t, opts)?;
        let u2 = match &self.right {
            Some(a2) => Some(transport(&**a2, path, t, opts)?),
            None => None,
        };
        Ok((u1, u2))
    }
}

/// `B = A₁(·) − (·)A₂` on the endomorphism bundle (a commutator when `A₁ = A₂`).
pub fn endo_connection(a1: Arc<dyn ConnectionForm>, a2: Arc<dyn ConnectionForm>) -> Result<AttenuationField> {
    if a1.rank() != a2.rank() {
        return Err(Error::Invalid(format!("rank mismatch: {} vs {}", a1.rank(), a2.rank())));
    }
    Ok(AttenuationField { left: a1, right: Some(a2) })
}

type FunctionFn = dyn Fn(Point) -> CMat + Send + Sync;
type OneFormFn = dyn Fn(Point) -> [CMat; 2] + Send + Sync;

/// Source term `F(x, θ)`: a matrix function `f(x)` or a matrix one-form `α_j(x)θ^j`.
#[derive(Clone)]
pub enum IntegrandField {
    Function(Arc<FunctionFn>),
    OneForm(Arc<OneFormFn>),
}

impl IntegrandField {
    pub fn function(f: impl Fn(Point) -> CMat + Send + Sync + 'static) -> Self {
        Self::Function(Arc::new(f))
    }

    pub fn one_form(f: impl Fn(Point) -> [CMat; 2] + Send + Sync + 'static) -> Self {
        Self::OneForm(Arc::new(f))
    }

    pub fn eval(&self, x: Point, theta: Point) -> CMat {
        match self {
            Self::Function(f) => f(x),
            Self::OneForm(f) => {
                let [a, b] = f(x);
                a * crate::C64::from(theta[0]) + b * crate::C64::from(theta[1])
            }
        }
    }
}

/// `∇^B p = dp + A₁p − pA₂` for `p` given with its gradient `(p, [∂₁p, ∂₂p])`.
pub fn covariant_gradient(
    b: &AttenuationField,
    t: f64,
    p: impl Fn(Point) -> (CMat, [CMat; 2]) + Send + Sync + 'static,
) -> IntegrandField {
    let b = b.clone();
    IntegrandField::one_form(move |x| {
        let (v, d) = p(x);
        let a1 = b.left.components(t, x);
        let a2 = b.right.as_ref().map(|a| a.components(t, x));
        [0, 1].map(|j| {
            let mut out = &d[j] + &a1[j] * &v;
            if let Some(a2) = &a2 {
                out -= &v * &a2[j];
            }
            out
        })
    })
}

/// Step control of the transport solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArtOptions {
    pub step: f64,
    /// Optional bound on the entry value change under step halving.
    pub tolerance: Option<f64>,
}

impl Default for ArtOptions {
    fn default() -> Self {
        Self { step: 1e-3, tolerance: None }
    }
}

impl ArtOptions {
    fn intervals(&self, length: f64) -> Result<usize> {
        if !(self.step > 0.0) {
            return Err(Error::Invalid(format!("step must be positive, got {}", self.step)));
        }
        Ok(((length / self.step).ceil() as usize).max(3))
    }
}

/// Solution of the transport equation on a uniform grid of the ray.
#[derive(Debug, Clone)]
pub struct RaySolution {
    pub nodes: Vec<f64>,
    pub values: Vec<CMat>,
}

impl RaySolution {
    /// `w` at the entry point, i.e. `I_B F` for this ray.
    pub fn entry_value(&self) -> &CMat {
        &self.values[0]
    }
}

/// Integrand `U_B⁻¹F = U₁⁻¹ F U₂` at every node, with `U₁`, `U₂` kept for reuse.
fn pulled_back(
    b: &AttenuationField,
    f: &IntegrandField,
    path: &GeodesicPath,
    t: f64,
    n: usize,
) -> Result<(TransportSolution, Option<TransportSolution>, Vec<CMat>)> {
    let (u1, u2) = b.transports(path, t, n)?;
    let g = (0..=n)
        .map(|k| {
            let (x, v) = path.eval(u1.nodes[k]);
            let mut m = u1.values[k].adjoint() * f.eval(x, v);
            if let Some(u2) = &u2 {
                m *= &u2.values[k];
            }
            m
        })
        .collect();
    Ok((u1, u2, g))
}

fn solve_on(b: &AttenuationField, f: &IntegrandField, path: &GeodesicPath, t: f64, n: usize) -> Result<RaySolution> {
    let (u1, u2, g) = pulled_back(b, f, path, t, n)?;
    let h = u1.spacing();
    let (rows, cols) = (g[0].nrows(), g[0].ncols());
    // w(r) = U_B(r) ∫_r^ρ U_B⁻¹F, accumulated backwards from the exit point.
    let mut acc = CMat::zeros(rows, cols);
    let mut values = vec![CMat::zeros(rows, cols); n + 1];
    for k in (0..n).rev() {
        let (start, w) = interval_weights(n, k, h);
        for (i, wi) in w.iter().enumerate() {
            acc += &g[start + i] * crate::C64::from(*wi);
        }
        let mut v = &u1.values[k] * &acc;
        if let Some(u2) = &u2 {
            v *= u2.values[k].adjoint();
        }
        values[k] = v;
    }
    Ok(RaySolution { nodes: u1.nodes, values })
}

fn entry_on(b: &AttenuationField, f: &IntegrandField, path: &GeodesicPath, t: f64, n: usize) -> Result<CMat> {
    let (u1, _, g) = pulled_back(b, f, path, t, n)?;
    let w = fourth_order_weights(n, u1.spacing());
    let mut acc = CMat::zeros(g[0].nrows(), g[0].ncols());
    for (gk, wk) in g.iter().zip(&w) {
        acc += gk * crate::C64::from(*wk);
    }
    Ok(acc)
}

fn check_refinement(coarse: &CMat, fine: &CMat, tol: Option<f64>) -> Result<()> {
    if let Some(tol) = tol {
        let est = fro(&(coarse - fine));
        if est > tol {
            return Err(Error::Accuracy(format!("ray transform refinement change {est:.3e} exceeds {tol:.3e}")));
        }
    }
    Ok(())
}

/// Solves `Xw + Bw = −F`, `w = 0` at the exit point, along `path` by
/// Duhamel's formula with the unitary transports of `B`.
pub fn transport_solve(b: &AttenuationField, f: &IntegrandField, path: &GeodesicPath, t: f64, opts: ArtOptions) -> Result<RaySolution> {
    let n = opts.intervals(path.exit_time())?;
    let sol = solve_on(b, f, path, t, n)?;
    if opts.tolerance.is_some() {
        let fine = entry_on(b, f, path, t, 2 * n)?;
        check_refinement(sol.entry_value(), &fine, opts.tolerance)?;
    }
    Ok(sol)
}

/// `I_B F`: the entry value of the transport solve on every ray (parallel over rays).
pub fn art_forward(b: &AttenuationField, f: &IntegrandField, paths: &[GeodesicPath], t: f64, opts: ArtOptions) -> Result<Vec<CMat>> {
    paths
        .par_iter()
        .map(|p| {
            let n = opts.intervals(p.exit_time())?;
            let v = entry_on(b, f, p, t, n)?;
            if opts.tolerance.is_some() {
                check_refinement(&v, &entry_on(b, f, p, t, 2 * n)?, opts.tolerance)?;
            }
            Ok(v)
        })
        .collect()
}

/// Largest Frobenius norm over a data set.
pub fn max_norm(data: &[CMat]) -> f64 {
    data.iter().map(fro).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{random_connection, random_potential, Potential};
    use crate::geometry::{sample_inflow, trace_geodesic, Metric};
    use crate::linalg::{identity, random_hermitian, random_skew_hermitian, trace_inner};
    use crate::quadrature::composite_gauss;
    use crate::C64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rays(metric: &Metric, points: usize, dirs: usize) -> Vec<GeodesicPath> {
        sample_inflow(metric, points, dirs).iter().map(|s| trace_geodesic(metric, s.x, s.theta, 1e-3).unwrap()).collect()
    }

    fn scalar(v: f64) -> CMat {
        CMat::from_element(1, 1, C64::from(v))
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let metric = Metric::radial_bump(0.3, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Arc<dyn ConnectionForm> = Arc::new(random_connection(&mut rng, 2, 2, 1.0, 0.5, true));
        let b = endo_connection(a.clone(), a).unwrap();
        let f = IntegrandField::function(|_| CMat::zeros(2, 2));
        for p in rays(&metric, 3, 2) {
            let sol = transport_solve(&b, &f, &p, 0.3, ArtOptions::default()).unwrap();
            assert!(sol.values.iter().all(|w| fro(w) == 0.0));
        }
        assert_eq!(max_norm(&art_forward(&b, &f, &rays(&metric, 2, 2), 0.3, ArtOptions::default()).unwrap()), 0.0);
    }

    #[test]
    fn unattenuated_transform_matches_gauss_quadrature() {
        let metric = Metric::radial_bump(0.3, 0.5).unwrap();
        let f = |x: Point| (-(x - Point::new(0.2, 0.1)).norm_squared() / 0.2).exp() * (1.0 + x[0]);
        let field = IntegrandField::function(move |x| scalar(f(x)));
        let b = AttenuationField::zero(1, false);
        for p in rays(&metric, 4, 3) {
            let (nodes, weights) = composite_gauss(0.0, p.exit_time(), 64, 10);
            let oracle: f64 = nodes.iter().zip(&weights).map(|(r, w)| w * f(p.eval(*r).0)).sum();
            let sol = transport_solve(&b, &field, &p, 0.0, ArtOptions::default()).unwrap();
            assert!((sol.entry_value()[(0, 0)].re - oracle).abs() < 1e-8);
            assert!(sol.values.last().unwrap()[(0, 0)].norm() == 0.0);
        }
    }

    #[test]
    fn transform_is_linear() {
        let metric = Metric::flat();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Arc::new(random_connection(&mut rng, 2, 2, 1.0, 0.5, false));
        let b = AttenuationField::vector(a);
        let (m1, m2) = (random_hermitian(&mut rng, 2, 1.0), random_hermitian(&mut rng, 2, 1.0));
        let (c1, c2) = (m1.column(0).into_owned(), m2.column(1).into_owned());
        let f1c = c1.clone();
        let f2c = c2.clone();
        let f1 = IntegrandField::one_form(move |x| {
            let v = CMat::from_column_slice(2, 1, f1c.as_slice());
            [&v * C64::from(x[0].sin()), &v * C64::from(x[0] * x[1])]
        });
        let f2 = IntegrandField::one_form(move |x| {
            let v = CMat::from_column_slice(2, 1, f2c.as_slice());
            [&v * C64::from(x[1]), &v * C64::from(1.0 - x.norm_squared())]
        });
        let (g1, g2) = (f1.clone(), f2.clone());
        let sum = IntegrandField::one_form(move |x| {
            let e = [Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
            e.map(|v| g1.eval(x, v) + g2.eval(x, v))
        });
        let paths = rays(&metric, 3, 3);
        let opts = ArtOptions::default();
        let (d1, d2, ds) = (
            art_forward(&b, &f1, &paths, 0.0, opts).unwrap(),
            art_forward(&b, &f2, &paths, 0.0, opts).unwrap(),
            art_forward(&b, &sum, &paths, 0.0, opts).unwrap(),
        );
        for k in 0..paths.len() {
            assert!(fro(&(&ds[k] - &d1[k] - &d2[k])) < 1e-10);
        }
    }

    #[test]
    fn endomorphism_connection_is_skew() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a1: Arc<dyn ConnectionForm> = Arc::new(random_connection(&mut rng, 3, 2, 1.0, 0.5, true));
        let a2: Arc<dyn ConnectionForm> = Arc::new(random_connection(&mut rng, 3, 2, 1.0, 0.5, true));
        let (x, v) = (Point::new(0.1, -0.3), Point::new(0.6, 0.8));
        let same = endo_connection(a1.clone(), a1.clone()).unwrap();
        assert!(fro(&same.apply(0.2, x, v, &identity(3))) < 1e-15);
        let b = endo_connection(a1, a2).unwrap();
        for _ in 0..20 {
            let (p, q) = (random_hermitian(&mut rng, 3, 1.0) + random_skew_hermitian(&mut rng, 3, 1.0), random_hermitian(&mut rng, 3, 1.0));
            let gap = trace_inner(&b.apply(0.2, x, v, &p), &q) + trace_inner(&p, &b.apply(0.2, x, v, &q));
            assert!(gap.norm() < 1e-12);
        }
        let zero = AttenuationField::zero(3, true);
        assert_eq!(fro(&zero.apply(0.2, x, v, &random_hermitian(&mut rng, 3, 1.0))), 0.0);
        assert!(endo_connection(Arc::new(BumpConnection::zero(2)), Arc::new(BumpConnection::zero(3))).is_err());
    }

    /// Backward RK4 of `w′ = −B(γ′)w − F`, `w(ρ₊) = 0`, for the entry value.
    fn rk4_entry(b: &AttenuationField, f: &IntegrandField, p: &GeodesicPath, t: f64, n: usize) -> CMat {
        let rhs = |r: f64, w: &CMat| {
            let (x, v) = p.eval(r);
            -b.apply(t, x, v, w) - f.eval(x, v)
        };
        let h = -p.exit_time() / n as f64;
        let (rows, cols) = b.shape();
        let mut w = CMat::zeros(rows, cols);
        for k in 0..n {
            let r = p.exit_time() + k as f64 * h;
            let k1 = rhs(r, &w);
            let k2 = rhs(r + h / 2.0, &(&w + &k1 * C64::from(h / 2.0)));
            let k3 = rhs(r + h / 2.0, &(&w + &k2 * C64::from(h / 2.0)));
            let k4 = rhs(r + h, &(&w + &k3 * C64::from(h)));
            w += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0);
        }
        w
    }

    #[test]
    fn commutator_attenuation_gives_conjugated_integral() {
        let metric = Metric::radial_bump(0.3, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Arc<dyn ConnectionForm> = Arc::new(random_connection(&mut rng, 2, 3, 1.5, 0.5, true));
        let v = Arc::new(random_potential(&mut rng, 2, 2, 1.0, 0.5, true));
        let b = endo_connection(a.clone(), a.clone()).unwrap();
        let t = 0.4;
        let vc = v.clone();
        let f = IntegrandField::function(move |x| vc.value(t, x));
        let paths = rays(&metric, 3, 3);
        let data = art_forward(&b, &f, &paths, t, ArtOptions::default()).unwrap();
        for (p, d) in paths.iter().zip(&data) {
            let ode = rk4_entry(&b, &f, p, t, 3000);
            let e = fro(&(d - &ode));
            assert!(e < 1e-8, "{e}");
            // ∫ U⁻¹VU dr by composite Simpson on an independent transport grid.
            let opts = TransportOptions { step: 7e-4, even: true, ..TransportOptions::default() };
            let u = transport(&*a, p, t, opts).unwrap();
            let w = crate::quadrature::simpson_weights(u.nodes.len() - 1, u.spacing());
            let mut conj = CMat::zeros(2, 2);
            for k in 0..u.nodes.len() {
                conj += u.values[k].adjoint() * v.value(t, p.eval(u.nodes[k]).0) * &u.values[k] * C64::from(w[k]);
            }
            let e = fro(&(d - &conj));
            assert!(e < 1e-8, "{e}");
        }
    }

    #[test]
    fn covariant_gradients_are_invisible() {
        let metric = Metric::radial_bump(0.3, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a1: Arc<dyn ConnectionForm> = Arc::new(random_connection(&mut rng, 2, 2, 1.0, 0.5, false));
        let a2: Arc<dyn ConnectionForm> = Arc::new(random_connection(&mut rng, 2, 2, 1.0, 0.5, false));
        let b = endo_connection(a1, a2).unwrap();
        let m: Vec<CMat> = (0..3).map(|_| random_hermitian(&mut rng, 2, 1.0) + random_skew_hermitian(&mut rng, 2, 1.0)).collect();
        // p = (1 − |x|²)(M₀ + x₁M₁ + x₂²M₂) vanishes on the boundary.
        let p = move |x: Point| {
            let q = 1.0 - x.norm_squared();
            let inner = &m[0] + &m[1] * C64::from(x[0]) + &m[2] * C64::from(x[1] * x[1]);
            let d = [
                &inner * C64::from(-2.0 * x[0]) + &m[1] * C64::from(q),
                &inner * C64::from(-2.0 * x[1]) + &m[2] * C64::from(2.0 * x[1] * q),
            ];
            (inner * C64::from(q), d)
        };
        let f = covariant_gradient(&b, 0.0, p);
        let data = art_forward(&b, &f, &rays(&metric, 6, 4), 0.0, ArtOptions::default()).unwrap();
        assert!(max_norm(&data) <= 1e-7, "{}", max_norm(&data));
    }

    #[test]
    fn refinement_failure_is_reported() {
        let b = AttenuationField::zero(1, false);
        let f = IntegrandField::function(|x: Point| scalar((40.0 * x[0]).cos()));
        let p = &rays(&Metric::flat(), 1, 1)[0];
        let coarse = ArtOptions { step: 0.2, tolerance: Some(1e-10) };
        assert!(matches!(transport_solve(&b, &f, p, 0.0, coarse), Err(Error::Accuracy(_))));
        let fine = ArtOptions { step: 1e-3, tolerance: Some(1e-6) };
        assert!(transport_solve(&b, &f, p, 0.0, fine).is_ok());
    }
}
