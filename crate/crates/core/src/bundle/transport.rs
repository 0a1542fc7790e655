use super::ConnectionForm;
use crate::geometry::{trace_geodesic, GeodesicPath, InflowSample, Metric};
use crate::linalg::{expm, fro, identity, inner, unitarity_defect};
use crate::quadrature::simpson_weights;
use crate::{CMat, CVec, Error, Point, Result, C64};
use rayon::prelude::*;
use serde::Serialize;

/// Step control for [`transport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    /// Target step; the path is split into equal intervals no longer than this.
    pub step: f64,
    /// Exact interval count, overriding `step`.
    pub intervals: Option<usize>,
    /// Round the interval count up to an even number (for Simpson quadrature).
    pub even: bool,
    /// Optional endpoint accuracy, estimated by step doubling.
    pub tolerance: Option<f64>,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self { step: 1e-3, intervals: None, even: false, tolerance: None }
    }
}

impl TransportOptions {
    pub fn with_step(step: f64) -> Self {
        Self { step, ..Self::default() }
    }

    fn intervals_for(&self, length: f64) -> usize {
        let mut n = self.intervals.unwrap_or_else(|| (length / self.step).ceil().max(1.0) as usize);
        if self.even && n % 2 == 1 {
            n += 1;
        }
        n.max(1)
    }
}

/// Fundamental solution `U_A(r)` of `∂_r U + A(γ′)U = 0`, `U(0) = Id`, on a
/// uniform grid of `[0, ρ₊]`.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub time: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<CMat>,
}

impl TransportSolution {
    pub fn endpoint(&self) -> &CMat {
        self.values.last().expect("non-empty")
    }

    pub fn spacing(&self) -> f64 {
        self.nodes[1] - self.nodes[0]
    }

    /// `U(r_k) w` at every node.
    pub fn apply(&self, w: &CVec) -> Vec<CVec> {
        self.values.iter().map(|u| u * w).collect()
    }

    /// `max_k ‖U*U − Id‖_F`.
    pub fn unitarity_defect(&self) -> f64 {
        self.values.iter().map(unitarity_defect).fold(0.0, f64::max)
    }
}

/// Gauss nodes of the commutator-free step.
const C1: f64 = 0.5 - 0.288_675_134_594_812_9;
const C2: f64 = 0.5 + 0.288_675_134_594_812_9;
/// Weights `¼ ∓ √3/6`.
const P: f64 = 0.25 - 0.288_675_134_594_812_9;
const Q: f64 = 0.25 + 0.288_675_134_594_812_9;

fn generator(a: &dyn ConnectionForm, path: &GeodesicPath, t: f64, r: f64) -> CMat {
    let (x, v) = path.eval(r);
    -a.along(t, x, v)
}

/// One fourth-order commutator-free exponential step from `r` to `r + h`.
pub(crate) fn cf4_step(a: &dyn ConnectionForm, path: &GeodesicPath, t: f64, r: f64, h: f64) -> CMat {
    let m1 = generator(a, path, t, r + C1 * h);
    let m2 = generator(a, path, t, r + C2 * h);
    let right = expm(&((&m1 * C64::from(Q) + &m2 * C64::from(P)) * C64::from(h)));
    let left = expm(&((&m1 * C64::from(P) + &m2 * C64::from(Q)) * C64::from(h)));
    left * right
}

fn integrate(a: &dyn ConnectionForm, path: &GeodesicPath, t: f64, n: usize) -> TransportSolution {
    let length = path.exit_time();
    let h = length / n as f64;
    let mut nodes = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    let mut u = identity(a.rank());
    nodes.push(0.0);
    values.push(u.clone());
    for k in 0..n {
        let r = k as f64 * h;
        u = cf4_step(a, path, t, r, h) * u;
        nodes.push(if k + 1 == n { length } else { r + h });
        values.push(u.clone());
    }
    TransportSolution { time: t, nodes, values }
}

/// Parallel transport along `path` at time `t`.
pub fn transport(a: &dyn ConnectionForm, path: &GeodesicPath, t: f64, opts: TransportOptions) -> Result<TransportSolution> {
    if !(opts.step > 0.0) {
        return Err(Error::Invalid(format!("transport step must be positive, got {}", opts.step)));
    }
    let n = opts.intervals_for(path.exit_time());
    let sol = integrate(a, path, t, n);
    if let Some(tol) = opts.tolerance {
        let fine = integrate(a, path, t, 2 * n);
        let est = fro(&(sol.endpoint() - fine.endpoint())) * 16.0 / 15.0;
        if est > tol {
            return Err(Error::Accuracy(format!("transport error estimate {est:.3e} exceeds {tol:.3e}")));
        }
    }
    Ok(sol)
}

/// Transport matrix from `r_from` to `r_to` (either direction) in equal steps no longer than `step`.
pub fn transport_between(a: &dyn ConnectionForm, path: &GeodesicPath, t: f64, r_from: f64, r_to: f64, step: f64) -> CMat {
    let n = ((r_to - r_from).abs() / step).ceil().max(1.0) as usize;
    let h = (r_to - r_from) / n as f64;
    let mut u = identity(a.rank());
    for k in 0..n {
        u = cf4_step(a, path, t, r_from + k as f64 * h, h) * u;
    }
    u
}

/// `U(r_j) U(r_anchor)⁻¹` on the grid `r_j = r0 + j h`, `j < count`, with
/// `substeps` steps per grid interval.
pub fn transport_grid(
    a: &dyn ConnectionForm,
    path: &GeodesicPath,
    t: f64,
    grid: (f64, f64, usize),
    anchor: usize,
    substeps: usize,
) -> Vec<CMat> {
    let (r0, h, count) = grid;
    let m = substeps.max(1);
    let sub = h / m as f64;
    let mut out = vec![CMat::zeros(0, 0); count];
    out[anchor] = identity(a.rank());
    for j in anchor..count - 1 {
        let mut u = out[j].clone();
        for i in 0..m {
            u = cf4_step(a, path, t, r0 + j as f64 * h + i as f64 * sub, sub) * u;
        }
        out[j + 1] = u;
    }
    for j in (1..=anchor).rev() {
        let mut u = out[j].clone();
        for i in 0..m {
            u = cf4_step(a, path, t, r0 + j as f64 * h - i as f64 * sub, -sub) * u;
        }
        out[j - 1] = u;
    }
    out
}

/// One element of the scattering data.
#[derive(Debug, Clone)]
pub struct ScatteringSample {
    pub x: Point,
    pub theta: Point,
    pub c: CMat,
}

/// `C_A(x, θ) = U_A(ρ₊(x, θ))` on a list of inflow samples.
#[derive(Debug, Clone)]
pub struct ScatteringData {
    pub time: f64,
    pub samples: Vec<ScatteringSample>,
}

#[derive(Serialize)]
struct JsonSample {
    x: [f64; 2],
    theta: [f64; 2],
    #[serde(rename = "C")]
    c: Vec<[f64; 2]>,
}

impl ScatteringData {
    /// JSON list of `{x, theta, C}` with `C` row-major as `[re, im]` pairs.
    pub fn to_json(&self) -> serde_json::Value {
        let list: Vec<JsonSample> = self
            .samples
            .iter()
            .map(|s| {
                let (r, c) = s.c.shape();
                JsonSample {
                    x: [s.x[0], s.x[1]],
                    theta: [s.theta[0], s.theta[1]],
                    c: (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).map(|(i, j)| [s.c[(i, j)].re, s.c[(i, j)].im]).collect(),
                }
            })
            .collect();
        serde_json::json!({ "time": self.time, "samples": list })
    }

    /// Largest `‖C_self − C_other‖_F` over matching samples.
    pub fn max_gap(&self, other: &ScatteringData) -> f64 {
        self.samples.iter().zip(&other.samples).map(|(a, b)| fro(&(&a.c - &b.c))).fold(0.0, f64::max)
    }
}

/// Scattering data on already traced paths (parallel over rays).
pub fn scattering_on_paths(
    a: &dyn ConnectionForm,
    t: f64,
    paths: &[GeodesicPath],
    opts: TransportOptions,
) -> Result<ScatteringData> {
    let samples = paths
        .par_iter()
        .map(|p| {
            let sol = transport(a, p, t, opts)?;
            let e = p.entry();
            Ok(ScatteringSample { x: e.x, theta: e.theta, c: sol.endpoint().clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScatteringData { time: t, samples })
}

/// Traces each inflow sample and returns its scattering matrix.
pub fn scattering(
    metric: &Metric,
    a: &dyn ConnectionForm,
    t: f64,
    samples: &[InflowSample],
    opts: TransportOptions,
) -> Result<ScatteringData> {
    let paths = samples
        .par_iter()
        .map(|s| trace_geodesic(metric, s.x, s.theta, opts.step))
        .collect::<Result<Vec<_>>>()?;
    scattering_on_paths(a, t, &paths, opts)
}

/// Both sides of the scattering identity
/// `⟨(C₂⁻¹C₁ − Id)w₁, w₂⟩ = ∫₀^{ρ₊} ⟨(A₂ − A₁)(γ′)U₁w₁, U₂w₂⟩ dr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub lhs: C64,
    pub rhs: C64,
    pub gap: f64,
}

/// Left side from the two endpoint matrices; right side by composite Simpson
/// quadrature of the transported vectors along the shared path.
pub fn scattering_identity_gap(
    a1: &dyn ConnectionForm,
    a2: &dyn ConnectionForm,
    path: &GeodesicPath,
    t: f64,
    w1: &CVec,
    w2: &CVec,
    step: f64,
) -> Result<IdentityCheck> {
    let opts = TransportOptions { step, even: true, ..TransportOptions::default() };
    let u1 = transport(a1, path, t, opts)?;
    let u2 = transport(a2, path, t, opts)?;
    let c1 = u1.endpoint();
    let c2 = u2.endpoint();
    let c2inv = c2.clone().try_inverse().ok_or_else(|| Error::LinearSolve("singular scattering matrix".into()))?;
    let lhs = inner(&((&c2inv * c1 - identity(a1.rank())) * w1), w2);
    let n = u1.nodes.len() - 1;
    let weights = simpson_weights(n, u1.spacing());
    let mut rhs = C64::from(0.0);
    for k in 0..=n {
        let (x, v) = path.eval(u1.nodes[k]);
        let diff = a2.along(t, x, v) - a1.along(t, x, v);
        rhs += inner(&(diff * (&u1.values[k] * w1)), &(&u2.values[k] * w2)) * weights[k];
    }
    Ok(IdentityCheck { lhs, rhs, gap: (lhs - rhs).norm() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{gauge_transform, random_connection, BumpConnection, BumpPotential, ConstantConnection, ExpGauge, Profile};
    use crate::geometry::{sample_inflow, DEFAULT_STEP};
    use crate::linalg::{basis_vector, random_skew_hermitian, random_unit_vector};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn diameter() -> GeodesicPath {
        trace_geodesic(&Metric::flat(), Point::new(-1.0, 0.0), Point::new(1.0, 0.0), DEFAULT_STEP).unwrap()
    }

    #[test]
    fn zero_connection_gives_identity() {
        let sol = transport(&BumpConnection::zero(3), &diameter(), 0.0, TransportOptions::default()).unwrap();
        assert!(sol.values.iter().all(|u| *u == identity(3)));
    }

    #[test]
    fn constant_generator_matches_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a1 = random_skew_hermitian(&mut rng, 2, 1.0);
        let a = ConstantConnection { a: [a1.clone(), random_skew_hermitian(&mut rng, 2, 1.0)] };
        let sol = transport(&a, &diameter(), 0.0, TransportOptions::default()).unwrap();
        for (r, u) in sol.nodes.iter().zip(&sol.values).step_by(97) {
            assert!(fro(&(u - expm(&(&a1 * C64::from(-r))))) < 1e-10);
        }
        let data = scattering(&Metric::flat(), &a, 0.0, &[diameter().entry()], TransportOptions::default()).unwrap();
        assert!(fro(&(&data.samples[0].c - expm(&(&a1 * C64::from(-2.0))))) < 1e-10);
    }

    #[test]
    fn fourth_order_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_connection(&mut rng, 2, 3, 2.0, 0.5, true);
        let path = trace_geodesic(&Metric::flat(), Point::new(-1.0, 0.0), Point::new(0.9, 0.1f64.sqrt() * 0.6).normalize(), 1e-3).unwrap();
        let reference = transport(&a, &path, 0.3, TransportOptions::with_step(1e-3)).unwrap();
        let err = |h: f64| fro(&(transport(&a, &path, 0.3, TransportOptions::with_step(h)).unwrap().endpoint() - reference.endpoint()));
        let (e1, e2) = (err(0.08), err(0.04));
        assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn grid_transport_is_relative_to_anchor() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_connection(&mut rng, 2, 3, 1.5, 0.5, true);
        let path = diameter();
        let full = transport(&a, &path, 0.4, TransportOptions { intervals: Some(400), ..Default::default() }).unwrap();
        let grid = transport_grid(&a, &path, 0.4, (0.0, 0.01, 201), 80, 2);
        let inv = full.values[160].clone().try_inverse().unwrap();
        for j in (0..201).step_by(20) {
            let e = fro(&(&grid[j] - &full.values[2 * j] * &inv));
            assert!(e < 1e-10);
        }
        let u = transport_between(&a, &path, 0.4, 1.7, 0.3, 0.01);
        let back = &full.values[60] * full.values[340].clone().try_inverse().unwrap();
        assert!(fro(&(u - back)) < 1e-8);
    }

    #[test]
    fn tolerance_triggers_accuracy_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_connection(&mut rng, 2, 3, 3.0, 0.5, false);
        let opts = TransportOptions { step: 0.5, tolerance: Some(1e-12), ..Default::default() };
        assert!(matches!(transport(&a, &diameter(), 0.0, opts), Err(Error::Accuracy(_))));
        let ok = TransportOptions { step: 1e-3, tolerance: Some(1e-8), ..Default::default() };
        assert!(transport(&a, &diameter(), 0.0, ok).is_ok());
    }

    #[test]
    fn json_layout() {
        let a = BumpConnection::zero(2);
        let data = scattering(&Metric::flat(), &a, 0.5, &sample_inflow(&Metric::flat(), 2, 1), TransportOptions::with_step(0.01)).unwrap();
        let j = data.to_json();
        assert_eq!(j["samples"].as_array().unwrap().len(), 2);
        assert_eq!(j["samples"][0]["C"].as_array().unwrap().len(), 4);
        assert_eq!(j["samples"][0]["C"][0], serde_json::json!([1.0, 0.0]));
    }

    #[test]
    fn identity_sides_vanish_for_equal_connections() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_connection(&mut rng, 2, 2, 1.0, 0.5, true);
        let w = random_unit_vector(&mut rng, 2);
        let chk = scattering_identity_gap(&a, &a, &diameter(), 0.2, &w, &w, 1e-3).unwrap();
        assert!(chk.lhs.norm() < 1e-13 && chk.rhs.norm() < 1e-15);
    }

    #[test]
    fn gauge_equivalent_pair_has_vanishing_lhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Arc<dyn ConnectionForm> = Arc::new(random_connection(&mut rng, 2, 2, 1.0, 0.5, true));
        let g = Arc::new(ExpGauge::random(&mut rng, 2, 2, Profile::Disk { radius: 1.0 }, true));
        let (at, _) = gauge_transform(a.clone(), Arc::new(BumpPotential::zero(2)), g, 1.0).unwrap();
        let path = trace_geodesic(&Metric::flat(), Point::new(0.0, -1.0), Point::new(0.3, 0.91f64.sqrt()), 1e-3).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let chk = scattering_identity_gap(&*a, &*at, &path, 0.6, &basis_vector(2, i), &basis_vector(2, j), 1e-3).unwrap();
                assert!(chk.lhs.norm() <= 1e-7);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn unitarity_and_identity(seed in 0u64..10_000, t in 0.0f64..1.0, beta in -1.2f64..1.2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a1 = random_connection(&mut rng, 2, 2, 1.5, 0.6, true);
            let a2 = random_connection(&mut rng, 2, 2, 1.5, 0.6, true);
            let g = Metric::radial_bump(0.3, 0.5).unwrap();
            let x = Point::new(-1.0, 0.0);
            let theta = Point::new(beta.cos(), beta.sin()) / g.factor_at(x);
            let path = trace_geodesic(&g, x, theta, 1e-3).unwrap();
            let sol = transport(&a1, &path, t, TransportOptions::default()).unwrap();
            prop_assert!(sol.unitarity_defect() <= 1e-9);
            let w1 = random_unit_vector(&mut rng, 2);
            let w2 = random_unit_vector(&mut rng, 2);
            let chk = scattering_identity_gap(&a1, &a2, &path, t, &w1, &w2, 1e-3).unwrap();
            prop_assert!(chk.gap <= 1e-7);
        }
    }
}
