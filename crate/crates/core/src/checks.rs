//! Property suite shared by the acceptance tests and the command-line runner.
//!
//! Every check builds its own seeded fields, measures a handful of
//! quantities and compares each against a fixed bound. The `smoke` scale
//! shrinks the workload while keeping every bound unchanged.

use crate::beams::{build_beam, build_phase, dominant_pair, solve_riccati, spc_limit_check, AmplitudeOptions, BeamConfig, SpcOptions, TubeQuadrature};
use crate::bundle::{
    gauge_transform, random_connection, random_potential, scattering, scattering_identity_gap, transport, BumpConnection, BumpPotential,
    ConnectionForm, ExpGauge, Gauge, Potential, Profile, TransportOptions,
};
use crate::geometry::{build_fermi_chart, sample_inflow, sample_parallel, trace_geodesic, GeodesicPath, Metric};
use crate::linalg::{basis_vector, fro, random_unit_vector};
use crate::raytransform::{
    art_forward, assemble_system, boundary_gauge_defect, covariant_gradient, endo_connection, invert, max_norm, reconstruct_gauge, ArtOptions,
    AssemblyOptions, FieldKind, GaugeOptions, IntegrandField, InversionOptions, PixelField, PixelGrid,
};
use crate::schrodinger::{
    dtn_map, energy_report, evolve, source_solve, BoundaryData, Discretization, Domain, Manufactured, Scheme, Sources,
};
use crate::{CMat, Point, Result, C64, I};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;
use std::time::Instant;

/// Workload of a suite run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Full,
    Smoke,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    /// Added to every check's own seed.
    pub seed: u64,
    pub scale: Scale,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: 0, scale: Scale::Full }
    }
}

impl SuiteOptions {
    fn full(&self) -> bool {
        self.scale == Scale::Full
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(salt))
    }
}

/// Acceptance bound of one measured quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "limit", rename_all = "kebab-case")]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
    Positive,
}

impl Bound {
    pub fn holds(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost(l) => v <= l,
            Bound::AtLeast(l) => v >= l,
            Bound::Positive => v > 0.0,
        }
    }
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::AtMost(l) => write!(f, "<= {l:.3e}"),
            Bound::AtLeast(l) => write!(f, ">= {l:.3e}"),
            Bound::Positive => write!(f, "> 0"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
}

impl Measurement {
    pub fn new(name: &str, value: f64, bound: Bound) -> Self {
        Self { name: name.into(), value, bound }
    }

    pub fn passed(&self) -> bool {
        self.bound.holds(self.value)
    }
}

/// A named property with a descriptive anchor tag.
#[derive(Clone, Copy)]
pub struct Check {
    pub id: &'static str,
    pub name: &'static str,
    pub anchor: &'static str,
    run: fn(&SuiteOptions) -> Result<Vec<Measurement>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub id: String,
    pub name: String,
    pub anchor: String,
    pub passed: bool,
    pub seconds: f64,
    pub measurements: Vec<Measurement>,
    pub error: Option<String>,
}

impl CheckReport {
    /// One line: status, id, name, anchor and every measurement.
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let body = match &self.error {
            Some(e) => format!("error: {e}"),
            None => self
                .measurements
                .iter()
                .map(|m| format!("{}={:.3e} ({}{})", m.name, m.value, m.bound, if m.passed() { "" } else { " violated" }))
                .collect::<Vec<_>>()
                .join("; "),
        };
        format!("{status} {} {} [{}] {body} ({:.1} s)", self.id, self.name, self.anchor, self.seconds)
    }
}

impl Check {
    pub fn run(&self, opts: &SuiteOptions) -> CheckReport {
        let start = Instant::now();
        let outcome = (self.run)(opts);
        let seconds = start.elapsed().as_secs_f64();
        let (measurements, error) = match outcome {
            Ok(m) => (m, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        CheckReport {
            id: self.id.into(),
            name: self.name.into(),
            anchor: self.anchor.into(),
            passed: error.is_none() && !measurements.is_empty() && measurements.iter().all(Measurement::passed),
            seconds,
            measurements,
            error,
        }
    }
}

/// The ten acceptance properties in order.
pub fn checks() -> Vec<Check> {
    vec![
        Check { id: "C1", name: "unitary transport", anchor: "parallel-transport-unitarity", run: unitary_transport },
        Check { id: "C2", name: "scattering gauge invariance", anchor: "scattering-gauge-invariance", run: scattering_gauge_invariance },
        Check { id: "C3", name: "scattering identity", anchor: "scattering-identity", run: scattering_identity },
        Check { id: "C4", name: "Riccati identities", anchor: "riccati-determinant", run: riccati_identities },
        Check { id: "C5", name: "Eikonal hierarchy", anchor: "eikonal-order", run: eikonal_hierarchy },
        Check { id: "C6", name: "beam residual scaling", anchor: "approximate-solution", run: beam_residual_scaling },
        Check { id: "C7", name: "stationary-phase limit", anchor: "stationary-phase-limit", run: stationary_phase_limit },
        Check { id: "C8", name: "ray-transform round trip", anchor: "attenuated-ray-transform", run: ray_transform_round_trip },
        Check { id: "C9", name: "gauge reconstruction", anchor: "candidate-gauge", run: gauge_reconstruction },
        Check { id: "C10", name: "Schrodinger solver", anchor: "energy-estimates-and-dtn-gauge-invariance", run: schrodinger_solver },
    ]
}

pub fn find_check(id: &str) -> Option<Check> {
    checks().into_iter().find(|c| c.id.eq_ignore_ascii_case(id))
}

pub fn run_all(opts: &SuiteOptions) -> Vec<CheckReport> {
    checks().iter().map(|c| c.run(opts)).collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).map(|(a, b)| (a.ln(), b.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    num / den
}

fn curved() -> Metric {
    Metric::radial_bump(0.3, 0.5).expect("valid metric")
}

fn trace_all(metric: &Metric, n_points: usize, n_dirs: usize) -> Result<Vec<GeodesicPath>> {
    sample_inflow(metric, n_points, n_dirs).par_iter().map(|s| trace_geodesic(metric, s.x, s.theta, 1e-3)).collect()
}

fn elapsed(start: Instant, limit: f64) -> Measurement {
    Measurement::new("runtime_s", start.elapsed().as_secs_f64(), Bound::AtMost(limit))
}

fn unitary_transport(opts: &SuiteOptions) -> Result<Vec<Measurement>> {
    let start = Instant::now();
    let metric = curved();
    let mut rng = opts.rng(1);
    let (pairs, np, nd) = if opts.full() { (5, 20, 5) } else { (1, 4, 3) };
    let paths = trace_all(&metric, np, nd)?;
    let conns: Vec<BumpConnection> = (0..2 * pairs).map(|_| random_connection(&mut rng, 2, 3, 1.0, 0.5, true)).collect();
    let t = 0.4;
    let mut defect = 0.0f64;
    for a in &conns {
        let d = paths
            .par_iter()
            .map(|p| Ok(transport(a, p, t, TransportOptions::with_step(1e-3))?.unitarity_defect()))
            .collect::<Result<Vec<f64>>>()?;
        defect = d.into_iter().fold(defect, f64::max);
    }
    // Truncation error on coarse steps, against a fine reference.
    let mut worst_rate = f64::INFINITY;
    for a in &conns {
        let p = &paths[0];
        let end = |h: f64| transport(a, p, t, TransportOptions::with_step(h)).map(|s| s.endpoint().clone());
        let reference = end(0.0025)?;
        let errs = [0.08, 0.04, 0.02].iter().map(|&h| end(h).map(|u| fro(&(u - &reference)))).collect::<Result<Vec<f64>>>()?;
        for w in errs.windows(2) {
            worst_rate = worst_rate.min(w[0] / w[1]);
        }
    }
    Ok(vec![
        Measurement::new("max_unitarity_defect", defect, Bound::AtMost(1e-9)),
        Measurement::new("min_error_reduction_on_halving", worst_rate, Bound::AtLeast(8.0)),
        elapsed(start, 30.0),
    ])
}

fn scattering_gauge_invariance(opts: &SuiteOptions) -> Result<Vec<Measurement>> {
    let start = Instant::now();
    let metric = curved();
    let mut rng = opts.rng(2);
    let a: Arc<dyn ConnectionForm> = Arc::new(random_connection(&mut rng, 2, 3, 1.0, 0.5, true));
    let g = Arc::new(ExpGauge::random(&mut rng, 2, 2, Profile::Disk { radius: 1.0 }, true));
    let (at, _) = gauge_transform(a.clone(), Arc::new(BumpPotential::zero(2)), g, 1.0)?;
    let samples = if opts.full() { sample_inflow(&metric, 20, 5) } else { sample_inflow(&metric, 4, 3) };
    let mut gap = 0.0f64;
    for t in [0.1, 0.5, 0.9] {
        let c = scattering(&metric, a.as_ref(), t, &samples, TransportOptions::default())?;
        let ct = scattering(&metric, at.as_ref(), t, &samples, TransportOptions::default())?;
        gap = gap.max(c.max_gap(&ct));
    }
    Ok(vec![
        Measurement::new("rays", samples.len() as f64, Bound::AtLeast(if opts.full() { 100.0 } else { 1.0 })),
        Measurement::new("max_scattering_gap", gap, Bound::AtMost(1e-7)),
        elapsed(start, 60.0),
    ])
}

fn scattering_identity(opts: &SuiteOptions) -> Result<Vec<Measurement>> {
    let metric = curved();
    let mut rng = opts.rng(3);
    let paths = trace_all(&metric, 10, 3)?;
    let trials = if opts.full() { 50 } else { 5 };
    let mut gap = 0.0f64;
    let mut scale = 0.0f64;
    for _ in 0..trials {
        let a1 = random_connection(&mut rng, 2, 3, 1.0, 0.5, true);
        let a2 = random_connection(&mut rng, 2, 3, 1.0, 0.5, true);
        let path = &paths[rng.gen_range(0..paths.len())];
        let t = rng.gen_range(0.0..1.0);
        let (w1, w2) = (random_unit_vector(&mut rng, 2), random_unit_vector(&mut rng, 2));
        let c = scattering_identity_gap(&a1, &a2, path, t, &w1, &w2, 1e-3)?;
        gap = gap.max(c.gap);
        scale = scale.max(c.lhs.norm());
    }
    Ok(vec![
        Measurement::new("max_side_gap", gap, Bound::AtMost(1e-7)),
        Measurement::new("max_lhs", scale, Bound::Positive),
    ])
}

fn riccati_identities(opts: &SuiteOptions) -> Result<Vec<Measurement>> {
    let nodes: Vec<f64> = (0..=200).map(|k| k as f64 * 0.01).collect();
    let anchor = 100;
    let h0 = C64::new(0.3, 1.0);
    let free = solve_riccati(&|_| 0.0, h0, &nodes, anchor, 1e-13)?;
    let q = 1.3;
    let focusing = solve_riccati(&|_| q * q, h0, &nodes, anchor, 1e-13)?;
    let mut closed = 0.0f64;
    for (k, &r) in nodes.iter().enumerate() {
        let u = r - nodes[anchor];
        closed = closed.max((free.h[k] - h0 / (h0 * u + 1.0)).norm());
        let th = C64::from((q * u).tanh());
        let exact = (h0 + th * q) * q / (h0 * th + q);
        closed = closed.max((focusing.h[k] - exact).norm());
    }
    let metric = curved();
    let paths = if opts.full() { trace_all(&metric, 4, 3)? } else { trace_all(&metric, 2, 1)? };
    let stats = paths
        .par_iter()
        .map(|p| {
            let chart = build_fermi_chart(&metric, p, 0.4, 2)?;
            let phase = build_phase(&chart, I, 2)?;
            Ok((phase.riccati.determinant_defect(), phase.riccati.min_imag()))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let det = stats.iter().map(|s| s.0).fold(0.0, f64::max);
    let min_im = stats.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    Ok(vec![
        Measurement::new("closed_form_error", closed, Bound::AtMost(1e-10)),
        Measurement::new("max_determinant_defect", det, Bound::AtMost(1e-8)),
        Measurement::new("min_im_h", min_im, Bound::Positive),
    ])
}

fn eikonal_hierarchy(opts: &SuiteOptions) -> Result<Vec<Measurement>> {
    let start = Instant::now();
    let g = Metric::flat();
    let path = trace_geodesic(&g, Point::new(-1.0, 0.0), Point::new(1.0, 0.0), 1e-3)?;
    let ys = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
    let orders: &[usize] = if opts.full() { &[2, 3, 4] } else { &[2, 4] };
    let mut margin = f64::INFINITY;
    let mut axis = 0.0f64;
    for &n in orders {
        let chart = build_fermi_chart(&g, &path, 16.0, n)?;
        axis = axis.max(chart.on_axis_defect());
        let phase = build_phase(&chart, I, n)?;
        let last = phase.fine_nodes() - 1;
        for j in [0, 37, last / 3, last / 2 + 5, last] {
            let res: Vec<f64> = ys.iter().map(|&y| phase.eikonal_residual(j, y, [[1.0, 0.0], [0.0, 1.0]]).norm()).collect();
            margin = margin.min(log_slope(&ys, &res) - n as f64);
        }
        for j in 0..=last {
            let jet = phase.jet(j, 0.0);
            axis = axis.max(jet.value.norm()).max(jet.y.norm()).max(jet.r.norm());
        }
    }
    Ok(vec![
        Measurement::new("min_slope_minus_order", margin, Bound::AtLeast(0.7)),
        Measurement::new("on_axis_defect", axis, Bound::AtMost(1e-9)),
        elapsed(start, 60.0),
    ])
}

fn beam_residual_scaling(opts: &SuiteOptions) -> Result<Vec<Measurement>> {
    let start = Instant::now();
    let g = Metric::flat();
    let path = trace_geodesic(&g, Point::new(-1.0, 0.0), Point::new(1.0, 0.0), 1e-3)?;
    let mut rng = opts.rng(7);
    let a = random_connection(&mut rng, 2, 3, 1.0, 0.5, true);
    let v = random_potential(&mut rng, 2, 3, 1.0, 0.5, true);
    let mut amp = AmplitudeOptions::new(basis_vector(2, 0), 1.0);
    amp.y_order = 4;
    amp.corrections = 1;
    let mut cfg = BeamConfig::new(32.0, amp);
    cfg.phase_order = 5;
    let beam = build_beam(&g, &path, &a, &v, &cfg)?;
    let s_list: &[f64] = if opts.full() { &[32.0, 64.0, 128.0, 256.0] } else { &[32.0, 64.0] };
    let q = TubeQuadrature::default();
    let mut residuals = Vec::new();
    let mut norms = Vec::new();
    for &s in s_list {
        let report = beam.with_s(s).residual_norm(&a, &v, &q)?;
        residuals.push(report.residual);
        norms.push(report.norm);
    }
    let slope = log_slope(s_list, &residuals);
    let (lo, hi) = norms.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &n| (l.min(n), h.max(n)));
    Ok(vec![
        Measurement::new("residual_slope", slope, Bound::AtMost(-0.8)),
        Measurement::new("norm_spread", hi / lo - 1.0, Bound::AtMost(0.1)),
        elapsed(start, 300.0),
    ])
}

fn stationary_phase_limit(opts: &SuiteOptions) -> Result<Vec<Measurement>> {
    let metric = Metric::flat();
    let mut rng = opts.rng(4);
    let samples = sample_inflow(&metric, 10, 3);
    let pairs = if opts.full() { 10 } else { 2 };
    let s_list: &[f64] = if opts.full() { &[32.0, 64.0, 128.0, 256.0] } else { &[64.0, 256.0] };
    let spc = if opts.full() {
        SpcOptions::new(1.0)
    } else {
        SpcOptions { time_intervals: 32, limit_time_panels: 4, ..SpcOptions::new(1.0) }
    };
    let mut unordered = 0usize;
    let mut worst = 0.0f64;
    for i in 0..pairs {
        let a1 = random_connection(&mut rng, 2, 3, 1.0, 0.5, true);
        let a2 = random_connection(&mut rng, 2, 3, 1.0, 0.5, true);
        let s = &samples[3 * i + 1];
        let path = trace_geodesic(&metric, s.x, s.theta, 1e-3)?;
        let (w1, w2) = dominant_pair(&a1, &a2, &path, 0.5)?;
        let table = spc_limit_check(&metric, &path, &a1, &a2, &w1, &w2, s_list, &spc)?;
        if !table.decreasing() {
            unordered += 1;
        }
        worst = worst.max(table.rows.last().map_or(f64::INFINITY, |r| r.error));
    }
    Ok(vec![
        Measurement::new("pairs_not_decreasing", unordered as f64, Bound::AtMost(0.0)),
        Measurement::new("max_relative_error_at_largest_s", worst, Bound::AtMost(0.05)),
    ])
}

/// Hermitian phantom: two Gaussian blobs carrying `σ_x` and `σ_z`.
pub fn hermitian_phantom(x: Point) -> CMat {
    let (o, l) = (C64::from(0.0), C64::from(1.0));
    let sx = CMat::from_row_slice(2, 2, &[o, l, l, o]);
    let sz = CMat::from_row_slice(2, 2, &[l, o, o, -l]);
    sx * C64::from((-(x - Point::new(0.3, 0.2)).norm_squared() / 0.08).exp())
        + sz * C64::from((-(x - Point::new(-0.25, -0.3)).norm_squared() / 0.12).exp())
}

fn ray_transform_round_trip(opts: &SuiteOptions) -> Result<Vec<Measurement>> {
    let start = Instant::now();
    let metric = Metric::flat();
    let (angles, offsets, size) = if opts.full() { (25, 80, 64) } else { (16, 48, 24) };
    let paths: Vec<GeodesicPath> = sample_parallel(&metric, angles, offsets)
        .par_iter()
        .map(|s| trace_geodesic(&metric, s.x, s.theta, 1e-3))
        .collect::<Result<_>>()?;
    let mut rng = opts.rng(11);
    let a: Arc<dyn ConnectionForm> = Arc::new(random_connection(&mut rng, 2, 3, 1.0, 0.5, false));
    let b = endo_connection(a.clone(), a)?;
    let data = art_forward(&b, &IntegrandField::function(hermitian_phantom), &paths, 0.0, ArtOptions::default())?;
    let grid = PixelGrid::new(size, 1.0)?;
    let system = assemble_system(&b, &paths, &grid, FieldKind::Function, 0.0, AssemblyOptions::default())?;
    let inversion = invert(&system, &data, InversionOptions::default())?;
    let truth = PixelField::sample(&grid, hermitian_phantom);
    let error = inversion.field.relative_error(&truth, &grid);

    let m: Vec<CMat> = (0..3).map(|_| crate::linalg::random_hermitian(&mut rng, 2, 1.0)).collect();
    let p = move |x: Point| {
        let q = 1.0 - x.norm_squared();
        let inner = &m[0] + &m[1] * C64::from(x[0]) + &m[2] * C64::from(x[1] * x[1]);
        let d = [&inner * C64::from(-2.0 * x[0]) + &m[1] * C64::from(q), &inner * C64::from(-2.0 * x[1]) + &m[2] * C64::from(2.0 * x[1] * q)];
        (inner * C64::from(q), d)
    };
    let kernel = art_forward(&b, &covariant_gradient(&b, 0.0, p), &paths, 0.0, ArtOptions::default())?;
    Ok(vec![
        Measurement::new("rays", paths.len() as f64, Bound::AtLeast(if opts.full() { 2000.0 } else { 1.0 })),
        Measurement::new("relative_l2_error", error, Bound::AtMost(0.05)),
        Measurement::new("gauge_direction_data", max_norm(&kernel), Bound::AtMost(1e-7)),
        elapsed(start, 300.0),
    ])
}

fn gauge_reconstruction(opts: &SuiteOptions) -> Result<Vec<Measurement>> {
    let metric = curved();
    let mut rng = opts.rng(9);
    let a: Arc<dyn ConnectionForm> = Arc::new(random_connection(&mut rng, 2, 3, 1.0, 0.5, true));
    let g = Arc::new(ExpGauge::random(&mut rng, 2, 2, Profile::Disk { radius: 1.0 }, true));
    let (at, _) = gauge_transform(a.clone(), Arc::new(BumpPotential::zero(2)), g.clone(), 1.0)?;
    let count = if opts.full() { 12 } else { 3 };
    let points: Vec<Point> = (0..count)
        .map(|k| {
            let rho = 0.85 * ((k % 4) as f64 + 0.5) / 4.0;
            let ang = 2.4 * k as f64;
            Point::new(rho * ang.cos(), rho * ang.sin())
        })
        .collect();
    let t = 0.35;
    let directions = if opts.full() { 16 } else { 6 };
    let rec = reconstruct_gauge(&metric, a.as_ref(), at.as_ref(), &points, t, GaugeOptions { directions, ..Default::default() })?;
    let defect = boundary_gauge_defect(&metric, a.as_ref(), at.as_ref(), &sample_inflow(&metric, 6, 3), t, 1e-3)?;
    Ok(vec![
        Measurement::new("max_directional_spread", rec.max_spread(), Bound::AtMost(1e-6)),
        Measurement::new("max_gauge_error", rec.max_error(|x| g.value(t, x)), Bound::AtMost(1e-5)),
        Measurement::new("boundary_identity_defect", defect, Bound::AtMost(1e-7)),
    ])
}

/// Connection and potential bumps centred in the unit square.
pub fn square_fields<R: Rng>(rng: &mut R, rank: usize, time_dependent: bool) -> (BumpConnection, BumpPotential) {
    let mut a = random_connection(rng, rank, 3, 1.0, 0.3, time_dependent);
    let mut v = random_potential(rng, rank, 2, 1.0, 0.3, time_dependent);
    let shift = Point::new(0.5, 0.5);
    a.bumps.iter_mut().for_each(|b| b.center += shift);
    v.bumps.iter_mut().for_each(|b| b.center += shift);
    (a, v)
}

fn variation(values: &[f64]) -> f64 {
    let (lo, hi) = values.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    hi / lo - 1.0
}

fn schrodinger_solver(opts: &SuiteOptions) -> Result<Vec<Measurement>> {
    let start = Instant::now();
    let mut rng = opts.rng(10);
    let (a, v) = square_fields(&mut rng, 2, true);
    let horizon = 0.5;
    let grids: &[usize] = if opts.full() { &[16, 32, 64] } else { &[8, 16, 32] };
    let disc = |cells: usize| Discretization::square(cells, horizon, 1).with_proportional_steps(1.0);

    let w = random_unit_vector(&mut rng, 2);
    let u0 = move |x: Point| &w * C64::from((std::f64::consts::PI * x.x).sin() * (std::f64::consts::PI * x.y).sin() * (1.0 + x.x));
    let curved_disc = disc(grids[1]).with_metric(curved());
    let sol = evolve(&a, &v, &u0, &curved_disc)?;
    let n0 = sol.norm(0);
    let drift = (0..sol.times.len()).map(|k| (sol.norm(k) - n0).abs() / n0).fold(0.0, f64::max);

    let exact = Manufactured::random(&mut rng, 2, 2);
    let flat = Metric::flat();
    let u_exact = |t: f64, x: Point| exact.value(t, x);
    let f_exact = |t: f64, x: Point| exact.source(&a, &v, &flat, t, x);
    let mut errors = Vec::new();
    for &n in grids {
        let sol = Scheme::new(&disc(n), &a, &v)?.solve(&Sources { boundary: Some(&u_exact), source: Some(&f_exact), initial: None })?;
        errors.push((0..sol.times.len()).map(|k| sol.error(k, &u_exact)).fold(0.0, f64::max));
    }
    let order = errors.windows(2).map(|e| (e[0] / e[1]).log2()).fold(f64::INFINITY, f64::min);

    let gauge = Arc::new(ExpGauge::random(&mut rng, 2, 2, Profile::Square, true));
    let (a2, v2) = gauge_transform(Arc::new(a.clone()), Arc::new(v.clone()), gauge, horizon)?;
    let data = BoundaryData::random(&mut rng, 2, Domain::Square, horizon);
    let mut gaps = Vec::new();
    for &n in grids {
        let r1 = dtn_map(&a, &v, &data, &disc(n))?;
        let r2 = dtn_map(a2.as_ref(), v2.as_ref() as &dyn Potential, &data, &disc(n))?;
        gaps.push(r1.relative_gap(&r2)?);
    }
    let gap_rate = gaps.windows(2).map(|g| g[0] / g[1]).fold(f64::INFINITY, f64::min);

    let forcing = Manufactured::random(&mut rng, 2, 2);
    let source = |t: f64, x: Point| forcing.value(t, x);
    let mut ratios: Vec<[f64; 4]> = Vec::new();
    for &n in grids {
        let sol = source_solve(&a, &v, &source, &disc(n))?;
        let report = energy_report(&sol, Some(&source));
        ratios.push(report.ratios.map(|r| r.value().unwrap_or(f64::NAN)));
    }
    let spread = (0..4).map(|i| variation(&ratios.iter().map(|r| r[i]).collect::<Vec<_>>())).fold(0.0, f64::max);

    Ok(vec![
        Measurement::new("norm_drift", drift, Bound::AtMost(1e-10)),
        Measurement::new("manufactured_order", order, Bound::AtLeast(1.8)),
        Measurement::new("dtn_gap_finest", *gaps.last().expect("grids"), Bound::AtMost(1e-2)),
        Measurement::new("dtn_gap_reduction", gap_rate, Bound::AtLeast(3.0)),
        Measurement::new("energy_ratio_variation", spread, Bound::AtMost(0.2)),
        elapsed(start, 300.0),
    ])
}
