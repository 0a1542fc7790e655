use super::Metric;
use crate::{Error, Point, Result};
use std::io::Write;

/// Default integrator step.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Angular margin from tangency used when sampling inflow directions.
pub const GRAZING_MARGIN: f64 = 0.05;
/// Rays with `|cos∠(θ, ν)|` below this are rejected as grazing.
const GRAZING_TOL: f64 = 1e-6;
/// Endpoint refinement target `| |x| − R |`.
const EXIT_TOL: f64 = 1e-12;

/// One sample of a geodesic: arc length, position, unit tangent and coordinate acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub r: f64,
    pub x: Point,
    pub theta: Point,
    pub accel: Point,
}

/// Unit-speed geodesic from an inflow point to the boundary.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    samples: Vec<PathSample>,
    step: f64,
}

/// An element of the inflow boundary: boundary point and inward unit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InflowSample {
    pub x: Point,
    pub theta: Point,
}

type State = [f64; 4];

fn rhs(metric: &Metric, s: &State) -> State {
    let x = Point::new(s[0], s[1]);
    let v = Point::new(s[2], s[3]);
    let a = metric.geodesic_accel(x, v);
    [v[0], v[1], a[0], a[1]]
}

fn rk4(metric: &Metric, s: &State, h: f64) -> State {
    let add = |a: &State, b: &State, f: f64| -> State { [a[0] + f * b[0], a[1] + f * b[1], a[2] + f * b[2], a[3] + f * b[3]] };
    let k1 = rhs(metric, s);
    let k2 = rhs(metric, &add(s, &k1, h / 2.0));
    let k3 = rhs(metric, &add(s, &k2, h / 2.0));
    let k4 = rhs(metric, &add(s, &k3, h));
    let mut out = *s;
    for i in 0..4 {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

impl GeodesicPath {
    /// Builds a path from explicit samples (synthetic curves in tests and gluing covers).
    pub fn from_samples(samples: Vec<PathSample>, step: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Invalid("a path needs at least two samples".into()));
        }
        if samples[0].r != 0.0 || samples.windows(2).any(|w| w[1].r <= w[0].r) {
            return Err(Error::Invalid("arc length must start at 0 and increase strictly".into()));
        }
        Ok(Self { samples, step })
    }

    pub fn samples(&self) -> &[PathSample] {
        &self.samples
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// `ρ₊`.
    pub fn exit_time(&self) -> f64 {
        self.samples.last().expect("non-empty").r
    }

    pub fn entry(&self) -> InflowSample {
        let s = self.samples[0];
        InflowSample { x: s.x, theta: s.theta }
    }

    /// Exit point and outgoing tangent.
    pub fn exit(&self) -> (Point, Point) {
        let s = self.samples.last().expect("non-empty");
        (s.x, s.theta)
    }

    fn locate(&self, r: f64) -> usize {
        let n = self.samples.len();
        match self.samples.binary_search_by(|s| s.r.partial_cmp(&r).expect("finite r")) {
            Ok(k) => k.min(n - 2),
            Err(k) => k.saturating_sub(1).min(n - 2),
        }
    }

    /// Position and tangent at arc length `r` by quintic Hermite interpolation.
    pub fn eval(&self, r: f64) -> (Point, Point) {
        let r = r.clamp(0.0, self.exit_time());
        let k = self.locate(r);
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        let h = b.r - a.r;
        let t = (r - a.r) / h;
        let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h5 = 0.5 * (t3 - 2.0 * t4 + t5);
        let d0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
        let d1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
        let d2 = 0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4);
        let d3 = -d0;
        let d4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
        let d5 = 0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4);
        let x = a.x * h0 + a.theta * (h * h1) + a.accel * (h * h * h2) + b.x * h3 + b.theta * (h * h4) + b.accel * (h * h * h5);
        let v = (a.x * d0 + b.x * d3) / h + a.theta * d1 + b.theta * d4 + (a.accel * d2 + b.accel * d5) * h;
        (x, v)
    }

    /// The same curve traversed backwards from the exit point.
    pub fn reversed(&self) -> Self {
        let total = self.exit_time();
        let samples = self
            .samples
            .iter()
            .rev()
            .map(|s| PathSample { r: total - s.r, x: s.x, theta: -s.theta, accel: s.accel })
            .collect::<Vec<_>>();
        let mut samples = samples;
        samples[0].r = 0.0;
        Self { samples, step: self.step }
    }

    /// Arc-length times at which the curve crosses itself (non-adjacent segments intersect).
    pub fn self_intersections(&self) -> Vec<(f64, f64)> {
        let s = &self.samples;
        let mut out = Vec::new();
        for i in 0..s.len() - 1 {
            let (p, p2) = (s[i].x, s[i + 1].x);
            for j in (i + 2)..s.len() - 1 {
                let (q, q2) = (s[j].x, s[j + 1].x);
                let d1 = p2 - p;
                let d2 = q2 - q;
                let den = d1[0] * d2[1] - d1[1] * d2[0];
                // Nearly parallel segments of a geodesic cannot cross transversally.
                if den.abs() <= 1e-9 * d1.norm() * d2.norm() {
                    continue;
                }
                let w = q - p;
                let a = (w[0] * d2[1] - w[1] * d2[0]) / den;
                let b = (w[0] * d1[1] - w[1] * d1[0]) / den;
                if (0.0..1.0).contains(&a) && (0.0..1.0).contains(&b) {
                    out.push((s[i].r + a * (s[i + 1].r - s[i].r), s[j].r + b * (s[j + 1].r - s[j].r)));
                }
            }
        }
        out
    }
}

fn check_inflow(metric: &Metric, x: Point, theta: Point) -> Result<()> {
    let r = metric.radius();
    if (x.norm() - r).abs() > 1e-9 {
        return Err(Error::Domain(format!("start point is not on the boundary (|x| = {})", x.norm())));
    }
    let speed = metric.norm(x, theta);
    if (speed - 1.0).abs() > 1e-6 {
        return Err(Error::Invalid(format!("direction is not unit speed (|θ|_g = {speed})")));
    }
    let cos = theta.dot(&metric.outward_normal(x)) / theta.norm();
    if cos.abs() < GRAZING_TOL {
        return Err(Error::GrazingRay(cos.abs()));
    }
    if cos > 0.0 {
        return Err(Error::Invalid("direction points out of the domain".into()));
    }
    Ok(())
}

/// Integrates the geodesic from an inflow point with the default step budget.
pub fn trace_geodesic(metric: &Metric, x: Point, theta: Point, step: f64) -> Result<GeodesicPath> {
    let budget = (200.0 * metric.radius() / step).ceil() as usize + 1000;
    trace_geodesic_with(metric, x, theta, step, budget)
}

/// Classical RK4 with fixed step; the crossing step is refined by bisection
/// until the endpoint is within `1e-12` of the boundary.
pub fn trace_geodesic_with(metric: &Metric, x: Point, theta: Point, step: f64, max_steps: usize) -> Result<GeodesicPath> {
    if !(step > 0.0) {
        return Err(Error::Invalid(format!("step must be positive, got {step}")));
    }
    check_inflow(metric, x, theta)?;
    integrate_to_boundary(metric, x, theta, step, max_steps)
}

/// Geodesic from an interior point `x` in the unit direction `θ` up to its
/// first boundary crossing.
pub fn trace_from_interior(metric: &Metric, x: Point, theta: Point, step: f64) -> Result<GeodesicPath> {
    if !(step > 0.0) {
        return Err(Error::Invalid(format!("step must be positive, got {step}")));
    }
    if !metric.contains(x) {
        return Err(Error::Domain(format!("({}, {}) is not an interior point", x[0], x[1])));
    }
    let speed = metric.norm(x, theta);
    if (speed - 1.0).abs() > 1e-6 {
        return Err(Error::Invalid(format!("direction is not unit speed (|θ|_g = {speed})")));
    }
    let budget = (200.0 * metric.radius() / step).ceil() as usize + 1000;
    integrate_to_boundary(metric, x, theta, step, budget)
}

fn integrate_to_boundary(metric: &Metric, x: Point, theta: Point, step: f64, max_steps: usize) -> Result<GeodesicPath> {
    let radius = metric.radius();
    let mut state: State = [x[0], x[1], theta[0], theta[1]];
    let sample = |r: f64, s: &State| {
        let x = Point::new(s[0], s[1]);
        let v = Point::new(s[2], s[3]);
        PathSample { r, x, theta: v, accel: metric.geodesic_accel(x, v) }
    };
    let mut samples = vec![sample(0.0, &state)];
    let mut r = 0.0;
    for _ in 0..max_steps {
        let next = rk4(metric, &state, step);
        let dist = Point::new(next[0], next[1]).norm() - radius;
        if dist < 0.0 {
            state = next;
            r += step;
            samples.push(sample(r, &state));
            continue;
        }
        // Bracket [lo, hi] with f(lo) < 0 ≤ f(hi); at the first step f(0) = 0,
        // so start from a point strictly inside.
        let f = |tau: f64| {
            let s = rk4(metric, &state, tau);
            Point::new(s[0], s[1]).norm() - radius
        };
        let (mut lo, mut hi) = (0.0, step);
        if samples.len() == 1 {
            lo = step * 1e-6;
            while f(lo) >= 0.0 && lo > 1e-300 {
                lo *= 0.5;
            }
        }
        let mut tau = hi;
        for _ in 0..200 {
            tau = 0.5 * (lo + hi);
            let v = f(tau);
            if v.abs() <= EXIT_TOL {
                break;
            }
            if v < 0.0 {
                lo = tau;
            } else {
                hi = tau;
            }
            if hi - lo < 1e-17 {
                break;
            }
        }
        let end = rk4(metric, &state, tau);
        samples.push(sample(r + tau, &end));
        return Ok(GeodesicPath { samples, step });
    }
    Err(Error::NonExit(max_steps))
}

/// `ρ₊(x, θ)` at the default step.
pub fn exit_time(metric: &Metric, x: Point, theta: Point) -> Result<f64> {
    Ok(trace_geodesic(metric, x, theta, DEFAULT_STEP)?.exit_time())
}

/// Deterministic fan over the inflow boundary: `n_points` equispaced boundary
/// points, each with `n_dirs` directions at angles from the inward normal
/// equispaced (midpoint rule) in `(−π/2 + ε, π/2 − ε)`, `ε = GRAZING_MARGIN`.
pub fn sample_inflow(metric: &Metric, n_points: usize, n_dirs: usize) -> Vec<InflowSample> {
    let r = metric.radius();
    let half = std::f64::consts::FRAC_PI_2 - GRAZING_MARGIN;
    let mut out = Vec::with_capacity(n_points * n_dirs);
    for p in 0..n_points {
        let phi = std::f64::consts::TAU * p as f64 / n_points as f64;
        let x = Point::new(r * phi.cos(), r * phi.sin());
        let inward = -x / r;
        let c = metric.factor_at(x);
        for j in 0..n_dirs {
            let beta = -half + (j as f64 + 0.5) * 2.0 * half / n_dirs as f64;
            let (sb, cb) = beta.sin_cos();
            let dir = Point::new(cb * inward[0] - sb * inward[1], sb * inward[0] + cb * inward[1]);
            out.push(InflowSample { x, theta: dir / c });
        }
    }
    out
}

/// Parallel-beam family: for each of `n_angles` directions `ω` equispaced in
/// `[0, 2π)`, `n_offsets` chords with signed offsets `p` equispaced
/// (midpoint rule) in `(−R, R)`, entered at `pω⊥ − √(R² − p²) ω`.
pub fn sample_parallel(metric: &Metric, n_angles: usize, n_offsets: usize) -> Vec<InflowSample> {
    let r = metric.radius();
    let mut out = Vec::with_capacity(n_angles * n_offsets);
    for a in 0..n_angles {
        let alpha = std::f64::consts::TAU * (a as f64 + 0.5) / n_angles as f64;
        let omega = Point::new(alpha.cos(), alpha.sin());
        let perp = Point::new(-omega[1], omega[0]);
        for j in 0..n_offsets {
            let p = r * (-1.0 + (j as f64 + 0.5) * 2.0 / n_offsets as f64);
            let x = perp * p - omega * (r * r - p * p).sqrt();
            let x = x * (r / x.norm());
            out.push(InflowSample { x, theta: omega / metric.factor_at(x) });
        }
    }
    out
}

/// Writes `r,x1,x2,theta1,theta2` rows.
pub fn write_path_csv<W: Write>(path: &GeodesicPath, mut out: W) -> std::io::Result<()> {
    writeln!(out, "r,x1,x2,theta1,theta2")?;
    for s in path.samples() {
        writeln!(out, "{},{},{},{},{}", s.r, s.x[0], s.x[1], s.theta[0], s.theta[1])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bumped() -> Metric {
        Metric::radial_bump(0.3, 0.5).unwrap()
    }

    #[test]
    fn diameter_of_flat_disk() {
        let g = Metric::flat();
        let p = trace_geodesic(&g, Point::new(-1.0, 0.0), Point::new(1.0, 0.0), DEFAULT_STEP).unwrap();
        assert!((p.exit_time() - 2.0).abs() < 1e-10);
        assert!(p.samples().iter().all(|s| s.x[1].abs() < 1e-15));
    }

    #[test]
    fn interior_start_reaches_the_chord_end() {
        let g = Metric::flat();
        let x = Point::new(0.3, -0.2);
        let theta = Point::new(0.6, 0.8);
        let p = trace_from_interior(&g, x, theta, DEFAULT_STEP).unwrap();
        // |x + sθ| = 1 with s > 0.
        let b = x.dot(&theta);
        let s = -b + (b * b - x.norm_squared() + 1.0).sqrt();
        assert!((p.exit_time() - s).abs() < 1e-10);
        assert!(matches!(trace_from_interior(&g, Point::new(1.0, 0.0), theta, DEFAULT_STEP), Err(Error::Domain(_))));
    }

    #[test]
    fn chord_lengths_match_bisection_oracle() {
        let g = Metric::flat();
        for &beta in &[0.0, 0.3, std::f64::consts::FRAC_PI_3, 1.2, 1.5] {
            let theta = Point::new(beta.cos(), beta.sin());
            let p = trace_geodesic(&g, Point::new(-1.0, 0.0), theta, DEFAULT_STEP).unwrap();
            assert!((p.exit_time() - 2.0 * beta.cos()).abs() < 1e-9, "beta={beta}");
            // Independent oracle: bisection on the straight line at 10x finer resolution.
            let f = |r: f64| (Point::new(-1.0, 0.0) + theta * r).norm() - 1.0;
            let n = 20_000;
            let h = 2.0 / n as f64;
            let k = (1..=n).find(|&k| f(k as f64 * h) >= 0.0).unwrap();
            let (mut lo, mut hi) = ((k - 1) as f64 * h, k as f64 * h);
            for _ in 0..100 {
                let m = 0.5 * (lo + hi);
                if f(m) < 0.0 {
                    lo = m
                } else {
                    hi = m
                }
            }
            assert!((p.exit_time() - lo).abs() < 1e-9);
        }
        let p = trace_geodesic(&g, Point::new(-1.0, 0.0), Point::new(0.5, 3f64.sqrt() / 2.0), DEFAULT_STEP).unwrap();
        assert!((p.exit_time() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bumped_path_matches_refined_run() {
        let g = bumped();
        let x = Point::new(-1.0, 0.0);
        let c = g.factor_at(x);
        let theta = Point::new(0.9f64.cos(), 0.9f64.sin() * 0.3).normalize() / c;
        let coarse = trace_geodesic(&g, x, theta, 1e-3).unwrap();
        let fine = trace_geodesic(&g, x, theta, 1e-4).unwrap();
        assert!((coarse.exit_time() - fine.exit_time()).abs() < 1e-8);
        for s in coarse.samples().iter().step_by(37) {
            let (xf, _) = fine.eval(s.r);
            assert!((xf - s.x).norm() < 1e-8);
        }
        assert!((exit_time(&g, x, theta).unwrap() - fine.exit_time()).abs() < 1e-8);
    }

    #[test]
    fn grazing_and_outward_rays_are_rejected() {
        let g = Metric::flat();
        assert!(matches!(trace_geodesic(&g, Point::new(-1.0, 0.0), Point::new(0.0, 1.0), 1e-3), Err(Error::GrazingRay(_))));
        assert!(trace_geodesic(&g, Point::new(-1.0, 0.0), Point::new(-1.0, 0.0), 1e-3).is_err());
        assert!(matches!(trace_geodesic(&g, Point::new(-0.5, 0.0), Point::new(1.0, 0.0), 1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn step_budget_gives_non_exit() {
        let g = Metric::flat();
        let r = trace_geodesic_with(&g, Point::new(-1.0, 0.0), Point::new(1.0, 0.0), 1e-3, 100);
        assert_eq!(r.unwrap_err(), Error::NonExit(100));
    }

    #[test]
    fn inflow_sampling_counts_cone_and_symmetry() {
        let g = Metric::flat();
        let s = sample_inflow(&g, 8, 5);
        assert_eq!(s.len(), 40);
        for smp in &s {
            assert!(g.inner(smp.x, smp.theta, smp.x) < 0.0);
            let cos = smp.theta.dot(&smp.x) / (smp.theta.norm() * smp.x.norm());
            assert!(cos <= -GRAZING_MARGIN.sin() + 1e-12);
        }
        let rot = |p: Point| {
            let a = std::f64::consts::TAU / 8.0;
            Point::new(a.cos() * p[0] - a.sin() * p[1], a.sin() * p[0] + a.cos() * p[1])
        };
        for (i, smp) in s.iter().enumerate() {
            let next = s[(i + 5) % 40];
            assert!((rot(smp.x) - next.x).norm() < 1e-14);
            assert!((rot(smp.theta) - next.theta).norm() < 1e-14);
        }
        let b = sample_inflow(&bumped(), 3, 2);
        for smp in &b {
            assert!((bumped().norm(smp.x, smp.theta) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = Metric::flat();
        let p = trace_geodesic(&g, Point::new(-1.0, 0.0), Point::new(1.0, 0.0), 0.5).unwrap();
        let mut buf = Vec::new();
        write_path_csv(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,x1,x2,theta1,theta2\n"));
        assert_eq!(text.lines().count(), p.samples().len() + 1);
    }

    #[test]
    fn synthetic_loop_self_intersects_once() {
        // A teardrop: a circle traversed slightly more than once.
        let n = 400;
        let total = 1.2 * std::f64::consts::TAU * 0.3;
        let samples: Vec<PathSample> = (0..=n)
            .map(|k| {
                let r = total * k as f64 / n as f64;
                let a = r / 0.3;
                PathSample {
                    r,
                    x: Point::new(0.3 * a.cos(), 0.3 * a.sin()),
                    theta: Point::new(-a.sin(), a.cos()),
                    accel: Point::new(-a.cos(), -a.sin()) / 0.3,
                }
            })
            .collect();
        let p = GeodesicPath::from_samples(samples, total / n as f64).unwrap();
        let hits = p.self_intersections();
        assert!(!hits.is_empty());
        let (a, b) = hits[0];
        assert!(a < 0.05 && (b - std::f64::consts::TAU * 0.3).abs() < 0.05);
    }

    #[test]
    fn straight_chords_do_not_self_intersect() {
        let g = Metric::flat();
        for s in sample_inflow(&g, 10, 3) {
            let p = trace_geodesic(&g, s.x, s.theta, DEFAULT_STEP).unwrap();
            assert!(p.self_intersections().is_empty(), "{:?}", s);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn unit_speed_and_time_reversal(phi in 0.0..std::f64::consts::TAU, beta in -1.4f64..1.4) {
            let g = bumped();
            let x = Point::new(phi.cos(), phi.sin());
            let inward = -x;
            let dir = Point::new(beta.cos() * inward[0] - beta.sin() * inward[1], beta.sin() * inward[0] + beta.cos() * inward[1]);
            let theta = dir / g.factor_at(x);
            let p = trace_geodesic(&g, x, theta, DEFAULT_STEP).unwrap();
            for s in p.samples() {
                prop_assert!((g.norm(s.x, s.theta) - 1.0).abs() <= 1e-9);
            }
            let (xe, te) = p.exit();
            prop_assert!((xe.norm() - 1.0).abs() <= 1e-12);
            let back = trace_geodesic(&g, xe, -te / g.norm(xe, te), DEFAULT_STEP).unwrap();
            prop_assert!((back.exit().0 - x).norm() <= 1e-7);
            let rev = p.reversed();
            prop_assert!((rev.entry().x - xe).norm() == 0.0);
        }

        #[test]
        fn interpolation_hits_samples(phi in 0.0..std::f64::consts::TAU) {
            let g = bumped();
            let x = Point::new(phi.cos(), phi.sin());
            let p = trace_geodesic(&g, x, -x * 0.9 / g.factor_at(x) + Point::new(-x[1], x[0]) * (0.19f64).sqrt() / g.factor_at(x), 1e-2).unwrap();
            for s in p.samples() {
                let (xi, vi) = p.eval(s.r);
                prop_assert!((xi - s.x).norm() < 1e-13);
                prop_assert!((vi - s.theta).norm() < 1e-12);
            }
        }
    }
}
