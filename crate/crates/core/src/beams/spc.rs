use super::amplitude::{build_amplitude, AmplitudeOptions, BeamAmplitude, InitialVector};
use super::beam::{TubeQuadrature, FLAT_TUBE_WIDTH};
use super::phase::{build_phase, BeamPhase};
use crate::bundle::{transport, BumpPotential, ConnectionForm, TransportOptions};
use crate::geometry::{build_fermi_chart_with, ChartOptions, FermiChart, GeodesicPath, Metric};
use crate::interp::{tube_cutoff, TimeCutoff};
use crate::linalg::{inner, top_singular};
use crate::quadrature::{composite_gauss, fourth_order_weights, simpson_weights};
use crate::{CMat, CVec, Error, Result, C64};
use rayon::prelude::*;

/// Settings of [`spc_limit_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpcOptions {
    pub cutoff: TimeCutoff,
    /// Even number of time intervals of the beam amplitudes.
    pub time_intervals: usize,
    /// Gauss panels (8 points each) for the time integral of the limit.
    pub limit_time_panels: usize,
    pub chart_step: f64,
    /// Tube width `δ′`; defaults to 16 on the flat metric and 0.5 otherwise.
    pub tube_width: Option<f64>,
    pub quadrature: TubeQuadrature,
}

impl SpcOptions {
    pub fn new(horizon: f64) -> Self {
        Self {
            cutoff: TimeCutoff::standard(horizon),
            time_intervals: 64,
            limit_time_panels: 8,
            chart_step: 0.01,
            tube_width: None,
            quadrature: TubeQuadrature::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpcRow {
    pub s: f64,
    pub lhs: C64,
    /// `|lhs − rhs| / max(|rhs|, 1e-12)`.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpcTable {
    pub rhs: C64,
    pub rows: Vec<SpcRow>,
}

impl SpcTable {
    /// Whether the errors decrease strictly along the rows.
    pub fn decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].error < w[0].error)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,lhs_re,lhs_im,rhs_re,rhs_im,relative_error\n");
        for r in &self.rows {
            out += &format!("{},{},{},{},{},{}\n", r.s, r.lhs.re, r.lhs.im, self.rhs.re, self.rhs.im, r.error);
        }
        out
    }
}

/// Unit vectors `(w1, w2)` maximising `|∫₀^{ρ₊} ⟨(A1 − A2)(γ′)U₁w₁, U₂w₂⟩ dr|` at time `t`.
pub fn dominant_pair(a1: &dyn ConnectionForm, a2: &dyn ConnectionForm, path: &GeodesicPath, t: f64) -> Result<(CVec, CVec)> {
    let m = limit_matrix(a1, a2, path, t)?;
    let (_, left, right) = top_singular(&m);
    Ok((right, left))
}

/// `∫₀^{ρ₊} U₂* (A1 − A2)(γ′) U₁ dr` by Simpson quadrature.
fn limit_matrix(a1: &dyn ConnectionForm, a2: &dyn ConnectionForm, path: &GeodesicPath, t: f64) -> Result<CMat> {
    let opts = TransportOptions { step: 1e-3, even: true, ..TransportOptions::default() };
    let u1 = transport(a1, path, t, opts)?;
    let u2 = transport(a2, path, t, opts)?;
    let n = u1.nodes.len() - 1;
    let w = simpson_weights(n, u1.spacing());
    let mut m = CMat::zeros(a1.rank(), a1.rank());
    for k in 0..=n {
        let (x, v) = path.eval(u1.nodes[k]);
        let d = a1.along(t, x, v) - a2.along(t, x, v);
        m += u2.values[k].adjoint() * d * &u1.values[k] * C64::from(w[k]);
    }
    Ok(m)
}

/// `∫₀^T χ̃² ∫₀^{ρ₊} ⟨(A1 − A2)(γ′)U₁w₁, U₂w₂⟩ dr dt` by composite Gauss in `t` and Simpson in `r`.
pub fn spc_limit(
    a1: &dyn ConnectionForm,
    a2: &dyn ConnectionForm,
    path: &GeodesicPath,
    w1: &CVec,
    w2: &CVec,
    cutoff: &TimeCutoff,
    panels: usize,
) -> Result<C64> {
    let tau = cutoff.margin;
    let (ts, wts) = composite_gauss(tau, cutoff.horizon - tau, panels.max(1), 8);
    let parts = ts
        .par_iter()
        .zip(&wts)
        .map(|(&t, &wt)| {
            let m = limit_matrix(a1, a2, path, t)?;
            Ok(inner(&(m * w1), w2) * (cutoff.value(t).powi(2) * wt))
        })
        .collect::<Result<Vec<C64>>>()?;
    Ok(parts.into_iter().sum())
}

struct SpcSetup {
    chart: FermiChart,
    phase: BeamPhase,
    u1: BeamAmplitude,
    u2: BeamAmplitude,
    width: f64,
}

/// Compares the tube integral `∫⟨((A1 − A2), dΨ u1)_g, u2⟩ dV_g dt` of two
/// leading-order beams with its large-`s` limit for each `s` in `s_list`.
#[allow(clippy::too_many_arguments)]
pub fn spc_limit_check(
    metric: &Metric,
    path: &GeodesicPath,
    a1: &dyn ConnectionForm,
    a2: &dyn ConnectionForm,
    w1: &CVec,
    w2: &CVec,
    s_list: &[f64],
    opts: &SpcOptions,
) -> Result<SpcTable> {
    if !path.self_intersections().is_empty() {
        return Err(Error::Invalid("the stationary-phase check needs a geodesic without self-intersections".into()));
    }
    let n = a1.rank();
    let width = opts.tube_width.unwrap_or(if metric.is_flat() { FLAT_TUBE_WIDTH } else { 0.5 });
    let copts = ChartOptions { step: opts.chart_step, ..ChartOptions::default() };
    let chart = build_fermi_chart_with(metric, path, width, 2, copts)?;
    let phase = build_phase(&chart, C64::new(0.0, 1.0), 2)?;
    let zero = BumpPotential::zero(n);
    let amp = |a: &dyn ConnectionForm, w: &CVec| {
        let o = AmplitudeOptions {
            initial: InitialVector::EntryTransported(w.clone()),
            cutoff: opts.cutoff,
            time_intervals: opts.time_intervals,
            ..AmplitudeOptions::new(w.clone(), opts.cutoff.horizon)
        };
        build_amplitude(&chart, &phase, a, &zero, &o)
    };
    let u1 = amp(a1, w1)?;
    let u2 = amp(a2, w2)?;
    let setup = SpcSetup { chart, phase, u1, u2, width };
    let rhs = spc_limit(a1, a2, path, w1, w2, &opts.cutoff, opts.limit_time_panels)?;
    let mut rows = Vec::with_capacity(s_list.len());
    for &s in s_list {
        let fine = tube_integral(&setup, a1, a2, s, &opts.quadrature, 2);
        let coarse = tube_integral(&setup, a1, a2, s, &opts.quadrature, 1);
        if (fine - coarse).norm() > opts.quadrature.refinement_tolerance * fine.norm().max(1e-12) {
            return Err(Error::Quadrature(format!("tube integral changes from {coarse} to {fine} under y refinement at s = {s}")));
        }
        rows.push(SpcRow { s, lhs: fine, error: (fine - rhs).norm() / rhs.norm().max(1e-12) });
    }
    Ok(SpcTable { rhs, rows })
}

fn tube_integral(setup: &SpcSetup, a1: &dyn ConnectionForm, a2: &dyn ConnectionForm, s: f64, q: &TubeQuadrature, refine: usize) -> C64 {
    let ph = &setup.phase;
    let chart = &setup.chart;
    let (im_min, im_max) = (ph.riccati.min_imag(), ph.riccati.max_imag());
    let half = (q.extent / (s * im_min).sqrt()).min(0.5 * setup.width);
    let cell = 1.0 / (s * im_max).sqrt() / (q.panels_per_width * refine) as f64;
    let panels = (2.0 * half / cell).ceil() as usize;
    let (ys, wy) = composite_gauss(-half, half, panels, q.order);
    let n_r = chart.intervals();
    let wr = fourth_order_weights(n_r, chart.spacing());
    let times = &setup.u1.times;
    let wt = simpson_weights(times.len() - 1, times[1] - times[0]);
    (0..=n_r)
        .into_par_iter()
        .map(|k| {
            let j = 2 * k;
            let r = ph.fine_node(j);
            let pts = chart.tube_points(r, &ys);
            let jets: Vec<_> = ys.iter().map(|&y| ph.jet(j, y)).collect();
            let mut acc = C64::from(0.0);
            for (ti, &t) in times.iter().enumerate() {
                let b1 = setup.u1.a00(ti, j);
                let b2 = setup.u2.a00(ti, j);
                if b1.norm() == 0.0 && b2.norm() == 0.0 {
                    continue;
                }
                for ((p, jet), (&y, &w)) in pts.iter().zip(&jets).zip(ys.iter().zip(&wy)) {
                    let [c1, c2] = a1.components(t, p.x);
                    let [d1, d2] = a2.components(t, p.x);
                    let (e1, e2) = (c1 - d1, c2 - d2);
                    let dr = &e1 * C64::from(p.dx_dr[0]) + &e2 * C64::from(p.dx_dr[1]);
                    let dy = &e1 * C64::from(p.dx_dy[0]) + &e2 * C64::from(p.dx_dy[1]);
                    let (pr, py) = (jet.r + 1.0, jet.y);
                    let g = p.inverse;
                    let form = &dr * (pr * g[0][0] + py * g[0][1]) + &dy * (pr * g[1][0] + py * g[1][1]);
                    let weight = s.sqrt() * (-2.0 * s * jet.value.im).exp() * tube_cutoff(y, setup.width).powi(2) * p.sqrt_det;
                    acc += inner(&(form * b1), b2) * (weight * w * wt[ti] * wr[k]);
                }
            }
            acc
        })
        .collect::<Vec<C64>>()
        .into_iter()
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{random_connection, ExpGauge, GaugedConnection, Profile};
    use crate::geometry::trace_geodesic;
    use crate::linalg::basis_vector;
    use crate::Point;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn chord() -> GeodesicPath {
        trace_geodesic(&Metric::flat(), Point::new(-0.8, -0.6), Point::new(1.0, 0.4).normalize(), 1e-3).unwrap()
    }

    fn quick() -> SpcOptions {
        SpcOptions { time_intervals: 16, limit_time_panels: 4, chart_step: 0.02, ..SpcOptions::new(1.0) }
    }

    #[test]
    fn equal_connections_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_connection(&mut rng, 2, 3, 1.0, 0.5, false);
        let (w1, w2) = (basis_vector(2, 0), basis_vector(2, 1));
        let tab = spc_limit_check(&Metric::flat(), &chord(), &a, &a, &w1, &w2, &[32.0, 64.0], &quick()).unwrap();
        assert_eq!(tab.rhs, C64::from(0.0));
        assert!(tab.rows.iter().all(|r| r.lhs.norm() == 0.0));
    }

    #[test]
    fn tube_integral_approaches_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a1 = random_connection(&mut rng, 2, 3, 1.0, 0.5, false);
        let a2 = random_connection(&mut rng, 2, 3, 1.0, 0.5, false);
        let path = chord();
        let (w1, w2) = dominant_pair(&a1, &a2, &path, 0.5).unwrap();
        let tab = spc_limit_check(&Metric::flat(), &path, &a1, &a2, &w1, &w2, &[16.0, 64.0, 256.0], &quick()).unwrap();
        assert!(tab.decreasing(), "{tab:?}");
        assert!(tab.rows[2].error < 0.05, "{tab:?}");
    }

    #[test]
    fn gauge_equivalent_pair_has_vanishing_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Arc<dyn ConnectionForm> = Arc::new(random_connection(&mut rng, 2, 3, 1.0, 0.5, false));
        let g = Arc::new(ExpGauge::random(&mut rng, 2, 2, Profile::Disk { radius: 1.0 }, false));
        let b = GaugedConnection { base: a.clone(), gauge: g };
        let path = chord();
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let rhs = spc_limit(&a, &b, &path, &basis_vector(2, i), &basis_vector(2, j), &TimeCutoff::standard(1.0), 2).unwrap();
            assert!(rhs.norm() < 1e-7, "{rhs}");
        }
    }
}
