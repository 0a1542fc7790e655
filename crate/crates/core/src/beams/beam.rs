use super::amplitude::{build_amplitude_with, radial_second, time_derivative, AmplitudeOptions, BeamAmplitude};
use super::phase::{build_phase_with, BeamPhase, PhaseInit};
use super::series::vec_eval3;
use crate::bundle::{ConnectionForm, Potential};
use crate::geometry::{build_fermi_chart_with, ChartOptions, FermiChart, GeodesicPath, Metric};
use crate::interp::{smooth_step, smooth_step_deriv, tube_cutoff_derivs};
use crate::quadrature::{composite_gauss, fourth_order_weights, simpson_weights};
use crate::{CVec, Error, Point, Result, C64, I};
use rayon::prelude::*;
use std::io::Write;

/// Relative tolerance for the agreement of neighbouring pieces at shared beam nodes.
pub const GLUING_TOLERANCE: f64 = 1e-8;
/// Default tube width `δ′` on the flat metric.
pub const FLAT_TUBE_WIDTH: f64 = 16.0;

/// One chart of a beam with its phase and amplitude.
#[derive(Debug, Clone)]
pub struct BeamPiece {
    pub chart: FermiChart,
    pub phase: BeamPhase,
    pub amplitude: BeamAmplitude,
}

/// `v = Σ_k ρ_k e^{is(Ψ_k − st)} a_k` with a partition of unity `ρ_k(r)` over overlapping charts.
#[derive(Debug, Clone)]
pub struct GaussianBeam {
    pieces: Vec<BeamPiece>,
    s: f64,
    tube_width: f64,
}

/// Settings of [`build_beam`].
#[derive(Debug, Clone, PartialEq)]
pub struct BeamConfig {
    pub s: f64,
    pub h0: C64,
    pub phase_order: usize,
    pub amplitude: AmplitudeOptions,
    pub chart_step: f64,
    /// `δ′`; defaults to [`FLAT_TUBE_WIDTH`] on the flat metric and 0.5 otherwise.
    pub tube_width: Option<f64>,
    /// `r₀`; defaults to the grid node nearest the middle of the path.
    pub anchor: Option<f64>,
    /// Overlap length of neighbouring charts.
    pub overlap: f64,
    /// Additional chart boundaries.
    pub breaks: Vec<f64>,
}

impl BeamConfig {
    pub fn new(s: f64, amplitude: AmplitudeOptions) -> Self {
        Self {
            s,
            h0: C64::new(0.0, 1.0),
            phase_order: 2,
            amplitude,
            chart_step: 0.01,
            tube_width: None,
            anchor: None,
            overlap: 0.2,
            breaks: Vec::new(),
        }
    }
}

/// Splits `[0, L]` into overlapping intervals so that no interval contains
/// both parameters of a self-intersection, and every entry of `breaks` is a
/// boundary region.
pub fn cover_intervals(length: f64, crossings: &[(f64, f64)], breaks: &[f64], overlap: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|b| *b > overlap && *b < length - overlap).collect();
    let mut pairs: Vec<(f64, f64)> = crossings.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    pairs.sort_by(|x, y| x.1.total_cmp(&y.1));
    let separated = |cuts: &[f64], p: &(f64, f64)| cuts.iter().any(|c| *c - overlap / 2.0 > p.0 && *c + overlap / 2.0 < p.1);
    for p in &pairs {
        if !separated(&cuts, p) {
            cuts.push(0.5 * (p.0 + p.1));
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut start = 0.0;
    for c in cuts {
        out.push((start, c + overlap / 2.0));
        start = c - overlap / 2.0;
    }
    out.push((start, length));
    out
}

/// Builds charts over [`cover_intervals`], the phase from `r₀` and hands
/// phase and amplitude data across chart overlaps.
pub fn build_beam(
    metric: &Metric,
    path: &GeodesicPath,
    a: &dyn ConnectionForm,
    v: &dyn Potential,
    cfg: &BeamConfig,
) -> Result<GaussianBeam> {
    let length = path.exit_time();
    let n_global = (length / cfg.chart_step).ceil().max(6.0) as usize;
    let h = length / n_global as f64;
    let snap = |r: f64| ((r / h).round() * h).clamp(0.0, length);
    let width = cfg.tube_width.unwrap_or(if metric.is_flat() { FLAT_TUBE_WIDTH } else { 0.5 });
    let intervals: Vec<(f64, f64)> = cover_intervals(length, &path.self_intersections(), &cfg.breaks, cfg.overlap)
        .into_iter()
        .map(|(a, b)| (snap(a), if b >= length { length } else { snap(b) }))
        .collect();
    let charts = intervals
        .iter()
        .map(|&(lo, hi)| {
            let opts = ChartOptions { step: h, r_range: Some((lo, hi)), ..ChartOptions::default() };
            build_fermi_chart_with(metric, path, width, cfg.phase_order, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let r0 = snap(cfg.anchor.unwrap_or(0.5 * length));
    let root = intervals
        .iter()
        .position(|&(lo, hi)| r0 >= lo && r0 <= hi)
        .ok_or_else(|| Error::Invalid(format!("anchor {r0} is outside the path")))?;
    let mut coeffs = vec![C64::from(0.0); cfg.phase_order + 1];
    coeffs[2] = cfg.h0 * 0.5;
    let mut slots: Vec<Option<BeamPiece>> = vec![None; charts.len()];
    let root_phase = build_phase_with(&charts[root], cfg.phase_order, PhaseInit { r: r0, coeffs, integral: C64::from(0.0) })?;
    let root_amp = build_amplitude_with(&charts[root], &root_phase, a, v, &cfg.amplitude, None)?;
    let c0 = root_amp.c0;
    slots[root] = Some(BeamPiece { chart: charts[root].clone(), phase: root_phase, amplitude: root_amp });
    let order: Vec<(usize, usize)> =
        (root + 1..charts.len()).map(|k| (k - 1, k)).chain((0..root).rev().map(|k| (k + 1, k))).collect();
    for (from, to) in order {
        let prev = slots[from].as_ref().expect("built in order");
        let (lo, hi) = if from < to { (intervals[to].0, intervals[from].1) } else { (intervals[from].0, intervals[to].1) };
        let r_mid = snap(0.5 * (lo + hi));
        let j = ((r_mid - prev.phase.fine_node(0)) / prev.phase.spacing()).round() as usize;
        let phase = build_phase_with(&charts[to], cfg.phase_order, prev.phase.handoff(j))?;
        let mut amp_opts = cfg.amplitude.clone();
        amp_opts.c0 = super::amplitude::C0Policy::Fixed(c0);
        let amplitude = build_amplitude_with(&charts[to], &phase, a, v, &amp_opts, Some(&prev.amplitude.handoff(j)))?;
        slots[to] = Some(BeamPiece { chart: charts[to].clone(), phase, amplitude });
    }
    assemble_beam(slots.into_iter().map(|p| p.expect("all pieces built")).collect(), cfg.s)
}

/// Checks overlap consistency and fixes the partition of unity.
pub fn assemble_beam(pieces: Vec<BeamPiece>, s: f64) -> Result<GaussianBeam> {
    if !(s > 0.0) {
        return Err(Error::Invalid(format!("frequency s must be positive, got {s}")));
    }
    if pieces.is_empty() {
        return Err(Error::Invalid("a beam needs at least one chart".into()));
    }
    let h = pieces[0].phase.spacing();
    for w in pieces.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        let (lo, hi) = (q.chart.r_start(), p.chart.r_end());
        if !(lo < hi) || q.chart.r_start() <= p.chart.r_start() {
            return Err(Error::Gluing(format!("charts [{}, {}] and [{}, {}] do not overlap in order", p.chart.r_start(), hi, lo, q.chart.r_end())));
        }
        let offset = (lo - p.phase.fine_node(0)) / h;
        if (q.phase.spacing() - h).abs() > 1e-12 || (offset - offset.round()).abs() > 1e-6 {
            return Err(Error::Gluing("chart grids are not aligned".into()));
        }
        if p.amplitude.times != q.amplitude.times || p.amplitude.levels.len() != q.amplitude.levels.len() {
            return Err(Error::Gluing("pieces use different time grids or orders".into()));
        }
        let off = offset.round() as usize;
        let mut gap: f64 = 0.0;
        for jq in (0..q.phase.fine_nodes()).step_by(2) {
            let jp = jq + off;
            if jp >= p.phase.fine_nodes() {
                break;
            }
            for (cp, cq) in p.phase.coeffs[jp].iter().zip(&q.phase.coeffs[jq]) {
                gap = gap.max((cp - cq).norm() / (1.0 + cp.norm()));
            }
            gap = gap.max((p.phase.integral[jp] - q.phase.integral[jq]).norm());
            for (lp, lq) in p.amplitude.levels.iter().zip(&q.amplitude.levels) {
                for (bp, bq) in lp.b.iter().zip(&lq.b) {
                    for (x, y) in bp[jp].iter().zip(&bq[jq]) {
                        gap = gap.max((x - y).norm() / (1.0 + x.norm()));
                    }
                }
            }
        }
        if gap > GLUING_TOLERANCE {
            return Err(Error::Gluing(format!("neighbouring pieces differ by {gap:.3e} on their overlap")));
        }
    }
    let tube_width = pieces.iter().map(|p| if p.chart.is_flat() { FLAT_TUBE_WIDTH.min(p.chart.width()) } else { p.chart.width() }).fold(f64::INFINITY, f64::min);
    Ok(GaussianBeam { pieces, s, tube_width })
}

/// Options of the tube quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeQuadrature {
    /// Gauss points per panel.
    pub order: usize,
    /// Panels per beam width `s^{−1/2} (Im H)^{−1/2}`.
    pub panels_per_width: usize,
    /// Half-width of the `y` range in units of `(s Im H_min)^{−1/2}`.
    pub extent: f64,
    /// Maximal relative change under doubling the `y` panels.
    pub refinement_tolerance: f64,
}

impl Default for TubeQuadrature {
    fn default() -> Self {
        Self { order: 8, panels_per_width: 1, extent: 6.0, refinement_tolerance: 0.01 }
    }
}

/// `L²` norms of the beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamNorms {
    pub l2: f64,
    /// Fraction of `‖v‖²` outside `|y| ≤ 4 s^{−1/2}`.
    pub mass_outside: f64,
    /// `(∫ χ̃² dt · ρ₊)^{1/2} |w|`, the large-`s` limit of `‖v‖`.
    pub limit: f64,
}

/// `‖(i∂_t + Δ_A + V)v‖_{L²}` with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    pub s: f64,
    pub residual: f64,
    /// The same with half as many `y` panels.
    pub coarse: f64,
    pub norm: f64,
}

struct YRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    inner: Vec<bool>,
}

impl GaussianBeam {
    pub fn s(&self) -> f64 {
        self.s
    }

    /// The same beam at another frequency (phase and amplitude do not depend on `s`).
    pub fn with_s(&self, s: f64) -> Self {
        Self { s, ..self.clone() }
    }

    pub fn pieces(&self) -> &[BeamPiece] {
        &self.pieces
    }

    pub fn tube_width(&self) -> f64 {
        self.tube_width
    }

    pub fn times(&self) -> &[f64] {
        &self.pieces[0].amplitude.times
    }

    pub fn r_start(&self) -> f64 {
        self.pieces[0].chart.r_start()
    }

    pub fn r_end(&self) -> f64 {
        self.pieces.last().expect("non-empty").chart.r_end()
    }

    /// Beam grid spacing (the chart spacing).
    pub fn spacing(&self) -> f64 {
        2.0 * self.pieces[0].phase.spacing()
    }

    fn im_range(&self) -> (f64, f64) {
        self.pieces.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.phase.riccati.min_imag()), hi.max(p.phase.riccati.max_imag())))
    }

    /// `ρ_k(r)` and its first two derivatives.
    pub fn weight(&self, k: usize, r: f64) -> (f64, f64, f64) {
        let f = |r: f64| self.weight_value(k, r);
        let d = |r: f64| self.weight_deriv(k, r);
        let e = 1e-5;
        (f(r), d(r), (d(r + e) - d(r - e)) / (2.0 * e))
    }

    fn weight_value(&self, k: usize, r: f64) -> f64 {
        let mut w = 1.0;
        if k > 0 {
            let (lo, hi) = (self.pieces[k].chart.r_start(), self.pieces[k - 1].chart.r_end());
            w *= smooth_step((r - lo) / (hi - lo));
        }
        if k + 1 < self.pieces.len() {
            let (lo, hi) = (self.pieces[k + 1].chart.r_start(), self.pieces[k].chart.r_end());
            w *= 1.0 - smooth_step((r - lo) / (hi - lo));
        }
        w
    }

    fn weight_deriv(&self, k: usize, r: f64) -> f64 {
        let mut rise = (1.0, 0.0);
        let mut fall = (1.0, 0.0);
        if k > 0 {
            let (lo, hi) = (self.pieces[k].chart.r_start(), self.pieces[k - 1].chart.r_end());
            rise = (smooth_step((r - lo) / (hi - lo)), smooth_step_deriv((r - lo) / (hi - lo)) / (hi - lo));
        }
        if k + 1 < self.pieces.len() {
            let (lo, hi) = (self.pieces[k + 1].chart.r_start(), self.pieces[k].chart.r_end());
            fall = (1.0 - smooth_step((r - lo) / (hi - lo)), -smooth_step_deriv((r - lo) / (hi - lo)) / (hi - lo));
        }
        rise.1 * fall.0 + rise.0 * fall.1
    }

    /// Pieces whose chart contains `r` with the fine index of `r` in each.
    fn locate(&self, r: f64) -> Vec<(usize, usize)> {
        self.pieces
            .iter()
            .enumerate()
            .filter_map(|(k, p)| {
                let u = (r - p.phase.fine_node(0)) / p.phase.spacing();
                let j = u.round();
                (j >= 0.0 && (j as usize) < p.phase.fine_nodes() && (u - j).abs() < 1e-6).then_some((k, j as usize))
            })
            .collect()
    }

    fn y_rule(&self, q: &TubeQuadrature, refine: usize) -> YRule {
        let (im_min, im_max) = self.im_range();
        let s = self.s;
        let half = (q.extent / (s * im_min).sqrt()).min(0.5 * self.tube_width);
        let cell = 1.0 / (s * im_max).sqrt() / (q.panels_per_width * refine) as f64;
        let core = (4.0 / s.sqrt()).min(half);
        let mut rule = YRule { nodes: Vec::new(), weights: Vec::new(), inner: Vec::new() };
        for (a, b, inner) in [(-half, -core, false), (-core, core, true), (core, half, false)] {
            if b - a <= 0.0 {
                continue;
            }
            let panels = ((b - a) / cell).ceil().max(1.0) as usize;
            let (x, w) = composite_gauss(a, b, panels, q.order);
            rule.inner.extend(std::iter::repeat(inner).take(x.len()));
            rule.nodes.extend(x);
            rule.weights.extend(w);
        }
        rule
    }

    /// Global `r` grid over all pieces with fourth-order weights.
    fn r_rule(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.spacing();
        let n = ((self.r_end() - self.r_start()) / h).round() as usize;
        let nodes = (0..=n).map(|k| self.r_start() + k as f64 * h).collect();
        (nodes, fourth_order_weights(n, h))
    }

    /// `y`-coefficients of `a_0 + s⁻¹a_1` and of its `r`, `rr` and `t` derivatives at a node.
    fn node_series(&self, k: usize, ti: usize, j: usize, full: bool) -> NodeSeries {
        let p = &self.pieces[k];
        let amp = &p.amplitude;
        let n = amp.rank;
        let len = amp.levels.iter().map(|lv| lv.order + 1).max().unwrap_or(1);
        let mut out = NodeSeries { val: vec![CVec::zeros(n); len], dr: vec![CVec::zeros(n); len], drr: Vec::new(), dt: Vec::new() };
        if full {
            out.drr = vec![CVec::zeros(n); len];
            out.dt = vec![CVec::zeros(n); len];
        }
        for (lv_idx, lv) in amp.levels.iter().enumerate() {
            let scale = C64::from(self.s.powi(-(lv_idx as i32)));
            for l in 0..=lv.order {
                out.val[l] += &lv.b[ti][j][l] * scale;
                out.dr[l] += &lv.br[ti][j][l] * scale;
            }
            if full {
                let drr = radial_second(lv, ti, j, p.phase.spacing());
                let dt = time_derivative(lv, ti, j, amp.time_spacing());
                for l in 0..=lv.order {
                    out.drr[l] += &drr[l] * scale;
                    out.dt[l] += &dt[l] * scale;
                }
            }
        }
        out
    }

    /// Pieces of `v`, `∂_r v` and, when `fields` is given, the residual
    /// `(i∂_t + Δ_A + V)v_k`, all without the common factor `e^{is(r − st)}`.
    fn local(&self, k: usize, j: usize, ns: &NodeSeries, y: f64, fields: Option<&Fields>) -> (CVec, CVec, Option<CVec>) {
        let p = &self.pieces[k];
        let s = self.s;
        let n = p.amplitude.rank;
        let jet = p.phase.jet(j, y);
        let (chi, chi_y, chi_yy) = tube_cutoff_derivs(y, self.tube_width);
        let (val, dy, dyy) = vec_eval3(&ns.val, y, n);
        let (dr, _, _) = vec_eval3(&ns.dr, y, n);
        let poly = if fields.is_some() {
            [val, dy, dyy, dr, vec_eval3(&ns.drr, y, n).0, vec_eval3(&ns.dt, y, n).0]
        } else {
            [val, dy, dyy, dr, CVec::zeros(n), CVec::zeros(n)]
        };
        let a = &poly[0] * C64::from(chi);
        let a_r = &poly[3] * C64::from(chi);
        let pref = (I * s * jet.value).exp() * s.powf(0.25);
        let v = &a * pref;
        let Some(f) = fields else {
            return (v, CVec::zeros(n), None);
        };
        let a_y = &poly[0] * C64::from(chi_y) + &poly[1] * C64::from(chi);
        let a_yy = &poly[0] * C64::from(chi_yy) + &poly[1] * C64::from(2.0 * chi_y) + &poly[2] * C64::from(chi);
        let a_rr = &poly[4] * C64::from(chi);
        let a_t = &poly[5] * C64::from(chi);
        let cov_r = &a_r + &f.ar * &a;
        let dv = (&a * (I * s * (jet.r + 1.0)) + &cov_r) * pref;
        let e = jet.r * 2.0 + jet.r * jet.r + jet.y * jet.y;
        let transport = &cov_r * (jet.r + 1.0) + (&a_y + &f.ay * &a) * jet.y + &a * ((jet.rr + jet.yy) * 0.5);
        let op = &a_t * I + &a_rr + &a_yy + (&f.ar * &a_r + &f.ay * &a_y) * C64::from(2.0) + &f.zeroth * &a;
        let bracket = &a * (-e * s * s) + transport * (I * 2.0 * s) + op;
        (v, dv, Some(bracket * pref))
    }

    /// `‖v‖_{L²((0,T)×M)}` and the mass fraction outside `|y| ≤ 4 s^{−1/2}`.
    pub fn norms(&self, q: &TubeQuadrature) -> BeamNorms {
        let rule = self.y_rule(q, 1);
        let (rs, rw) = self.r_rule();
        let times = self.times();
        let tw = simpson_weights(times.len() - 1, times[1] - times[0]);
        let (inside, outside): (f64, f64) = rs
            .par_iter()
            .zip(&rw)
            .map(|(&r, &wr)| {
                let locs = self.locate(r);
                let metric: Vec<f64> = self.sqrt_det(r, &rule.nodes);
                let mut acc = (0.0, 0.0);
                for (ti, wt) in tw.iter().enumerate() {
                    let series: Vec<NodeSeries> = locs.iter().map(|&(k, j)| self.node_series(k, ti, j, false)).collect();
                    for (iy, &y) in rule.nodes.iter().enumerate() {
                        let mut v = CVec::zeros(self.pieces[0].amplitude.rank);
                        for (&(k, j), ns) in locs.iter().zip(&series) {
                            v += self.local(k, j, ns, y, None).0 * C64::from(self.weight_value(k, r));
                        }
                        let m = v.norm_squared() * wt * wr * rule.weights[iy] * metric[iy];
                        if rule.inner[iy] {
                            acc.0 += m;
                        } else {
                            acc.1 += m;
                        }
                    }
                }
                acc
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        let total = inside + outside;
        let chi2: f64 = times.iter().zip(&tw).map(|(t, w)| self.pieces[0].amplitude.cutoff.value(*t).powi(2) * w).sum();
        BeamNorms {
            l2: total.sqrt(),
            mass_outside: if total > 0.0 { outside / total } else { 0.0 },
            limit: (chi2 * (self.r_end() - self.r_start())).sqrt() * self.pieces[0].amplitude.w.norm(),
        }
    }

    fn sqrt_det(&self, r: f64, ys: &[f64]) -> Vec<f64> {
        let p = self.pieces.iter().find(|p| r >= p.chart.r_start() - 1e-12 && r <= p.chart.r_end() + 1e-12).expect("r inside the beam");
        if p.chart.is_flat() {
            vec![1.0; ys.len()]
        } else {
            p.chart.tube_points(r, ys).iter().map(|t| t.sqrt_det).collect()
        }
    }

    /// `L²` norm of `(i∂_t + Δ_A + V)v` over `(0, T) × tube` (flat metric),
    /// checked against a quadrature with half as many `y` panels.
    pub fn residual_norm(&self, a: &dyn ConnectionForm, v: &dyn Potential, q: &TubeQuadrature) -> Result<ResidualReport> {
        if self.pieces.iter().any(|p| !p.chart.is_flat()) {
            return Err(Error::Order("residual evaluation requires the flat metric".into()));
        }
        let fine = self.residual_with(a, v, &self.y_rule(q, 2));
        let coarse = self.residual_with(a, v, &self.y_rule(q, 1));
        if (fine - coarse).abs() > q.refinement_tolerance * fine.abs().max(1e-300) {
            return Err(Error::Quadrature(format!("residual changes from {coarse:.6e} to {fine:.6e} under y refinement")));
        }
        Ok(ResidualReport { s: self.s, residual: fine, coarse, norm: self.norms(q).l2 })
    }

    fn residual_with(&self, a: &dyn ConnectionForm, v: &dyn Potential, rule: &YRule) -> f64 {
        let (rs, rw) = self.r_rule();
        let times = self.times();
        let tw = simpson_weights(times.len() - 1, times[1] - times[0]);
        let n = self.pieces[0].amplitude.rank;
        let total: f64 = rs
            .par_iter()
            .zip(&rw)
            .map(|(&r, &wr)| {
                let locs = self.locate(r);
                let (g, e) = self.pieces[locs[0].0].chart.center(r);
                let nrm = Point::new(-e[1], e[0]);
                let weights: Vec<(f64, f64, f64)> = locs.iter().map(|&(k, _)| self.weight(k, r)).collect();
                let mut acc = 0.0;
                for (ti, (&t, wt)) in times.iter().zip(&tw).enumerate() {
                    let live = locs.iter().any(|&(k, j)| self.pieces[k].amplitude.levels.iter().any(|lv| lv.b[ti][j].iter().any(|b| b.norm() > 0.0)));
                    if !live {
                        continue;
                    }
                    let series: Vec<NodeSeries> = locs.iter().map(|&(k, j)| self.node_series(k, ti, j, true)).collect();
                    for (iy, &y) in rule.nodes.iter().enumerate() {
                        let x = g + nrm * y;
                        let f = Fields::at(a, v, t, x, e, nrm);
                        let mut res = CVec::zeros(n);
                        for ((&(k, j), &(rho, drho, ddrho)), ns) in locs.iter().zip(&weights).zip(&series) {
                            if rho == 0.0 && drho == 0.0 && ddrho == 0.0 {
                                continue;
                            }
                            let (vk, dvk, rk) = self.local(k, j, ns, y, Some(&f));
                            res += rk.expect("fields given") * C64::from(rho) + dvk * C64::from(2.0 * drho) + vk * C64::from(ddrho);
                        }
                        acc += res.norm_squared() * wt * wr * rule.weights[iy];
                    }
                }
                acc
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .sum();
        total.sqrt()
    }

    /// `max |s²((dΨ, dΨ)_g − 1) a|` on the axis, where Fermi coordinates give `g^{ab} = δ^{ab}`.
    pub fn axis_eikonal_bracket(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in &self.pieces {
            for j in 0..p.phase.fine_nodes() {
                let e = p.phase.eikonal_residual(j, 0.0, [[1.0, 0.0], [0.0, 1.0]]).norm();
                let amp = p.amplitude.levels[0].b.iter().map(|bt| bt[j][0].norm()).fold(0.0, f64::max);
                worst = worst.max(self.s * self.s * e * amp);
            }
        }
        worst
    }

    /// `v(t_i, r, y)` at a grid time and a beam grid node `r`.
    pub fn field(&self, ti: usize, r: f64, y: f64) -> Result<CVec> {
        let locs = self.locate(r);
        if locs.is_empty() {
            return Err(Error::Invalid(format!("r = {r} is not a beam grid node")));
        }
        let t = self.times()[ti];
        let common = (I * self.s * (r - self.s * t)).exp();
        let mut v = CVec::zeros(self.pieces[0].amplitude.rank);
        for (k, j) in locs {
            let ns = self.node_series(k, ti, j, false);
            v += self.local(k, j, &ns, y, None).0 * C64::from(self.weight_value(k, r));
        }
        Ok(v * common)
    }

    /// CSV dump `t,r,y,|v|,re v_1,im v_1,...` on the beam `r` grid and `ny` normal offsets.
    pub fn write_grid<W: Write>(&self, ti: usize, ny: usize, stride: usize, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Invalid(e.to_string());
        let n = self.pieces[0].amplitude.rank;
        let mut header = String::from("t,r,y,abs");
        for i in 0..n {
            header += &format!(",re{i},im{i}");
        }
        writeln!(out, "{header}").map_err(io)?;
        let (im_min, _) = self.im_range();
        let half = (4.0 / (self.s * im_min).sqrt()).min(0.5 * self.tube_width);
        let (rs, _) = self.r_rule();
        for r in rs.iter().step_by(stride.max(1)) {
            for iy in 0..ny {
                let y = -half + 2.0 * half * iy as f64 / (ny.max(2) - 1) as f64;
                let v = self.field(ti, *r, y)?;
                let mut line = format!("{},{},{},{}", self.times()[ti], r, y, v.norm());
                for c in v.iter() {
                    line += &format!(",{},{}", c.re, c.im);
                }
                writeln!(out, "{line}").map_err(io)?;
            }
        }
        Ok(())
    }
}

/// Amplitude coefficients at one node.
struct NodeSeries {
    val: Vec<CVec>,
    dr: Vec<CVec>,
    drr: Vec<CVec>,
    dt: Vec<CVec>,
}

/// Fields in the frame `(γ′, N)` at one point.
struct Fields {
    ar: crate::CMat,
    ay: crate::CMat,
    zeroth: crate::CMat,
}

impl Fields {
    fn at(a: &dyn ConnectionForm, v: &dyn Potential, t: f64, x: Point, e: Point, n: Point) -> Self {
        let [a1, a2] = a.components(t, x);
        let d = a.spatial_derivatives(t, x);
        let ar = &a1 * C64::from(e[0]) + &a2 * C64::from(e[1]);
        let ay = &a1 * C64::from(n[0]) + &a2 * C64::from(n[1]);
        let zeroth = &d[0][0] + &d[1][1] + &ar * &ar + &ay * &ay + v.value(t, x);
        Self { ar, ay, zeroth }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beams::InitialVector;
    use crate::bundle::{random_connection, random_potential, BumpConnection, BumpPotential};
    use crate::geometry::trace_geodesic;
    use crate::linalg::basis_vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diameter() -> GeodesicPath {
        trace_geodesic(&Metric::flat(), Point::new(-1.0, 0.0), Point::new(1.0, 0.0), 1e-3).unwrap()
    }

    fn config(s: f64, y_order: usize, corrections: usize, phase_order: usize) -> BeamConfig {
        let amp = AmplitudeOptions { y_order, corrections, time_intervals: 8, ..AmplitudeOptions::new(basis_vector(2, 0), 1.0) };
        BeamConfig { phase_order, ..BeamConfig::new(s, amp) }
    }

    #[test]
    fn cover_separates_crossings() {
        let iv = cover_intervals(10.0, &[(2.0, 6.0), (3.0, 9.0)], &[], 0.2);
        for (a, b) in [(2.0, 6.0), (3.0, 9.0)] {
            assert!(iv.iter().all(|&(lo, hi)| !(lo <= a && b <= hi)), "{iv:?}");
        }
        for w in iv.windows(2) {
            assert!(w[1].0 < w[0].1);
        }
        assert_eq!(iv[0].0, 0.0);
        assert_eq!(iv.last().unwrap().1, 10.0);
        assert_eq!(cover_intervals(1.0, &[], &[], 0.2), vec![(0.0, 1.0)]);
    }

    #[test]
    fn split_beam_matches_single_chart() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_connection(&mut rng, 2, 3, 1.0, 0.5, true);
        let v = random_potential(&mut rng, 2, 2, 1.0, 0.5, true);
        let path = diameter();
        let single = build_beam(&Metric::flat(), &path, &a, &v, &config(64.0, 4, 1, 4)).unwrap();
        let mut cfg = config(64.0, 4, 1, 4);
        cfg.breaks = vec![0.6, 1.4];
        let split = build_beam(&Metric::flat(), &path, &a, &v, &cfg).unwrap();
        assert_eq!(split.pieces().len(), 3);
        let mut worst: f64 = 0.0;
        for ti in [2, 4, 6] {
            for k in (0..=200).step_by(5) {
                let r = k as f64 * 0.01;
                for y in [-0.1, 0.0, 0.05, 0.2] {
                    let d = split.field(ti, r, y).unwrap() - single.field(ti, r, y).unwrap();
                    worst = worst.max(d.norm());
                }
            }
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn inconsistent_pieces_are_rejected() {
        let path = diameter();
        let a = BumpConnection::zero(2);
        let v = BumpPotential::zero(2);
        let mut cfg = config(32.0, 0, 0, 2);
        cfg.breaks = vec![1.0];
        let beam = build_beam(&Metric::flat(), &path, &a, &v, &cfg).unwrap();
        let mut pieces = beam.pieces().to_vec();
        for c in pieces[1].phase.coeffs.iter_mut() {
            c[2] += C64::new(0.0, 1e-3);
        }
        assert!(matches!(assemble_beam(pieces, 32.0), Err(Error::Gluing(_))));
    }

    #[test]
    fn axis_values_and_eikonal_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_connection(&mut rng, 2, 3, 1.0, 0.5, false);
        let v = BumpPotential::zero(2);
        let beam = build_beam(&Metric::flat(), &diameter(), &a, &v, &config(50.0, 0, 0, 2)).unwrap();
        assert!(beam.axis_eikonal_bracket() <= 1e-12, "{}", beam.axis_eikonal_bracket());
        let p = &beam.pieces()[0];
        let s = beam.s();
        for (ti, k) in [(3, 40), (4, 120)] {
            let r = 0.01 * k as f64;
            let t = beam.times()[ti];
            let expected = p.amplitude.a00(ti, 2 * k) * ((crate::I * s * (r - s * t)).exp() * s.powf(0.25));
            assert!((beam.field(ti, r, 0.0).unwrap() - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn norm_is_uniform_and_concentrated() {
        let path = diameter();
        let beam = build_beam(&Metric::flat(), &path, &BumpConnection::zero(2), &BumpPotential::zero(2), &config(64.0, 0, 0, 2)).unwrap();
        let q = TubeQuadrature::default();
        let n64 = beam.norms(&q);
        let n256 = beam.with_s(256.0).norms(&q);
        assert!(n64.mass_outside < 1e-3 && n256.mass_outside < 1e-3);
        assert!((n64.l2 - n256.l2).abs() < 1e-6 * n64.l2);
        let metric = Metric::radial_bump(0.3, 0.5).unwrap();
        let x = Point::new(-1.0, 0.0);
        let curved = trace_geodesic(&metric, x, Point::new(1.0, 0.2).normalize() / metric.factor_at(x), 1e-3).unwrap();
        let mut cfg = config(64.0, 0, 0, 2);
        cfg.tube_width = Some(0.4);
        cfg.amplitude.initial = InitialVector::EntryTransported(basis_vector(2, 1));
        let beam = build_beam(&metric, &curved, &BumpConnection::zero(2), &BumpPotential::zero(2), &cfg).unwrap();
        assert!(beam.pieces()[0].phase.riccati.determinant_defect() < 1e-8);
        let n = beam.with_s(256.0).norms(&q);
        assert!((n.l2 - n.limit).abs() < 0.05 * n.limit, "{n:?}");
        assert!(matches!(beam.residual_norm(&BumpConnection::zero(2), &BumpPotential::zero(2), &q), Err(Error::Order(_))));
    }
}
