use super::phase::BeamPhase;
use super::series::{deriv, mat_vec, scal_vec, vec_deriv};
use crate::bundle::{transport_between, transport_grid, ConnectionForm, Potential};
use crate::geometry::FermiChart;
use crate::interp::{lagrange_weights, node_derivative_weights, TimeCutoff};
use crate::{CMat, CVec, Error, Point, Result, C64, I};
use nalgebra::DMatrix;
use rayon::prelude::*;

/// How the initial bundle vector `w` enters `a00`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialVector {
    /// `a00(t, r₀) = c₀ χ̃(t) w`.
    Constant(CVec),
    /// `a00(t, r) = c₀ χ̃(t) e^{−½∫H} U_A(r) w` with `U_A = Id` at the start of the path.
    EntryTransported(CVec),
}

impl InitialVector {
    pub fn vector(&self) -> &CVec {
        match self {
            Self::Constant(w) | Self::EntryTransported(w) => w,
        }
    }
}

/// Choice of the normalisation constant `c₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum C0Policy {
    /// `c₀ = (Im H(r₀))^{1/4} / π^{1/4}`, which makes `‖v(t)‖ → χ̃(t) (ρ₊)^{1/2} |w|`.
    Normalized,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeOptions {
    /// Taylor order `N_y` of `a_0` in `y`.
    pub y_order: usize,
    /// Number `N_s` of `s⁻¹` corrections (0 or 1).
    pub corrections: usize,
    pub initial: InitialVector,
    pub cutoff: TimeCutoff,
    /// Even number of time intervals on `[0, T]`.
    pub time_intervals: usize,
    pub c0: C0Policy,
    /// Half-width of the interval on which field Taylor coefficients are fitted.
    pub field_radius: f64,
    /// Transport steps per half-spacing interval.
    pub transport_substeps: usize,
}

impl AmplitudeOptions {
    pub fn new(w: CVec, horizon: f64) -> Self {
        Self {
            y_order: 0,
            corrections: 0,
            initial: InitialVector::Constant(w),
            cutoff: TimeCutoff::standard(horizon),
            time_intervals: 64,
            c0: C0Policy::Normalized,
            field_radius: 0.15,
            transport_substeps: 2,
        }
    }
}

/// Amplitude values at one node, handed to a neighbouring chart.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeInit {
    pub r: f64,
    /// `[level][time][l]`.
    pub values: Vec<Vec<Vec<CVec>>>,
}

/// Coefficients `b_l(t, r)` of one order `a_j = Σ_l b_l y^l` and their `r`-derivatives.
#[derive(Debug, Clone)]
pub struct AmplitudeLevel {
    pub order: usize,
    /// `[time][fine node][l]`.
    pub b: Vec<Vec<Vec<CVec>>>,
    pub br: Vec<Vec<Vec<CVec>>>,
}

/// Amplitude `a_0 + s⁻¹ a_1` on the half-spacing grid of a chart and a uniform time grid.
#[derive(Debug, Clone)]
pub struct BeamAmplitude {
    pub rank: usize,
    pub c0: f64,
    /// Initial bundle vector `w`.
    pub w: CVec,
    pub cutoff: TimeCutoff,
    pub times: Vec<f64>,
    pub levels: Vec<AmplitudeLevel>,
    r_start: f64,
    h: f64,
    anchor: usize,
}

/// Taylor coefficients in `y` of the fields along the normal line at one node.
#[derive(Debug, Clone)]
struct FieldSeries {
    ar: Vec<CMat>,
    ay: Vec<CMat>,
    /// `div A + A_r² + A_y² + V`.
    zeroth: Vec<CMat>,
}

struct Fitter {
    ys: Vec<f64>,
    inverse: DMatrix<f64>,
    radius: f64,
}

impl Fitter {
    fn new(degree: usize, radius: f64) -> Result<Self> {
        let q = degree + 10;
        let u: Vec<f64> = (0..q).map(|k| (std::f64::consts::PI * (k as f64 + 0.5) / q as f64).cos()).collect();
        let vander = DMatrix::from_fn(q, q, |i, j| u[i].powi(j as i32));
        let inverse = vander.try_inverse().ok_or_else(|| Error::Invalid("singular Chebyshev system".into()))?;
        Ok(Self { ys: u.iter().map(|v| v * radius).collect(), inverse, radius })
    }

    fn fit(&self, values: &[CMat], degree: usize) -> Vec<CMat> {
        (0..=degree)
            .map(|l| {
                let mut m = CMat::zeros(values[0].nrows(), values[0].ncols());
                for (i, v) in values.iter().enumerate() {
                    m += v * C64::from(self.inverse[(l, i)]);
                }
                m / C64::from(self.radius.powi(l as i32))
            })
            .collect()
    }
}

fn field_series(
    a: &dyn ConnectionForm,
    v: &dyn Potential,
    chart: &FermiChart,
    fitter: &Fitter,
    t: f64,
    r: f64,
    degree: usize,
) -> FieldSeries {
    let (g, e) = chart.center(r);
    let n = Point::new(-e[1], e[0]);
    let mut ar = Vec::with_capacity(fitter.ys.len());
    let mut ay = Vec::with_capacity(fitter.ys.len());
    let mut z = Vec::with_capacity(fitter.ys.len());
    for &y in &fitter.ys {
        let x = g + n * y;
        let [a1, a2] = a.components(t, x);
        let d = a.spatial_derivatives(t, x);
        let r_comp = &a1 * C64::from(e[0]) + &a2 * C64::from(e[1]);
        let y_comp = &a1 * C64::from(n[0]) + &a2 * C64::from(n[1]);
        z.push(&d[0][0] + &d[1][1] + &r_comp * &r_comp + &y_comp * &y_comp + v.value(t, x));
        ar.push(r_comp);
        ay.push(y_comp);
    }
    FieldSeries { ar: fitter.fit(&ar, degree), ay: fitter.fit(&ay, degree), zeroth: fitter.fit(&z, degree) }
}

/// Phase series `ψ_r`, `ψ_y`, `½ΔΨ` at one fine node.
struct PhaseSeries {
    psi_r: Vec<C64>,
    psi_y: Vec<C64>,
    half_lap: Vec<C64>,
}

fn phase_series(phase: &BeamPhase, j: usize) -> PhaseSeries {
    let c = &phase.coeffs[j];
    let yy = deriv(&deriv(c));
    let half_lap = (0..c.len()).map(|p| (phase.second[j][p] + yy.get(p).copied().unwrap_or_default()) * 0.5).collect();
    PhaseSeries { psi_r: phase.derivs[j].clone(), psi_y: deriv(c), half_lap }
}

/// `∂_r b_l` from the transport hierarchy `T(b) = g` in increasing `l`, where
/// `T(b) = (1 + ψ_r)(∂_r + A_r)b + ψ_y(∂_y + A_y)b + ½(ΔΨ)b`.
fn transport_rhs(ps: &PhaseSeries, fs: &FieldSeries, b: &[CVec], g: Option<&[CVec]>, n: usize) -> Vec<CVec> {
    let deg = b.len() - 1;
    let mut one_r = ps.psi_r.clone();
    one_r[0] += 1.0;
    let t1 = scal_vec(&one_r, &mat_vec(&fs.ar, b, deg, n), deg, n);
    let by = vec_deriv(b);
    let ayb = mat_vec(&fs.ay, b, deg, n);
    let inner: Vec<CVec> = (0..=deg).map(|l| by.get(l).cloned().unwrap_or_else(|| CVec::zeros(n)) + &ayb[l]).collect();
    let t2 = scal_vec(&ps.psi_y, &inner, deg, n);
    let t3 = scal_vec(&ps.half_lap, b, deg, n);
    let mut db: Vec<CVec> = Vec::with_capacity(deg + 1);
    for l in 0..=deg {
        let mut d = -(&t1[l] + &t2[l] + &t3[l]);
        if let Some(g) = g {
            d += &g[l];
        }
        for p in 2..=l.min(ps.psi_r.len() - 1) {
            d -= &db[l - p] * ps.psi_r[p];
        }
        db.push(d);
    }
    db
}

fn axpy(b: &[CVec], k: &[CVec], f: f64) -> Vec<CVec> {
    b.iter().zip(k).map(|(x, y)| x + y * C64::from(f)).collect()
}

struct TimeSlice {
    fields: Vec<FieldSeries>,
    phases: Vec<PhaseSeries>,
}

pub fn build_amplitude(
    chart: &FermiChart,
    phase: &BeamPhase,
    a: &dyn ConnectionForm,
    v: &dyn Potential,
    opts: &AmplitudeOptions,
) -> Result<BeamAmplitude> {
    build_amplitude_with(chart, phase, a, v, opts, None)
}

/// Amplitude hierarchy; with `init`, the values at `init.r` replace the
/// initial data (hand-off from a neighbouring chart).
pub fn build_amplitude_with(
    chart: &FermiChart,
    phase: &BeamPhase,
    a: &dyn ConnectionForm,
    v: &dyn Potential,
    opts: &AmplitudeOptions,
    init: Option<&AmplitudeInit>,
) -> Result<BeamAmplitude> {
    let n = a.rank();
    let w = opts.initial.vector();
    if w.len() != n || v.rank() != n {
        return Err(Error::Invalid("connection, potential and initial vector ranks differ".into()));
    }
    if opts.corrections > 1 {
        return Err(Error::Order(format!("at most one s⁻¹ correction is supported, got {}", opts.corrections)));
    }
    if (opts.y_order > 0 || opts.corrections > 0) && !chart.is_flat() {
        return Err(Error::Order("higher amplitude orders require the flat metric".into()));
    }
    if opts.time_intervals < 8 || opts.time_intervals % 2 == 1 {
        return Err(Error::Invalid("time grid needs an even number (≥ 8) of intervals".into()));
    }
    let n_fine = phase.fine_nodes();
    let h = phase.spacing();
    let r_start = phase.fine_node(0);
    let anchor = match init {
        Some(i) => {
            let j = ((i.r - r_start) / h).round();
            if j < 0.0 || j as usize >= n_fine || (r_start + j * h - i.r).abs() > 1e-9 || j as usize % 2 == 1 {
                return Err(Error::Gluing(format!("hand-off point {} is not a chart node", i.r)));
            }
            j as usize
        }
        None => phase.anchor(),
    };
    let c0 = match opts.c0 {
        C0Policy::Normalized => phase.riccati.c0(),
        C0Policy::Fixed(c) => c,
    };
    let nt = opts.time_intervals;
    let horizon = opts.cutoff.horizon;
    let times: Vec<f64> = (0..=nt).map(|i| horizon * i as f64 / nt as f64).collect();
    let ht = horizon / nt as f64;
    let l0 = opts.y_order;
    let l1 = l0.saturating_sub(2);
    let deg = l0.max(l1);
    let fitter = Fitter::new(deg, opts.field_radius)?;
    let path = chart.path();
    let zero_level = |order: usize| vec![vec![vec![CVec::zeros(n); order + 1]; n_fine]; nt + 1];
    if let Some(i) = init {
        if i.values.len() != opts.corrections + 1 || i.values.iter().any(|lv| lv.len() != nt + 1) {
            return Err(Error::Gluing("hand-off data does not match the amplitude layout".into()));
        }
    }

    // Leading order: closed-form a00 and the y-hierarchy of a_0.
    let per_time: Vec<(Vec<Vec<CVec>>, Vec<Vec<CVec>>, Option<TimeSlice>)> = times
        .par_iter()
        .enumerate()
        .map(|(ti, &t)| {
            let chi = opts.cutoff.value(t);
            let start: Vec<CVec> = match init {
                Some(i) => i.values[0][ti].clone(),
                None => {
                    let mut s = vec![CVec::zeros(n); l0 + 1];
                    s[0] = match &opts.initial {
                        InitialVector::Constant(w) => w * C64::from(c0 * chi),
                        InitialVector::EntryTransported(w) => {
                            let u = transport_between(a, path, t, 0.0, phase.fine_node(anchor), h / opts.transport_substeps as f64);
                            u * w * C64::from(c0 * chi)
                        }
                    };
                    s
                }
            };
            if start.iter().all(|x| x.norm() == 0.0) {
                return (vec![vec![CVec::zeros(n); l0 + 1]; n_fine], vec![vec![CVec::zeros(n); l0 + 1]; n_fine], None);
            }
            let u = transport_grid(a, path, t, (r_start, h, n_fine), anchor, opts.transport_substeps);
            let mut b = vec![vec![CVec::zeros(n); l0 + 1]; n_fine];
            for j in 0..n_fine {
                let damp = (-(phase.integral[j] - phase.integral[anchor]) * 0.5).exp();
                b[j][0] = &u[j] * &start[0] * damp;
            }
            let phases: Vec<PhaseSeries> = (0..n_fine).map(|j| phase_series(phase, j)).collect();
            let fields: Vec<FieldSeries> = if l0 > 0 || opts.corrections > 0 {
                (0..n_fine).map(|j| field_series(a, v, chart, &fitter, t, phase.fine_node(j), deg)).collect()
            } else {
                (0..n_fine)
                    .map(|j| {
                        let (x, e) = chart.center(phase.fine_node(j));
                        FieldSeries { ar: vec![a.along(t, x, e)], ay: vec![CMat::zeros(n, n)], zeroth: vec![CMat::zeros(n, n)] }
                    })
                    .collect()
            };
            if l0 > 0 {
                let closed: Vec<CVec> = b.iter().map(|bj| bj[0].clone()).collect();
                let rhs = |j: usize, s: &[CVec]| {
                    let mut s = s.to_vec();
                    s[0] = closed[j].clone();
                    let mut d = transport_rhs(&phases[j], &fields[j], &s, None, n);
                    d[0] = CVec::zeros(n);
                    d
                };
                integrate_level(&mut b, anchor, h, &start, &rhs);
                for j in 0..n_fine {
                    b[j][0] = closed[j].clone();
                }
            }
            let br: Vec<Vec<CVec>> = (0..n_fine).map(|j| transport_rhs(&phases[j], &fields[j], &b[j], None, n)).collect();
            (b, br, Some(TimeSlice { fields, phases }))
        })
        .collect();

    let mut levels = Vec::new();
    let mut slices = Vec::with_capacity(nt + 1);
    let mut lv0 = AmplitudeLevel { order: l0, b: Vec::with_capacity(nt + 1), br: Vec::with_capacity(nt + 1) };
    for (b, br, slice) in per_time {
        lv0.b.push(b);
        lv0.br.push(br);
        slices.push(slice);
    }
    levels.push(lv0);

    if opts.corrections == 1 {
        let lv0 = &levels[0];
        let per_time: Vec<(Vec<Vec<CVec>>, Vec<Vec<CVec>>)> = (0..=nt)
            .into_par_iter()
            .map(|ti| {
                let Some(slice) = &slices[ti] else {
                    return (zero_level(l1)[0].clone(), zero_level(l1)[0].clone());
                };
                let forcing: Vec<Vec<CVec>> = (0..n_fine)
                    .map(|j| {
                        let p = apply_operator(lv0, &slice.fields[j], ti, j, ht, h, l1, n);
                        p.into_iter().map(|x| x * (I * 0.5)).collect()
                    })
                    .collect();
                let start = match init {
                    Some(i) => i.values[1][ti].clone(),
                    None => vec![CVec::zeros(n); l1 + 1],
                };
                let rhs = |j: usize, s: &[CVec]| transport_rhs(&slice.phases[j], &slice.fields[j], s, Some(&forcing[j]), n);
                let mut b = vec![vec![CVec::zeros(n); l1 + 1]; n_fine];
                integrate_level(&mut b, anchor, h, &start, &rhs);
                let br = (0..n_fine).map(|j| rhs(j, &b[j])).collect();
                (b, br)
            })
            .collect();
        let mut lv1 = AmplitudeLevel { order: l1, b: Vec::new(), br: Vec::new() };
        for (b, br) in per_time {
            lv1.b.push(b);
            lv1.br.push(br);
        }
        levels.push(lv1);
    }
    Ok(BeamAmplitude { rank: n, c0, w: w.clone(), cutoff: opts.cutoff, times, levels, r_start, h, anchor })
}

/// RK4 with step `2h` between even fine nodes from `anchor` in both
/// directions (odd nodes supply the stage values), then six-point Lagrange
/// interpolation to the odd nodes.
fn integrate_level(b: &mut [Vec<CVec>], anchor: usize, h: f64, start: &[CVec], rhs: &dyn Fn(usize, &[CVec]) -> Vec<CVec>) {
    let n_fine = b.len();
    let step = |j: usize, s: &[CVec], dir: isize| -> Vec<CVec> {
        let hh = 2.0 * h * dir as f64;
        let mid = (j as isize + dir) as usize;
        let end = (j as isize + 2 * dir) as usize;
        let k1 = rhs(j, s);
        let k2 = rhs(mid, &axpy(s, &k1, hh / 2.0));
        let k3 = rhs(mid, &axpy(s, &k2, hh / 2.0));
        let k4 = rhs(end, &axpy(s, &k3, hh));
        s.iter()
            .enumerate()
            .map(|(l, x)| x + (&k1[l] + &k2[l] * C64::from(2.0) + &k3[l] * C64::from(2.0) + &k4[l]) * C64::from(hh / 6.0))
            .collect()
    };
    b[anchor] = start.to_vec();
    let mut j = anchor;
    while j + 2 < n_fine {
        b[j + 2] = step(j, &b[j], 1);
        j += 2;
    }
    j = anchor;
    while j >= 2 {
        b[j - 2] = step(j, &b[j], -1);
        j -= 2;
    }
    let n_coarse = (n_fine - 1) / 2 + 1;
    let origin = anchor % 2;
    for j in (0..n_fine).filter(|j| j % 2 != origin) {
        let (s, w) = lagrange_weights(j as f64, origin as f64, 2.0, n_coarse);
        let mut v = vec![CVec::zeros(start[0].len()); start.len()];
        for (i, wi) in w.iter().enumerate() {
            for (l, vl) in v.iter_mut().enumerate() {
                *vl += &b[origin + 2 * (s + i)][l] * C64::from(*wi);
            }
        }
        b[j] = v;
    }
}

/// Taylor coefficients up to `deg` of `(i∂_t + Δ_A + V)a` for the level `lv`
/// at time index `ti`, fine node `j` (flat metric).
fn apply_operator(lv: &AmplitudeLevel, fs: &FieldSeries, ti: usize, j: usize, ht: f64, h: f64, deg: usize, n: usize) -> Vec<CVec> {
    let b = &lv.b[ti][j];
    let br = &lv.br[ti][j];
    let bt = time_derivative(lv, ti, j, ht);
    let brr = radial_second(lv, ti, j, h);
    let by = vec_deriv(b);
    let arbr = mat_vec(&fs.ar, br, deg, n);
    let ayby = mat_vec(&fs.ay, &by, deg, n);
    let zb = mat_vec(&fs.zeroth, b, deg, n);
    (0..=deg)
        .map(|l| {
            let lap_y = b.get(l + 2).map(|x| x * C64::from(((l + 2) * (l + 1)) as f64)).unwrap_or_else(|| CVec::zeros(n));
            &bt[l] * I + &brr[l] + lap_y + (&arbr[l] + &ayby[l]) * C64::from(2.0) + &zb[l]
        })
        .chain(std::iter::repeat(CVec::zeros(n)))
        .take(deg + 1)
        .collect()
}

/// Seven-point `∂_t b_l` at a grid time.
pub(crate) fn time_derivative(lv: &AmplitudeLevel, ti: usize, j: usize, ht: f64) -> Vec<CVec> {
    let (s, w) = node_derivative_weights(lv.b.len(), ti, ht, 1, 7);
    let n = lv.b[ti][j][0].len();
    (0..=lv.order)
        .map(|l| w.iter().enumerate().fold(CVec::zeros(n), |acc, (i, wi)| acc + &lv.b[s + i][j][l] * C64::from(*wi)))
        .collect()
}

/// Seven-point `∂_r² b_l` (first difference of the exact `∂_r b_l`).
pub(crate) fn radial_second(lv: &AmplitudeLevel, ti: usize, j: usize, h: f64) -> Vec<CVec> {
    let br = &lv.br[ti];
    let (s, w) = node_derivative_weights(br.len(), j, h, 1, 7);
    let n = br[j][0].len();
    (0..=lv.order)
        .map(|l| w.iter().enumerate().fold(CVec::zeros(n), |acc, (i, wi)| acc + &br[s + i][l] * C64::from(*wi)))
        .collect()
}

impl BeamAmplitude {
    pub fn y_order(&self) -> usize {
        self.levels[0].order
    }

    pub fn corrections(&self) -> usize {
        self.levels.len() - 1
    }

    /// Fine index of the node carrying the initial data.
    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn fine_node(&self, j: usize) -> f64 {
        self.r_start + self.h * j as f64
    }

    pub fn time_spacing(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// `a00(t_i, r_j)`.
    pub fn a00(&self, ti: usize, j: usize) -> &CVec {
        &self.levels[0].b[ti][j][0]
    }

    /// Values at fine node `j` for the next chart.
    pub fn handoff(&self, j: usize) -> AmplitudeInit {
        AmplitudeInit { r: self.fine_node(j), values: self.levels.iter().map(|lv| lv.b.iter().map(|bt| bt[j].clone()).collect()).collect() }
    }

    /// `max |∂_r a00 + A(γ′)a00 + ½ H a00| / max |a00|` with `∂_r a00` from
    /// seven-point differences of the stored values.
    pub fn on_axis_residual(&self, chart: &FermiChart, phase: &BeamPhase, a: &dyn ConnectionForm) -> f64 {
        let lv = &self.levels[0];
        let n_fine = lv.b[0].len();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (ti, &t) in self.times.iter().enumerate() {
            for j in 0..n_fine {
                let (s, w) = node_derivative_weights(n_fine, j, self.h, 1, 7);
                let d = w.iter().enumerate().fold(CVec::zeros(self.rank), |acc, (i, wi)| acc + &lv.b[ti][s + i][0] * C64::from(*wi));
                let (x, e) = chart.center(self.fine_node(j));
                let b = &lv.b[ti][j][0];
                let res = d + a.along(t, x, e) * b + b * (phase.h(j) * 0.5);
                worst = worst.max(res.norm());
                scale = scale.max(b.norm());
            }
        }
        if scale == 0.0 { 0.0 } else { worst / scale }
    }

    /// `Σ_l b_l y^l` and `Σ_l ∂_r b_l y^l` coefficients of level `k` at `(t_i, r_j)`.
    pub fn coefficients(&self, k: usize, ti: usize, j: usize) -> (&[CVec], &[CVec]) {
        (&self.levels[k].b[ti][j], &self.levels[k].br[ti][j])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beams::build_phase;
    use crate::bundle::{random_connection, BumpConnection, BumpPotential};
    use crate::geometry::{build_fermi_chart, trace_geodesic, Metric};
    use crate::linalg::basis_vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat_setup() -> (FermiChart, BeamPhase) {
        let g = Metric::flat();
        let p = trace_geodesic(&g, Point::new(-1.0, 0.0), Point::new(1.0, 0.0), 1e-3).unwrap();
        let chart = build_fermi_chart(&g, &p, 16.0, 5).unwrap();
        let phase = build_phase(&chart, C64::new(0.0, 1.0), 5).unwrap();
        (chart, phase)
    }

    #[test]
    fn zero_fields_give_closed_form() {
        let (chart, phase) = flat_setup();
        let w = basis_vector(2, 0);
        let opts = AmplitudeOptions::new(w.clone(), 1.0);
        let amp = build_amplitude(&chart, &phase, &BumpConnection::zero(2), &BumpPotential::zero(2), &opts).unwrap();
        assert!((amp.c0 - std::f64::consts::PI.powf(-0.25)).abs() < 1e-12);
        for ti in [0, 10, 32, 50] {
            let chi = amp.cutoff.value(amp.times[ti]);
            for j in (0..phase.fine_nodes()).step_by(37) {
                let u = phase.fine_node(j) - 1.0;
                let expected = &w * (C64::new(1.0, u).powf(-0.5) * amp.c0 * chi);
                assert!((amp.a00(ti, j) - expected).norm() < 1e-10);
            }
        }
        assert!(amp.a00(0, 0).norm() == 0.0);
    }

    #[test]
    fn on_axis_transport_holds() {
        let (chart, phase) = flat_setup();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_connection(&mut rng, 2, 4, 1.0, 0.4, true);
        let opts = AmplitudeOptions { time_intervals: 16, ..AmplitudeOptions::new(basis_vector(2, 1), 1.0) };
        let amp = build_amplitude(&chart, &phase, &a, &BumpPotential::zero(2), &opts).unwrap();
        let res = amp.on_axis_residual(&chart, &phase, &a);
        assert!(res < 1e-10, "{res}");
    }

    #[test]
    fn higher_orders_need_flat_metric() {
        let g = Metric::radial_bump(0.3, 0.5).unwrap();
        let x = Point::new(-1.0, 0.0);
        let p = trace_geodesic(&g, x, Point::new(1.0, 0.2).normalize() / g.factor_at(x), 1e-3).unwrap();
        let chart = build_fermi_chart(&g, &p, 0.4, 2).unwrap();
        let phase = build_phase(&chart, C64::new(0.0, 1.0), 2).unwrap();
        let opts = AmplitudeOptions { y_order: 2, ..AmplitudeOptions::new(basis_vector(1, 0), 1.0) };
        let r = build_amplitude(&chart, &phase, &BumpConnection::zero(1), &BumpPotential::zero(1), &opts);
        assert!(matches!(r, Err(Error::Order(_))));
        let opts = AmplitudeOptions { time_intervals: 8, ..AmplitudeOptions::new(basis_vector(1, 0), 1.0) };
        assert!(build_amplitude(&chart, &phase, &BumpConnection::zero(1), &BumpPotential::zero(1), &opts).is_ok());
    }
}
