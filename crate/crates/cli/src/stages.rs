use crate::artifacts::{Artifacts, Row};
use crate::config::ExperimentConfig;
use crate::fields::{Fields, Pair};
use anyhow::{Context, Result};
use gaugebeam::beams::{build_beam, dominant_pair, spc_limit_check, AmplitudeOptions, BeamConfig, SpcOptions, TubeQuadrature};
use gaugebeam::bundle::{scattering_identity_gap, scattering_on_paths, transport, TransportOptions};
use gaugebeam::checks::{log_slope, Bound, Measurement};
use gaugebeam::geometry::{sample_inflow, sample_parallel, trace_geodesic, GeodesicPath, Metric};
use gaugebeam::linalg::{basis_vector, fro, identity, random_hermitian, random_unit_vector};
use gaugebeam::raytransform::{
    art_forward, assemble_system, boundary_gauge_defect, covariant_gradient, endo_connection, invert, max_norm, reconstruct_gauge, ArtOptions,
    AssemblyOptions, AttenuationField, FieldKind, GaugeOptions, IntegrandField, InversionOptions, PixelField, PixelGrid,
};
use gaugebeam::schrodinger::{dtn_map, energy_report, evolve, source_solve, BoundaryData, Discretization, Domain, Manufactured};
use gaugebeam::{CMat, CVec, Point, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use std::fmt::Write as _;

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Geodesic,
    Transport,
    Scatter,
    Beam,
    ArtForward,
    ArtInvert,
    ArtGauge,
    Schrod,
}

impl Stage {
    pub const ALL: [Stage; 8] =
        [Stage::Geodesic, Stage::Transport, Stage::Scatter, Stage::Beam, Stage::ArtForward, Stage::ArtInvert, Stage::ArtGauge, Stage::Schrod];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Geodesic => "geodesic",
            Stage::Transport => "transport",
            Stage::Scatter => "scatter",
            Stage::Beam => "beam",
            Stage::ArtForward => "art-forward",
            Stage::ArtInvert => "art-invert",
            Stage::ArtGauge => "art-gauge",
            Stage::Schrod => "schrod",
        }
    }

    /// Stream of the stage's own generator, independent of the field generator.
    fn stream(self) -> u64 {
        1 + Stage::ALL.iter().position(|&s| s == self).expect("listed") as u64
    }
}

/// Everything a stage needs: the configuration, its metric and the generated fields.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub metric: Metric,
    pub fields: Fields,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        let metric = cfg.metric()?;
        let fields = Fields::generate(&cfg);
        Ok(Self { cfg, metric, fields })
    }

    fn rng(&self, stage: Stage) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(stage.stream());
        rng
    }

    fn inflow_paths(&self) -> Result<Vec<GeodesicPath>> {
        let r = &self.cfg.rays;
        sample_inflow(&self.metric, r.points, r.directions)
            .par_iter()
            .map(|s| trace_geodesic(&self.metric, s.x, s.theta, r.step))
            .collect::<gaugebeam::Result<_>>()
            .context("tracing inflow geodesics")
    }

    /// Runs one stage; an error becomes a failed row instead of aborting the run.
    pub fn run(&self, stage: Stage, out: &mut Artifacts) -> Vec<Row> {
        let result = match stage {
            Stage::Geodesic => self.geodesic(out),
            Stage::Transport => self.transport(out),
            Stage::Scatter => self.scatter(out),
            Stage::Beam => self.beam(out),
            Stage::ArtForward => self.art_forward(out),
            Stage::ArtInvert => self.art_invert(out),
            Stage::ArtGauge => self.art_gauge(out),
            Stage::Schrod => self.schrod(out),
        };
        let name = stage.name();
        match result {
            Ok(rows) => rows.into_iter().map(|(anchor, m)| Row::measured(name, anchor, m)).collect(),
            Err(e) => vec![Row::failed(name, &e)],
        }
    }

    fn geodesic(&self, out: &mut Artifacts) -> Result<Vec<(&'static str, Measurement)>> {
        let paths = self.inflow_paths()?;
        let mut csv = String::from("ray,r,x1,x2,theta1,theta2\n");
        let mut summary = Vec::new();
        let mut speed = 0.0f64;
        for (i, p) in paths.iter().enumerate() {
            let samples = p.samples();
            for (k, s) in samples.iter().enumerate() {
                speed = speed.max((self.metric.norm(s.x, s.theta) - 1.0).abs());
                if k % 10 == 0 || k + 1 == samples.len() {
                    writeln!(csv, "{i},{},{},{},{},{}", s.r, s.x[0], s.x[1], s.theta[0], s.theta[1])?;
                }
            }
            let (e, x) = (p.entry(), p.exit().0);
            summary.push(json!({ "ray": i, "entry": [e.x[0], e.x[1]], "theta": [e.theta[0], e.theta[1]], "exit": [x[0], x[1]], "length": p.exit_time() }));
        }
        out.write("geodesics.csv", csv)?;
        out.write_json("geodesics.json", &json!({ "metric": self.cfg.metric, "step": self.cfg.rays.step, "rays": summary }))?;
        Ok(vec![
            ("non-trapping", Measurement::new("rays_reaching_boundary", paths.len() as f64, Bound::Positive)),
            ("unit-speed-geodesic", Measurement::new("max_speed_defect", speed, Bound::AtMost(self.cfg.tolerances.speed))),
        ])
    }

    fn connections(&self, pair: &Pair) -> Vec<(&'static str, std::sync::Arc<dyn gaugebeam::bundle::ConnectionForm>)> {
        vec![("A1", pair.a1.clone()), ("A2", pair.a2.clone())]
    }

    fn transport(&self, out: &mut Artifacts) -> Result<Vec<(&'static str, Measurement)>> {
        let paths = self.inflow_paths()?;
        let pair = self.fields.disk()?;
        let opts = TransportOptions::with_step(self.cfg.rays.step);
        let mut csv = String::from("field,t,ray,length,unitarity_defect\n");
        let mut worst = 0.0f64;
        for (label, a) in self.connections(&pair) {
            for &t in &self.cfg.rays.times {
                let defects = paths
                    .par_iter()
                    .map(|p| Ok(transport(a.as_ref(), p, t, opts)?.unitarity_defect()))
                    .collect::<gaugebeam::Result<Vec<f64>>>()?;
                for (i, d) in defects.iter().enumerate() {
                    writeln!(csv, "{label},{t},{i},{},{d:e}", paths[i].exit_time())?;
                    worst = worst.max(*d);
                }
            }
        }
        out.write("transport.csv", csv)?;
        Ok(vec![("parallel-transport-unitarity", Measurement::new("max_unitarity_defect", worst, Bound::AtMost(self.cfg.tolerances.unitarity)))])
    }

    fn scatter(&self, out: &mut Artifacts) -> Result<Vec<(&'static str, Measurement)>> {
        let tol = &self.cfg.tolerances;
        let paths = self.inflow_paths()?;
        let pair = self.fields.disk()?;
        let opts = TransportOptions::with_step(self.cfg.rays.step);
        let id = identity(self.fields.rank());
        let mut csv = String::from("t,ray,gap,distance_from_identity\n");
        let mut json_times = Vec::new();
        let (mut gap, mut trivial) = (0.0f64, 0.0f64);
        for &t in &self.cfg.rays.times {
            let c1 = scattering_on_paths(pair.a1.as_ref(), t, &paths, opts)?;
            let c2 = scattering_on_paths(pair.a2.as_ref(), t, &paths, opts)?;
            for (i, (s1, s2)) in c1.samples.iter().zip(&c2.samples).enumerate() {
                let (g, d) = (fro(&(&s1.c - &s2.c)), fro(&(&s1.c - &id)));
                writeln!(csv, "{t},{i},{g:e},{d:e}")?;
                gap = gap.max(g);
                trivial = trivial.max(d);
            }
            json_times.push(json!({ "t": t, "A1": c1.to_json(), "A2": c2.to_json() }));
        }
        out.write("scattering_gap.csv", csv)?;
        out.write_json("scattering.json", &json_times)?;

        let mut rng = self.rng(Stage::Scatter);
        let mut identity_gap = 0.0f64;
        let mut id_csv = String::from("ray,t,lhs_re,lhs_im,rhs_re,rhs_im,gap\n");
        for (k, p) in paths.iter().take(4).enumerate() {
            let t = self.cfg.rays.times[k % self.cfg.rays.times.len()];
            let (w1, w2) = (random_unit_vector(&mut rng, self.fields.rank()), random_unit_vector(&mut rng, self.fields.rank()));
            let c = scattering_identity_gap(pair.a1.as_ref(), pair.a2.as_ref(), p, t, &w1, &w2, self.cfg.rays.step)?;
            writeln!(id_csv, "{k},{t},{},{},{},{},{:e}", c.lhs.re, c.lhs.im, c.rhs.re, c.rhs.im, c.gap)?;
            identity_gap = identity_gap.max(c.gap);
        }
        out.write("scattering_identity.csv", id_csv)?;

        let mut rows = vec![("scattering-identity", Measurement::new("max_side_gap", identity_gap, Bound::AtMost(tol.identity_gap)))];
        if pair.equivalent() {
            rows.push(("scattering-gauge-invariance", Measurement::new("max_scattering_gap", gap, Bound::AtMost(tol.scattering_gap))));
        }
        if self.fields.trivial_connection() {
            rows.push(("scattering-trivial-connection", Measurement::new("max_distance_from_identity", trivial, Bound::AtMost(tol.scattering_gap))));
        }
        Ok(rows)
    }

    fn beam(&self, out: &mut Artifacts) -> Result<Vec<(&'static str, Measurement)>> {
        let (cfg, tol) = (&self.cfg.beam, &self.cfg.tolerances);
        let pair = self.fields.disk()?;
        let start = Point::new(-self.metric.radius(), 0.0);
        let path = trace_geodesic(&self.metric, start, Point::new(1.0, 0.0) / self.metric.factor_at(start), self.cfg.rays.step)?;
        let mut amp = AmplitudeOptions::new(basis_vector(self.fields.rank(), 0), cfg.horizon);
        amp.y_order = cfg.y_order;
        amp.corrections = cfg.corrections;
        let mut bc = BeamConfig::new(cfg.s_list[0], amp);
        bc.phase_order = cfg.phase_order;
        let beam = build_beam(&self.metric, &path, pair.a1.as_ref(), pair.v1.as_ref(), &bc)?;
        let det = beam.pieces().iter().map(|p| p.phase.riccati.determinant_defect()).fold(0.0, f64::max);
        let min_im = beam.pieces().iter().map(|p| p.phase.riccati.min_imag()).fold(f64::INFINITY, f64::min);
        let mut rows = vec![
            ("riccati-determinant", Measurement::new("max_determinant_defect", det, Bound::AtMost(tol.riccati_determinant))),
            ("riccati-positivity", Measurement::new("min_im_h", min_im, Bound::Positive)),
        ];
        let mut summary = json!({
            "pieces": beam.pieces().len(),
            "tube_width": beam.tube_width(),
            "r_start": beam.r_start(),
            "r_end": beam.r_end(),
            "phase_order": cfg.phase_order,
            "y_order": cfg.y_order,
            "corrections": cfg.corrections,
            "max_determinant_defect": det,
            "min_im_h": min_im,
        });
        if self.metric.is_flat() {
            let q = TubeQuadrature::default();
            let mut csv = String::from("s,residual,residual_coarse_y,norm\n");
            let (mut res, mut norms) = (Vec::new(), Vec::new());
            for &s in &cfg.s_list {
                let r = beam.with_s(s).residual_norm(pair.a1.as_ref(), pair.v1.as_ref(), &q)?;
                writeln!(csv, "{s},{:e},{:e},{:e}", r.residual, r.coarse, r.norm)?;
                res.push(r.residual);
                norms.push(r.norm);
            }
            out.write("beam_residual.csv", csv)?;
            let slope = log_slope(&cfg.s_list, &res);
            let (lo, hi) = norms.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &n| (l.min(n), h.max(n)));
            summary["residual_slope"] = json!(slope);
            summary["axis_eikonal_bracket"] = json!(beam.axis_eikonal_bracket());
            rows.push(("approximate-solution", Measurement::new("residual_slope", slope, Bound::AtMost(-tol.residual_decay))));
            rows.push(("beam-norm-bound", Measurement::new("norm_spread", hi / lo - 1.0, Bound::AtMost(tol.norm_spread))));
            if !pair.equivalent() {
                let (w1, w2) = dominant_pair(pair.a1.as_ref(), pair.a2.as_ref(), &path, 0.5 * cfg.horizon)?;
                let table = spc_limit_check(&self.metric, &path, pair.a1.as_ref(), pair.a2.as_ref(), &w1, &w2, &cfg.s_list, &SpcOptions::new(cfg.horizon))?;
                out.write("spc.csv", table.to_csv())?;
                let last = table.rows.last().map_or(f64::INFINITY, |r| r.error);
                rows.push(("stationary-phase-limit", Measurement::new("relative_error_at_largest_s", last, Bound::AtMost(tol.spc_error))));
                rows.push(("stationary-phase-limit", Measurement::new("not_decreasing", f64::from(u8::from(!table.decreasing())), Bound::AtMost(0.0))));
            }
        }
        out.write_json("beam.json", &summary)?;
        Ok(rows)
    }

    fn art_paths(&self) -> Result<Vec<GeodesicPath>> {
        sample_parallel(&self.metric, self.cfg.art.angles, self.cfg.art.offsets)
            .par_iter()
            .map(|s| trace_geodesic(&self.metric, s.x, s.theta, self.cfg.rays.step))
            .collect::<gaugebeam::Result<_>>()
            .context("tracing parallel-beam geodesics")
    }

    fn attenuation(&self) -> Result<AttenuationField> {
        let pair = self.fields.disk()?;
        Ok(endo_connection(pair.a1, pair.a2)?)
    }

    fn art_data(&self) -> Result<(Vec<GeodesicPath>, AttenuationField, Vec<CMat>)> {
        let paths = self.art_paths()?;
        let b = self.attenuation()?;
        let n = self.fields.rank();
        let data = art_forward(&b, &IntegrandField::function(move |x| phantom(n, x)), &paths, self.cfg.art.time, ArtOptions { step: self.cfg.rays.step, tolerance: None })?;
        Ok((paths, b, data))
    }

    fn art_forward(&self, out: &mut Artifacts) -> Result<Vec<(&'static str, Measurement)>> {
        let (paths, b, data) = self.art_data()?;
        let mut csv = String::from("ray,x1,x2,theta1,theta2,row,col,re,im\n");
        for (i, (p, d)) in paths.iter().zip(&data).enumerate() {
            let e = p.entry();
            for ((r, c), z) in d.iter().enumerate().map(|(k, z)| ((k % d.nrows(), k / d.nrows()), z)) {
                writeln!(csv, "{i},{},{},{},{},{r},{c},{},{}", e.x[0], e.x[1], e.theta[0], e.theta[1], z.re, z.im)?;
            }
        }
        out.write("art_data.csv", csv)?;

        let mut rng = self.rng(Stage::ArtForward);
        let n = self.fields.rank();
        let m: Vec<CMat> = (0..3).map(|_| random_hermitian(&mut rng, n, 1.0)).collect();
        let kernel = art_forward(&b, &covariant_gradient(&b, self.cfg.art.time, move |x| boundary_vanishing(&m, x)), &paths, self.cfg.art.time, ArtOptions::default())?;
        Ok(vec![
            ("attenuated-ray-transform", Measurement::new("rays", paths.len() as f64, Bound::Positive)),
            ("gauge-direction-kernel", Measurement::new("gauge_direction_data", max_norm(&kernel), Bound::AtMost(self.cfg.tolerances.gauge_direction))),
        ])
    }

    fn art_invert(&self, out: &mut Artifacts) -> Result<Vec<(&'static str, Measurement)>> {
        let art = &self.cfg.art;
        let (paths, b, data) = self.art_data()?;
        let grid = PixelGrid::new(art.grid, self.metric.radius())?;
        let system = assemble_system(&b, &paths, &grid, FieldKind::Function, art.time, AssemblyOptions { step: self.cfg.rays.step, ..Default::default() })?;
        let inversion = invert(&system, &data, InversionOptions { lambda_rel: art.lambda_rel, ..Default::default() })?;
        let n = self.fields.rank();
        let truth = PixelField::sample(&grid, |x| phantom(n, x));
        let error = inversion.field.relative_error(&truth, &grid);
        let mut csv = String::from("x1,x2,inside,recovered,truth\n");
        for k in 0..grid.len() {
            let x = grid.position(k);
            writeln!(csv, "{},{},{},{:e},{:e}", x[0], x[1], u8::from(grid.inside(k)), fro(&inversion.field.coeffs[k]), fro(&truth.coeffs[k]))?;
        }
        out.write("art_recovered.csv", csv)?;
        out.write("art_history.csv", inversion.history_csv())?;
        out.write_json(
            "art.json",
            &json!({
                "grid": art.grid,
                "rays": paths.len(),
                "lambda": inversion.lambda,
                "lambda_max": inversion.lambda_max,
                "iterations": inversion.iterations,
                "misfit": inversion.misfit,
                "relative_error": error,
            }),
        )?;
        Ok(vec![("attenuated-ray-transform", Measurement::new("relative_l2_error", error, Bound::AtMost(self.cfg.tolerances.art_error)))])
    }

    fn art_gauge(&self, out: &mut Artifacts) -> Result<Vec<(&'static str, Measurement)>> {
        let (art, tol) = (&self.cfg.art, &self.cfg.tolerances);
        let pair = self.fields.disk()?;
        let reach = 0.85 * self.metric.radius();
        let points: Vec<Point> = (0..art.gauge_points)
            .map(|k| {
                let rho = reach * ((k % 4) as f64 + 0.5) / 4.0;
                let ang = 2.4 * k as f64;
                Point::new(rho * ang.cos(), rho * ang.sin())
            })
            .collect();
        let opts = GaugeOptions { directions: art.gauge_directions, step: self.cfg.rays.step, ..Default::default() };
        let rec = reconstruct_gauge(&self.metric, pair.a1.as_ref(), pair.a2.as_ref(), &points, art.time, opts)?;
        out.write("gauge.csv", rec.to_csv())?;
        let Some(g) = &pair.gauge else {
            return Ok(vec![("candidate-gauge", Measurement::new("points", points.len() as f64, Bound::Positive))]);
        };
        let samples = sample_inflow(&self.metric, self.cfg.rays.points.min(6), 3);
        let defect = boundary_gauge_defect(&self.metric, pair.a1.as_ref(), pair.a2.as_ref(), &samples, art.time, self.cfg.rays.step)?;
        Ok(vec![
            ("candidate-gauge", Measurement::new("max_directional_spread", rec.max_spread(), Bound::AtMost(tol.gauge_spread))),
            ("candidate-gauge", Measurement::new("max_gauge_error", rec.max_error(|x| g.value(art.time, x)), Bound::AtMost(tol.gauge_error))),
            ("candidate-gauge", Measurement::new("boundary_identity_defect", defect, Bound::AtMost(tol.identity_gap))),
        ])
    }

    fn schrod(&self, out: &mut Artifacts) -> Result<Vec<(&'static str, Measurement)>> {
        let (sc, tol) = (&self.cfg.schrod, &self.cfg.tolerances);
        let pair = self.fields.square()?;
        let n = self.fields.rank();
        let mut rng = self.rng(Stage::Schrod);
        let disc = |cells: usize| Discretization::square(cells, sc.horizon, 1).with_proportional_steps(sc.dt_ratio);
        let data = BoundaryData::random(&mut rng, n, Domain::Square, sc.horizon);
        let forcing = Manufactured::random(&mut rng, n, 2);
        let source = |t: f64, x: Point| forcing.value(t, x);
        let w = random_unit_vector(&mut rng, n);
        let initial = move |x: Point| -> CVec { &w * C64::from((std::f64::consts::PI * x.x).sin() * (std::f64::consts::PI * x.y).sin() * (1.0 + x.x)) };

        let mut csv = String::from("cells,spacing,dt,dtn_norm,dtn_gap,ratio_l2,ratio_h1,ratio_dt,ratio_h12\n");
        let (mut gaps, mut ratios, mut reports) = (Vec::new(), Vec::new(), Vec::new());
        let mut finest = None;
        for &cells in &sc.grids {
            let d = disc(cells);
            let r1 = dtn_map(pair.a1.as_ref(), pair.v1.as_ref(), &data, &d)?;
            let r2 = dtn_map(pair.a2.as_ref(), pair.v2.as_ref(), &data, &d)?;
            let gap = r1.relative_gap(&r2)?;
            let report = energy_report(&source_solve(pair.a1.as_ref(), pair.v1.as_ref(), &source, &d)?, Some(&source));
            let [q0, q1, q2, q3] = report.ratios;
            writeln!(csv, "{cells},{},{},{:e},{gap:e},{q0},{q1},{q2},{q3}", d.spacing(), d.dt(), r1.norm())?;
            gaps.push(gap);
            ratios.push(report.ratios.map(|r| r.value()));
            reports.push(json!({ "cells": cells, "report": report }));
            finest = Some(r1);
        }
        out.write("schrod.csv", csv)?;
        let mut dtn = Vec::new();
        finest.expect("at least two grids").write_csv(&mut dtn)?;
        out.write("dtn.csv", dtn)?;
        out.write_json("schrod.json", &reports)?;

        let sol = evolve(pair.a1.as_ref(), pair.v1.as_ref(), &initial, &disc(sc.grids[sc.grids.len() / 2]))?;
        let n0 = sol.norm(0);
        let drift = (0..sol.times.len()).map(|k| (sol.norm(k) - n0).abs() / n0).fold(0.0, f64::max);

        let mut variation = 0.0f64;
        for i in 0..4 {
            let values: Option<Vec<f64>> = ratios.iter().map(|r| r[i]).collect();
            let values = values.context("an energy ratio is vacuous or unbounded")?;
            let (lo, hi) = values.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
            variation = variation.max(hi / lo - 1.0);
        }
        let mut rows = vec![
            ("norm-conservation", Measurement::new("norm_drift", drift, Bound::AtMost(tol.norm_drift))),
            ("energy-estimates", Measurement::new("energy_ratio_variation", variation, Bound::AtMost(tol.energy_variation))),
        ];
        if pair.equivalent() {
            let finest_gap = *gaps.last().expect("grids");
            rows.push(("dtn-gauge-invariance", Measurement::new("dtn_gap_finest", finest_gap, Bound::AtMost(tol.dtn_gap))));
            if gaps.iter().all(|&g| g > 0.0) {
                let reduction = gaps.windows(2).map(|g| g[0] / g[1]).fold(f64::INFINITY, f64::min);
                rows.push(("dtn-gauge-invariance", Measurement::new("dtn_gap_reduction", reduction, Bound::AtLeast(tol.dtn_reduction))));
            }
        }
        Ok(rows)
    }
}

/// Hermitian phantom of rank `n`: two Gaussian blobs carrying a symmetric
/// off-diagonal pattern and an alternating diagonal.
pub fn phantom(n: usize, x: Point) -> CMat {
    let off = CMat::from_fn(n, n, |i, j| C64::from(if i.abs_diff(j) == 1 || n == 1 { 1.0 } else { 0.0 }));
    let diag = CMat::from_fn(n, n, |i, j| C64::from(if i == j { if i % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 }));
    off * C64::from((-(x - Point::new(0.3, 0.2)).norm_squared() / 0.08).exp())
        + diag * C64::from((-(x - Point::new(-0.25, -0.3)).norm_squared() / 0.12).exp())
}

/// `p = (1 − |x|²)(M₀ + x M₁ + y² M₂)` and its gradient; `p` vanishes on the unit circle.
fn boundary_vanishing(m: &[CMat], x: Point) -> (CMat, [CMat; 2]) {
    let q = 1.0 - x.norm_squared();
    let inner = &m[0] + &m[1] * C64::from(x[0]) + &m[2] * C64::from(x[1] * x[1]);
    let d = [&inner * C64::from(-2.0 * x[0]) + &m[1] * C64::from(q), &inner * C64::from(-2.0 * x[1]) + &m[2] * C64::from(2.0 * x[1] * q)];
    (inner * C64::from(q), d)
}
