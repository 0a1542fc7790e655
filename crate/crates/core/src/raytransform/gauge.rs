use crate::bundle::{transport_between, ConnectionForm};
use crate::geometry::{trace_from_interior, trace_geodesic, InflowSample, Metric};
use crate::linalg::{fro, identity, polar_unitary};
use crate::{CMat, Error, Point, Result, C64};
use rayon::prelude::*;

/// Direction sampling and the descent threshold of [`reconstruct_gauge`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeOptions {
    pub directions: usize,
    pub step: f64,
    /// Largest directional spread for which `G(x)` is accepted as a function of `x`.
    pub threshold: f64,
}

impl Default for GaugeOptions {
    fn default() -> Self {
        Self { directions: 16, step: 1e-3, threshold: 1e-6 }
    }
}

/// Candidate gauge over the directions at one base point.
#[derive(Debug, Clone)]
pub struct GaugePoint {
    pub x: Point,
    pub samples: Vec<CMat>,
    /// Unitary polar factor of the sample mean.
    pub mean: CMat,
    /// `max_θ ‖G(x, θ) − mean‖_F`.
    pub spread: f64,
    /// `Some(mean)` when the spread is below the threshold.
    pub descended: Option<CMat>,
}

#[derive(Debug, Clone)]
pub struct GaugeReconstruction {
    pub time: f64,
    pub points: Vec<GaugePoint>,
}

impl GaugeReconstruction {
    pub fn max_spread(&self) -> f64 {
        self.points.iter().map(|p| p.spread).fold(0.0, f64::max)
    }

    /// `max_x ‖mean(x) − G*(x)‖_F` against a reference gauge.
    pub fn max_error(&self, reference: impl Fn(Point) -> CMat) -> f64 {
        self.points.iter().map(|p| fro(&(&p.mean - reference(p.x)))).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1,x2,spread,descended\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{:e},{}\n", p.x[0], p.x[1], p.spread, p.descended.is_some()));
        }
        s
    }
}

/// `G(x, θ) = U_{A₁}(r) U_{A₂}(r)⁻¹` on the geodesic through `(x, θ)`, with
/// `r` the distance from its entry point. Both transports are computed
/// backwards from `x` to the entry point, so `G = V₁⁻¹V₂`.
pub fn gauge_sample(
    metric: &Metric,
    a1: &dyn ConnectionForm,
    a2: &dyn ConnectionForm,
    x: Point,
    theta: Point,
    t: f64,
    step: f64,
) -> Result<CMat> {
    let back = if metric.contains(x) {
        trace_from_interior(metric, x, -theta, step)?
    } else {
        trace_geodesic(metric, x, -theta, step)?
    };
    let length = back.exit_time();
    let v1 = transport_between(a1, &back, t, 0.0, length, step);
    let v2 = transport_between(a2, &back, t, 0.0, length, step);
    Ok(v1.adjoint() * v2)
}

/// Samples the candidate gauge over `directions` equispaced unit directions
/// at every point and reports its directional mean and spread.
pub fn reconstruct_gauge(
    metric: &Metric,
    a1: &dyn ConnectionForm,
    a2: &dyn ConnectionForm,
    points: &[Point],
    t: f64,
    opts: GaugeOptions,
) -> Result<GaugeReconstruction> {
    if a1.rank() != a2.rank() {
        return Err(Error::Invalid("rank mismatch".into()));
    }
    let points = points
        .par_iter()
        .map(|&x| {
            if !metric.contains(x) || opts.directions == 0 {
                return Err(Error::Coverage(x[0], x[1]));
            }
            let c = metric.factor_at(x);
            let samples = (0..opts.directions)
                .map(|j| {
                    let phi = std::f64::consts::TAU * j as f64 / opts.directions as f64;
                    gauge_sample(metric, a1, a2, x, Point::new(phi.cos(), phi.sin()) / c, t, opts.step)
                })
                .collect::<Result<Vec<_>>>()?;
            let sum = samples.iter().fold(CMat::zeros(a1.rank(), a1.rank()), |acc, g| acc + g);
            let mean = polar_unitary(&(sum * C64::from(1.0 / samples.len() as f64)));
            let spread = samples.iter().map(|g| fro(&(g - &mean))).fold(0.0, f64::max);
            let descended = (spread <= opts.threshold).then(|| mean.clone());
            Ok(GaugePoint { x, samples, mean, spread, descended })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GaugeReconstruction { time: t, points })
}

/// `max ‖G − Id‖_F` at the exit points of the given rays, i.e. `‖C_{A₁}C_{A₂}⁻¹ − Id‖`.
pub fn boundary_gauge_defect(
    metric: &Metric,
    a1: &dyn ConnectionForm,
    a2: &dyn ConnectionForm,
    rays: &[InflowSample],
    t: f64,
    step: f64,
) -> Result<f64> {
    let id = identity(a1.rank());
    rays.par_iter()
        .map(|s| {
            let (x, theta) = trace_geodesic(metric, s.x, s.theta, step)?.exit();
            let x = x * (metric.radius() / x.norm());
            let theta = theta / metric.norm(x, theta);
            Ok(fro(&(gauge_sample(metric, a1, a2, x, theta, t, step)? - &id)))
        })
        .collect::<Result<Vec<f64>>>()
        .map(|v| v.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{gauge_transform, random_connection, BumpPotential, ExpGauge, Gauge, Profile};
    use crate::geometry::sample_inflow;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn interior_points() -> Vec<Point> {
        vec![Point::new(0.0, 0.0), Point::new(0.4, -0.2), Point::new(-0.5, 0.55), Point::new(0.1, 0.8)]
    }

    #[test]
    fn equal_connections_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_connection(&mut rng, 2, 3, 1.0, 0.5, true);
        let metric = Metric::radial_bump(0.3, 0.5).unwrap();
        let rec = reconstruct_gauge(&metric, &a, &a, &interior_points(), 0.2, GaugeOptions { directions: 6, ..Default::default() }).unwrap();
        assert!(rec.max_spread() < 1e-12);
        assert!(rec.max_error(|_| identity(2)) < 1e-12);
        assert!(rec.points.iter().all(|p| p.descended.is_some()));
        assert!(matches!(
            reconstruct_gauge(&metric, &a, &a, &[Point::new(1.2, 0.0)], 0.2, GaugeOptions::default()),
            Err(Error::Coverage(..))
        ));
    }

    #[test]
    fn known_gauge_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let metric = Metric::radial_bump(0.3, 0.5).unwrap();
        let a: Arc<dyn ConnectionForm> = Arc::new(random_connection(&mut rng, 2, 3, 1.0, 0.5, true));
        let g = Arc::new(ExpGauge::random(&mut rng, 2, 2, Profile::Disk { radius: 1.0 }, true));
        let (at, _) = gauge_transform(a.clone(), Arc::new(BumpPotential::zero(2)), g.clone(), 1.0).unwrap();
        let t = 0.35;
        let rec = reconstruct_gauge(&metric, &*a, &*at, &interior_points(), t, GaugeOptions { directions: 8, ..Default::default() }).unwrap();
        assert!(rec.max_spread() <= 1e-6, "{}", rec.max_spread());
        assert!(rec.max_error(|x| g.value(t, x)) <= 1e-5);
        let defect = boundary_gauge_defect(&metric, &*a, &*at, &sample_inflow(&metric, 5, 3), t, 1e-3).unwrap();
        assert!(defect <= 1e-7, "{defect}");
    }

    #[test]
    fn inequivalent_pair_does_not_descend() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a1 = random_connection(&mut rng, 2, 3, 1.0, 0.5, false);
        let a2 = random_connection(&mut rng, 2, 3, 1.0, 0.5, false);
        let rec = reconstruct_gauge(&Metric::flat(), &a1, &a2, &[Point::new(0.1, 0.2)], 0.0, GaugeOptions { directions: 8, ..Default::default() }).unwrap();
        assert!(rec.points[0].descended.is_none());
        assert!(rec.to_csv().contains("false"));
    }
}
