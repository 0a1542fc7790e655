use crate::config::{ExperimentConfig, FieldSpec, GaugeSpec};
use anyhow::Result;
use gaugebeam::bundle::{
    gauge_transform, random_connection, random_potential, BumpConnection, BumpPotential, ConnectionForm, ExpGauge, Gauge, IdentityGauge, Potential,
    Profile,
};
use gaugebeam::Point;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// How the second field pair relates to the first.
#[derive(Debug, Clone)]
enum Second {
    /// Image of the first pair under a gauge; `None` is the identity.
    Gauge(Option<ExpGauge>),
    Independent(BumpConnection, BumpPotential),
}

/// Generated fields, centred on the unit disk.
#[derive(Debug, Clone)]
pub struct Fields {
    rank: usize,
    a1: BumpConnection,
    v1: BumpPotential,
    second: Second,
}

/// Both field pairs on one domain, plus the gauge relating them when known.
pub struct Pair {
    pub a1: Arc<dyn ConnectionForm>,
    pub v1: Arc<dyn Potential>,
    pub a2: Arc<dyn ConnectionForm>,
    pub v2: Arc<dyn Potential>,
    pub gauge: Option<Arc<dyn Gauge>>,
}

impl Pair {
    pub fn equivalent(&self) -> bool {
        self.gauge.is_some()
    }
}

fn connection(rng: &mut ChaCha8Rng, rank: usize, spec: &FieldSpec) -> BumpConnection {
    match *spec {
        FieldSpec::Zero => BumpConnection::zero(rank),
        FieldSpec::Random { count, strength, spread, time_dependent } => random_connection(rng, rank, count, strength, spread, time_dependent),
    }
}

fn potential(rng: &mut ChaCha8Rng, rank: usize, spec: &FieldSpec) -> BumpPotential {
    match *spec {
        FieldSpec::Zero => BumpPotential::zero(rank),
        FieldSpec::Random { count, strength, spread, time_dependent } => random_potential(rng, rank, count, strength, spread, time_dependent),
    }
}

fn shift_connection(a: &BumpConnection, by: Point) -> BumpConnection {
    let mut a = a.clone();
    a.bumps.iter_mut().for_each(|b| b.center += by);
    a
}

fn shift_potential(v: &BumpPotential, by: Point) -> BumpPotential {
    let mut v = v.clone();
    v.bumps.iter_mut().for_each(|b| b.center += by);
    v
}

/// Horizon over which gauge images are validated.
const GAUGE_HORIZON: f64 = 1.0;

impl Fields {
    /// Draws every field from one generator seeded with the configuration seed,
    /// in the order `A1, V1`, then the gauge or `A2, V2`.
    pub fn generate(cfg: &ExperimentConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let n = cfg.rank;
        let a1 = connection(&mut rng, n, &cfg.fields.a1);
        let v1 = potential(&mut rng, n, &cfg.fields.v1);
        let second = match (&cfg.fields.gauge, &cfg.fields.a2, &cfg.fields.v2) {
            (Some(GaugeSpec::Identity), _, _) | (None, None, None) => Second::Gauge(None),
            (Some(GaugeSpec::Random { count, time_dependent }), _, _) => {
                Second::Gauge(Some(ExpGauge::random(&mut rng, n, *count, Profile::Disk { radius: 1.0 }, *time_dependent)))
            }
            (None, a2, v2) => {
                let a2 = connection(&mut rng, n, a2.as_ref().unwrap_or(&FieldSpec::Zero));
                let v2 = potential(&mut rng, n, v2.as_ref().unwrap_or(&FieldSpec::Zero));
                Second::Independent(a2, v2)
            }
        };
        Self { rank: n, a1, v1, second }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Whether the first connection vanishes identically.
    pub fn trivial_connection(&self) -> bool {
        self.a1.bumps.is_empty()
    }

    /// Fields on the unit disk.
    pub fn disk(&self) -> Result<Pair> {
        self.build(Point::zeros(), Profile::Disk { radius: 1.0 })
    }

    /// The same fields translated into the unit square, with the gauge
    /// profile switched to one vanishing on the square's boundary.
    pub fn square(&self) -> Result<Pair> {
        self.build(Point::new(0.5, 0.5), Profile::Square)
    }

    fn build(&self, shift: Point, profile: Profile) -> Result<Pair> {
        let a1: Arc<dyn ConnectionForm> = Arc::new(shift_connection(&self.a1, shift));
        let v1: Arc<dyn Potential> = Arc::new(shift_potential(&self.v1, shift));
        Ok(match &self.second {
            Second::Gauge(None) => Pair { a2: a1.clone(), v2: v1.clone(), a1, v1, gauge: Some(Arc::new(IdentityGauge { rank: self.rank })) },
            Second::Gauge(Some(g)) => {
                let mut g = g.clone();
                for f in &mut g.factors {
                    f.center += shift;
                    f.profile = profile;
                }
                let g: Arc<dyn Gauge> = Arc::new(g);
                let (a2, v2) = gauge_transform(a1.clone(), v1.clone(), g.clone(), GAUGE_HORIZON)?;
                Pair { a1, v1, a2, v2, gauge: Some(g) }
            }
            Second::Independent(a2, v2) => Pair {
                a1,
                v1,
                a2: Arc::new(shift_connection(a2, shift)),
                v2: Arc::new(shift_potential(v2, shift)),
                gauge: None,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_and_square_fields_are_translated() {
        let cfg = ExperimentConfig::load("gauge-pair").unwrap();
        let f = Fields::generate(&cfg);
        let g = Fields::generate(&cfg);
        let x = Point::new(0.2, -0.1);
        let (d, s) = (f.disk().unwrap(), g.square().unwrap());
        let (cd, cs) = (d.a1.components(0.3, x), s.a1.components(0.3, x + Point::new(0.5, 0.5)));
        assert!(cd.iter().zip(&cs).all(|(p, q)| (p - q).norm() < 1e-12));
        assert!(d.equivalent());
        let id = s.gauge.unwrap().value(0.3, Point::new(0.0, 0.4));
        assert!((id - gaugebeam::linalg::identity(2)).norm() < 1e-12);
    }
}
