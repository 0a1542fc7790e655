//! Closed-form field generators: Gaussian bumps times constant matrices,
//! modulated in time by smooth envelopes.

use super::{ConnectionForm, Gauge, Potential};
use crate::linalg::{expm, identity, random_hermitian, random_skew_hermitian};
use crate::{CMat, Point, C64};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Smooth time modulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Envelope {
    Constant { value: f64 },
    /// `mean + amplitude · sin(frequency · t + phase)`.
    Sine { mean: f64, amplitude: f64, frequency: f64, phase: f64 },
}

impl Envelope {
    pub const ONE: Envelope = Envelope::Constant { value: 1.0 };

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Envelope::Constant { value } => value,
            Envelope::Sine { mean, amplitude, frequency, phase } => mean + amplitude * (frequency * t + phase).sin(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Envelope::Constant { .. } => 0.0,
            Envelope::Sine { amplitude, frequency, phase, .. } => amplitude * frequency * (frequency * t + phase).cos(),
        }
    }

    fn random<R: Rng>(rng: &mut R, time_dependent: bool) -> Self {
        if time_dependent {
            Envelope::Sine {
                mean: 1.0,
                amplitude: rng.gen_range(0.2..0.6),
                frequency: rng.gen_range(1.0..4.0),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            }
        } else {
            Envelope::ONE
        }
    }
}

fn gaussian(center: Point, width: f64, x: Point) -> (f64, Point) {
    let d = x - center;
    let v = (-d.norm_squared() / (width * width)).exp();
    (v, d * (-2.0 * v / (width * width)))
}

/// One Gaussian bump of a connection form: `A_j += e(t) φ(x) K_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionBump {
    pub center: Point,
    pub width: f64,
    pub envelope: Envelope,
    pub generators: [CMat; 2],
}

/// Sum of Gaussian bumps, plus an optional constant part.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpConnection {
    pub rank: usize,
    pub bumps: Vec<ConnectionBump>,
}

impl BumpConnection {
    pub fn zero(rank: usize) -> Self {
        Self { rank, bumps: Vec::new() }
    }
}

impl ConnectionForm for BumpConnection {
    fn rank(&self) -> usize {
        self.rank
    }

    fn components(&self, t: f64, x: Point) -> [CMat; 2] {
        let mut out = [CMat::zeros(self.rank, self.rank), CMat::zeros(self.rank, self.rank)];
        for b in &self.bumps {
            let (phi, _) = gaussian(b.center, b.width, x);
            let s = C64::from(b.envelope.value(t) * phi);
            for j in 0..2 {
                out[j] += &b.generators[j] * s;
            }
        }
        out
    }

    fn spatial_derivatives(&self, t: f64, x: Point) -> [[CMat; 2]; 2] {
        let z = CMat::zeros(self.rank, self.rank);
        let mut out = [[z.clone(), z.clone()], [z.clone(), z]];
        for b in &self.bumps {
            let (_, dphi) = gaussian(b.center, b.width, x);
            let e = b.envelope.value(t);
            for k in 0..2 {
                for j in 0..2 {
                    out[k][j] += &b.generators[j] * C64::from(e * dphi[k]);
                }
            }
        }
        out
    }

    fn time_derivative(&self, t: f64, x: Point) -> [CMat; 2] {
        let mut out = [CMat::zeros(self.rank, self.rank), CMat::zeros(self.rank, self.rank)];
        for b in &self.bumps {
            let (phi, _) = gaussian(b.center, b.width, x);
            let s = C64::from(b.envelope.derivative(t) * phi);
            for j in 0..2 {
                out[j] += &b.generators[j] * s;
            }
        }
        out
    }
}

/// Spatially constant connection `A_j ≡ a_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantConnection {
    pub a: [CMat; 2],
}

impl ConnectionForm for ConstantConnection {
    fn rank(&self) -> usize {
        self.a[0].nrows()
    }
    fn components(&self, _t: f64, _x: Point) -> [CMat; 2] {
        self.a.clone()
    }
    fn spatial_derivatives(&self, _t: f64, _x: Point) -> [[CMat; 2]; 2] {
        let z = CMat::zeros(self.rank(), self.rank());
        [[z.clone(), z.clone()], [z.clone(), z]]
    }
    fn time_derivative(&self, _t: f64, _x: Point) -> [CMat; 2] {
        let z = CMat::zeros(self.rank(), self.rank());
        [z.clone(), z]
    }
}

/// One Gaussian bump of a potential: `V += e(t) φ(x) H`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialBump {
    pub center: Point,
    pub width: f64,
    pub envelope: Envelope,
    pub generator: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BumpPotential {
    pub rank: usize,
    pub bumps: Vec<PotentialBump>,
}

impl BumpPotential {
    pub fn zero(rank: usize) -> Self {
        Self { rank, bumps: Vec::new() }
    }
}

impl Potential for BumpPotential {
    fn rank(&self) -> usize {
        self.rank
    }

    fn value(&self, t: f64, x: Point) -> CMat {
        let mut out = CMat::zeros(self.rank, self.rank);
        for b in &self.bumps {
            let (phi, _) = gaussian(b.center, b.width, x);
            out += &b.generator * C64::from(b.envelope.value(t) * phi);
        }
        out
    }

    fn time_derivative(&self, t: f64, x: Point) -> CMat {
        let mut out = CMat::zeros(self.rank, self.rank);
        for b in &self.bumps {
            let (phi, _) = gaussian(b.center, b.width, x);
            out += &b.generator * C64::from(b.envelope.derivative(t) * phi);
        }
        out
    }
}

/// Boundary profile that makes a gauge exponent vanish on `∂M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// `R² − |x|²` on the disk of radius `R`.
    Disk { radius: f64 },
    /// `16 x(1−x) y(1−y)` on the unit square.
    Square,
}

impl Profile {
    fn value(&self, x: Point) -> (f64, Point) {
        match *self {
            Profile::Disk { radius } => (radius * radius - x.norm_squared(), -x * 2.0),
            Profile::Square => {
                let (a, b) = (x[0] * (1.0 - x[0]), x[1] * (1.0 - x[1]));
                (16.0 * a * b, Point::new(16.0 * (1.0 - 2.0 * x[0]) * b, 16.0 * a * (1.0 - 2.0 * x[1])))
            }
        }
    }
}

/// Factor `exp(φ(t, x) K)` with `φ = amplitude · e(t) · profile(x) · gaussian(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFactor {
    pub generator: CMat,
    pub amplitude: f64,
    pub center: Point,
    pub width: f64,
    pub envelope: Envelope,
    pub profile: Profile,
}

impl GaugeFactor {
    fn phase(&self, t: f64, x: Point) -> (f64, Point, f64) {
        let (p, dp) = self.profile.value(x);
        let (g, dg) = gaussian(self.center, self.width, x);
        let e = self.envelope.value(t);
        let s = self.amplitude;
        (s * e * p * g, (dp * g + dg * p) * (s * e), s * self.envelope.derivative(t) * p * g)
    }
}

/// Ordered product of exponential factors; `G = Id` on the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpGauge {
    pub rank: usize,
    pub factors: Vec<GaugeFactor>,
}

impl ExpGauge {
    /// Random gauge with `count` factors whose generators span the skew-Hermitian matrices.
    pub fn random<R: Rng>(rng: &mut R, rank: usize, count: usize, profile: Profile, time_dependent: bool) -> Self {
        let (lo, hi) = match profile {
            Profile::Disk { radius } => (-0.5 * radius, 0.5 * radius),
            Profile::Square => (0.3, 0.7),
        };
        let factors = (0..count)
            .map(|_| GaugeFactor {
                generator: random_skew_hermitian(rng, rank, 1.0),
                amplitude: rng.gen_range(0.5..1.5),
                center: Point::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi)),
                width: rng.gen_range(0.4..0.8),
                envelope: Envelope::random(rng, time_dependent),
                profile,
            })
            .collect();
        Self { rank, factors }
    }

    fn factor_values(&self, t: f64, x: Point) -> Vec<(CMat, [CMat; 2], CMat)> {
        self.factors
            .iter()
            .map(|f| {
                let (phi, dphi, dtphi) = f.phase(t, x);
                let e = expm(&(&f.generator * C64::from(phi)));
                let ke = &f.generator * &e;
                (e, [&ke * C64::from(dphi[0]), &ke * C64::from(dphi[1])], ke * C64::from(dtphi))
            })
            .collect()
    }

    fn product_rule(&self, vals: &[(CMat, [CMat; 2], CMat)], pick: impl Fn(&(CMat, [CMat; 2], CMat)) -> CMat) -> CMat {
        let mut total = CMat::zeros(self.rank, self.rank);
        for i in 0..vals.len() {
            let mut term = identity(self.rank);
            for (j, v) in vals.iter().enumerate() {
                term = if i == j { term * pick(v) } else { term * &v.0 };
            }
            total += term;
        }
        total
    }
}

impl Gauge for ExpGauge {
    fn rank(&self) -> usize {
        self.rank
    }

    fn value(&self, t: f64, x: Point) -> CMat {
        self.factors.iter().fold(identity(self.rank), |acc, f| {
            let (phi, _, _) = f.phase(t, x);
            acc * expm(&(&f.generator * C64::from(phi)))
        })
    }

    fn spatial_derivatives(&self, t: f64, x: Point) -> [CMat; 2] {
        let vals = self.factor_values(t, x);
        [self.product_rule(&vals, |v| v.1[0].clone()), self.product_rule(&vals, |v| v.1[1].clone())]
    }

    fn time_derivative(&self, t: f64, x: Point) -> CMat {
        let vals = self.factor_values(t, x);
        self.product_rule(&vals, |v| v.2.clone())
    }

    fn jet(&self, t: f64, x: Point) -> (CMat, [CMat; 2]) {
        let vals = self.factor_values(t, x);
        let g = vals.iter().fold(identity(self.rank), |acc, v| acc * &v.0);
        (g, [self.product_rule(&vals, |v| v.1[0].clone()), self.product_rule(&vals, |v| v.1[1].clone())])
    }

    fn identity_on_boundary(&self) -> bool {
        true
    }
}

/// `G ≡ Id`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityGauge {
    pub rank: usize,
}

impl Gauge for IdentityGauge {
    fn rank(&self) -> usize {
        self.rank
    }
    fn value(&self, _t: f64, _x: Point) -> CMat {
        identity(self.rank)
    }
    fn spatial_derivatives(&self, _t: f64, _x: Point) -> [CMat; 2] {
        [CMat::zeros(self.rank, self.rank), CMat::zeros(self.rank, self.rank)]
    }
    fn time_derivative(&self, _t: f64, _x: Point) -> CMat {
        CMat::zeros(self.rank, self.rank)
    }
    fn identity_on_boundary(&self) -> bool {
        true
    }
}

/// Random smooth connection with `count` bumps centred in `|x| ≤ spread`.
pub fn random_connection<R: Rng>(
    rng: &mut R,
    rank: usize,
    count: usize,
    strength: f64,
    spread: f64,
    time_dependent: bool,
) -> BumpConnection {
    let bumps = (0..count)
        .map(|_| {
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let rho = spread * rng.gen_range(0.0f64..1.0).sqrt();
            ConnectionBump {
                center: Point::new(rho * a.cos(), rho * a.sin()),
                width: rng.gen_range(0.3..0.6),
                envelope: Envelope::random(rng, time_dependent),
                generators: [random_skew_hermitian(rng, rank, strength), random_skew_hermitian(rng, rank, strength)],
            }
        })
        .collect();
    BumpConnection { rank, bumps }
}

/// Random smooth Hermitian potential.
pub fn random_potential<R: Rng>(
    rng: &mut R,
    rank: usize,
    count: usize,
    strength: f64,
    spread: f64,
    time_dependent: bool,
) -> BumpPotential {
    let bumps = (0..count)
        .map(|_| {
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            let rho = spread * rng.gen_range(0.0f64..1.0).sqrt();
            PotentialBump {
                center: Point::new(rho * a.cos(), rho * a.sin()),
                width: rng.gen_range(0.3..0.6),
                envelope: Envelope::random(rng, time_dependent),
                generator: random_hermitian(rng, rank, strength),
            }
        })
        .collect();
    BumpPotential { rank, bumps }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::richardson;
    use crate::linalg::{fro, skew_defect, unitarity_defect};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_derivatives_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_connection(&mut rng, 2, 3, 1.0, 0.6, true);
        let (t, x) = (0.37, Point::new(0.2, -0.1));
        let d = a.spatial_derivatives(t, x);
        let e = [Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        for k in 0..2 {
            for j in 0..2 {
                let fd = richardson(|h| a.components(t, x + e[k] * h)[j].clone(), 1e-3);
                assert!(fro(&(&d[k][j] - fd)) < 1e-9);
            }
        }
        let dt = a.time_derivative(t, x);
        let fd = richardson(|h| a.components(t + h, x)[0].clone(), 1e-3);
        assert!(fro(&(&dt[0] - fd)) < 1e-9);
        for c in a.components(t, x) {
            assert!(skew_defect(&c) < 1e-14);
        }
    }

    #[test]
    fn exp_gauge_is_unitary_identity_on_boundary_and_differentiates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = ExpGauge::random(&mut rng, 2, 2, Profile::Disk { radius: 1.0 }, true);
        for k in 0..12 {
            let a = k as f64 * 0.5;
            let b = Point::new(a.cos(), a.sin());
            assert!(fro(&(g.value(0.3, b) - identity(2))) < 1e-12);
        }
        let (t, x) = (0.6, Point::new(-0.3, 0.25));
        assert!(unitarity_defect(&g.value(t, x)) < 1e-13);
        let d = g.spatial_derivatives(t, x);
        let e = [Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        for k in 0..2 {
            let fd = richardson(|h| g.value(t, x + e[k] * h), 1e-3);
            assert!(fro(&(&d[k] - fd)) < 1e-9);
        }
        let fd = richardson(|h| g.value(t + h, x), 1e-3);
        assert!(fro(&(g.time_derivative(t, x) - fd)) < 1e-9);
        let (value, grad) = g.jet(t, x);
        assert!(fro(&(value - g.value(t, x))) < 1e-15);
        assert!((0..2).all(|k| fro(&(&grad[k] - &d[k])) < 1e-15));
        let sq = ExpGauge::random(&mut rng, 3, 2, Profile::Square, false);
        assert!(fro(&(sq.value(0.0, Point::new(0.0, 0.4)) - identity(3))) < 1e-12);
        assert!(fro(&(sq.value(0.0, Point::new(0.7, 1.0)) - identity(3))) < 1e-12);
    }

    #[test]
    fn envelope_serde_round_trip() {
        let e = Envelope::Sine { mean: 1.0, amplitude: 0.5, frequency: 2.0, phase: 0.1 };
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(serde_json::from_str::<Envelope>(&s).unwrap(), e);
    }
}
