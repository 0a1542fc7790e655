use super::{ConnectionForm, Gauge, Potential};
use crate::interp::{smooth_step, smooth_step_deriv};
use crate::linalg::{expm_frechet, hermitian_defect, identity, skew_defect, unitarity_defect};
use crate::{CMat, Error, Point, Result, C64, I};
use std::sync::Arc;

/// `Ã = G⁻¹AG + G⁻¹dG`.
pub struct GaugedConnection {
    pub base: Arc<dyn ConnectionForm>,
    pub gauge: Arc<dyn Gauge>,
}

impl ConnectionForm for GaugedConnection {
    fn rank(&self) -> usize {
        self.base.rank()
    }

    fn components(&self, t: f64, x: Point) -> [CMat; 2] {
        let (g, dg) = self.gauge.jet(t, x);
        let gi = g.adjoint();
        let a = self.base.components(t, x);
        [0, 1].map(|j| &gi * &a[j] * &g + &gi * &dg[j])
    }
}

/// `Ṽ = G⁻¹VG + iG⁻¹∂_tG`.
pub struct GaugedPotential {
    pub base: Arc<dyn Potential>,
    pub gauge: Arc<dyn Gauge>,
}

impl Potential for GaugedPotential {
    fn rank(&self) -> usize {
        self.base.rank()
    }

    fn value(&self, t: f64, x: Point) -> CMat {
        let g = self.gauge.value(t, x);
        let gi = g.adjoint();
        &gi * self.base.value(t, x) * &g + &gi * self.gauge.time_derivative(t, x) * I
    }
}

/// Pointwise product `G·H`.
pub struct ComposedGauge {
    pub first: Arc<dyn Gauge>,
    pub second: Arc<dyn Gauge>,
}

impl Gauge for ComposedGauge {
    fn rank(&self) -> usize {
        self.first.rank()
    }
    fn value(&self, t: f64, x: Point) -> CMat {
        self.first.value(t, x) * self.second.value(t, x)
    }
    fn spatial_derivatives(&self, t: f64, x: Point) -> [CMat; 2] {
        let (g, h) = (self.first.value(t, x), self.second.value(t, x));
        let (dg, dh) = (self.first.spatial_derivatives(t, x), self.second.spatial_derivatives(t, x));
        [0, 1].map(|k| &dg[k] * &h + &g * &dh[k])
    }
    fn time_derivative(&self, t: f64, x: Point) -> CMat {
        let (g, h) = (self.first.value(t, x), self.second.value(t, x));
        self.first.time_derivative(t, x) * &h + g * self.second.time_derivative(t, x)
    }
    fn identity_on_boundary(&self) -> bool {
        self.first.identity_on_boundary() && self.second.identity_on_boundary()
    }
}

fn check_points() -> Vec<Point> {
    let mut pts = vec![Point::zeros()];
    for i in 1..=4 {
        for j in 0..8 {
            let rho = 0.98 * i as f64 / 4.0;
            let a = std::f64::consts::TAU * (j as f64 + 0.5 * i as f64) / 8.0;
            pts.push(Point::new(rho * a.cos(), rho * a.sin()));
        }
    }
    pts
}

/// Gauge action on a connection/potential pair; unitarity of `G` and the
/// skew/Hermitian structure of the result are checked on a sample of points.
pub fn gauge_transform(
    a: Arc<dyn ConnectionForm>,
    v: Arc<dyn Potential>,
    g: Arc<dyn Gauge>,
    horizon: f64,
) -> Result<(Arc<GaugedConnection>, Arc<GaugedPotential>)> {
    if a.rank() != g.rank() || v.rank() != g.rank() {
        return Err(Error::Invalid("rank mismatch between fields and gauge".into()));
    }
    let at = Arc::new(GaugedConnection { base: a, gauge: g.clone() });
    let vt = Arc::new(GaugedPotential { base: v, gauge: g.clone() });
    for &t in &[0.0, 0.5 * horizon, horizon] {
        for x in check_points() {
            let d = unitarity_defect(&g.value(t, x));
            if d > 1e-10 {
                return Err(Error::InvariantViolation(format!("gauge is not unitary (defect {d:.2e})")));
            }
            for c in at.components(t, x) {
                let s = skew_defect(&c);
                if s > 1e-10 {
                    return Err(Error::InvariantViolation(format!("transformed connection not skew-Hermitian ({s:.2e})")));
                }
            }
            let h = hermitian_defect(&vt.value(t, x));
            if h > 1e-10 {
                return Err(Error::InvariantViolation(format!("transformed potential not Hermitian ({h:.2e})")));
            }
        }
    }
    Ok((at, vt))
}

/// Gauge `G = exp(−ρ μ(ρ) A(∂_ρ))` in the radial collar `ρ = R − |x| < ε`,
/// where `∂_ρ = −x/|x|` and `μ` is a smooth cutoff equal to 1 for `ρ ≤ ε/3`
/// and 0 for `ρ ≥ 2ε/3`.
pub struct CollarGauge {
    pub connection: Arc<dyn ConnectionForm>,
    pub radius: f64,
    pub collar: f64,
}

impl CollarGauge {
    fn mu(&self, rho: f64) -> (f64, f64) {
        let e = self.collar;
        let u = 3.0 * rho / e - 1.0;
        (1.0 - smooth_step(u), -smooth_step_deriv(u) * 3.0 / e)
    }

    /// Exponent `X = ρ μ(ρ) B` with `B = Σ_j A_j x̂_j`, and its space and time derivatives.
    fn exponent(&self, t: f64, x: Point) -> Option<(CMat, [CMat; 2], CMat)> {
        let r = x.norm();
        let rho = self.radius - r;
        if rho >= self.collar {
            return None;
        }
        let (mu, dmu) = self.mu(rho);
        if mu == 0.0 && dmu == 0.0 {
            return None;
        }
        let xh = x / r;
        let a = self.connection.components(t, x);
        let da = self.connection.spatial_derivatives(t, x);
        let at = self.connection.time_derivative(t, x);
        let b = &a[0] * C64::from(xh[0]) + &a[1] * C64::from(xh[1]);
        let f = rho * mu;
        let df = mu + rho * dmu;
        let dx: [CMat; 2] = [0, 1].map(|k| {
            let mut db = CMat::zeros(b.nrows(), b.ncols());
            for j in 0..2 {
                let dxh = ((if j == k { 1.0 } else { 0.0 }) - xh[j] * xh[k]) / r;
                db += &da[k][j] * C64::from(xh[j]) + &a[j] * C64::from(dxh);
            }
            &b * C64::from(-xh[k] * df) + db * C64::from(f)
        });
        let dt = (&at[0] * C64::from(xh[0]) + &at[1] * C64::from(xh[1])) * C64::from(f);
        Some((b * C64::from(f), dx, dt))
    }
}

impl Gauge for CollarGauge {
    fn rank(&self) -> usize {
        self.connection.rank()
    }

    fn value(&self, t: f64, x: Point) -> CMat {
        match self.exponent(t, x) {
            Some((e, _, _)) => crate::linalg::expm(&e),
            None => identity(self.rank()),
        }
    }

    fn spatial_derivatives(&self, t: f64, x: Point) -> [CMat; 2] {
        match self.exponent(t, x) {
            Some((e, d, _)) => d.map(|dk| expm_frechet(&e, &dk).1),
            None => [CMat::zeros(self.rank(), self.rank()), CMat::zeros(self.rank(), self.rank())],
        }
    }

    fn time_derivative(&self, t: f64, x: Point) -> CMat {
        match self.exponent(t, x) {
            Some((e, _, dt)) => expm_frechet(&e, &dt).1,
            None => CMat::zeros(self.rank(), self.rank()),
        }
    }

    fn identity_on_boundary(&self) -> bool {
        true
    }
}

/// Boundary-normal gauge fix: returns `G` and `Ã = G⁻¹AG + G⁻¹dG` with
/// `Ã(ν) = 0` on the circle `|x| = radius`.
pub fn normal_gauge_fix(
    a: Arc<dyn ConnectionForm>,
    radius: f64,
    collar: f64,
) -> Result<(Arc<CollarGauge>, Arc<GaugedConnection>)> {
    if !(collar > 0.0) || collar >= 0.5 * radius {
        return Err(Error::Collar(format!("collar half-width {collar} must lie in (0, R/2) for R = {radius}")));
    }
    let g = Arc::new(CollarGauge { connection: a.clone(), radius, collar });
    let at = Arc::new(GaugedConnection { base: a, gauge: g.clone() });
    Ok((g, at))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{random_connection, random_potential, BumpConnection, ExpGauge, IdentityGauge, Profile};
    use crate::linalg::fro;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair(seed: u64) -> (Arc<dyn ConnectionForm>, Arc<dyn Potential>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (Arc::new(random_connection(&mut rng, 2, 2, 1.0, 0.5, true)), Arc::new(random_potential(&mut rng, 2, 2, 1.0, 0.5, true)))
    }

    #[test]
    fn identity_gauge_leaves_fields_unchanged() {
        let (a, v) = pair(1);
        let (at, vt) = gauge_transform(a.clone(), v.clone(), Arc::new(IdentityGauge { rank: 2 }), 1.0).unwrap();
        let x = Point::new(0.1, 0.4);
        for j in 0..2 {
            assert!(fro(&(&at.components(0.3, x)[j] - &a.components(0.3, x)[j])) < 1e-15);
        }
        assert!(fro(&(vt.value(0.3, x) - v.value(0.3, x))) < 1e-15);
    }

    #[test]
    fn gauge_action_composes() {
        let (a, v) = pair(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g: Arc<dyn Gauge> = Arc::new(ExpGauge::random(&mut rng, 2, 2, Profile::Disk { radius: 1.0 }, true));
        let h: Arc<dyn Gauge> = Arc::new(ExpGauge::random(&mut rng, 2, 2, Profile::Disk { radius: 1.0 }, true));
        let (ag, vg) = gauge_transform(a.clone(), v.clone(), g.clone(), 1.0).unwrap();
        let (agh, vgh) = gauge_transform(ag, vg, h.clone(), 1.0).unwrap();
        let gh: Arc<dyn Gauge> = Arc::new(ComposedGauge { first: g, second: h });
        let (ac, vc) = gauge_transform(a, v, gh, 1.0).unwrap();
        for x in check_points() {
            for &t in &[0.1, 0.8] {
                for j in 0..2 {
                    assert!(fro(&(&agh.components(t, x)[j] - &ac.components(t, x)[j])) < 1e-10);
                }
                assert!(fro(&(vgh.value(t, x) - vc.value(t, x))) < 1e-10);
            }
        }
    }

    struct Scaled(Arc<dyn Gauge>, f64);
    impl Gauge for Scaled {
        fn rank(&self) -> usize {
            self.0.rank()
        }
        fn value(&self, t: f64, x: Point) -> CMat {
            self.0.value(t, x) * C64::from(self.1)
        }
        fn identity_on_boundary(&self) -> bool {
            false
        }
    }

    #[test]
    fn non_unitary_gauge_is_rejected() {
        let (a, v) = pair(4);
        let g = Arc::new(Scaled(Arc::new(IdentityGauge { rank: 2 }), 1.01));
        assert!(matches!(gauge_transform(a, v, g, 1.0), Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn normal_gauge_kills_normal_component_on_boundary() {
        let (a, _) = pair(6);
        let (g, at) = normal_gauge_fix(a.clone(), 1.0, 0.2).unwrap();
        for k in 0..64 {
            let phi = std::f64::consts::TAU * k as f64 / 64.0;
            let x = Point::new(phi.cos(), phi.sin());
            for &t in &[0.0, 0.4, 1.0] {
                assert!(fro(&at.along(t, x, x)) <= 1e-9);
                assert!(fro(&(g.value(t, x) - identity(2))) <= 1e-12);
            }
        }
        for x in check_points() {
            assert!(unitarity_defect(&g.value(0.5, x)) <= 1e-12);
            if x.norm() < 0.8 {
                assert_eq!(g.value(0.5, x), identity(2));
            }
        }
        // Closed-form derivatives of the collar gauge against differences.
        let x = Point::new(0.61, -0.62);
        let d = g.spatial_derivatives(0.3, x);
        let e = [Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        for k in 0..2 {
            let fd = crate::bundle::richardson(|h| g.value(0.3, x + e[k] * h), 1e-4);
            assert!(fro(&(&d[k] - fd)) < 1e-8);
        }
        let fd = crate::bundle::richardson(|h| g.value(0.3 + h, x), 1e-4);
        assert!(fro(&(g.time_derivative(0.3, x) - fd)) < 1e-8);
    }

    #[test]
    fn normal_gauge_of_tangential_connection_is_quadratic() {
        // A = f(x)(−x₂, x₁) K has A(ν) = 0 on every circle.
        struct Tangential;
        impl ConnectionForm for Tangential {
            fn rank(&self) -> usize {
                2
            }
            fn components(&self, _t: f64, x: Point) -> [CMat; 2] {
                let k = CMat::from_row_slice(2, 2, &[C64::new(0.0, 1.0), C64::from(0.0), C64::from(0.0), C64::new(0.0, -1.0)]);
                [&k * C64::from(-x[1]), &k * C64::from(x[0])]
            }
        }
        let (g, at) = normal_gauge_fix(Arc::new(Tangential), 1.0, 0.2).unwrap();
        let x = Point::new(0.95, 0.0);
        assert!(fro(&(g.value(0.0, x) - identity(2))) < 1e-15);
        assert!(fro(&at.along(0.0, Point::new(1.0, 0.0), Point::new(1.0, 0.0))) < 1e-15);
        let _ = BumpConnection::zero(2);
    }

    #[test]
    fn collar_must_fit() {
        let (a, _) = pair(7);
        assert!(matches!(normal_gauge_fix(a.clone(), 1.0, 0.6), Err(Error::Collar(_))));
        assert!(matches!(normal_gauge_fix(a, 1.0, 0.0), Err(Error::Collar(_))));
    }

    #[test]
    fn transformed_fields_keep_structure() {
        let (a, v) = pair(8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Arc::new(ExpGauge::random(&mut rng, 2, 3, Profile::Disk { radius: 1.0 }, true));
        let (at, vt) = gauge_transform(a, v, g, 1.0).unwrap();
        for x in check_points() {
            for c in at.components(0.2, x) {
                assert!(skew_defect(&c) < 1e-10);
            }
            assert!(hermitian_defect(&vt.value(0.2, x)) < 1e-10);
        }
    }
}
