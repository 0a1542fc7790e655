//! Connection forms, potentials and gauges on the trivial bundle `M × C^n`;
//! parallel transport, scattering data and the boundary-normal gauge fix.

mod fields;
mod gauge;
mod transport;

pub use fields::{
    random_connection, random_potential, BumpConnection, BumpPotential, ConnectionBump, ConstantConnection, Envelope,
    ExpGauge, GaugeFactor, IdentityGauge, PotentialBump, Profile,
};
pub use gauge::{gauge_transform, normal_gauge_fix, CollarGauge, ComposedGauge, GaugedConnection, GaugedPotential};
pub use transport::{
    scattering, scattering_identity_gap, scattering_on_paths, transport, transport_between, transport_grid, IdentityCheck, ScatteringData, ScatteringSample,
    TransportOptions, TransportSolution,
};

use crate::{CMat, Point, C64};

const FD_STEP: f64 = 1e-3;

/// Richardson-extrapolated central difference of a matrix-valued function of one variable.
pub(crate) fn richardson<F: Fn(f64) -> CMat>(f: F, h: f64) -> CMat {
    let d = |h: f64| (f(h) - f(-h)) * C64::from(0.5 / h);
    (d(h / 2.0) * C64::from(4.0) - d(h)) * C64::from(1.0 / 3.0)
}

/// Skew-Hermitian matrix-valued one-form `A = A_1 dx¹ + A_2 dx²`, time dependent.
pub trait ConnectionForm: Send + Sync {
    fn rank(&self) -> usize;

    /// `[A_1(t, x), A_2(t, x)]`.
    fn components(&self, t: f64, x: Point) -> [CMat; 2];

    /// `d[k][j] = ∂_k A_j`; central differences unless overridden.
    fn spatial_derivatives(&self, t: f64, x: Point) -> [[CMat; 2]; 2] {
        let e = [Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let mut out: [[CMat; 2]; 2] = Default::default();
        for k in 0..2 {
            for j in 0..2 {
                out[k][j] = richardson(|h| self.components(t, x + e[k] * h)[j].clone(), FD_STEP);
            }
        }
        out
    }

    /// `∂_t A_j`; central differences unless overridden.
    fn time_derivative(&self, t: f64, x: Point) -> [CMat; 2] {
        [0, 1].map(|j| richardson(|h| self.components(t + h, x)[j].clone(), FD_STEP))
    }

    /// `A(v) = A_j v^j`.
    fn along(&self, t: f64, x: Point, v: Point) -> CMat {
        let [a1, a2] = self.components(t, x);
        a1 * C64::from(v[0]) + a2 * C64::from(v[1])
    }
}

/// Hermitian matrix field `V(t, x)`.
pub trait Potential: Send + Sync {
    fn rank(&self) -> usize;

    fn value(&self, t: f64, x: Point) -> CMat;

    fn time_derivative(&self, t: f64, x: Point) -> CMat {
        richardson(|h| self.value(t + h, x), FD_STEP)
    }
}

/// Unitary matrix field `G(t, x)`.
pub trait Gauge: Send + Sync {
    fn rank(&self) -> usize;

    fn value(&self, t: f64, x: Point) -> CMat;

    /// `[∂_1 G, ∂_2 G]`.
    fn spatial_derivatives(&self, t: f64, x: Point) -> [CMat; 2] {
        let e = [Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        [0, 1].map(|k| richardson(|h| self.value(t, x + e[k] * h), FD_STEP))
    }

    fn time_derivative(&self, t: f64, x: Point) -> CMat {
        richardson(|h| self.value(t + h, x), FD_STEP)
    }

    /// `G` together with `[∂_1 G, ∂_2 G]`.
    fn jet(&self, t: f64, x: Point) -> (CMat, [CMat; 2]) {
        (self.value(t, x), self.spatial_derivatives(t, x))
    }

    /// Whether `G = Id` on the boundary by construction.
    fn identity_on_boundary(&self) -> bool;
}

impl<T: ConnectionForm + ?Sized> ConnectionForm for std::sync::Arc<T> {
    fn rank(&self) -> usize {
        (**self).rank()
    }
    fn components(&self, t: f64, x: Point) -> [CMat; 2] {
        (**self).components(t, x)
    }
    fn spatial_derivatives(&self, t: f64, x: Point) -> [[CMat; 2]; 2] {
        (**self).spatial_derivatives(t, x)
    }
    fn time_derivative(&self, t: f64, x: Point) -> [CMat; 2] {
        (**self).time_derivative(t, x)
    }
}

impl<T: Potential + ?Sized> Potential for std::sync::Arc<T> {
    fn rank(&self) -> usize {
        (**self).rank()
    }
    fn value(&self, t: f64, x: Point) -> CMat {
        (**self).value(t, x)
    }
    fn time_derivative(&self, t: f64, x: Point) -> CMat {
        (**self).time_derivative(t, x)
    }
}

impl<T: Gauge + ?Sized> Gauge for std::sync::Arc<T> {
    fn rank(&self) -> usize {
        (**self).rank()
    }
    fn value(&self, t: f64, x: Point) -> CMat {
        (**self).value(t, x)
    }
    fn spatial_derivatives(&self, t: f64, x: Point) -> [CMat; 2] {
        (**self).spatial_derivatives(t, x)
    }
    fn time_derivative(&self, t: f64, x: Point) -> CMat {
        (**self).time_derivative(t, x)
    }
    fn jet(&self, t: f64, x: Point) -> (CMat, [CMat; 2]) {
        (**self).jet(t, x)
    }
    fn identity_on_boundary(&self) -> bool {
        (**self).identity_on_boundary()
    }
}
