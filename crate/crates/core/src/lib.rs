//! Numerical machinery for the dynamic vector-valued Schrödinger inverse problem
//! on a 2-D Riemannian manifold with boundary.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: conformal metrics on the disk, geodesics, inflow sampling, Fermi charts.
//! * [`bundle`]: connection forms, potentials, gauges, parallel transport and scattering data.
//! * [`beams`]: Riccati solver, Eikonal and transport hierarchies, Gaussian beams.
//! * [`raytransform`]: attenuated matrix-weighted ray transforms, inversion, gauge recovery.
//! * [`schrodinger`]: Crank–Nicolson solver for the magnetic Schrödinger IBVP and its
//!   Dirichlet-to-Neumann map.
//! * [`checks`]: the property suite shared by the acceptance tests and the CLI.

pub mod beams;
pub mod bundle;
pub mod checks;
pub mod error;
pub mod geometry;
pub mod interp;
pub mod linalg;
pub mod quadrature;
pub mod raytransform;
pub mod schrodinger;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix (fibre endomorphisms, transport operators).
pub type CMat = nalgebra::DMatrix<C64>;
/// Dense complex vector (fibre elements).
pub type CVec = nalgebra::DVector<C64>;
/// Point or tangent vector in the plane.
pub type Point = nalgebra::Vector2<f64>;

/// Imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);
