//! Gaussian beam quasi-solutions along geodesics.

pub mod amplitude;
pub mod beam;
pub mod phase;
pub mod riccati;
pub mod series;
pub mod spc;

pub use amplitude::{build_amplitude, build_amplitude_with, AmplitudeInit, AmplitudeLevel, AmplitudeOptions, BeamAmplitude, C0Policy, InitialVector};
pub use beam::{assemble_beam, build_beam, cover_intervals, BeamConfig, BeamNorms, BeamPiece, GaussianBeam, ResidualReport, TubeQuadrature, FLAT_TUBE_WIDTH, GLUING_TOLERANCE};
pub use phase::{build_phase, build_phase_with, BeamPhase, PhaseInit, PhaseJet};
pub use riccati::{solve_riccati, RiccatiSolution};
pub use spc::{dominant_pair, spc_limit, spc_limit_check, SpcOptions, SpcRow, SpcTable};
