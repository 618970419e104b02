//! Pseudo-spectral laboratory for probing vorticity blow-up criteria of the
//! three-dimensional incompressible Euler equations on a periodic box.
//!
//! The field solver and the probe machinery are generic over the scalar
//! type; the aliases below fix it to `f64` or `f32`.

// Negated comparisons reject NaN along with out-of-range values; index loops
// mirror tensor notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
pub mod aligned;
pub mod eigen;
pub mod error;
pub mod flow;
pub mod functionals;
pub mod probes;
pub mod runner;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};

pub type Grid64 = spectral::Grid<f64>;
pub type Grid32 = spectral::Grid<f32>;
pub type SpectralField64 = spectral::SpectralField<f64>;
pub type SpectralField32 = spectral::SpectralField<f32>;
pub type FlowState64 = flow::FlowState<f64>;
pub type FlowState32 = flow::FlowState<f32>;
pub type ProbeTrajectory64 = probes::ProbeTrajectory<f64>;
pub type ProbeTrajectory32 = probes::ProbeTrajectory<f32>;
pub type EigenFrame64 = eigen::EigenFrame<f64>;
pub type Sym3x64 = eigen::Sym3<f64>;
