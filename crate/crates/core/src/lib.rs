//! Flux-tunable transmon simulation kernels.
//!
//! Units: every angular quantity inside the library is rad/s, times are seconds,
//! fluxes are in units of the flux quantum. Plain-Hz values only appear in the
//! few constructors that take measured band edges or modulation frequencies,
//! and those fields carry an `_hz` suffix.

pub mod dephasing;
pub mod error;
pub mod modulation;
pub mod noise;
pub mod ode;
pub mod optimize;
pub mod seed;
pub mod specialfn;
pub mod transmon;
pub mod twoqubit;

pub use dephasing::{CoherenceCurve, DecayFit, DecayModel, DephasingRates, McNoise, SweepMode, SweepRow};
pub use error::{Error, Result};
pub use modulation::{FourierSeries, ModulationSpec};
pub use noise::{FilterShape, NoiseKind, NoiseSpec, NoiseTrace, Psd};
pub use specialfn::SeriesTolerance;
pub use transmon::{QubitBand, StaticCoeffs, TransmonParams};
pub use twoqubit::{
    DecoherenceConfig, FidelityRow, GateFrequencies, GateKind, GateResult, HarnessConfig, HarnessRow, ProcessMatrix,
    TwoQubitSystem,
};

/// 2π, the Hz to rad/s factor.
pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Converts a plain frequency in Hz to an angular frequency.
#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    f * TWO_PI
}

/// Converts an angular frequency to Hz.
#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / TWO_PI
}
