pub mod error;
pub mod fiber_modes;
pub mod calibration;
pub mod dipole_emission;
pub mod numerics;
pub mod photon_synth;
pub mod trace_analysis;

pub use error::{Error, Result};
