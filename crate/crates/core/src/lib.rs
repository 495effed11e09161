//! Simulation and analysis of a magnon time crystal whose precession
//! frequency is modulated by the tilt of a sloshing liquid surface.
//!
//! The crate covers the surface gravity-wave mode ([`surface_hydro`]), the
//! tilt-to-frequency law ([`timecrystal_model`]), synthesis of the lock-in
//! signal ([`signal_engine`]), the spectrogram fitting chain
//! ([`spectral_fit`]), resonance sweeps ([`resonance_sweep`]), the heating
//! calibration ([`calibration`]) and free-energy magnitude estimates
//! ([`texture_energy`]).
//!
//! ```
//! use tc_optomech::surface_hydro::{FluidCell, SurfaceMode};
//!
//! let mode = SurfaceMode::solve(&FluidCell::helium3_cell(), 1, 65.0, true).unwrap();
//! assert!((mode.frequency_hz() - 12.4).abs() < 0.1);
//! ```

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calibration;
pub mod error;
pub mod io;
pub mod optimize;
pub mod resonance_sweep;
pub mod signal_engine;
pub mod special;
pub mod spectral_fit;
pub mod surface_hydro;
pub mod texture_energy;
pub mod timecrystal_model;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/surface-modes.md")]
    mod surface_modes {}
    #[doc = include_str!("../../../book/src/frequency-law.md")]
    mod frequency_law {}
    #[doc = include_str!("../../../book/src/synthesis.md")]
    mod synthesis {}
    #[doc = include_str!("../../../book/src/spectral-fitting.md")]
    mod spectral_fitting {}
    #[doc = include_str!("../../../book/src/resonance-sweeps.md")]
    mod resonance_sweeps {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/texture-energy.md")]
    mod texture_energy {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
