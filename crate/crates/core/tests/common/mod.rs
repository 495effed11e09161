#![allow(dead_code)]

use std::f64::consts::PI;
use tc_optomech::signal_engine::{synthesize, DriveProgram, NoiseSpec, SignalRecord, SynthesisSettings};
use tc_optomech::timecrystal_model::{Coupling, DriftModel, TimeCrystalParams};

pub const FS: f64 = 48_000.0;
pub const WINDOW: usize = 30_000;
/// Tilt amplitude used to express G = g θ_max².
pub const TILT: f64 = 0.01;

/// Parameters producing modulation `g_mod` (Hz) and asymmetry `theta`.
pub fn params(g_mod: f64, theta: f64, drift: DriftModel) -> TimeCrystalParams {
    TimeCrystalParams {
        coupling: Coupling::from_hz_per_rad2(g_mod / (TILT * TILT)),
        static_tilt: theta * TILT,
        drift,
    }
}

pub fn steady() -> DriftModel {
    DriftModel::constant(2.0 * PI * 833e3)
}

pub struct Scenario {
    pub g_mod: f64,
    pub theta: f64,
    pub f_exc: f64,
    pub drift: DriftModel,
    pub duration: f64,
    pub noise_rms: f64,
    pub seed: u64,
    pub driven: bool,
}

impl Scenario {
    pub fn new(g_mod: f64, theta: f64, f_exc: f64) -> Self {
        Scenario {
            g_mod,
            theta,
            f_exc,
            drift: steady(),
            duration: WINDOW as f64 / FS,
            noise_rms: 0.0,
            seed: 1,
            driven: true,
        }
    }

    pub fn params(&self) -> TimeCrystalParams {
        params(self.g_mod, self.theta, self.drift)
    }

    pub fn drive(&self) -> DriveProgram {
        let tilt = if self.driven { TILT } else { 0.0 };
        DriveProgram::continuous(2.0 * PI * self.f_exc, tilt)
    }

    pub fn record(&self) -> SignalRecord {
        let settings = SynthesisSettings { duration: self.duration, ..Default::default() };
        let noise = NoiseSpec { additive_noise_rms: self.noise_rms, seed: self.seed };
        synthesize(&self.params(), &self.drive(), &noise, &settings).unwrap()
    }

    /// Baseband instantaneous frequency at `t`, Hz.
    pub fn baseband_frequency(&self, rec: &SignalRecord, t: f64) -> f64 {
        let p = self.params();
        let shift = p.drift.offset_at(t) + p.tilt_shift(self.drive().tilt_at(t));
        (rec.lockin_offset - shift) / (2.0 * PI)
    }

    /// Uniform average of the baseband frequency over the window starting
    /// at sample `start`.
    pub fn window_mean(&self, rec: &SignalRecord, start: usize, n: usize) -> f64 {
        (start..start + n).map(|k| self.baseband_frequency(rec, rec.time(k))).sum::<f64>() / n as f64
    }
}
