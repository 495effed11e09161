//! Synthetic pick-up coil record after lock-in downconversion.
//!
//! The coil voltage `A(t) sin Φ(t)` with `Φ = ∫ ω_TC dt` is mixed with a
//! reference `ω_ref = ω∞ + offset` sitting above the carrier. After ideal
//! low-pass filtering the complex baseband is
//!
//! ```text
//! z(t) = (A(t)/2) exp(i (offset·t − ∫ (ω_TC − ω∞) dt))
//! ```
//!
//! up to a constant phase, so the carrier sits at `+offset` and an increase
//! of the precession frequency moves the line down in baseband.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::calibration::GeophoneCal;
use crate::error::{Error, Result};
use crate::timecrystal_model::TimeCrystalParams;

/// Complex lock-in output.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    pub samples: Vec<Complex64>,
    /// Hz
    pub sample_rate: f64,
    /// Lock-in reference minus nominal carrier, rad·s⁻¹.
    pub lockin_offset: f64,
    /// Time of the first sample, s.
    pub t0: f64,
}

impl SignalRecord {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.t0 + index as f64 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Baseband position of the undisturbed carrier, Hz.
    pub fn offset_hz(&self) -> f64 {
        self.lockin_offset / (2.0 * PI)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::Input(format!("sample rate must be positive, got {}", self.sample_rate)));
        }
        if let Some(i) = self.samples.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Input(format!("sample {i} is not finite")));
        }
        Ok(())
    }

    /// Multiply every sample by `c`.
    pub fn scaled(&self, c: f64) -> SignalRecord {
        SignalRecord { samples: self.samples.iter().map(|z| z * c).collect(), ..self.clone() }
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Mechanical forcing: `θ(t) = θ_max sin(ω_exc t)` for `start ≤ t < stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveProgram {
    /// ω_exc, rad·s⁻¹
    pub excitation_frequency: f64,
    /// θ_max, rad
    pub tilt_amplitude: f64,
    pub start: f64,
    pub stop: f64,
}

impl DriveProgram {
    pub fn off() -> Self {
        DriveProgram { excitation_frequency: 2.0 * PI * 12.5, tilt_amplitude: 0.0, start: 0.0, stop: 0.0 }
    }

    pub fn continuous(excitation_frequency: f64, tilt_amplitude: f64) -> Self {
        DriveProgram { excitation_frequency, tilt_amplitude, start: f64::NEG_INFINITY, stop: f64::INFINITY }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.excitation_frequency > 0.0) || !(self.tilt_amplitude >= 0.0) {
            return Err(Error::Config(format!("invalid drive program {self:?}")));
        }
        Ok(())
    }

    pub fn tilt_at(&self, t: f64) -> f64 {
        if t >= self.start && t < self.stop {
            self.tilt_amplitude * (self.excitation_frequency * t).sin()
        } else {
            0.0
        }
    }
}

/// White complex Gaussian noise with `E|n|² = additive_noise_rms²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// V
    pub additive_noise_rms: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec { additive_noise_rms: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSettings {
    /// s
    pub duration: f64,
    /// Hz
    pub sample_rate: f64,
    /// rad·s⁻¹
    pub lockin_offset: f64,
    /// Coil voltage amplitude A at t = 0, V.
    pub amplitude: f64,
    /// Exponential amplitude decay time, s; infinite for none.
    pub amp_decay_time: f64,
    pub t0: f64,
}

impl Default for SynthesisSettings {
    fn default() -> Self {
        SynthesisSettings {
            duration: 2.0,
            sample_rate: 48_000.0,
            lockin_offset: 2.0 * PI * 3000.0,
            amplitude: 1.0,
            amp_decay_time: f64::INFINITY,
            t0: 0.0,
        }
    }
}

/// Cumulative trapezoid `∫ rate dt` on a uniform grid, starting at zero.
pub fn cumulative_phase(rates: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(rates.len());
    let mut acc = 0.0;
    let mut prev = match rates.first() {
        Some(&r) => r,
        None => return out,
    };
    out.push(0.0);
    for &r in &rates[1..] {
        acc += 0.5 * (prev + r) * dt;
        out.push(acc);
        prev = r;
    }
    out
}

/// Largest baseband frequency magnitude the record can contain, Hz.
fn max_baseband_frequency(p: &TimeCrystalParams, drive: &DriveProgram, offset: f64) -> f64 {
    let tilt = drive.tilt_amplitude + p.static_tilt.abs();
    let shift = p.coupling.hz_per_rad2().abs() * tilt * tilt + p.drift.drift_amplitude / (2.0 * PI);
    offset.abs() / (2.0 * PI) + shift
}

pub fn synthesize(
    p: &TimeCrystalParams,
    drive: &DriveProgram,
    noise: &NoiseSpec,
    settings: &SynthesisSettings,
) -> Result<SignalRecord> {
    p.validate().map_err(|e| Error::Config(e.to_string()))?;
    drive.validate()?;
    let s = settings;
    if !(s.duration > 0.0) || !(s.sample_rate > 0.0) || !(s.amp_decay_time > 0.0) {
        return Err(Error::Config(format!("invalid synthesis settings {s:?}")));
    }
    if !(noise.additive_noise_rms >= 0.0) {
        return Err(Error::Config("noise rms must be non-negative".into()));
    }
    let f_max = max_baseband_frequency(p, drive, s.lockin_offset);
    if s.sample_rate < 4.0 * f_max {
        return Err(Error::Config(format!(
            "sample rate {} Hz is below 4x the highest baseband frequency {f_max:.1} Hz",
            s.sample_rate
        )));
    }

    let n = (s.duration * s.sample_rate).round() as usize;
    let dt = 1.0 / s.sample_rate;
    let times: Vec<f64> = (0..n).map(|k| s.t0 + k as f64 * dt).collect();
    let shift: Vec<f64> = times
        .iter()
        .map(|&t| p.drift.offset_at(t) + p.tilt_shift(drive.tilt_at(t)))
        .collect();
    let phi = cumulative_phase(&shift, dt);

    let mut samples: Vec<Complex64> = times
        .iter()
        .zip(&phi)
        .map(|(&t, &phi)| {
            let amp = 0.5 * s.amplitude * (-(t - s.t0) / s.amp_decay_time).exp();
            Complex64::from_polar(amp, s.lockin_offset * t - phi)
        })
        .collect();

    if noise.additive_noise_rms > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let normal = Normal::new(0.0, noise.additive_noise_rms / 2f64.sqrt())
            .map_err(|e| Error::Config(e.to_string()))?;
        for z in samples.iter_mut() {
            *z += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    Ok(SignalRecord { samples, sample_rate: s.sample_rate, lockin_offset: s.lockin_offset, t0: s.t0 })
}

/// Noise rms giving the requested per-sample SNR (dB) for coil amplitude `amplitude`.
pub fn noise_rms_for_snr(amplitude: f64, snr_db: f64) -> f64 {
    0.5 * amplitude / 10f64.powf(snr_db / 20.0)
}

/// Geophone channel: `√2·C·A_nom^ν·sin(ω_exc t) + B`.
///
/// The rms of the oscillating part plus the base level is the measured
/// geophone voltage `V_gp = C A_nom^ν + B`; at zero drive only `B` remains.
pub fn geophone_trace(a_nom: f64, cal: &GeophoneCal, omega_exc: f64, duration: f64, sample_rate: f64) -> Result<Vec<f64>> {
    if !(a_nom >= 0.0) {
        return Err(Error::Domain(format!("nominal drive amplitude must be non-negative, got {a_nom}")));
    }
    let ac = cal.scale * a_nom.powf(cal.exponent);
    let n = (duration * sample_rate).round() as usize;
    Ok((0..n)
        .map(|k| {
            let t = k as f64 / sample_rate;
            2f64.sqrt() * ac * (omega_exc * t).sin() + cal.base
        })
        .collect())
}

/// `V_gp` read back from a geophone trace: mean level plus ac rms.
pub fn measure_geophone(trace: &[f64]) -> f64 {
    let n = trace.len() as f64;
    let mean = trace.iter().sum::<f64>() / n;
    let var = trace.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    mean + var.sqrt()
}

/// Drive frequency (Hz) from the FFT peak of a geophone trace, refined by
/// parabolic interpolation of the log magnitude with a Hann window.
pub fn excitation_frequency_from_geophone(trace: &[f64], sample_rate: f64) -> Result<f64> {
    let n = trace.len();
    if n < 16 {
        return Err(Error::Input("geophone trace too short".into()));
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = trace
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = (PI * k as f64 / n as f64).sin().powi(2);
            Complex64::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mags: Vec<f64> = buf[..n / 2].iter().map(|z| z.norm()).collect();
    let (k, &peak) = mags
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Input("empty spectrum".into()))?;
    if peak == 0.0 {
        return Err(Error::Input("geophone trace has no oscillating component".into()));
    }
    let delta = if k + 1 < mags.len() {
        parabolic_offset(mags[k - 1], mags[k], mags[k + 1])
    } else {
        0.0
    };
    Ok((k as f64 + delta) * sample_rate / n as f64)
}

/// Vertex offset (in bins, within ±0.5) of a parabola through three log magnitudes.
pub(crate) fn parabolic_offset(left: f64, centre: f64, right: f64) -> f64 {
    let (l, c, r) = (left.max(1e-300).ln(), centre.max(1e-300).ln(), right.max(1e-300).ln());
    let den = l - 2.0 * c + r;
    if den >= 0.0 {
        0.0
    } else {
        (0.5 * (l - r) / den).clamp(-0.5, 0.5)
    }
}
