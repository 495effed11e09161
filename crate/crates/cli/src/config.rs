//! Run configuration: TOML with defaults for every key, unknown keys
//! rejected, and `key.path=value` overrides from the command line.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::Path;

use tc_optomech::calibration::{GeophoneCal, ThermalModel};
use tc_optomech::signal_engine::{DriveProgram, NoiseSpec, SynthesisSettings};
use tc_optomech::spectral_fit::RecordFitOptions;
use tc_optomech::surface_hydro::{FluidCell, SurfaceMode};
use tc_optomech::texture_energy::{field_for_larmor, AuditSettings, TextureCoefficients, TextureInputs};
use tc_optomech::timecrystal_model::{Coupling, DriftModel, TimeCrystalParams};

const DEG: f64 = PI / 180.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: String,
    pub cell: CellConfig,
    pub mode: ModeConfig,
    pub time_crystal: TimeCrystalConfig,
    pub drive: DriveConfig,
    pub synthesis: SynthesisConfig,
    pub noise: NoiseConfig,
    pub analysis: RecordFitOptions,
    pub output: OutputConfig,
    pub sweep: SweepConfig,
    pub calibration: CalibrationConfig,
    pub texture: TextureConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output_dir: "out".into(),
            cell: CellConfig::default(),
            mode: ModeConfig::default(),
            time_crystal: TimeCrystalConfig::default(),
            drive: DriveConfig::default(),
            synthesis: SynthesisConfig::default(),
            noise: NoiseConfig::default(),
            analysis: RecordFitOptions::default(),
            output: OutputConfig::default(),
            sweep: SweepConfig::default(),
            calibration: CalibrationConfig::default(),
            texture: TextureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellConfig {
    /// kg/m³
    pub density: f64,
    /// N/m
    pub surface_tension: f64,
    /// m/s²
    pub gravity: f64,
    /// m
    pub radius: f64,
    /// m
    pub depth: f64,
}

impl Default for CellConfig {
    fn default() -> Self {
        let c = FluidCell::helium3_cell();
        CellConfig { density: c.density, surface_tension: c.surface_tension, gravity: c.gravity, radius: c.radius, depth: c.depth }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModeConfig {
    pub index: usize,
    pub quality_factor: f64,
    pub meniscus: bool,
}

impl Default for ModeConfig {
    fn default() -> Self {
        ModeConfig { index: 1, quality_factor: 65.0, meniscus: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeCrystalConfig {
    /// g, Hz/deg²
    pub coupling: f64,
    /// θ₀, deg
    pub static_tilt: f64,
    /// Asymptotic precession frequency, Hz.
    pub frequency: f64,
    /// Total frequency rise of the decaying condensate, Hz.
    pub drift: f64,
    /// s
    pub relaxation_time: f64,
}

impl Default for TimeCrystalConfig {
    fn default() -> Self {
        TimeCrystalConfig { coupling: 12.0, static_tilt: 0.0, frequency: 833e3, drift: 0.0, relaxation_time: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveConfig {
    /// f_exc, Hz
    pub excitation_frequency: f64,
    /// θ_max, deg
    pub tilt_amplitude: f64,
    /// s; drive is on for `start <= t < stop`
    pub start: Option<f64>,
    pub stop: Option<f64>,
    /// Nominal drive setting recorded by the geophone channel.
    pub nominal_amplitude: f64,
    /// Tilt amplitudes (deg) stepped through by the pipeline ramp stage.
    pub ramp: Vec<f64>,
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig {
            excitation_frequency: 12.5,
            tilt_amplitude: 2.0,
            start: None,
            stop: None,
            nominal_amplitude: 0.098,
            ramp: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    /// s
    pub duration: f64,
    /// Hz
    pub sample_rate: f64,
    /// Lock-in reference above the carrier, Hz.
    pub lockin_offset: f64,
    /// V
    pub amplitude: f64,
    /// s; absent for no decay
    pub amp_decay_time: Option<f64>,
    pub t0: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig { duration: 1.0, sample_rate: 48_000.0, lockin_offset: 3000.0, amplitude: 1.0, amp_decay_time: None, t0: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Per-sample SNR in dB; takes precedence over `rms`.
    pub snr_db: Option<f64>,
    /// V
    pub rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Spectrogram rows written, Hz relative to the lock-in offset.
    pub spectrogram_band: [f64; 2],
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { spectrogram_band: [-600.0, 100.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Hz
    pub start: f64,
    /// Hz
    pub stop: f64,
    pub points: usize,
    /// Tilt amplitude at resonance, deg.
    pub peak_tilt: f64,
    /// Record length per point, s.
    pub duration: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { start: 11.9, stop: 12.9, points: 21, peak_tilt: 2.0, duration: 0.625 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    /// R_T, µK/pW
    pub thermal_resistance: f64,
    pub q_total: f64,
    pub q_thermal: f64,
    /// Geophone law `V = scale·A_nom^exponent + base`.
    pub geophone_scale: f64,
    pub geophone_exponent: f64,
    pub geophone_base: f64,
    /// θ_max² per A_exc, deg²
    pub tilt_slope: f64,
    /// Measured modulation G for the coupling band, Hz.
    pub modulation: Option<f64>,
    /// Bulk temperature rise ΔT̃ for the coupling band, µK.
    pub heating: Option<f64>,
    /// Fitted coupling for the heat-fraction estimate, Hz/deg².
    pub coupling_fit: Option<f64>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            thermal_resistance: 0.75,
            q_total: 65.0,
            q_thermal: 375.0,
            geophone_scale: 1.0,
            geophone_exponent: 1.0,
            geophone_base: 0.0,
            tilt_slope: 2.62,
            modulation: None,
            heating: None,
            coupling_fit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextureConfig {
    /// G; absent means the field of the Larmor frequency
    pub field: Option<f64>,
    /// Larmor frequency, Hz
    pub larmor_frequency: f64,
    /// Leggett frequency, Hz
    pub leggett_frequency: f64,
    /// ξ_H, cm
    pub healing_length: f64,
    pub coefficients: TextureCoefficients,
    pub audit: AuditSettings,
}

impl Default for TextureConfig {
    fn default() -> Self {
        let d = TextureInputs::default();
        TextureConfig {
            field: None,
            larmor_frequency: d.larmor_frequency / (2.0 * PI),
            leggett_frequency: d.leggett_frequency / (2.0 * PI),
            healing_length: d.healing_length,
            coefficients: d.coefficients,
            audit: AuditSettings::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (or defaults), applies `key.path=value` overrides and
    /// the seed, and validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<toml::Table>().map_err(|e| anyhow!(ConfigError(format!("{}: {e}", p.display()))))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        if let Some(s) = seed {
            value.insert("seed".into(), toml::Value::Integer(s as i64));
        }
        let cfg: RunConfig = toml::Value::Table(value)
            .try_into()
            .map_err(|e: toml::de::Error| anyhow!(ConfigError(e.to_string())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.sweep.points < 5 || self.sweep.stop.partial_cmp(&self.sweep.start) != Some(std::cmp::Ordering::Greater) {
            bail!(ConfigError("sweep needs at least 5 points and stop > start".into()));
        }
        if let Some(snr) = self.noise.snr_db {
            if !snr.is_finite() {
                bail!(ConfigError("noise.snr_db must be finite".into()));
            }
        }
        self.fluid_cell().validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn fluid_cell(&self) -> FluidCell {
        let c = &self.cell;
        FluidCell { density: c.density, surface_tension: c.surface_tension, gravity: c.gravity, radius: c.radius, depth: c.depth }
    }

    pub fn surface_mode(&self) -> tc_optomech::Result<SurfaceMode> {
        SurfaceMode::solve(&self.fluid_cell(), self.mode.index, self.mode.quality_factor, self.mode.meniscus)
    }

    pub fn time_crystal(&self) -> TimeCrystalParams {
        let t = &self.time_crystal;
        TimeCrystalParams {
            coupling: Coupling::from_hz_per_deg2(t.coupling),
            static_tilt: t.static_tilt * DEG,
            drift: DriftModel {
                asymptotic_frequency: 2.0 * PI * t.frequency,
                drift_amplitude: 2.0 * PI * t.drift,
                relaxation_time: t.relaxation_time,
            },
        }
    }

    pub fn drive_program(&self, tilt_deg: f64) -> DriveProgram {
        let d = &self.drive;
        DriveProgram {
            excitation_frequency: 2.0 * PI * d.excitation_frequency,
            tilt_amplitude: tilt_deg * DEG,
            start: d.start.unwrap_or(f64::NEG_INFINITY),
            stop: d.stop.unwrap_or(f64::INFINITY),
        }
    }

    pub fn synthesis(&self) -> SynthesisSettings {
        let s = &self.synthesis;
        SynthesisSettings {
            duration: s.duration,
            sample_rate: s.sample_rate,
            lockin_offset: 2.0 * PI * s.lockin_offset,
            amplitude: s.amplitude,
            amp_decay_time: s.amp_decay_time.unwrap_or(f64::INFINITY),
            t0: s.t0,
        }
    }

    pub fn noise(&self) -> NoiseSpec {
        let rms = match self.noise.snr_db {
            Some(db) => tc_optomech::signal_engine::noise_rms_for_snr(self.synthesis.amplitude, db),
            None => self.noise.rms,
        };
        NoiseSpec { additive_noise_rms: rms, seed: self.seed }
    }

    pub fn thermal_model(&self) -> tc_optomech::Result<ThermalModel> {
        let c = &self.calibration;
        let mode = SurfaceMode { quality_factor: c.q_total, ..self.surface_mode()? };
        let m = ThermalModel {
            thermal_resistance: c.thermal_resistance * 1e6,
            q_total: c.q_total,
            q_thermal: c.q_thermal,
            cell: self.fluid_cell(),
            mode,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn geophone(&self) -> GeophoneCal {
        let c = &self.calibration;
        GeophoneCal { scale: c.geophone_scale, exponent: c.geophone_exponent, base: c.geophone_base }
    }

    pub fn texture_inputs(&self) -> TextureInputs {
        let t = &self.texture;
        let larmor = 2.0 * PI * t.larmor_frequency;
        TextureInputs {
            field: t.field.unwrap_or_else(|| field_for_larmor(larmor)),
            larmor_frequency: larmor,
            leggett_frequency: 2.0 * PI * t.leggett_frequency,
            healing_length: t.healing_length,
            coefficients: t.coefficients,
            ..TextureInputs::default()
        }
    }
}

/// Marker for configuration problems (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn apply_override(root: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!(ConfigError(format!("override {spec:?} is not key=value"))))?;
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut table = root;
    for p in &parts[..parts.len() - 1] {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!(ConfigError(format!("override {key:?}: {p:?} is not a section"))))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
