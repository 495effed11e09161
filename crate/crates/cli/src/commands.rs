use anyhow::{anyhow, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use tc_optomech::calibration::{
    coupling_band, fit_geophone, fit_tilt_calibration, power_per_tilt_squared, surface_heat_fraction, CalibrationBundle,
    GeophonePoint, TiltCalibration,
};
use tc_optomech::io;
use tc_optomech::resonance_sweep::{fit_resonance, run_sweep, SweepPlan};
use tc_optomech::signal_engine::{synthesize, DriveProgram, SignalRecord, SynthesisSettings};
use tc_optomech::spectral_fit::{fit_record, spectrogram, SpectrogramOptions, WindowFit, WindowFunction};
use tc_optomech::special::J0_FIRST_ZERO;
use tc_optomech::texture_energy::audit;
use tc_optomech::timecrystal_model::TimeCrystalParams;
use tc_optomech::Error;

use crate::config::RunConfig;
use crate::output::Outputs;

const DEG: f64 = PI / 180.0;

#[derive(Debug, Serialize)]
pub struct ModeReport {
    pub mode_index: usize,
    pub meniscus: bool,
    /// m⁻¹
    pub wavenumber: f64,
    pub k_radius: f64,
    pub angular_frequency: f64,
    pub frequency_hz: f64,
    pub quality_factor: f64,
    pub damping_rate: f64,
    pub deep_water: bool,
}

pub fn mode(cfg: &RunConfig, out: &mut Outputs) -> Result<ModeReport> {
    let m = cfg.surface_mode()?;
    let report = ModeReport {
        mode_index: m.mode_index,
        meniscus: cfg.mode.meniscus,
        wavenumber: m.wavenumber,
        k_radius: m.wavenumber * m.radius,
        angular_frequency: m.angular_frequency,
        frequency_hz: m.frequency_hz(),
        quality_factor: m.quality_factor,
        damping_rate: m.damping_rate(),
        deep_water: cfg.fluid_cell().deep_water_valid(),
    };
    out.json("mode.json", &report)?;
    println!("mode {}: f = {:.4} Hz, kR = {:.6}", report.mode_index, report.frequency_hz, report.k_radius);
    Ok(report)
}

fn synth_with(cfg: &RunConfig, params: &TimeCrystalParams, drive: &DriveProgram, settings: &SynthesisSettings) -> Result<SignalRecord> {
    Ok(synthesize(params, drive, &cfg.noise(), settings)?)
}

pub fn synth(cfg: &RunConfig, out: &mut Outputs) -> Result<SignalRecord> {
    let drive = cfg.drive_program(cfg.drive.tilt_amplitude);
    let rec = synth_with(cfg, &cfg.time_crystal(), &drive, &cfg.synthesis())?;
    out.stream("record.csv", |w, h| io::write_record(w, &rec, Some(h)))?;
    let g = cfg.time_crystal.coupling * cfg.drive.tilt_amplitude.powi(2);
    out.json(
        "synth.json",
        &json!({
            "samples": rec.len(),
            "duration": rec.duration(),
            "expected_modulation": g,
            "noise_rms": cfg.noise().additive_noise_rms,
        }),
    )?;
    println!("synthesized {} samples ({:.3} s), expected G = {:.4} Hz", rec.len(), rec.duration(), g);
    Ok(rec)
}

fn read_record_file(path: &Path) -> Result<SignalRecord> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(io::read_record(BufReader::new(f))?)
}

#[derive(Debug, Serialize)]
pub struct AnalysisSummary {
    pub frames: usize,
    pub converged_frames: usize,
    pub theta_identifiable_frames: usize,
    /// Hz
    pub modulation_mean: f64,
    pub modulation_sd: f64,
    pub asymmetry_mean: f64,
    pub mean_frequency: f64,
    /// G/θ_max², Hz·deg⁻², when the drive tilt is non-zero.
    pub coupling: Option<f64>,
}

fn mean_sd(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = v.collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 { (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (m, sd)
}

fn summarize(fits: &[WindowFit], tilt_deg: f64) -> AnalysisSummary {
    let (g, g_sd) = mean_sd(fits.iter().map(|f| f.modulation));
    let (theta, _) = mean_sd(fits.iter().map(|f| f.asymmetry));
    let (nu, _) = mean_sd(fits.iter().map(|f| f.mean_frequency));
    AnalysisSummary {
        frames: fits.len(),
        converged_frames: fits.iter().filter(|f| f.converged).count(),
        theta_identifiable_frames: fits.iter().filter(|f| f.theta_identifiable).count(),
        modulation_mean: g,
        modulation_sd: g_sd,
        asymmetry_mean: theta,
        mean_frequency: nu,
        coupling: (tilt_deg > 0.0).then(|| g / (tilt_deg * tilt_deg)),
    }
}

fn display_options(cfg: &RunConfig, rec: &SignalRecord) -> SpectrogramOptions {
    let [lo, hi] = cfg.output.spectrogram_band;
    let f0 = rec.offset_hz();
    SpectrogramOptions { band: Some((f0 + lo, f0 + hi)), ..cfg.analysis.spectrogram }
}

/// Fits `rec`, writes spectrogram, fit table and summary. Non-converged
/// windows are reported after the files are written.
pub fn analyze_record(cfg: &RunConfig, out: &mut Outputs, rec: &SignalRecord) -> Result<AnalysisSummary> {
    let fits = fit_record(rec, cfg.drive.excitation_frequency, &cfg.analysis)?;
    let display = spectrogram(rec, &display_options(cfg, rec))?;
    out.stream("spectrogram.csv", |w, h| io::write_spectrogram(w, &display, Some(h)))?;
    out.table("fits", &fits, |w, h| io::write_fits(w, &fits, Some(h)))?;
    let summary = summarize(&fits, cfg.drive.tilt_amplitude);
    out.json("analysis.json", &summary)?;
    println!(
        "{} windows: G = {:.4} ± {:.4} Hz, Theta = {:.4}, mean f = {:.4} Hz",
        summary.frames, summary.modulation_mean, summary.modulation_sd, summary.asymmetry_mean, summary.mean_frequency
    );
    if summary.converged_frames < summary.frames {
        return Err(Error::NonConvergence(format!(
            "{} of {} window fits did not converge",
            summary.frames - summary.converged_frames,
            summary.frames
        ))
        .into());
    }
    Ok(summary)
}

pub fn analyze(cfg: &RunConfig, out: &mut Outputs, input: Option<&Path>) -> Result<AnalysisSummary> {
    let rec = match input {
        Some(p) => read_record_file(p)?,
        None => synth(cfg, out)?,
    };
    analyze_record(cfg, out, &rec)
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub resonance: tc_optomech::resonance_sweep::ResonanceFit,
    /// Largest |G − g·θ(f)²| / (g·θ(f)²) over the sweep, synthesized sweeps only.
    pub max_relative_deviation: Option<f64>,
}

pub fn sweep(cfg: &RunConfig, out: &mut Outputs, input: Option<&Path>) -> Result<SweepSummary> {
    let (points, deviation) = match input {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            (io::read_sweep(BufReader::new(f))?, None)
        }
        None => {
            let s = &cfg.sweep;
            let mode = cfg.surface_mode()?;
            let frequencies: Vec<f64> =
                (0..s.points).map(|i| s.start + (s.stop - s.start) * i as f64 / (s.points - 1) as f64).collect();
            let plan = SweepPlan {
                frequencies,
                peak_tilt: s.peak_tilt * DEG,
                mode,
                params: cfg.time_crystal(),
                settings: SynthesisSettings { duration: s.duration, ..cfg.synthesis() },
                noise: cfg.noise(),
                analysis: cfg.analysis,
            };
            let points = run_sweep(&plan)?;
            let g = cfg.time_crystal().coupling.hz_per_rad2();
            let dev = points
                .iter()
                .map(|p| {
                    let theta = mode.tilt_response(2.0 * PI * p.excitation_frequency, plan.peak_tilt);
                    let expect = g * theta * theta;
                    ((p.response - expect) / expect).abs()
                })
                .fold(0.0, f64::max);
            (points, Some(dev))
        }
    };
    out.table("sweep", &points, |w, h| io::write_sweep(w, &points, Some(h)))?;
    let resonance = fit_resonance(&points)?;
    let summary = SweepSummary { resonance, max_relative_deviation: deviation };
    out.json("resonance.json", &summary)?;
    println!(
        "resonance: f_m = {:.4} Hz, width = {:.4} Hz, Q = {:.2}, peak G = {:.4} Hz",
        resonance.center, resonance.width, resonance.quality_factor, resonance.peak_response
    );
    if !resonance.peak_in_range {
        eprintln!("warning: fitted resonance lies outside the swept range");
    }
    if !resonance.converged {
        return Err(Error::NonConvergence("resonance fit did not converge".into()).into());
    }
    Ok(summary)
}

fn read_pairs_file(path: &Path) -> Result<Vec<(f64, f64)>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(io::read_pairs(BufReader::new(f))?)
}

pub fn calibrate(cfg: &RunConfig, out: &mut Outputs, geophone: Option<&Path>, tilt: Option<&Path>) -> Result<Value> {
    let geo = match geophone {
        Some(p) => {
            let pts: Vec<GeophonePoint> = read_pairs_file(p)?
                .into_iter()
                .map(|(a, v)| GeophonePoint { nominal_amplitude: a, voltage: v })
                .collect();
            fit_geophone(&pts)?
        }
        None => cfg.geophone(),
    };
    geo.validate()?;
    let tilt_cal = match tilt {
        Some(p) => fit_tilt_calibration(&read_pairs_file(p)?)?,
        None => TiltCalibration { slope: cfg.calibration.tilt_slope },
    };
    let thermal = cfg.thermal_model()?;
    let a_exc = geo.normalized_amplitude(cfg.drive.nominal_amplitude);
    let c = &cfg.calibration;
    let band = match (c.modulation, c.heating) {
        (Some(g), Some(dt)) => Some(coupling_band(g, &thermal, dt * 1e-6)?),
        _ => None,
    };
    let fraction = match (c.modulation, c.heating, c.coupling_fit) {
        (Some(g), Some(dt), Some(fit)) => Some(surface_heat_fraction(fit, &thermal, g, dt * 1e-6)?),
        _ => None,
    };
    let report = json!({
        "bundle": CalibrationBundle::new(geo, thermal, tilt_cal),
        "q_residual": thermal.q_residual(),
        "power_per_tilt_squared_pw": power_per_tilt_squared(&thermal.cell, &thermal.mode)? * 1e12,
        "heating_per_tilt_squared_uk": thermal.heating_per_tilt_squared(thermal.q_total)? * 1e6,
        "normalized_amplitude": a_exc,
        "theta_max_deg": tilt_cal.theta_max(a_exc),
        "coupling_band": band,
        "heat_fraction": fraction,
    });
    out.json("calibration.json", &report)?;
    println!(
        "A_exc({}) = {:.4}, theta_max = {:.4} deg, Q_res = {:.1}",
        cfg.drive.nominal_amplitude,
        a_exc,
        tilt_cal.theta_max(a_exc),
        thermal.q_residual()
    );
    if let Some(b) = band {
        println!("coupling band: [{:.3}, {:.3}] Hz/deg^2", b.g_low, b.g_high);
    }
    Ok(report)
}

pub fn energy_audit(cfg: &RunConfig, out: &mut Outputs) -> Result<tc_optomech::texture_energy::TextureAudit> {
    let report = audit(&cfg.texture_inputs(), &cfg.texture.audit)?;
    out.json("energy_audit.json", &report)?;
    println!("energy audit at H = {:.1} G", report.field);
    for row in &report.bulk_table {
        match row.magnitude {
            Some(m) => println!("  {:<28} {:.3e}", row.term, m),
            None => println!("  {:<28} n/a", row.term),
        }
    }
    Ok(report)
}

/// Magnitude spectrum of the whole record inside `[lo, hi]` Hz.
fn line_spectrum(rec: &SignalRecord, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
    let opts = SpectrogramOptions {
        window_size: rec.len(),
        hop_fraction: 1.0,
        window: WindowFunction::Hann,
        band: Some((lo, hi)),
    };
    let spec = spectrogram(rec, &opts)?;
    let frame = spec.frames.first().ok_or_else(|| anyhow!("empty spectrum"))?;
    Ok(frame.magnitudes.iter().enumerate().map(|(i, &m)| (spec.frequency(i), m)).collect())
}

/// Local maxima above `fraction` of the largest line, by frequency.
fn spectral_lines(spectrum: &[(f64, f64)], fraction: f64) -> Vec<(f64, f64)> {
    let peak = spectrum.iter().map(|p| p.1).fold(0.0, f64::max);
    spectrum
        .windows(3)
        .filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1 && w[1].1 >= fraction * peak)
        .map(|w| w[1])
        .collect()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Debug, Serialize)]
pub struct SidebandCheck {
    pub lines: usize,
    pub spacing: Option<f64>,
    pub expected_spacing: f64,
    pub pass: bool,
}

fn sideband_check(cfg: &RunConfig, rec: &SignalRecord) -> Result<SidebandCheck> {
    let f = cfg.drive.excitation_frequency;
    let tc = &cfg.time_crystal;
    let tilt = cfg.drive.tilt_amplitude + tc.static_tilt.abs();
    let reach = tc.coupling * tilt * tilt + tc.drift + 10.0 * f;
    let f0 = rec.offset_hz();
    let lines = spectral_lines(&line_spectrum(rec, f0 - reach, f0 + 10.0 * f)?, 0.05);
    let spacing = median(lines.windows(2).map(|w| w[1].0 - w[0].0).collect());
    // a static tilt adds odd harmonics of the drive and halves the spacing
    let expected = if tc.static_tilt == 0.0 { 2.0 * f } else { f };
    let bw = rec.sample_rate / rec.len() as f64;
    let pass = spacing.is_some_and(|s| (s - expected).abs() <= 2.0 * bw);
    Ok(SidebandCheck { lines: lines.len(), spacing, expected_spacing: expected, pass })
}

#[derive(Debug, Serialize)]
pub struct RampRow {
    /// deg
    pub tilt: f64,
    pub modulation: f64,
    pub expected_modulation: f64,
    /// Baseline minus driven mean frequency, Hz.
    pub mean_shift: f64,
    pub half_modulation: f64,
}

fn fit_mean(cfg: &RunConfig, params: &TimeCrystalParams, drive: &DriveProgram) -> Result<(f64, f64)> {
    let rec = synth_with(cfg, params, drive, &cfg.synthesis())?;
    let fits = fit_record(&rec, cfg.drive.excitation_frequency, &cfg.analysis)?;
    let (g, _) = mean_sd(fits.iter().map(|w| w.modulation));
    let (nu, _) = mean_sd(fits.iter().map(|w| w.mean_frequency));
    Ok((g, nu))
}

fn drive_ramp(cfg: &RunConfig) -> Result<(Vec<RampRow>, bool)> {
    let params = cfg.time_crystal();
    let (_, baseline) = fit_mean(cfg, &params, &DriveProgram::off())?;
    let mut rows = Vec::new();
    for &tilt in &cfg.drive.ramp {
        let (g, nu) = fit_mean(cfg, &params, &cfg.drive_program(tilt))?;
        rows.push(RampRow {
            tilt,
            modulation: g,
            expected_modulation: cfg.time_crystal.coupling * tilt * tilt,
            mean_shift: baseline - nu,
            half_modulation: 0.5 * g,
        });
    }
    let bw = cfg.synthesis.sample_rate / cfg.analysis.spectrogram.window_size as f64;
    let pass = rows.iter().all(|r| (r.mean_shift - r.half_modulation).abs() <= 0.05 * r.half_modulation + 0.1 * bw);
    Ok((rows, pass))
}

#[derive(Debug, Serialize)]
pub struct CarrierNull {
    /// deg
    pub tilt: f64,
    pub modulation: f64,
    /// Carrier magnitude over the strongest line.
    pub ratio: f64,
    pub pass: bool,
}

fn carrier_null(cfg: &RunConfig) -> Result<CarrierNull> {
    let f = cfg.drive.excitation_frequency;
    let g_null = 4.0 * f * J0_FIRST_ZERO;
    let tilt = (g_null / cfg.time_crystal.coupling).sqrt();
    let params = TimeCrystalParams { static_tilt: 0.0, ..cfg.time_crystal() };
    let rec = synthesize(&params, &cfg.drive_program(tilt), &cfg.noise(), &cfg.synthesis())?;
    let f0 = rec.offset_hz() - params.drift.drift_amplitude / (2.0 * PI);
    let spectrum = line_spectrum(&rec, f0 - g_null - 10.0 * f, f0 + 10.0 * f)?;
    let strongest = spectrum.iter().map(|p| p.1).fold(0.0, f64::max);
    let carrier_f = f0 - 0.5 * g_null;
    let carrier = spectrum
        .iter()
        .filter(|p| (p.0 - carrier_f).abs() <= 0.25 * f)
        .map(|p| p.1)
        .fold(0.0, f64::max);
    let ratio = carrier / strongest;
    Ok(CarrierNull { tilt, modulation: g_null, ratio, pass: ratio < 0.02 })
}

/// Mode, synthesis, analysis, sideband spacing, drive ramp, carrier null
/// and energy audit in one run.
pub fn pipeline(cfg: &RunConfig, out: &mut Outputs) -> Result<Value> {
    let mode_report = mode(cfg, out)?;
    let rec = synth(cfg, out)?;
    let analysis = analyze_record(cfg, out, &rec)?;
    let sidebands = sideband_check(cfg, &rec)?;
    println!(
        "sideband spacing {:?} Hz (expected {:.3}): {}",
        sidebands.spacing,
        sidebands.expected_spacing,
        pass_str(sidebands.pass)
    );
    let (ramp, ramp_pass) = drive_ramp(cfg)?;
    out.table("ramp", &ramp, |w, h| {
        use std::io::Write;
        writeln!(w, "# config_hash={h}")?;
        writeln!(w, "tilt,G,G_expected,mean_shift,half_G")?;
        for r in &ramp {
            writeln!(w, "{},{},{},{},{}", r.tilt, r.modulation, r.expected_modulation, r.mean_shift, r.half_modulation)?;
        }
        Ok(())
    })?;
    println!("drive ramp mean shift vs G/2: {}", pass_str(ramp_pass));
    let null_check = carrier_null(cfg)?;
    println!("carrier null at G = {:.3} Hz: ratio {:.4}: {}", null_check.modulation, null_check.ratio, pass_str(null_check.pass));
    let energy = energy_audit(cfg, out)?;
    let summary = json!({
        "mode": mode_report,
        "analysis": analysis,
        "sidebands": sidebands,
        "ramp": { "rows": ramp, "pass": ramp_pass },
        "carrier_null": null_check,
        "energy_audit": {
            "field": energy.field,
            "surface_dominance": energy.surface_dominance,
            "crossover_magnon_number": energy.crossover_magnon_number,
        },
    });
    out.json("summary.json", &summary)?;
    Ok(summary)
}

fn pass_str(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}
