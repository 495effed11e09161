//! Drive-frequency sweeps of the surface mode and fork-width thermometry.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::optimize::{fit_line, levenberg_marquardt, Bounds, LineFit, LmOptions};
use crate::signal_engine::{synthesize, DriveProgram, NoiseSpec, SynthesisSettings};
use crate::spectral_fit::{fit_record, RecordFitOptions};
use crate::surface_hydro::SurfaceMode;
use crate::timecrystal_model::TimeCrystalParams;

/// Boltzmann constant, J·K⁻¹.
pub const K_B: f64 = 1.380_649e-23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// f_exc, Hz
    pub excitation_frequency: f64,
    /// Fitted modulation G, Hz.
    pub response: f64,
    /// One-sigma uncertainty of `response`, Hz; zero when unknown.
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFit {
    /// f_m, Hz
    pub center: f64,
    /// Full width Δf_m = f_m/Q of the amplitude response, Hz.
    pub width: f64,
    /// G at resonance, Hz.
    pub peak_response: f64,
    pub quality_factor: f64,
    /// False when the fitted centre lies outside the swept range.
    pub peak_in_range: bool,
    pub residual_norm: f64,
    pub converged: bool,
}

/// Squared driven-oscillator response normalised to `peak` at `center`:
/// `G(f) = peak (Δf_m f_m)² / ((f_m² − f²)² + (Δf_m f)²)`.
pub fn resonance_response(f: f64, center: f64, width: f64, peak: f64) -> f64 {
    let num = (width * center).powi(2);
    peak * num / ((center * center - f * f).powi(2) + (width * f).powi(2))
}

pub fn fit_resonance(points: &[SweepPoint]) -> Result<ResonanceFit> {
    if points.len() < 5 {
        return Err(Error::Input(format!("need at least 5 sweep points, got {}", points.len())));
    }
    if points.iter().any(|p| !(p.excitation_frequency > 0.0) || !(p.response >= 0.0) || !(p.uncertainty >= 0.0)) {
        return Err(Error::Input("sweep points need f_exc > 0, G >= 0 and sigma >= 0".into()));
    }
    let weighted = points.iter().all(|p| p.uncertainty > 0.0);
    let weight = |p: &SweepPoint| if weighted { 1.0 / p.uncertainty } else { 1.0 };

    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.excitation_frequency.total_cmp(&b.excitation_frequency));
    let (imax, top) = sorted
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.response.total_cmp(&b.1.response))
        .map(|(i, p)| (i, *p))
        .unwrap();
    if !(top.response > 0.0) {
        return Err(Error::Input("sweep has no response".into()));
    }
    // half-maximum crossings of G seed the width
    let half = 0.5 * top.response;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = imax;
        for i in range {
            if sorted[i].response < half {
                let (a, b) = (&sorted[i], &sorted[prev]);
                let s = (half - a.response) / (b.response - a.response);
                return Some(a.excitation_frequency + s * (b.excitation_frequency - a.excitation_frequency));
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..imax).rev());
    let right = crossing(&mut (imax + 1..sorted.len()));
    let span = sorted.last().unwrap().excitation_frequency - sorted[0].excitation_frequency;
    let width0 = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (top.excitation_frequency - l),
        (None, Some(r)) => 2.0 * (r - top.excitation_frequency),
        (None, None) => 0.5 * span,
    }
    .max(1e-6 * top.excitation_frequency);

    let mut opts = LmOptions::new(3);
    opts.max_iter = 300;
    opts.cost_tol = 1e-15;
    opts.step_tol = 1e-13;
    opts.fd_scale = vec![1e-6 * top.excitation_frequency, 1e-6 * width0, 1e-6 * top.response];
    let report = levenberg_marquardt(
        |x| points.iter().map(|p| weight(p) * (resonance_response(p.excitation_frequency, x[0], x[1], x[2]) - p.response)).collect(),
        &[top.excitation_frequency, width0, top.response],
        &Bounds(vec![(1e-12, f64::INFINITY), (1e-12, f64::INFINITY), (0.0, f64::INFINITY)]),
        &opts,
    );
    let [center, width, peak] = [report.x[0], report.x[1], report.x[2]];
    Ok(ResonanceFit {
        center,
        width,
        peak_response: peak,
        quality_factor: center / width,
        peak_in_range: center >= sorted[0].excitation_frequency && center <= sorted.last().unwrap().excitation_frequency,
        residual_norm: report.cost.sqrt(),
        converged: report.converged,
    })
}

/// Ordinary least squares of mode width against fork width. The intercept
/// is the mode width left when thermal excitations vanish.
pub fn width_vs_fork_regression(pairs: &[(f64, f64)]) -> Result<LineFit> {
    if pairs.len() < 3 {
        return Err(Error::Input(format!("need at least 3 width pairs, got {}", pairs.len())));
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    fit_line(&x, &y, None).ok_or_else(|| Error::Input("fork widths are all equal; regression is rank deficient".into()))
}

/// `Q_res` from `1/Q_total = 1/Q_thermal + 1/Q_res`.
pub fn residual_quality_factor(q_total: f64, q_thermal: f64) -> Result<f64> {
    if !(q_total > 0.0 && q_thermal > q_total) {
        return Err(Error::Domain(format!("need Q_thermal > Q_total > 0, got {q_total}, {q_thermal}")));
    }
    Ok(1.0 / (1.0 / q_total - 1.0 / q_thermal))
}

/// Calibration point and gap for the fork thermometer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForkReference {
    /// Hz
    pub width: f64,
    /// K
    pub temperature: f64,
    /// Δ, J
    pub gap: f64,
    /// Widths above this leave the ballistic regime, Hz.
    pub ballistic_limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForkReading {
    /// K
    pub temperature: f64,
    /// Set when the width exceeds the ballistic limit.
    pub regime_warning: bool,
}

/// Inverts `width ∝ exp(−Δ/k_B T)`:
/// `1/T = 1/T_ref − (k_B/Δ) ln(width/width_ref)`.
pub fn fork_thermometry(width: f64, reference: &ForkReference) -> Result<ForkReading> {
    let r = reference;
    if !(width > 0.0 && r.width > 0.0 && r.temperature > 0.0 && r.gap > 0.0) {
        return Err(Error::Domain("fork thermometry needs positive widths, temperature and gap".into()));
    }
    let inv_t = 1.0 / r.temperature - K_B / r.gap * (width / r.width).ln();
    if !(inv_t > 0.0) {
        return Err(Error::Domain(format!("width {width} Hz is beyond the exponential law")));
    }
    Ok(ForkReading { temperature: 1.0 / inv_t, regime_warning: width > r.ballistic_limit })
}

/// Synthetic sweep run through the whole signal chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    /// Drive frequencies, Hz.
    pub frequencies: Vec<f64>,
    /// Tilt amplitude at resonance, rad.
    pub peak_tilt: f64,
    pub mode: SurfaceMode,
    pub params: TimeCrystalParams,
    pub settings: SynthesisSettings,
    /// Seed of the first point; point `i` uses `seed + i`.
    pub noise: NoiseSpec,
    pub analysis: RecordFitOptions,
}

/// For each drive frequency: tilt from the mode response, synthesis, record
/// fit, and the mean fitted G with its standard error.
pub fn run_sweep(plan: &SweepPlan) -> Result<Vec<SweepPoint>> {
    plan.frequencies
        .par_iter()
        .enumerate()
        .map(|(i, &f)| {
            let omega = 2.0 * PI * f;
            let tilt = plan.mode.tilt_response(omega, plan.peak_tilt);
            let drive = DriveProgram::continuous(omega, tilt);
            let noise = NoiseSpec { seed: plan.noise.seed.wrapping_add(i as u64), ..plan.noise };
            let rec = synthesize(&plan.params, &drive, &noise, &plan.settings)?;
            let fits = fit_record(&rec, f, &plan.analysis)?;
            let g: Vec<f64> = fits.iter().map(|w| w.modulation).collect();
            let n = g.len() as f64;
            let mean = g.iter().sum::<f64>() / n;
            let sigma = if g.len() > 1 {
                (g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
            } else {
                0.0
            };
            Ok(SweepPoint { excitation_frequency: f, response: mean, uncertainty: sigma })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn sweep(center: f64, q: f64, peak: f64) -> Vec<SweepPoint> {
        (0..21)
            .map(|i| {
                let f = center * (0.9 + 0.01 * i as f64);
                SweepPoint { excitation_frequency: f, response: resonance_response(f, center, center / q, peak), uncertainty: 0.0 }
            })
            .collect()
    }

    #[test]
    fn recovers_analytic_resonance() {
        let fit = fit_resonance(&sweep(12.5, 65.0, 40.0)).unwrap();
        assert!((fit.center / 12.5 - 1.0).abs() < 5e-3);
        assert!((fit.quality_factor / 65.0 - 1.0).abs() < 0.02);
        assert!(fit.peak_in_range && fit.converged);
    }

    #[test]
    fn response_matches_mode_tilt_law() {
        let mode = SurfaceMode { wavenumber: 629.0, angular_frequency: 2.0 * PI * 12.4, quality_factor: 65.0, mode_index: 1, radius: 2.9e-3 };
        let g = 7.0;
        for f in [11.0, 12.3, 12.4, 13.1] {
            let th = mode.tilt_response(2.0 * PI * f, 0.01);
            let direct = g * th * th;
            let law = resonance_response(f, 12.4, 12.4 / 65.0, g * 1e-4);
            assert!((direct / law - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn narrow_symmetric_peak_at_argmax() {
        let mut pts = sweep(12.5, 2000.0, 1.0);
        pts.retain(|p| (p.excitation_frequency - 12.5).abs() < 0.4);
        let fit = fit_resonance(&pts).unwrap();
        assert!((fit.center - 12.5).abs() < 1e-9, "{}", fit.center);
    }

    #[test]
    fn scale_invariance() {
        let pts = sweep(12.4, 50.0, 10.0);
        let a = fit_resonance(&pts).unwrap();
        let scaled: Vec<SweepPoint> = pts.iter().map(|p| SweepPoint { response: 7.5 * p.response, ..*p }).collect();
        let b = fit_resonance(&scaled).unwrap();
        assert!((a.center / b.center - 1.0).abs() < 1e-9);
        assert!((a.width / b.width - 1.0).abs() < 1e-9);
        assert!((b.peak_response / a.peak_response - 7.5).abs() < 1e-8);
    }

    #[test]
    fn out_of_range_peak_is_flagged() {
        let pts: Vec<SweepPoint> = (0..8)
            .map(|i| {
                let f = 10.0 + 0.2 * i as f64;
                SweepPoint { excitation_frequency: f, response: resonance_response(f, 12.4, 0.5, 1.0), uncertainty: 0.0 }
            })
            .collect();
        let fit = fit_resonance(&pts).unwrap();
        assert!(!fit.peak_in_range);
        assert!(fit_resonance(&pts[..4]).is_err());
    }

    #[test]
    fn weighted_fit_uses_sigma() {
        let mut pts = sweep(12.5, 65.0, 40.0);
        for p in pts.iter_mut() {
            p.uncertainty = 0.1;
        }
        // one wild point with huge uncertainty barely matters
        pts[3].response += 30.0;
        pts[3].uncertainty = 1e6;
        let fit = fit_resonance(&pts).unwrap();
        assert!((fit.center / 12.5 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn exact_line() {
        let pairs: Vec<(f64, f64)> = (0..6).map(|i| (i as f64 * 0.3, 2.0 * i as f64 * 0.3 + 0.1)).collect();
        let l = width_vs_fork_regression(&pairs).unwrap();
        assert!((l.slope - 2.0).abs() < 1e-12 && (l.intercept - 0.1).abs() < 1e-12);
        assert!(width_vs_fork_regression(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(width_vs_fork_regression(&pairs[..2]).is_err());
    }

    #[test]
    fn noisy_line_monte_carlo() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
        let sigma = 0.05 * (2.0 * 0.95);
        let normal = Normal::new(0.0, sigma).unwrap();
        let sxx: f64 = {
            let m = x.iter().sum::<f64>() / x.len() as f64;
            x.iter().map(|v| (v - m).powi(2)).sum()
        };
        let slope_sigma = sigma / sxx.sqrt();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pairs: Vec<(f64, f64)> = x.iter().map(|&v| (v, 2.0 * v + 0.1 + normal.sample(&mut rng))).collect();
            let l = width_vs_fork_regression(&pairs).unwrap();
            assert!((l.slope - 2.0).abs() < 3.0 * slope_sigma, "{seed}");
        }
    }

    #[test]
    fn quality_decomposition() {
        let q = residual_quality_factor(65.0, 375.0).unwrap();
        assert!((q - 78.6).abs() < 0.05, "{q}");
        assert!(residual_quality_factor(65.0, 60.0).is_err());
    }

    #[test]
    fn thermometry() {
        let r = ForkReference { width: 100.0, temperature: 2e-4, gap: 1.764 * K_B * 9.3e-4, ballistic_limit: 1e3 };
        let t = fork_thermometry(100.0, &r).unwrap();
        assert!((t.temperature - 2e-4).abs() < 1e-18);
        let t = fork_thermometry(100.0 * std::f64::consts::E, &r).unwrap();
        assert!((1.0 / t.temperature - (1.0 / 2e-4 - K_B / r.gap)).abs() < 1e-9);
        let mut prev = 0.0;
        for w in [10.0, 50.0, 100.0, 400.0, 900.0] {
            let t = fork_thermometry(w, &r).unwrap().temperature;
            assert!(t > prev);
            prev = t;
        }
        assert!(fork_thermometry(2e3, &r).unwrap().regime_warning);
        assert!(fork_thermometry(-1.0, &r).is_err());
    }
}
