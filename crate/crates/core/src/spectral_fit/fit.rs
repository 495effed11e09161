use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use super::spectrogram::{fft_index, spectrogram, Frame, Spectrogram, SpectrogramOptions};
use super::trace::{trace_central_band, TraceOptions};
use crate::error::{Error, Result};
use crate::optimize::{levenberg_marquardt, nelder_mead, Bounds, LmOptions, NelderMeadOptions};
use crate::signal_engine::SignalRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Sidebands included beyond the spectral support on each side (n_max).
    pub sideband_count: usize,
    /// Bins below this fraction of the frame peak do not count as support.
    pub support_threshold: f64,
    /// The frame peak must exceed this multiple of the median bin.
    pub floor_factor: f64,
    /// Upper bound on Θ.
    pub max_asymmetry: f64,
    /// Objective evaluations allowed for the simplex stage.
    pub max_evaluations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            sideband_count: 5,
            support_threshold: 1e-3,
            floor_factor: 10.0,
            max_asymmetry: 2.0,
            max_evaluations: 400,
        }
    }
}

/// What the model needs besides the fitted parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelContext {
    /// f_exc, Hz. The drive is `sin(2π f_exc t)` in record time.
    pub excitation_frequency: f64,
    /// Slow baseband frequency trend, Hz, one value per window sample.
    /// Only its variation inside the window matters; empty means flat.
    pub trend: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub t_center: f64,
    /// Coil amplitude A, V.
    pub amplitude: f64,
    /// G = gθ_max², Hz.
    pub modulation: f64,
    /// Θ = θ₀/θ_max, fitted as non-negative.
    pub asymmetry: f64,
    /// Time-averaged baseband frequency of the model over the window, Hz.
    pub mean_frequency: f64,
    /// Root of the summed squared magnitude residuals, V.
    pub residual_norm: f64,
    pub converged: bool,
    /// False when G is too small for Θ to have any effect on the spectrum.
    pub theta_identifiable: bool,
    pub evaluations: usize,
}

/// Magnitude spectrum of the unit-amplitude model on a fixed set of bins.
///
/// The frequency parameter `nu` is the mean instantaneous frequency weighted
/// by the squared window, which is what the spectral centroid measures.
struct Model {
    fft: Arc<dyn Fft<f64>>,
    /// Window divided by its sum, times 1/2 (lock-in amplitude A/2).
    weights: Vec<f64>,
    /// Squared window normalised to unit sum.
    power: Vec<f64>,
    drive: Vec<f64>,
    /// Trend minus its power-weighted mean.
    trend: Vec<f64>,
    /// Uniform minus power-weighted mean of the raw trend.
    trend_offset: f64,
    bins: Vec<usize>,
    dt: f64,
}

impl Model {
    fn q(&self, theta: f64) -> Vec<f64> {
        self.drive.iter().map(|s| (s - theta) * (s - theta)).collect()
    }

    fn weighted_mean(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.power).map(|(a, b)| a * b).sum()
    }

    /// Uniform time average of the model frequency over the window.
    fn time_average(&self, g: f64, theta: f64, nu: f64) -> f64 {
        let q = self.q(theta);
        let uniform = q.iter().sum::<f64>() / q.len() as f64;
        nu + self.trend_offset - g * (uniform - self.weighted_mean(&q))
    }

    fn magnitudes(&self, g: f64, theta: f64, nu: f64) -> Vec<f64> {
        let n = self.weights.len();
        let q = self.q(theta);
        let q_mean = self.weighted_mean(&q);
        let mut buf = Vec::with_capacity(n);
        let mut phase = 0.0;
        let mut prev = f64::NAN;
        for k in 0..n {
            let rate = nu + self.trend.get(k).copied().unwrap_or(0.0) - g * (q[k] - q_mean);
            if k > 0 {
                phase += PI * (prev + rate) * self.dt;
            }
            prev = rate;
            buf.push(Complex64::from_polar(self.weights[k], phase));
        }
        self.fft.process(&mut buf);
        self.bins.iter().map(|&j| buf[j].norm()).collect()
    }
}

/// Best non-negative amplitude for `data ≈ a·model` and the remaining cost.
fn profile(data: &[f64], model: &[f64]) -> (f64, f64) {
    let dm: f64 = data.iter().zip(model).map(|(d, m)| d * m).sum();
    let mm: f64 = model.iter().map(|m| m * m).sum();
    let a = if mm > 0.0 { (dm / mm).max(0.0) } else { 0.0 };
    let cost = data.iter().zip(model).map(|(d, m)| (d - a * m).powi(2)).sum();
    (a, cost)
}

/// Power-weighted mean and variance of frequency over bins above `thr`.
fn moments(freqs: &[f64], mags: &[f64], thr: f64) -> (f64, f64) {
    let (mut w, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (&f, &m) in freqs.iter().zip(mags) {
        if m >= thr {
            let p = m * m;
            w += p;
            s1 += p * f;
            s2 += p * f * f;
        }
    }
    let mean = s1 / w;
    (mean, (s2 / w - mean * mean).max(0.0))
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    let mid = s.len() / 2;
    *s.select_nth_unstable_by(mid, |a, b| a.total_cmp(b)).1
}

/// Fits `(A, G, Θ, ⟨ν⟩)` to one spectrogram frame.
///
/// `A` is eliminated in closed form, so the search runs over `(G, Θ, ⟨ν⟩)`:
/// a coarse grid in Θ with G set from the spectral variance, a bounded
/// simplex, then Levenberg–Marquardt polish.
pub fn fit_window(spec: &Spectrogram, frame: &Frame, ctx: &ModelContext, opts: &FitOptions) -> Result<WindowFit> {
    let n = spec.window_size;
    let bw = spec.bin_width;
    let f_exc = ctx.excitation_frequency;
    if !(f_exc > 0.0) {
        return Err(Error::Input(format!("excitation frequency must be positive, got {f_exc}")));
    }
    if !ctx.trend.is_empty() && ctx.trend.len() != n {
        return Err(Error::Input(format!("trend has {} samples, window has {n}", ctx.trend.len())));
    }
    let mags = &frame.magnitudes;
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    let floor = median(mags);
    if !(peak > opts.floor_factor * floor) || peak == 0.0 {
        return Err(Error::Input(format!(
            "amplitude below noise floor at t = {:.4} s (peak {peak:.3e}, median {floor:.3e})",
            frame.t_center
        )));
    }

    let thr = (opts.support_threshold * peak).max(6.0 * floor);
    let first = mags.iter().position(|&m| m >= thr).unwrap();
    let last = mags.iter().rposition(|&m| m >= thr).unwrap();
    let pad = (opts.sideband_count as f64 * f_exc / bw).ceil() as usize;
    let lo = first.saturating_sub(pad);
    let hi = (last + pad).min(mags.len() - 1);
    let data = &mags[lo..=hi];
    let freqs: Vec<f64> = (lo..=hi).map(|i| spec.frequency(i)).collect();

    let t_start = spec.t0 + frame.start_index as f64 / spec.sample_rate;
    let window = spec.window.coefficients(n);
    let norm: f64 = window.iter().sum();
    let norm_sq: f64 = window.iter().map(|w| w * w).sum();
    let power: Vec<f64> = window.iter().map(|w| w * w / norm_sq).collect();
    let (trend_w, trend_u) = if ctx.trend.is_empty() {
        (0.0, 0.0)
    } else {
        (
            ctx.trend.iter().zip(&power).map(|(a, b)| a * b).sum::<f64>(),
            ctx.trend.iter().sum::<f64>() / n as f64,
        )
    };
    let model = Model {
        fft: FftPlanner::new().plan_fft_forward(n),
        weights: window.iter().map(|w| 0.5 * w / norm).collect(),
        power,
        drive: (0..n).map(|k| (2.0 * PI * f_exc * (t_start + k as f64 / spec.sample_rate)).sin()).collect(),
        trend: ctx.trend.iter().map(|v| v - trend_w).collect(),
        trend_offset: trend_u - trend_w,
        bins: (lo..=hi).map(|i| fft_index(spec.first_bin + i as i64, n)).collect(),
        dt: 1.0 / spec.sample_rate,
    };
    let rel_thr = thr / peak;
    let (centroid, variance) = moments(&freqs, data, thr);

    let mut evaluations = 0usize;
    let cost = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        profile(data, &model.magnitudes(x[0], x[1], x[2])).1
    };

    // Spectral variance of an FM tone is the window's own spread plus the
    // time variance of the instantaneous frequency, G²(1/8 + 2Θ²).
    let base = model.magnitudes(0.0, 0.0, centroid);
    let base_peak = base.iter().cloned().fold(0.0, f64::max);
    let (_, v0) = moments(&freqs, &base, rel_thr * base_peak);
    let v_fm = (variance - v0).max(0.0);

    let mut best = (vec![0.0, 0.0, centroid], cost(&[0.0, 0.0, centroid], &mut evaluations));
    let theta_max = opts.max_asymmetry.min(1.5);
    let steps = (theta_max / 0.05).round() as usize;
    for i in 0..=steps {
        let theta = i as f64 * 0.05;
        let g0 = (v_fm / (0.125 + 2.0 * theta * theta)).sqrt();
        if g0 == 0.0 {
            break;
        }
        for mult in [0.85, 1.0, 1.15] {
            let x = vec![g0 * mult, theta, centroid];
            let c = cost(&x, &mut evaluations);
            if c < best.1 {
                best = (x, c);
            }
        }
    }

    let g_scale = best.0[0].max(bw);
    let bounds = Bounds(vec![
        (0.0, 4.0 * g_scale + 10.0 * bw),
        (0.0, opts.max_asymmetry),
        (centroid - 5.0 * bw, centroid + 5.0 * bw),
    ]);
    let nm = nelder_mead(
        |x| cost(x, &mut evaluations),
        &best.0,
        &[0.05 * g_scale, 0.05, 0.1 * bw],
        &bounds,
        &NelderMeadOptions {
            max_evals: opts.max_evaluations,
            f_tol: 1e-10,
            f_floor: 1e-30,
            x_tol: vec![1e-5 * g_scale, 1e-5, 1e-6 * bw],
        },
    );

    let mut lm_opts = LmOptions::new(3);
    lm_opts.max_iter = 30;
    lm_opts.fd_scale = vec![0.01 * bw, 1e-3, 0.01 * bw];
    lm_opts.cost_tol = 1e-12;
    let lm = levenberg_marquardt(
        |x| {
            evaluations += 1;
            let m = model.magnitudes(x[0], x[1], x[2]);
            let (a, _) = profile(data, &m);
            data.iter().zip(&m).map(|(d, m)| d - a * m).collect()
        },
        &nm.x,
        &bounds,
        &lm_opts,
    );

    let (x, final_cost, converged) =
        if lm.cost <= nm.value { (lm.x, lm.cost, lm.converged || nm.converged) } else { (nm.x, nm.value, nm.converged) };
    let (a, _) = profile(data, &model.magnitudes(x[0], x[1], x[2]));
    Ok(WindowFit {
        t_center: frame.t_center,
        amplitude: a,
        modulation: x[0],
        asymmetry: x[1],
        mean_frequency: model.time_average(x[0], x[1], x[2]),
        residual_norm: final_cost.sqrt(),
        converged,
        theta_identifiable: x[0] >= 0.1 * bw,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecordFitOptions {
    pub spectrogram: SpectrogramOptions,
    pub trace: TraceOptions,
    pub fit: FitOptions,
    /// Width of the moving average applied to the trace, frames.
    pub smoothing_frames: usize,
    /// Fit every `frame_stride`-th frame.
    pub frame_stride: usize,
}

impl Default for RecordFitOptions {
    fn default() -> Self {
        RecordFitOptions {
            spectrogram: SpectrogramOptions::default(),
            trace: TraceOptions::default(),
            fit: FitOptions::default(),
            smoothing_frames: 5,
            frame_stride: 1,
        }
    }
}

/// Spectrogram, trace and per-window fits of a whole record.
///
/// Inside each window the slow frequency change is modelled by linear
/// interpolation of the smoothed trace. Frames are fitted in parallel and
/// returned in time order.
pub fn fit_record(rec: &SignalRecord, excitation_frequency: f64, opts: &RecordFitOptions) -> Result<Vec<WindowFit>> {
    let spec = spectrogram(rec, &opts.spectrogram)?;
    let trace = trace_central_band(&spec, &opts.trace)?;
    let smooth = trace.smoothed(opts.smoothing_frames.max(1));
    let n = spec.window_size;
    let stride = opts.frame_stride.max(1);
    let picked: Vec<&Frame> = spec.frames.iter().step_by(stride).collect();
    picked
        .par_iter()
        .map(|frame| {
            let t_start = spec.t0 + frame.start_index as f64 / spec.sample_rate;
            let trend = if trace.len() > 1 {
                (0..n).map(|k| trace.interpolate(&smooth, t_start + k as f64 / spec.sample_rate)).collect()
            } else {
                Vec::new()
            };
            fit_window(&spec, frame, &ModelContext { excitation_frequency, trend }, &opts.fit)
        })
        .collect()
}
