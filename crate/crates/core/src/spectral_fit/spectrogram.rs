use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::signal_engine::SignalRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowFunction {
    #[default]
    Hann,
    Hamming,
    Blackman,
    Rectangular,
}

impl WindowFunction {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let x = |k: usize| 2.0 * PI * k as f64 / n as f64;
        (0..n)
            .map(|k| match self {
                WindowFunction::Hann => 0.5 - 0.5 * x(k).cos(),
                WindowFunction::Hamming => 0.54 - 0.46 * x(k).cos(),
                WindowFunction::Blackman => 0.42 - 0.5 * x(k).cos() + 0.08 * (2.0 * x(k)).cos(),
                WindowFunction::Rectangular => 1.0,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrogramOptions {
    pub window_size: usize,
    /// Hop between windows as a fraction of `window_size`.
    pub hop_fraction: f64,
    pub window: WindowFunction,
    /// Keep only bins inside `[lo, hi]` Hz (signed baseband frequency).
    pub band: Option<(f64, f64)>,
}

impl Default for SpectrogramOptions {
    fn default() -> Self {
        SpectrogramOptions { window_size: 30_000, hop_fraction: 0.1, window: WindowFunction::Hann, band: None }
    }
}

/// One windowed FFT.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Time at the centre of the window, s.
    pub t_center: f64,
    /// Index of the first record sample in the window.
    pub start_index: usize,
    /// Magnitudes normalised by the window sum, so that a complex tone of
    /// amplitude `a` peaks at `a`; bin `i` sits at `Spectrogram::frequency(i)`.
    pub magnitudes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub window_size: usize,
    pub hop: usize,
    pub window: WindowFunction,
    pub sample_rate: f64,
    /// `sample_rate / window_size`, Hz.
    pub bin_width: f64,
    /// Signed FFT bin of `magnitudes[0]`.
    pub first_bin: i64,
    /// Start time of the analysed record, s.
    pub t0: f64,
    pub frames: Vec<Frame>,
}

impl Spectrogram {
    pub fn frequency(&self, index: usize) -> f64 {
        (self.first_bin + index as i64) as f64 * self.bin_width
    }

    pub fn bins(&self) -> usize {
        self.frames.first().map_or(0, |f| f.magnitudes.len())
    }

    /// Stored index of the bin nearest to `f`, if stored.
    pub fn index_of(&self, f: f64) -> Option<usize> {
        let i = (f / self.bin_width).round() as i64 - self.first_bin;
        (i >= 0 && (i as usize) < self.bins()).then_some(i as usize)
    }

    /// Time between successive frames, s.
    pub fn frame_spacing(&self) -> f64 {
        self.hop as f64 / self.sample_rate
    }
}

/// Signed bin range `[lo, hi]` representable by an `n`-point FFT.
pub(crate) fn signed_range(n: usize) -> (i64, i64) {
    let n = n as i64;
    (-(n / 2), (n - 1) / 2)
}

pub(crate) fn fft_index(signed: i64, n: usize) -> usize {
    signed.rem_euclid(n as i64) as usize
}

/// Windowed complex spectrum normalised by the window sum.
pub fn windowed_spectrum(samples: &[Complex64], window: &[f64], fft: &dyn Fft<f64>) -> Vec<Complex64> {
    let norm: f64 = window.iter().sum();
    let mut buf: Vec<Complex64> = samples.iter().zip(window).map(|(z, w)| z * (w / norm)).collect();
    fft.process(&mut buf);
    buf
}

pub fn spectrogram(rec: &SignalRecord, opts: &SpectrogramOptions) -> Result<Spectrogram> {
    rec.validate()?;
    let n = opts.window_size;
    if n < 8 {
        return Err(Error::Input(format!("window size {n} is too small")));
    }
    if rec.len() < n {
        return Err(Error::Input(format!("record has {} samples, shorter than one {n}-point window", rec.len())));
    }
    if !(opts.hop_fraction > 0.0 && opts.hop_fraction <= 1.0) {
        return Err(Error::Input(format!("hop fraction {} outside (0, 1]", opts.hop_fraction)));
    }
    let hop = ((n as f64 * opts.hop_fraction).round() as usize).max(1);
    let bin_width = rec.sample_rate / n as f64;
    let (lo_all, hi_all) = signed_range(n);
    let (lo, hi) = match opts.band {
        Some((f_lo, f_hi)) => (
            ((f_lo / bin_width).ceil() as i64).max(lo_all),
            ((f_hi / bin_width).floor() as i64).min(hi_all),
        ),
        None => (lo_all, hi_all),
    };
    if hi < lo {
        return Err(Error::Input("requested band contains no FFT bins".into()));
    }

    let window = opts.window.coefficients(n);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    let starts: Vec<usize> = (0..=(rec.len() - n) / hop).map(|i| i * hop).collect();
    let frames = starts
        .par_iter()
        .map(|&start| {
            let spec = windowed_spectrum(&rec.samples[start..start + n], &window, fft.as_ref());
            let magnitudes = (lo..=hi).map(|s| spec[fft_index(s, n)].norm()).collect();
            Frame {
                t_center: rec.time(start) + (n as f64 - 1.0) / (2.0 * rec.sample_rate),
                start_index: start,
                magnitudes,
            }
        })
        .collect();

    Ok(Spectrogram {
        window_size: n,
        hop,
        window: opts.window,
        sample_rate: rec.sample_rate,
        bin_width,
        first_bin: lo,
        t0: rec.t0,
        frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(f: f64, amp: f64, n: usize, fs: f64) -> SignalRecord {
        let samples = (0..n).map(|k| Complex64::from_polar(amp, 2.0 * PI * f * k as f64 / fs)).collect();
        SignalRecord { samples, sample_rate: fs, lockin_offset: 2.0 * PI * f, t0: 0.0 }
    }

    #[test]
    fn default_geometry() {
        let rec = tone(3000.0, 0.5, 48_000, 48_000.0);
        let s = spectrogram(&rec, &SpectrogramOptions { band: Some((2900.0, 3100.0)), ..Default::default() }).unwrap();
        assert!((s.bin_width - 1.6).abs() < 1e-12);
        assert_eq!(s.hop, 3000);
        assert!((s.frame_spacing() - 0.0625).abs() < 1e-15);
        assert_eq!(s.frames.len(), 7);
        assert!((s.frames[1].t_center - s.frames[0].t_center - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn tone_peak_within_scalloping_bound() {
        let fs = 48_000.0;
        // off-bin tone: worst case is half a bin, Hann scalloping loss 1.42 dB
        let rec = tone(3000.8, 0.5, 30_000, fs);
        let s = spectrogram(&rec, &SpectrogramOptions::default()).unwrap();
        let m = &s.frames[0].magnitudes;
        let (i, &peak) = m.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((s.frequency(i) - 3000.8).abs() <= s.bin_width);
        assert!(peak <= 0.5 + 1e-12 && peak >= 0.5 * 10f64.powf(-1.43 / 20.0), "{peak}");
        // on-bin tone gives exactly the amplitude
        let rec = tone(3000.0, 0.5, 30_000, fs);
        let s = spectrogram(&rec, &SpectrogramOptions::default()).unwrap();
        let peak = s.frames[0].magnitudes.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 0.5).abs() < 1e-12);
    }

    #[test]
    fn negative_frequencies_are_ordered() {
        let rec = tone(-480.0, 1.0, 1000, 48_000.0);
        let s = spectrogram(&rec, &SpectrogramOptions { window_size: 1000, ..Default::default() }).unwrap();
        let m = &s.frames[0].magnitudes;
        let i = m.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((s.frequency(i) + 480.0).abs() < 1e-9);
        assert_eq!(s.index_of(-480.0), Some(i));
    }

    #[test]
    fn short_record_is_rejected() {
        let rec = tone(100.0, 1.0, 100, 1000.0);
        assert!(matches!(spectrogram(&rec, &SpectrogramOptions::default()), Err(Error::Input(_))));
    }

    #[test]
    fn parseval_rectangular() {
        let n = 4096;
        let samples: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new((k as f64 * 0.37).sin() + 0.1, (k as f64 * 0.011).cos()))
            .collect();
        let w = WindowFunction::Rectangular.coefficients(n);
        let fft = FftPlanner::new().plan_fft_forward(n);
        let spec = windowed_spectrum(&samples, &w, fft.as_ref());
        // spectrum is normalised by Σw = n, so Σ|X|² n = Σ|x|²
        let time_energy: f64 = samples.iter().map(|z| z.norm_sqr()).sum();
        let freq_energy: f64 = spec.iter().map(|z| z.norm_sqr()).sum::<f64>() * n as f64;
        assert!((time_energy - freq_energy).abs() < 1e-9 * time_energy);
    }
}
