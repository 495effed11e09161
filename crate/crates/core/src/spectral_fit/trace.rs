use serde::{Deserialize, Serialize};

use super::spectrogram::Spectrogram;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceOptions {
    /// Largest accepted frame-to-frame jump of the central band, Hz.
    pub continuity_limit: f64,
    /// Local maxima below this fraction of the frame maximum are ignored.
    pub peak_threshold: f64,
    /// Number of previous traced frames used to extrapolate the reference.
    pub history: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { continuity_limit: 3.0, peak_threshold: 0.05, history: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    /// Interpolated peak of a spectral line.
    Peak,
    /// Midpoint of the sidebands bracketing a missing carrier.
    SidebandMidpoint,
    /// Nothing acceptable; frequency carried over from the reference.
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t_center: f64,
    pub f_central: f64,
    pub amplitude: f64,
    pub source: TraceSource,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BandTrace {
    pub points: Vec<TracePoint>,
}

impl BandTrace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn gaps(&self) -> usize {
        self.points.iter().filter(|p| p.source == TraceSource::Gap).count()
    }

    /// Centred moving average over `width` frames (shrinking at the ends).
    pub fn smoothed(&self, width: usize) -> Vec<f64> {
        let n = self.points.len();
        let half = width.max(1) / 2;
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(half);
                let hi = (i + half).min(n - 1);
                let k = half.min(i - lo).min(hi - i);
                let seg = &self.points[i - k..=i + k];
                seg.iter().map(|p| p.f_central).sum::<f64>() / seg.len() as f64
            })
            .collect()
    }

    /// Piecewise linear interpolation of `values` (one per point) at `t`,
    /// extrapolating linearly past the ends.
    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        let n = self.points.len();
        if n == 1 {
            return values[0];
        }
        let times = |i: usize| self.points[i].t_center;
        let i = match self.points.partition_point(|p| p.t_center <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (t0, t1) = (times(i), times(i + 1));
        values[i] + (values[i + 1] - values[i]) * (t - t0) / (t1 - t0)
    }
}

fn parabolic_peak(m: &[f64], i: usize) -> (f64, f64) {
    if i == 0 || i + 1 >= m.len() {
        return (0.0, m[i]);
    }
    let (a, b, c) = (m[i - 1], m[i], m[i + 1]);
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        return (0.0, b);
    }
    let d = (0.5 * (a - c) / den).clamp(-0.5, 0.5);
    (d, b - 0.25 * (a - c) * d)
}

fn centroid(spec: &Spectrogram, m: &[f64]) -> f64 {
    let max = m.iter().cloned().fold(0.0, f64::max);
    let (mut w, mut s) = (0.0, 0.0);
    for (i, &v) in m.iter().enumerate() {
        if v >= 0.05 * max {
            w += v * v;
            s += v * v * spec.frequency(i);
        }
    }
    s / w
}

fn extrapolate(history: &[(f64, f64)], t: f64) -> f64 {
    match history.len() {
        0 => unreachable!(),
        1 => history[0].1,
        n => {
            let tm = history.iter().map(|h| h.0).sum::<f64>() / n as f64;
            let fm = history.iter().map(|h| h.1).sum::<f64>() / n as f64;
            let sxx: f64 = history.iter().map(|h| (h.0 - tm).powi(2)).sum();
            let sxy: f64 = history.iter().map(|h| (h.0 - tm) * (h.1 - fm)).sum();
            fm + sxy / sxx * (t - tm)
        }
    }
}

/// Follows the central band frame by frame.
///
/// The first frame is anchored at its power centroid. Afterwards the
/// reference is a straight-line extrapolation of the last few traced
/// frames; the nearest line within the continuity limit wins. When the
/// carrier is missing, the midpoint of the nearest lines on either side is
/// used instead, and if that also fails the frame is marked as a gap.
pub fn trace_central_band(spec: &Spectrogram, opts: &TraceOptions) -> Result<BandTrace> {
    if spec.frames.is_empty() || spec.bins() < 3 {
        return Err(Error::Input("empty spectrogram".into()));
    }
    if !(opts.continuity_limit > 0.0) {
        return Err(Error::Input("continuity limit must be positive".into()));
    }
    let mut points = Vec::with_capacity(spec.frames.len());
    let mut history: Vec<(f64, f64)> = Vec::new();
    for frame in &spec.frames {
        let m = &frame.magnitudes;
        let t = frame.t_center;
        let reference = if history.is_empty() { centroid(spec, m) } else { extrapolate(&history, t) };

        let max = m.iter().cloned().fold(0.0, f64::max);
        let peaks: Vec<(f64, f64)> = (1..m.len() - 1)
            .filter(|&i| m[i] > m[i - 1] && m[i] >= m[i + 1] && m[i] >= opts.peak_threshold * max)
            .map(|i| {
                let (d, a) = parabolic_peak(m, i);
                (spec.frequency(i) + d * spec.bin_width, a)
            })
            .collect();

        let nearest = peaks
            .iter()
            .filter(|p| (p.0 - reference).abs() <= opts.continuity_limit)
            .min_by(|a, b| (a.0 - reference).abs().total_cmp(&(b.0 - reference).abs()));
        let point = if let Some(&(f, a)) = nearest {
            TracePoint { t_center: t, f_central: f, amplitude: a, source: TraceSource::Peak }
        } else {
            let left = peaks.iter().filter(|p| p.0 < reference).max_by(|a, b| a.0.total_cmp(&b.0));
            let right = peaks.iter().filter(|p| p.0 > reference).min_by(|a, b| a.0.total_cmp(&b.0));
            match (left, right) {
                (Some(l), Some(r)) if (0.5 * (l.0 + r.0) - reference).abs() <= opts.continuity_limit => TracePoint {
                    t_center: t,
                    f_central: 0.5 * (l.0 + r.0),
                    amplitude: spec.index_of(0.5 * (l.0 + r.0)).map_or(0.0, |i| m[i]),
                    source: TraceSource::SidebandMidpoint,
                },
                _ => TracePoint { t_center: t, f_central: reference, amplitude: 0.0, source: TraceSource::Gap },
            }
        };
        if point.source != TraceSource::Gap {
            history.push((t, point.f_central));
            if history.len() > opts.history.max(1) {
                history.remove(0);
            }
        }
        points.push(point);
    }
    Ok(BandTrace { points })
}
