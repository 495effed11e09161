//! Plain-text CSV formats for records, spectrograms, fits and sweeps.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! record read back is bit-identical to the one written. Lines starting
//! with `#` are comments.

use num_complex::Complex64;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::resonance_sweep::SweepPoint;
use crate::signal_engine::SignalRecord;
use crate::spectral_fit::{Spectrogram, WindowFit};

fn comment<W: Write>(w: &mut W, config_hash: Option<&str>) -> Result<()> {
    if let Some(h) = config_hash {
        writeln!(w, "# config_hash={h}")?;
    }
    Ok(())
}

pub fn write_record<W: Write>(w: &mut W, rec: &SignalRecord, config_hash: Option<&str>) -> Result<()> {
    comment(w, config_hash)?;
    writeln!(w, "sample_rate,lockin_offset,t0")?;
    writeln!(w, "{},{},{}", rec.sample_rate, rec.lockin_offset, rec.t0)?;
    writeln!(w, "t,re,im")?;
    for (i, z) in rec.samples.iter().enumerate() {
        writeln!(w, "{},{},{}", rec.time(i), z.re, z.im)?;
    }
    Ok(())
}

fn parse_fields(line: &str, n: usize, lineno: usize) -> Result<Vec<f64>> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != n {
        return Err(Error::Parse { line: lineno, message: format!("expected {n} fields, found {}", fields.len()) });
    }
    fields
        .iter()
        .map(|f| f.parse::<f64>().map_err(|e| Error::Parse { line: lineno, message: format!("{f:?}: {e}") }))
        .collect()
}

pub fn read_record<R: BufRead>(r: R) -> Result<SignalRecord> {
    let mut lines = r
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !matches!(l, Ok(s) if s.trim_start().starts_with('#') || s.trim().is_empty()));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => Ok((i, l?)),
            None => Err(Error::Parse { line: 0, message: format!("missing {what}") }),
        }
    };
    let (i, h) = next("header")?;
    if h.trim() != "sample_rate,lockin_offset,t0" {
        return Err(Error::Parse { line: i, message: format!("unexpected header {h:?}") });
    }
    let (i, v) = next("header values")?;
    let meta = parse_fields(&v, 3, i)?;
    let (i, h) = next("column header")?;
    if h.trim() != "t,re,im" {
        return Err(Error::Parse { line: i, message: format!("unexpected column header {h:?}") });
    }
    let mut samples = Vec::new();
    for (i, l) in lines {
        let v = parse_fields(&l?, 3, i)?;
        samples.push(Complex64::new(v[1], v[2]));
    }
    let rec = SignalRecord { samples, sample_rate: meta[0], lockin_offset: meta[1], t0: meta[2] };
    rec.validate()?;
    Ok(rec)
}

/// Long format `t,f,mag`, one row per frame and bin.
pub fn write_spectrogram<W: Write>(w: &mut W, spec: &Spectrogram, config_hash: Option<&str>) -> Result<()> {
    comment(w, config_hash)?;
    writeln!(w, "t,f,mag")?;
    for frame in &spec.frames {
        for (i, m) in frame.magnitudes.iter().enumerate() {
            writeln!(w, "{},{},{}", frame.t_center, spec.frequency(i), m)?;
        }
    }
    Ok(())
}

pub fn write_fits<W: Write>(w: &mut W, fits: &[WindowFit], config_hash: Option<&str>) -> Result<()> {
    comment(w, config_hash)?;
    writeln!(w, "t,A,G,Theta,mean_f,residual,converged")?;
    for f in fits {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            f.t_center, f.amplitude, f.modulation, f.asymmetry, f.mean_frequency, f.residual_norm, f.converged
        )?;
    }
    Ok(())
}

pub fn write_sweep<W: Write>(w: &mut W, points: &[SweepPoint], config_hash: Option<&str>) -> Result<()> {
    comment(w, config_hash)?;
    writeln!(w, "f_exc,G,sigma")?;
    for p in points {
        writeln!(w, "{},{},{}", p.excitation_frequency, p.response, p.uncertainty)?;
    }
    Ok(())
}

pub fn read_sweep<R: BufRead>(r: R) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    let mut header = false;
    for (i, l) in r.lines().enumerate() {
        let l = l?;
        let t = l.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if !header {
            if t != "f_exc,G,sigma" {
                return Err(Error::Parse { line: i + 1, message: format!("unexpected header {t:?}") });
            }
            header = true;
            continue;
        }
        let v = parse_fields(t, 3, i + 1)?;
        out.push(SweepPoint { excitation_frequency: v[0], response: v[1], uncertainty: v[2] });
    }
    Ok(out)
}

/// Reads two-column numeric CSV with a header line, e.g. `A_nom,V_gp`.
pub fn read_pairs<R: BufRead>(r: R) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut header = false;
    for (i, l) in r.lines().enumerate() {
        let l = l?;
        let t = l.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if !header {
            header = true;
            continue;
        }
        let v = parse_fields(t, 2, i + 1)?;
        out.push((v[0], v[1]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip_is_bit_exact() {
        let rec = SignalRecord {
            samples: (0..50).map(|k| Complex64::new((k as f64 * 0.1).sin() / 3.0, 1e-300 * k as f64 - 0.1)).collect(),
            sample_rate: 48_000.0,
            lockin_offset: 2.0 * std::f64::consts::PI * 3000.0,
            t0: 0.1,
        };
        let mut buf = Vec::new();
        write_record(&mut buf, &rec, Some("abc")).unwrap();
        let back = read_record(buf.as_slice()).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn malformed_rows_report_line() {
        let text = "sample_rate,lockin_offset,t0\n48000,1,0\nt,re,im\n0,1,2\n0,x,2\n";
        match read_record(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_round_trip() {
        let pts = vec![
            SweepPoint { excitation_frequency: 12.0, response: 3.5, uncertainty: 0.1 },
            SweepPoint { excitation_frequency: 12.5, response: 9.25, uncertainty: 0.0 },
        ];
        let mut buf = Vec::new();
        write_sweep(&mut buf, &pts, Some("h")).unwrap();
        assert_eq!(read_sweep(buf.as_slice()).unwrap(), pts);
    }
}
