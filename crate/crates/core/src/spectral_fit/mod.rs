//! Spectrogram analysis of the lock-in record.
//!
//! The chain is: sliding windowed FFT ([`spectrogram`]), tracing of the
//! central band through time ([`trace_central_band`]), and a per-window fit
//! of the magnitude spectrum to that of the model signal
//! `U(t) = A sin ∫ ω_TC dt'` ([`fit_window`], [`fit_record`]).

mod fit;
mod spectrogram;
mod trace;

pub use fit::{fit_record, fit_window, FitOptions, ModelContext, RecordFitOptions, WindowFit};
pub use spectrogram::{
    spectrogram, windowed_spectrum, Frame, Spectrogram, SpectrogramOptions, WindowFunction,
};
pub use trace::{trace_central_band, BandTrace, TraceOptions, TracePoint, TraceSource};
