//! Time-crystal frequency law and its optomechanical parametrisation.
//!
//! The precession frequency depends quadratically on the surface tilt,
//!
//! ```text
//! ω_TC(t) = ω₀(t) + 2π g (θ(t) − θ₀)²
//! ```
//!
//! with `g` in Hz·rad⁻² internally. Figures quote `g` in Hz·deg⁻²; the
//! conversion happens once in [`Coupling`].

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Result};

const DEG: f64 = PI / 180.0;

/// Largest static tilt accepted, rad.
pub const MAX_STATIC_TILT: f64 = 0.1;

/// Optomechanical coupling constant, stored in Hz·rad⁻².
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coupling(f64);

impl Coupling {
    pub fn from_hz_per_rad2(g: f64) -> Self {
        Coupling(g)
    }

    pub fn from_hz_per_deg2(g: f64) -> Self {
        Coupling(g / (DEG * DEG))
    }

    pub fn hz_per_rad2(self) -> f64 {
        self.0
    }

    pub fn hz_per_deg2(self) -> f64 {
        self.0 * DEG * DEG
    }
}

/// Slow approach of the base precession frequency to its asymptote as the
/// magnon number decays: `ω₀(t) = ω∞ − δω e^{−t/τ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftModel {
    /// ω∞, rad·s⁻¹
    pub asymptotic_frequency: f64,
    /// δω ≥ 0, rad·s⁻¹
    pub drift_amplitude: f64,
    /// τ > 0, s
    pub relaxation_time: f64,
}

impl DriftModel {
    pub fn constant(frequency: f64) -> Self {
        DriftModel { asymptotic_frequency: frequency, drift_amplitude: 0.0, relaxation_time: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation_time > 0.0) || !(self.drift_amplitude >= 0.0) {
            return Err(domain(format!("invalid drift model {self:?}")));
        }
        Ok(())
    }

    /// ω₀(t).
    pub fn frequency_at(&self, t: f64) -> f64 {
        self.asymptotic_frequency - self.offset_at(t).abs()
    }

    /// ω₀(t) − ω∞ (non-positive).
    pub fn offset_at(&self, t: f64) -> f64 {
        if self.drift_amplitude == 0.0 {
            0.0
        } else {
            -self.drift_amplitude * (-t / self.relaxation_time).exp()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeCrystalParams {
    pub coupling: Coupling,
    /// θ₀, rad
    pub static_tilt: f64,
    pub drift: DriftModel,
}

impl TimeCrystalParams {
    pub fn validate(&self) -> Result<()> {
        if !self.coupling.hz_per_rad2().is_finite() {
            return Err(domain("coupling must be finite"));
        }
        if !(self.static_tilt.abs() < MAX_STATIC_TILT) {
            return Err(domain(format!("|θ₀| = {} rad exceeds {MAX_STATIC_TILT}", self.static_tilt.abs())));
        }
        self.drift.validate()
    }

    /// Frequency shift `2π g (θ − θ₀)²` relative to ω₀(t), rad·s⁻¹.
    pub fn tilt_shift(&self, theta: f64) -> f64 {
        2.0 * PI * self.coupling.hz_per_rad2() * (theta - self.static_tilt).powi(2)
    }

    /// `G = g θ_max²`, Hz.
    pub fn modulation_amplitude(&self, theta_max: f64) -> f64 {
        self.coupling.hz_per_rad2() * theta_max * theta_max
    }
}

/// Instantaneous precession frequency at tilt `theta` and time `t`.
pub fn instantaneous_frequency(p: &TimeCrystalParams, theta: f64, t: f64) -> f64 {
    p.drift.frequency_at(t) + p.tilt_shift(theta)
}

/// Harmonic content of the frequency shift under `θ(t) = θ_max sin(ω t)`:
///
/// `Δω(t) = dc + first_harmonic·sin(ωt) + second_harmonic·cos(2ωt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmComponents {
    pub dc: f64,
    pub first_harmonic: f64,
    pub second_harmonic: f64,
}

impl FmComponents {
    pub fn evaluate(&self, omega_exc: f64, t: f64) -> f64 {
        self.dc + self.first_harmonic * (omega_exc * t).sin() + self.second_harmonic * (2.0 * omega_exc * t).cos()
    }
}

pub fn fm_decomposition(p: &TimeCrystalParams, theta_max: f64) -> Result<FmComponents> {
    if !(theta_max >= 0.0) {
        return Err(domain(format!("θ_max must be non-negative, got {theta_max}")));
    }
    let g = p.coupling.hz_per_rad2();
    let t0 = p.static_tilt;
    Ok(FmComponents {
        dc: 2.0 * PI * g * (t0 * t0 + 0.5 * theta_max * theta_max),
        first_harmonic: -4.0 * PI * g * theta_max * t0,
        second_harmonic: -PI * g * theta_max * theta_max,
    })
}

/// Coefficients of the coupled magnon-surface Hamiltonian
/// `ħω̃ a†a + ħω_m b†b − 2πħ g₁ a†a x + 2πħ g₂ a†a x²` with `x` the tilt.
///
/// The linear coupling carries a minus sign so that, read as a frequency,
/// `ω̃ − 2π g₁ θ + 2π g₂ θ²` reproduces `ω₀ + 2π g (θ − θ₀)²` term by term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianParams {
    /// g₁, Hz·rad⁻¹
    pub linear_coupling: f64,
    /// g₂, Hz·rad⁻²
    pub quadratic_coupling: f64,
    /// ω̃_TC, rad·s⁻¹
    pub shifted_frequency: f64,
    /// ω_m, rad·s⁻¹
    pub mech_frequency: f64,
}

impl HamiltonianParams {
    /// Precession frequency at tilt `theta` implied by these coefficients.
    pub fn frequency_at_tilt(&self, theta: f64) -> f64 {
        self.shifted_frequency - 2.0 * PI * self.linear_coupling * theta
            + 2.0 * PI * self.quadratic_coupling * theta * theta
    }

    pub fn linear_coupling_hz_per_deg(&self) -> f64 {
        self.linear_coupling * DEG
    }
}

/// Map `(g, θ₀, ω₀)` at time `t` onto Hamiltonian coefficients.
pub fn hamiltonian_from_coupling(p: &TimeCrystalParams, t: f64, mech_frequency: f64) -> HamiltonianParams {
    let g = p.coupling.hz_per_rad2();
    HamiltonianParams {
        linear_coupling: 2.0 * g * p.static_tilt,
        quadratic_coupling: g,
        shifted_frequency: p.drift.frequency_at(t) + 2.0 * PI * g * p.static_tilt.powi(2),
        mech_frequency,
    }
}

/// Inverse of [`hamiltonian_from_coupling`]: `(g, θ₀, ω₀)`. Needs `g₂ ≠ 0`.
pub fn coupling_from_hamiltonian(h: &HamiltonianParams) -> Result<(Coupling, f64, f64)> {
    if h.quadratic_coupling == 0.0 {
        return Err(domain("θ₀ is undetermined when the quadratic coupling vanishes"));
    }
    let g = h.quadratic_coupling;
    let theta0 = h.linear_coupling / (2.0 * g);
    let omega0 = h.shifted_frequency - 2.0 * PI * g * theta0 * theta0;
    Ok((Coupling::from_hz_per_rad2(g), theta0, omega0))
}

/// Radial profile of the orbital tipping angle β_L(r).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaProfile {
    /// Flare-out texture near the axis: `β_L = slope · r`, capped at π.
    Linear { slope: f64 },
    /// `(r, β_L)` samples, linearly interpolated.
    Tabulated(Vec<(f64, f64)>),
}

/// Trap description: Zeeman part along the axis, texture part radially.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// γ, rad·s⁻¹·T⁻¹ (sign ignored)
    pub gyromagnetic_ratio: f64,
    /// `(z, H)` samples in (m, T), sorted by z.
    pub field_profile: Vec<(f64, f64)>,
    /// Ω_L, rad·s⁻¹
    pub leggett_frequency: f64,
    pub beta_profile: BetaProfile,
}

/// Gyromagnetic ratio of ³He, rad·s⁻¹·T⁻¹.
pub const GAMMA_HE3: f64 = -2.037_894_569e8;

fn interpolate(table: &[(f64, f64)], x: f64, what: &str) -> Result<f64> {
    let (first, last) = match (table.first(), table.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(domain(format!("{what} table is empty"))),
    };
    if table.len() == 1 {
        return if x == first.0 { Ok(first.1) } else { Err(domain(format!("{what} not sampled at {x}"))) };
    }
    if x < first.0 || x > last.0 {
        return Err(domain(format!("{what} not sampled at {x}; table covers [{}, {}]", first.0, last.0)));
    }
    let i = table.partition_point(|p| p.0 <= x).clamp(1, table.len() - 1);
    let (x0, y0) = table[i - 1];
    let (x1, y1) = table[i];
    Ok(if x1 == x0 { y0 } else { y0 + (y1 - y0) * (x - x0) / (x1 - x0) })
}

impl TrapConfig {
    pub fn field_at(&self, z: f64) -> Result<f64> {
        let h = interpolate(&self.field_profile, z, "field profile")?;
        if !(h > 0.0) {
            return Err(domain(format!("field H({z}) = {h} T is not positive")));
        }
        Ok(h)
    }

    pub fn beta_at(&self, r: f64) -> Result<f64> {
        let beta = match &self.beta_profile {
            BetaProfile::Linear { slope } => (slope * r).min(PI),
            BetaProfile::Tabulated(t) => interpolate(t, r, "β_L profile")?,
        };
        if !(0.0..=PI).contains(&beta) {
            return Err(domain(format!("β_L({r}) = {beta} outside [0, π]")));
        }
        Ok(beta)
    }

    /// Local Larmor frequency |γ| H(z).
    pub fn larmor_frequency(&self, z: f64) -> Result<f64> {
        Ok(self.gyromagnetic_ratio.abs() * self.field_at(z)?)
    }
}

/// Axial and radial parts of the magnon trap, both as frequencies (U/ħ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapPotential {
    pub axial: f64,
    pub radial: f64,
}

impl TrapPotential {
    pub fn total(&self) -> f64 {
        self.axial + self.radial
    }
}

/// `U/ħ = |γ|H(z) + (4Ω_L²/(5ω_L)) sin²(β_L(r)/2)`.
pub fn trap_potential(cfg: &TrapConfig, r: f64, z: f64) -> Result<TrapPotential> {
    let omega_l = cfg.larmor_frequency(z)?;
    let beta = cfg.beta_at(r)?;
    let depth = 4.0 * cfg.leggett_frequency.powi(2) / (5.0 * omega_l);
    Ok(TrapPotential { axial: omega_l, radial: depth * (beta / 2.0).sin().powi(2) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(g_deg: f64, theta0: f64) -> TimeCrystalParams {
        TimeCrystalParams {
            coupling: Coupling::from_hz_per_deg2(g_deg),
            static_tilt: theta0,
            drift: DriftModel::constant(2.0 * PI * 833e3),
        }
    }

    #[test]
    fn minimum_at_static_tilt() {
        let p = params(3.74, 0.004);
        assert_eq!(instantaneous_frequency(&p, 0.004, 1.0), p.drift.frequency_at(1.0));
    }

    #[test]
    fn one_degree_shift() {
        let p = params(3.74, 0.0);
        let shift = instantaneous_frequency(&p, DEG, 0.0) - p.drift.frequency_at(0.0);
        assert!((shift - 2.0 * PI * 3.74).abs() < 1e-9);
    }

    #[test]
    fn constant_tilt_shift() {
        let p = params(5.0, 0.0);
        let theta_max = 0.01;
        let shift = p.tilt_shift(theta_max);
        assert!((shift - 2.0 * PI * p.coupling.hz_per_rad2() * theta_max * theta_max).abs() < 1e-12);
    }

    #[test]
    fn drift_is_monotone() {
        let d = DriftModel { asymptotic_frequency: 1000.0, drift_amplitude: 2.0 * PI * 150.0, relaxation_time: 10.0 };
        let mut prev = f64::NEG_INFINITY;
        for i in 0..100 {
            let w = d.frequency_at(i as f64 * 0.5);
            assert!(w >= prev);
            prev = w;
        }
        assert!((d.frequency_at(0.0) - (1000.0 - 2.0 * PI * 150.0)).abs() < 1e-9);
        assert!(DriftModel { relaxation_time: 0.0, ..d }.validate().is_err());
    }

    #[test]
    fn static_tilt_limit() {
        assert!(params(1.0, 0.2).validate().is_err());
        assert!(params(1.0, 0.05).validate().is_ok());
    }

    #[test]
    fn fm_edge_cases() {
        let c = fm_decomposition(&params(4.0, 0.0), 0.02).unwrap();
        assert_eq!(c.first_harmonic, 0.0);
        let p = params(4.0, 0.003);
        let c = fm_decomposition(&p, 0.0).unwrap();
        assert!((c.dc - 2.0 * PI * p.coupling.hz_per_rad2() * 0.003f64.powi(2)).abs() < 1e-12);
        assert_eq!(c.first_harmonic, 0.0);
        assert_eq!(c.second_harmonic, 0.0);
        assert!(fm_decomposition(&p, -1.0).is_err());
    }

    #[test]
    fn mean_shift_is_half_the_modulation() {
        // θ₀ = 0: dc equals half of the peak-to-peak swing of the 2ω term
        let c = fm_decomposition(&params(4.0, 0.0), 0.02).unwrap();
        let peak_to_peak = 2.0 * c.second_harmonic.abs();
        assert!((c.dc - 0.5 * peak_to_peak).abs() < 1e-12 * c.dc);
    }

    #[test]
    fn hamiltonian_example() {
        let p = params(3.74, 0.5 * DEG);
        let h = hamiltonian_from_coupling(&p, 0.0, 2.0 * PI * 12.4);
        assert!((h.linear_coupling_hz_per_deg() - 3.74).abs() < 1e-12);
        let p0 = params(3.74, 0.0);
        let h0 = hamiltonian_from_coupling(&p0, 0.0, 1.0);
        assert_eq!(h0.linear_coupling, 0.0);
        assert_eq!(h0.shifted_frequency, p0.drift.frequency_at(0.0));
    }

    #[test]
    fn hamiltonian_needs_quadratic_term() {
        let h = HamiltonianParams { linear_coupling: 1.0, quadratic_coupling: 0.0, shifted_frequency: 1.0, mech_frequency: 1.0 };
        assert!(coupling_from_hamiltonian(&h).is_err());
    }

    proptest! {
        #[test]
        fn parity_of_quadratic_form(g in -50.0..50.0f64, t0 in -0.09..0.09f64, th in -0.09..0.09f64) {
            let p = params(g, t0);
            let q = params(g, -t0);
            let a = instantaneous_frequency(&p, th, 0.0);
            let b = instantaneous_frequency(&q, -th, 0.0);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }

        #[test]
        fn harmonics_reproduce_direct_evaluation(g in 0.1..50.0f64, t0 in -0.05..0.05f64, tm in 0.0..0.05f64) {
            let p = params(g, t0);
            let c = fm_decomposition(&p, tm).unwrap();
            let w = 2.0 * PI * 12.5;
            for i in 0..200 {
                let t = i as f64 / 200.0 / 12.5;
                let direct = p.tilt_shift(tm * (w * t).sin());
                let scale = c.dc.abs().max(1e-300);
                prop_assert!((c.evaluate(w, t) - direct).abs() <= 1e-12 * scale.max(direct.abs()) + 1e-15);
            }
        }

        #[test]
        fn hamiltonian_round_trip(g in 0.1..50.0f64, t0 in -0.09..0.09f64, th in -0.09..0.09f64) {
            let p = params(g, t0);
            let h = hamiltonian_from_coupling(&p, 0.0, 1.0);
            let direct = instantaneous_frequency(&p, th, 0.0);
            prop_assert!((h.frequency_at_tilt(th) - direct).abs() <= 1e-12 * direct);
            let (g2, t02, w0) = coupling_from_hamiltonian(&h).unwrap();
            prop_assert!((g2.hz_per_rad2() - p.coupling.hz_per_rad2()).abs() <= 1e-12 * g2.hz_per_rad2());
            prop_assert!((t02 - t0).abs() <= 1e-12 * t0.abs().max(1e-3));
            prop_assert!((w0 - p.drift.frequency_at(0.0)).abs() <= 1e-12 * w0);
        }

        #[test]
        fn trap_bounded_below(z in 0.0..0.01f64, r in 0.0..0.003f64, slope in 0.0..2000.0f64) {
            let cfg = trap(BetaProfile::Linear { slope });
            let u = trap_potential(&cfg, r, z).unwrap();
            let h_min = cfg.field_profile.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            prop_assert!(u.total() >= GAMMA_HE3.abs() * h_min * (1.0 - 1e-15));
        }
    }

    fn trap(beta: BetaProfile) -> TrapConfig {
        TrapConfig {
            gyromagnetic_ratio: GAMMA_HE3,
            field_profile: vec![(0.0, 0.0255), (0.005, 0.025), (0.01, 0.0256)],
            leggett_frequency: 2.0 * PI * 250e3,
            beta_profile: beta,
        }
    }

    #[test]
    fn trap_boundary_values() {
        let cfg = trap(BetaProfile::Linear { slope: 0.0 });
        let u = trap_potential(&cfg, 0.001, 0.005).unwrap();
        assert_eq!(u.radial, 0.0);
        let cfg = trap(BetaProfile::Tabulated(vec![(0.0, PI), (0.003, PI)]));
        let u = trap_potential(&cfg, 0.001, 0.005).unwrap();
        let wl = GAMMA_HE3.abs() * 0.025;
        let max = 4.0 * cfg.leggett_frequency.powi(2) / (5.0 * wl);
        assert!((u.radial - max).abs() < 1e-9 * max);
    }

    #[test]
    fn trap_is_harmonic_near_axis() {
        let c = 100.0;
        let cfg = trap(BetaProfile::Linear { slope: c });
        let wl = GAMMA_HE3.abs() * 0.025;
        let pref = cfg.leggett_frequency.powi(2) / (5.0 * wl);
        for &r in &[1e-4, 2e-4, 4e-4] {
            let exact = trap_potential(&cfg, r, 0.005).unwrap().radial;
            let harmonic = pref * c * c * r * r;
            // sin²(x/2) = x²/4 − x⁴/48 + ...: relative defect x²/12
            let x = c * r;
            let rel = (exact - harmonic) / harmonic;
            assert!((rel + x * x / 12.0).abs() < x.powi(4) / 100.0, "{rel} at {r}");
        }
    }

    #[test]
    fn trap_rejects_nonpositive_field() {
        let mut cfg = trap(BetaProfile::Linear { slope: 1.0 });
        cfg.field_profile = vec![(0.0, 0.0), (1.0, 0.0)];
        assert!(trap_potential(&cfg, 0.0, 0.5).is_err());
        let cfg = trap(BetaProfile::Linear { slope: 1.0 });
        assert!(trap_potential(&cfg, 0.0, 0.5).is_err());
    }
}
