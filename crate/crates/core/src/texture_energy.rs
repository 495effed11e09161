//! Order-of-magnitude evaluators for the textural free-energy terms of
//! superfluid ³He-B, in CGS units (erg, G, cm, s).
//!
//! Bulk terms are energy densities (erg·cm⁻³), surface terms are energies per
//! area (erg·cm⁻²). Gradient terms use `∂R/∂r ~ 1/ξ_H`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::timecrystal_model::GAMMA_HE3;

/// ħ, erg·s
pub const HBAR_CGS: f64 = 1.054_571_817e-27;

/// 1 T = 10⁴ G.
pub fn gauss_from_tesla(tesla: f64) -> f64 {
    tesla * 1e4
}

/// m·s⁻¹ → cm·s⁻¹ (also m → cm).
pub fn cgs_from_si_length(v: f64) -> f64 {
    v * 100.0
}

/// Field (G) at which the Larmor frequency equals `omega` (rad·s⁻¹).
pub fn field_for_larmor(omega: f64) -> f64 {
    gauss_from_tesla(omega / GAMMA_HE3.abs())
}

pub type Vec3 = [f64; 3];

fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Free-energy coefficients. `None` marks a value that is not available.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextureCoefficients {
    /// erg·cm⁻³·G⁻²
    pub a: Option<f64>,
    /// erg·cm⁻⁵·s²
    pub lambda_dv: Option<f64>,
    /// erg·cm⁻⁵·s²·G⁻²
    pub lambda_hv: Option<f64>,
    /// erg·cm⁻³·G⁻¹·s
    pub lambda_hv1: Option<f64>,
    /// erg·cm⁻¹
    pub lambda_g1: Option<f64>,
    /// erg·cm⁻¹
    pub lambda_g2: Option<f64>,
    /// erg·cm⁻²·G⁻²
    pub d_sh: Option<f64>,
    /// erg·cm⁻³·G⁻¹·s
    pub lambda_shv1: Option<f64>,
    /// erg·cm⁻¹
    pub lambda_sg: Option<f64>,
    /// erg·cm⁻²
    pub b2: Option<f64>,
    /// erg·cm⁻²
    pub b4: Option<f64>,
}

/// Field at which the default coefficients reproduce the quoted magnitudes, G.
pub const REFERENCE_FIELD: f64 = 200.0;

impl Default for TextureCoefficients {
    /// Values reproducing at 200 G: `aH² = 3e-9`, `λ_HV H² = 8e-8`,
    /// `(λ_G1 + λ_G2)/ξ_H² = 1e-9` and `λ_SG/ξ_H = 2e-10` at ξ_H = 1 mm,
    /// `d_SH H² = 9e-9`, `b₂ − b₄ = 1e-10` with `b₂ : b₄ = 17 : 5`,
    /// `λ_SHV1 = 5e-13`, and `λ_DV` two orders below `λ_HV H²`.
    fn default() -> Self {
        let h2 = REFERENCE_FIELD * REFERENCE_FIELD;
        TextureCoefficients {
            a: Some(3e-9 / h2),
            lambda_dv: Some(8e-10),
            lambda_hv: Some(8e-8 / h2),
            lambda_hv1: None,
            lambda_g1: Some(5e-12),
            lambda_g2: Some(5e-12),
            d_sh: Some(9e-9 / h2),
            lambda_shv1: Some(5e-13),
            lambda_sg: Some(2e-11),
            b2: Some(17.0 / 12.0 * 1e-10),
            b4: Some(5.0 / 12.0 * 1e-10),
        }
    }
}

impl TextureCoefficients {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("a", self.a),
            ("lambda_dv", self.lambda_dv),
            ("lambda_hv", self.lambda_hv),
            ("lambda_hv1", self.lambda_hv1),
            ("lambda_g1", self.lambda_g1),
            ("lambda_g2", self.lambda_g2),
            ("d_sh", self.d_sh),
            ("lambda_shv1", self.lambda_shv1),
            ("lambda_sg", self.lambda_sg),
            ("b2", self.b2),
            ("b4", self.b4),
        ];
        for (name, v) in all {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("texture coefficient {name} must be finite and >= 0, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Local conditions, CGS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextureInputs {
    /// |H|, G
    pub field: f64,
    /// Unit vector along H.
    pub field_direction: Vec3,
    /// cm·s⁻¹
    pub superfluid_velocity: Vec3,
    /// cm·s⁻¹
    pub normal_velocity: Vec3,
    /// ∇ × v_n, s⁻¹
    pub normal_vorticity: Vec3,
    pub n_hat: Vec3,
    pub l_hat: Vec3,
    /// Surface normal pointing into the liquid.
    pub s_hat: Vec3,
    /// ξ_H, cm
    pub healing_length: f64,
    pub magnon_number: f64,
    /// Ω_L, rad·s⁻¹
    pub leggett_frequency: f64,
    /// ω_L, rad·s⁻¹
    pub larmor_frequency: f64,
    pub coefficients: TextureCoefficients,
}

/// NMR frequency of the experiment, Hz.
pub const NMR_FREQUENCY: f64 = 833e3;

impl Default for TextureInputs {
    /// Aligned configuration at the field of an 833 kHz Larmor frequency,
    /// with no flow, ξ_H = 1 mm and Ω_L = 2π·250 kHz.
    fn default() -> Self {
        let larmor = 2.0 * PI * NMR_FREQUENCY;
        TextureInputs {
            field: field_for_larmor(larmor),
            field_direction: [0.0, 0.0, 1.0],
            superfluid_velocity: [0.0; 3],
            normal_velocity: [0.0; 3],
            normal_vorticity: [0.0; 3],
            n_hat: [0.0, 0.0, 1.0],
            l_hat: [0.0, 0.0, 1.0],
            s_hat: [0.0, 0.0, 1.0],
            healing_length: 0.1,
            magnon_number: 0.0,
            leggett_frequency: 2.0 * PI * 250e3,
            larmor_frequency: larmor,
            coefficients: TextureCoefficients::default(),
        }
    }
}

impl TextureInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("field_direction", &self.field_direction),
            ("n_hat", &self.n_hat),
            ("l_hat", &self.l_hat),
            ("s_hat", &self.s_hat),
        ] {
            if (dot(v, v).sqrt() - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!("{name} must be a unit vector, got {v:?}")));
            }
        }
        if !(self.field >= 0.0 && self.healing_length > 0.0 && self.magnon_number >= 0.0 && self.larmor_frequency > 0.0) {
            return Err(Error::Config("texture inputs need H >= 0, xi_H > 0, N_m >= 0, omega_L > 0".into()));
        }
        self.coefficients.validate()
    }

    fn h_vec(&self) -> Vec3 {
        self.field_direction.map(|c| c * self.field)
    }

    fn relative_velocity(&self) -> Vec3 {
        sub(&self.superfluid_velocity, &self.normal_velocity)
    }
}

/// Bulk densities, erg·cm⁻³. `None`: coefficient unavailable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkDensities {
    pub dipole_field: Option<f64>,
    pub dipole_velocity: Option<f64>,
    pub field_velocity: Option<f64>,
    pub field_velocity_first_order: Option<f64>,
    pub gradient: Option<f64>,
}

/// Surface energies per area, erg·cm⁻².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDensities {
    pub surface_field: Option<f64>,
    pub surface_field_velocity: Option<f64>,
    pub surface_gradient: Option<f64>,
    pub surface_dipole: Option<f64>,
}

pub fn bulk_energy_densities(inp: &TextureInputs) -> Result<BulkDensities> {
    inp.validate()?;
    let c = &inp.coefficients;
    let h = inp.h_vec();
    let v = inp.relative_velocity();
    let xi2 = inp.healing_length * inp.healing_length;
    Ok(BulkDensities {
        dipole_field: c.a.map(|a| -a * dot(&inp.n_hat, &h).powi(2)),
        dipole_velocity: c.lambda_dv.map(|l| -l * dot(&inp.n_hat, &v).powi(2)),
        field_velocity: c.lambda_hv.map(|l| -l * inp.field * inp.field * dot(&inp.l_hat, &v).powi(2)),
        field_velocity_first_order: c.lambda_hv1.map(|l| -l * inp.field * dot(&inp.l_hat, &inp.normal_vorticity)),
        gradient: c.lambda_g1.zip(c.lambda_g2).map(|(g1, g2)| (g1 + g2) / xi2),
    })
}

pub fn surface_energy_densities(inp: &TextureInputs) -> Result<SurfaceDensities> {
    inp.validate()?;
    let c = &inp.coefficients;
    let v = inp.relative_velocity();
    let ls = dot(&inp.l_hat, &inp.s_hat);
    let sn = dot(&inp.s_hat, &inp.n_hat);
    Ok(SurfaceDensities {
        surface_field: c.d_sh.map(|d| -d * inp.field * inp.field * ls * ls),
        surface_field_velocity: c
            .lambda_shv1
            .map(|l| -l * inp.field * dot(&inp.l_hat, &cross(&inp.s_hat, &v))),
        surface_gradient: c.lambda_sg.map(|l| l / inp.healing_length),
        surface_dipole: c.b2.zip(c.b4).map(|(b2, b4)| b4 * sn.powi(4) - b2 * sn * sn),
    })
}

/// `(4/5) ħ (Ω_L²/ω_L) sin²(β_L/2) |Ψ|²`, erg·cm⁻³ for `|Ψ|²` in cm⁻³.
pub fn spin_orbit_density(inp: &TextureInputs, beta_l: f64, psi_sq: f64) -> Result<f64> {
    if !(psi_sq >= 0.0) {
        return Err(Error::Domain(format!("|psi|^2 must be non-negative, got {psi_sq}")));
    }
    let s = (0.5 * beta_l).sin();
    Ok(0.8 * HBAR_CGS * inp.leggett_frequency.powi(2) / inp.larmor_frequency * s * s * psi_sq)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceRow {
    pub term: String,
    /// |value|; `None` when unavailable.
    pub magnitude: Option<f64>,
    pub ratio_to_max: Option<f64>,
}

/// Rows sorted as given, with magnitudes relative to the largest one.
pub fn dominance_table(terms: &[(&str, Option<f64>)]) -> Vec<DominanceRow> {
    let max = terms.iter().filter_map(|t| t.1.map(f64::abs)).fold(0.0, f64::max);
    terms
        .iter()
        .map(|&(name, v)| DominanceRow {
            term: name.to_string(),
            magnitude: v.map(f64::abs),
            ratio_to_max: v.map(|v| if max > 0.0 { v.abs() / max } else { 0.0 }),
        })
        .collect()
}

/// Settings of the magnitude audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSettings {
    /// Superflow used for the bulk field-velocity comparison, cm·s⁻¹.
    pub bulk_velocity: f64,
    /// Superflow along the surface for the surface comparison, cm·s⁻¹.
    pub surface_velocity: f64,
    /// β_L used for the spin-orbit term, rad.
    pub beta_l: f64,
    /// Spin-orbit energy counts as comparable once it reaches this fraction
    /// of the smallest bulk term.
    pub comparability: f64,
}

impl Default for AuditSettings {
    fn default() -> Self {
        AuditSettings { bulk_velocity: 0.1, surface_velocity: 1.0, beta_l: PI / 3.0, comparability: 0.1 }
    }
}

/// Reproduced magnitudes of the free-energy estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureAudit {
    pub field: f64,
    /// |F_DH|/V at n̂ ∥ H
    pub dipole_field: Option<f64>,
    /// |F_HV|/(V |v_s|²) at l̂ ∥ v_s, erg·cm⁻⁵·s²
    pub field_velocity_per_v2: Option<f64>,
    /// |F_HV|/V at the bulk comparison velocity
    pub field_velocity: Option<f64>,
    pub gradient: Option<f64>,
    /// |F_SH|/A at l̂ ∥ ŝ
    pub surface_field: Option<f64>,
    pub surface_field_velocity: Option<f64>,
    pub surface_gradient: Option<f64>,
    pub surface_dipole: Option<f64>,
    /// |F_SH| over the largest other surface term.
    pub surface_dominance: Option<f64>,
    /// Spin-orbit density per magnon (|Ψ|² = 1 cm⁻³).
    pub spin_orbit_per_magnon: f64,
    /// Magnon number at which spin-orbit energy becomes comparable to the
    /// smallest bulk term.
    pub crossover_magnon_number: Option<f64>,
    pub bulk_table: Vec<DominanceRow>,
    pub surface_table: Vec<DominanceRow>,
}

/// Evaluates every term in its energy-lowering orientation.
pub fn audit(base: &TextureInputs, settings: &AuditSettings) -> Result<TextureAudit> {
    let z = [0.0, 0.0, 1.0];
    let x = [1.0, 0.0, 0.0];
    let y = [0.0, 1.0, 0.0];

    // bulk: n̂ ∥ H, l̂ ∥ v_s
    let bulk_in = TextureInputs {
        field_direction: z,
        n_hat: z,
        l_hat: x,
        superfluid_velocity: [settings.bulk_velocity, 0.0, 0.0],
        normal_velocity: [0.0; 3],
        ..*base
    };
    let bulk = bulk_energy_densities(&bulk_in)?;
    let v2 = settings.bulk_velocity * settings.bulk_velocity;

    // surface: l̂ ∥ ŝ ∥ n̂ for the static terms, l̂ ⊥ flow along the surface
    let surf_in = TextureInputs { s_hat: z, l_hat: z, n_hat: z, ..*base };
    let surf = surface_energy_densities(&surf_in)?;
    let flow_in = TextureInputs {
        s_hat: z,
        l_hat: y,
        superfluid_velocity: [settings.surface_velocity, 0.0, 0.0],
        normal_velocity: [0.0; 3],
        ..*base
    };
    let shv1 = surface_energy_densities(&flow_in)?.surface_field_velocity;

    let abs = |v: Option<f64>| v.map(f64::abs);
    let others = [shv1, surf.surface_gradient, surf.surface_dipole];
    let max_other = others.iter().filter_map(|v| v.map(f64::abs)).fold(0.0, f64::max);
    let surface_dominance = surf.surface_field.map(|f| f.abs() / max_other).filter(|_| max_other > 0.0);

    let per_magnon = spin_orbit_density(base, settings.beta_l, 1.0)?;
    let bulk_terms = [bulk.dipole_field, bulk.field_velocity, bulk.gradient];
    let smallest = bulk_terms.iter().filter_map(|v| v.map(f64::abs)).fold(f64::INFINITY, f64::min);
    let crossover = (smallest.is_finite() && per_magnon > 0.0).then(|| settings.comparability * smallest / per_magnon);

    Ok(TextureAudit {
        field: base.field,
        dipole_field: abs(bulk.dipole_field),
        field_velocity_per_v2: abs(bulk.field_velocity).map(|f| if v2 > 0.0 { f / v2 } else { f64::NAN }),
        field_velocity: abs(bulk.field_velocity),
        gradient: abs(bulk.gradient),
        surface_field: abs(surf.surface_field),
        surface_field_velocity: abs(shv1),
        surface_gradient: abs(surf.surface_gradient),
        surface_dipole: abs(surf.surface_dipole),
        surface_dominance,
        spin_orbit_per_magnon: per_magnon,
        crossover_magnon_number: crossover,
        bulk_table: dominance_table(&[
            ("F_DH", bulk.dipole_field),
            ("F_DV", bulk.dipole_velocity),
            ("F_HV", bulk.field_velocity),
            ("F_HV1", bulk.field_velocity_first_order),
            ("F_G", bulk.gradient),
        ]),
        surface_table: dominance_table(&[
            ("F_SH", surf.surface_field),
            ("F_SHV1", shv1),
            ("F_SG", surf.surface_gradient),
            ("F_SD", surf.surface_dipole),
        ]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_orientations_vanish() {
        let inp = TextureInputs { n_hat: [1.0, 0.0, 0.0], l_hat: [1.0, 0.0, 0.0], ..Default::default() };
        let b = bulk_energy_densities(&inp).unwrap();
        assert_eq!(b.dipole_field, Some(0.0));
        let s = surface_energy_densities(&inp).unwrap();
        assert_eq!(s.surface_field, Some(0.0));
        assert_eq!(s.surface_dipole, Some(0.0));
    }

    #[test]
    fn aligned_terms_lower_the_energy() {
        let inp = TextureInputs {
            superfluid_velocity: [0.0, 0.0, 0.5],
            normal_vorticity: [0.0, 0.0, 2.0],
            coefficients: TextureCoefficients { lambda_hv1: Some(1e-12), ..Default::default() },
            ..Default::default()
        };
        let b = bulk_energy_densities(&inp).unwrap();
        for v in [b.dipole_field, b.dipole_velocity, b.field_velocity, b.field_velocity_first_order] {
            assert!(v.unwrap() < 0.0);
        }
        let s = surface_energy_densities(&inp).unwrap();
        assert!(s.surface_field.unwrap() < 0.0);
        assert!(s.surface_dipole.unwrap() < 0.0);
    }

    #[test]
    fn missing_coefficient_is_not_zero() {
        let b = bulk_energy_densities(&TextureInputs::default()).unwrap();
        assert_eq!(b.field_velocity_first_order, None);
        let t = audit(&TextureInputs::default(), &AuditSettings::default()).unwrap();
        let row = t.bulk_table.iter().find(|r| r.term == "F_HV1").unwrap();
        assert_eq!(row.magnitude, None);
    }

    #[test]
    fn power_laws() {
        let base = TextureInputs { superfluid_velocity: [0.0, 0.3, 0.4], l_hat: [0.0, 0.6, 0.8], ..Default::default() };
        let double = TextureInputs { field: 2.0 * base.field, ..base };
        let (b1, b2) = (bulk_energy_densities(&base).unwrap(), bulk_energy_densities(&double).unwrap());
        assert!((b2.dipole_field.unwrap() / b1.dipole_field.unwrap() - 4.0).abs() < 1e-12);
        assert!((b2.field_velocity.unwrap() / b1.field_velocity.unwrap() - 4.0).abs() < 1e-12);
        let fast = TextureInputs { superfluid_velocity: [0.0, 0.9, 1.2], ..base };
        let b3 = bulk_energy_densities(&fast).unwrap();
        assert!((b3.field_velocity.unwrap() / b1.field_velocity.unwrap() - 9.0).abs() < 1e-12);

        let flow = |h: f64, v: f64| {
            let inp = TextureInputs { field: h, l_hat: [0.0, 1.0, 0.0], superfluid_velocity: [v, 0.0, 0.0], ..base };
            surface_energy_densities(&inp).unwrap().surface_field_velocity.unwrap()
        };
        assert!((flow(400.0, 2.0) / flow(200.0, 1.0) - 4.0).abs() < 1e-12);
        assert!((flow(200.0, 3.0) / flow(200.0, 1.0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn spin_orbit() {
        let inp = TextureInputs::default();
        assert_eq!(spin_orbit_density(&inp, 0.0, 1e12).unwrap(), 0.0);
        let oracle = 0.8 * HBAR_CGS * (2.0 * PI * 250e3f64).powi(2) / (2.0 * PI * 833e3) * 0.25;
        assert!((spin_orbit_density(&inp, PI / 3.0, 1.0).unwrap() / oracle - 1.0).abs() < 1e-12);
        assert!(spin_orbit_density(&inp, 1.0, -1.0).is_err());
    }

    #[test]
    fn non_unit_vector_rejected() {
        let inp = TextureInputs { n_hat: [1.0, 1.0, 0.0], ..Default::default() };
        assert!(matches!(bulk_energy_densities(&inp), Err(Error::Config(_))));
    }

    #[test]
    fn larmor_field() {
        // |γ|/2π ≈ 32.43 MHz/T
        assert!((field_for_larmor(2.0 * PI * 32.434e6) / 1e4 - 1.0).abs() < 1e-3);
    }
}
