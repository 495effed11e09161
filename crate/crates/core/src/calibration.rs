//! Drive and heating calibration: geophone power law, dissipated power of
//! the surface mode, conversion of bulk heating to tilt angle, and the
//! coupling band spanned by the two quality factors.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::optimize::{levenberg_marquardt, solve_dense, Bounds, LmOptions};
use crate::surface_hydro::{FluidCell, SurfaceMode};

/// Nominal drive amplitude at which `A_exc = 1`.
pub const NORMALIZATION_POINT: f64 = 0.098;

const DEG: f64 = PI / 180.0;

/// Geophone response `V_gp = C·A_nom^ν + B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeophoneCal {
    /// C, V per nominal unit^ν
    pub scale: f64,
    /// ν
    pub exponent: f64,
    /// B, V
    pub base: f64,
}

impl GeophoneCal {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.exponent > 0.0 && self.base.is_finite()) {
            return Err(Error::Config(format!("invalid geophone calibration {self:?}")));
        }
        Ok(())
    }

    pub fn voltage(&self, a_nom: f64) -> f64 {
        self.scale * a_nom.powf(self.exponent) + self.base
    }

    /// `A_exc = V_gp(A_nom) / V_gp(0.098)`.
    pub fn normalized_amplitude(&self, a_nom: f64) -> f64 {
        self.voltage(a_nom) / self.voltage(NORMALIZATION_POINT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeophonePoint {
    pub nominal_amplitude: f64,
    /// V
    pub voltage: f64,
}

/// Least-squares `(C, ν, B)`.
///
/// For fixed ν the model is linear in `(C, B)`, so a scan over ν seeds the
/// full nonlinear fit.
pub fn fit_geophone(points: &[GeophonePoint]) -> Result<GeophoneCal> {
    fit_geophone_weighted(points, &vec![1.0; points.len()])
}

/// As [`fit_geophone`] with residual `i` multiplied by `weights[i]`
/// (typically `1/σ_i`).
pub fn fit_geophone_weighted(points: &[GeophonePoint], weights: &[f64]) -> Result<GeophoneCal> {
    if weights.len() != points.len() || weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::Input("need one positive finite weight per geophone point".into()));
    }
    if points.len() < 4 {
        return Err(Error::Input(format!("need at least 4 geophone points, got {}", points.len())));
    }
    if points.iter().any(|p| !(p.nominal_amplitude >= 0.0) || !p.voltage.is_finite()) {
        return Err(Error::Input("geophone points need A_nom >= 0 and finite voltage".into()));
    }
    let linear = |nu: f64| -> Option<(f64, f64, f64)> {
        let (mut sxx, mut sx, mut sxy, mut sy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (p, w) in points.iter().zip(weights) {
            let w2 = w * w;
            let x = p.nominal_amplitude.powf(nu);
            sxx += w2 * x * x;
            sx += w2 * x;
            sxy += w2 * x * p.voltage;
            sy += w2 * p.voltage;
            n += w2;
        }
        let cb = solve_dense(vec![vec![sxx, sx], vec![sx, n]], vec![sxy, sy])?;
        let sse = points
            .iter()
            .zip(weights)
            .map(|(p, w)| (w * (cb[0] * p.nominal_amplitude.powf(nu) + cb[1] - p.voltage)).powi(2))
            .sum();
        Some((cb[0], cb[1], sse))
    };
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for i in 0..=200 {
        let nu = 0.02 * 250f64.powf(i as f64 / 200.0);
        if let Some((c, b, sse)) = linear(nu) {
            if c > 0.0 && best.is_none_or(|bst| sse < bst.3) {
                best = Some((c, nu, b, sse));
            }
        }
    }
    let (c0, nu0, b0, _) =
        best.ok_or_else(|| Error::Input("geophone data admit no increasing power law".into()))?;

    let mut opts = LmOptions::new(3);
    opts.max_iter = 200;
    opts.fd_scale = vec![1e-6, 1e-6, 1e-6];
    let report = levenberg_marquardt(
        |x| {
            points
                .iter()
                .zip(weights)
                .map(|(p, w)| w * (x[0] * p.nominal_amplitude.powf(x[1]) + x[2] - p.voltage))
                .collect()
        },
        &[c0, nu0, b0],
        &Bounds(vec![(1e-300, f64::INFINITY), (1e-6, f64::INFINITY), (f64::NEG_INFINITY, f64::INFINITY)]),
        &opts,
    );
    if !report.converged {
        return Err(Error::NonConvergence(format!(
            "geophone fit did not converge after {} iterations; parameter trace {:?}",
            report.iterations, report.trace
        )));
    }
    let cal = GeophoneCal { scale: report.x[0], exponent: report.x[1], base: report.x[2] };
    cal.validate()?;
    Ok(cal)
}

/// Fraction of the mode energy lost per cycle, `1 − e^{−2π/Q}`.
pub fn loss_fraction(quality_factor: f64) -> f64 {
    -(-2.0 * PI / quality_factor).exp_m1()
}

/// Power dissipated by the surface mode, W:
/// `P = (ω/16)(1 − e^{−2π/Q}) ρ g R⁴ θ_max²`, with `θ_max` in degrees.
pub fn dissipated_power(cell: &FluidCell, mode: &SurfaceMode, theta_max_deg: f64) -> Result<f64> {
    if !(theta_max_deg >= 0.0) {
        return Err(domain(format!("tilt amplitude must be non-negative, got {theta_max_deg}")));
    }
    if !(mode.quality_factor > 0.0) {
        return Err(domain(format!("quality factor must be positive, got {}", mode.quality_factor)));
    }
    let theta = theta_max_deg * DEG;
    Ok(mode.angular_frequency / 16.0
        * loss_fraction(mode.quality_factor)
        * cell.density
        * cell.gravity
        * cell.radius.powi(4)
        * theta
        * theta)
}

/// `P / θ_max²`, W·deg⁻².
pub fn power_per_tilt_squared(cell: &FluidCell, mode: &SurfaceMode) -> Result<f64> {
    dissipated_power(cell, mode, 1.0)
}

/// Lumped thermal model of the bulk liquid heated by the surface mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalModel {
    /// R_T, K·W⁻¹
    pub thermal_resistance: f64,
    pub q_total: f64,
    pub q_thermal: f64,
    pub cell: FluidCell,
    pub mode: SurfaceMode,
}

impl ThermalModel {
    /// R_T = 0.75 µK/pW and Q = 65 (total) / 375 (thermal) for the default
    /// cell and its meniscus-corrected fundamental.
    pub fn helium3_default() -> Result<Self> {
        let cell = FluidCell::helium3_cell();
        let mode = SurfaceMode::solve(&cell, 1, 65.0, true)?;
        Ok(ThermalModel { thermal_resistance: 0.75e6, q_total: 65.0, q_thermal: 375.0, cell, mode })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.thermal_resistance > 0.0 && self.q_total > 0.0 && self.q_thermal >= self.q_total) {
            return Err(Error::Config(format!(
                "thermal model needs R_T > 0 and Q_thermal >= Q_total > 0, got R_T={}, Q_total={}, Q_thermal={}",
                self.thermal_resistance, self.q_total, self.q_thermal
            )));
        }
        self.cell.validate()
    }

    /// Residual quality factor from `1/Q_res = 1/Q_total − 1/Q_thermal`.
    pub fn q_residual(&self) -> f64 {
        1.0 / (1.0 / self.q_total - 1.0 / self.q_thermal)
    }

    /// Bulk temperature rise per squared tilt, K·deg⁻², if the heat from
    /// losses at quality factor `q` all enters the bulk.
    pub fn heating_per_tilt_squared(&self, q: f64) -> Result<f64> {
        let mode = SurfaceMode { quality_factor: q, ..self.mode };
        Ok(self.thermal_resistance * power_per_tilt_squared(&self.cell, &mode)?)
    }
}

/// Tilt amplitude (deg) that produces the bulk temperature rise `delta_t`
/// (K) when all dissipated power (Q_total) heats the bulk.
pub fn tilt_from_heating(delta_t: f64, model: &ThermalModel) -> Result<f64> {
    if !(delta_t >= 0.0) {
        return Err(domain(format!("temperature rise must be non-negative, got {delta_t}")));
    }
    model.validate()?;
    Ok((delta_t / model.heating_per_tilt_squared(model.q_total)?).sqrt())
}

/// Coupling `g = G/θ_max²` (Hz·deg⁻²) at both ends of the heating model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingBand {
    /// Only the thermal losses (Q_thermal) heat the bulk.
    pub g_low: f64,
    /// All losses (Q_total) heat the bulk.
    pub g_high: f64,
}

impl CouplingBand {
    pub fn ratio(&self) -> f64 {
        self.g_high / self.g_low
    }
}

pub fn coupling_band(modulation: f64, model: &ThermalModel, delta_t: f64) -> Result<CouplingBand> {
    if !(modulation >= 0.0) {
        return Err(domain(format!("modulation G must be non-negative, got {modulation}")));
    }
    if !(delta_t > 0.0) {
        return Err(domain(format!("temperature rise must be positive, got {delta_t}")));
    }
    model.validate()?;
    let g_for = |q: f64| -> Result<f64> {
        let theta_sq = delta_t / model.heating_per_tilt_squared(q)?;
        Ok(modulation / theta_sq)
    };
    Ok(CouplingBand { g_low: g_for(model.q_thermal)?, g_high: g_for(model.q_total)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatFraction {
    /// Share of the temperature-independent loss that bypasses the bulk.
    pub fraction_of_residual: f64,
    /// The same heat as a share of all dissipated power.
    pub fraction_of_total: f64,
}

/// Fraction of the residual loss that must avoid the bulk for the heating
/// calibration to give `g_fit`.
///
/// Bulk heating is interpolated in per-cycle loss fractions:
/// `k_bulk = k_thermal + (1 − f)(k_total − k_thermal)`, and
/// `g(f) = g_high · k_bulk / k_total`, so `f = 0` at `g_high` and `f = 1` at
/// `g_low`.
pub fn surface_heat_fraction(g_fit: f64, model: &ThermalModel, modulation: f64, delta_t: f64) -> Result<HeatFraction> {
    let band = coupling_band(modulation, model, delta_t)?;
    let k_tot = loss_fraction(model.q_total);
    let k_th = loss_fraction(model.q_thermal);
    let tol = 1e-12 * band.g_high;
    if !(g_fit >= band.g_low - tol && g_fit <= band.g_high + tol) {
        return Err(Error::Infeasible(format!(
            "g = {g_fit} Hz/deg^2 lies outside the calibration band [{}, {}]",
            band.g_low, band.g_high
        )));
    }
    if k_tot == k_th {
        return Ok(HeatFraction { fraction_of_residual: 0.0, fraction_of_total: 0.0 });
    }
    let k_bulk = g_fit / band.g_high * k_tot;
    let f = (1.0 - (k_bulk - k_th) / (k_tot - k_th)).clamp(0.0, 1.0);
    Ok(HeatFraction { fraction_of_residual: f, fraction_of_total: f * (k_tot - k_th) / k_tot })
}

/// `θ_max² = slope · A_exc` (deg²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltCalibration {
    pub slope: f64,
}

impl TiltCalibration {
    pub fn theta_max_sq(&self, a_exc: f64) -> f64 {
        self.slope * a_exc
    }

    pub fn theta_max(&self, a_exc: f64) -> f64 {
        self.theta_max_sq(a_exc).sqrt()
    }
}

/// Single-parameter fit through the origin of `(A_exc, θ_max² in deg²)`.
pub fn fit_tilt_calibration(points: &[(f64, f64)]) -> Result<TiltCalibration> {
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    if points.is_empty() || !(sxx > 0.0) {
        return Err(Error::Input("tilt calibration needs at least one non-zero amplitude".into()));
    }
    let slope = sxy / sxx;
    if !(slope > 0.0) {
        return Err(Error::Input(format!("tilt calibration slope {slope} is not positive")));
    }
    Ok(TiltCalibration { slope })
}

/// Thermal resistance of a channel scaled from a reference one:
/// proportional to length and to the inverse square of the radius.
pub fn scale_thermal_resistance(
    reference: f64,
    length_ref: f64,
    length: f64,
    radius_ref: f64,
    radius: f64,
) -> f64 {
    reference * (length / length_ref) * (radius_ref / radius).powi(2)
}

/// Everything needed to turn drive settings and heating into tilt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationBundle {
    pub version: u32,
    pub geophone: GeophoneCal,
    pub thermal: ThermalModel,
    pub tilt: TiltCalibration,
}

impl CalibrationBundle {
    pub const VERSION: u32 = 1;

    pub fn new(geophone: GeophoneCal, thermal: ThermalModel, tilt: TiltCalibration) -> Self {
        CalibrationBundle { version: Self::VERSION, geophone, thermal, tilt }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Input(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: CalibrationBundle = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if b.version != Self::VERSION {
            return Err(Error::Config(format!(
                "calibration bundle version {} is not supported (expected {})",
                b.version,
                Self::VERSION
            )));
        }
        b.geophone.validate()?;
        b.thermal.validate()?;
        Ok(b)
    }
}
