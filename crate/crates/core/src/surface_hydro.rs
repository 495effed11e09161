//! Surface gravity waves of a liquid column in a vertical cylinder.
//!
//! Infinite-depth potential flow with the planar `m = 1` mode
//! `φ = A_φ J_1(k r) e^{k z} sin(ωt) sin(ϕ)`. The wall condition `u_r(R) = 0`
//! fixes `k R` to a root of `J_0 − J_2` (equivalently of `J_1'`).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::special::{bessel_j_orders, find_root, sign_change_brackets};

/// Relative tolerance for the wall-condition root.
pub const WAVENUMBER_REL_TOL: f64 = 1e-8;

/// Depth-to-diameter ratio below which deep-water formulas are flagged.
pub const DEEP_WATER_RATIO: f64 = 3.0;

/// Fluid properties and cell geometry, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidCell {
    /// kg·m⁻³
    pub density: f64,
    /// N·m⁻¹
    pub surface_tension: f64,
    /// m·s⁻²
    pub gravity: f64,
    /// m
    pub radius: f64,
    /// Liquid depth below the free surface, m.
    pub depth: f64,
}

impl FluidCell {
    /// Superfluid ³He at saturated vapour pressure in the 5.85 mm quartz tube.
    pub fn helium3_cell() -> Self {
        FluidCell {
            density: 81.9,
            surface_tension: 155e-6,
            gravity: 9.81,
            radius: 2.925e-3,
            depth: 0.14,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.density > 0.0
            && self.surface_tension >= 0.0
            && self.gravity > 0.0
            && self.radius > 0.0
            && self.depth.is_finite();
        if !ok || !self.density.is_finite() || !self.surface_tension.is_finite() {
            return Err(Error::Config(format!("invalid fluid cell {self:?}")));
        }
        Ok(())
    }

    /// `true` when the column is deep enough (depth/diameter ≥ 3) for the
    /// infinite-depth formulas to be quantitatively reliable.
    pub fn deep_water_valid(&self) -> bool {
        self.depth / (2.0 * self.radius) >= DEEP_WATER_RATIO
    }
}

/// A solved surface mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMode {
    /// m⁻¹
    pub wavenumber: f64,
    /// rad·s⁻¹
    pub angular_frequency: f64,
    pub quality_factor: f64,
    pub mode_index: usize,
    /// Cell radius the mode was solved for, m.
    pub radius: f64,
}

/// Amplitude and phase of a surface oscillation.
///
/// `amplitude` is the surface-height amplitude `A` (m) in
/// `h = A J_1(k r) sin(ωt + phase) sin ϕ`, so that `θ_max = A k / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceState {
    pub amplitude: f64,
    pub phase: f64,
    pub time: f64,
}

impl SurfaceState {
    /// State whose axis tilt amplitude is `theta_max` (rad).
    pub fn from_tilt(mode: &SurfaceMode, theta_max: f64, time: f64) -> Self {
        SurfaceState { amplitude: 2.0 * theta_max / mode.wavenumber, phase: 0.0, time }
    }

    fn sin_wt(&self, mode: &SurfaceMode) -> f64 {
        (mode.angular_frequency * self.time + self.phase).sin()
    }
}

/// The `mode_index`-th positive wavenumber with `J_0(kR) = J_2(kR)`.
pub fn solve_mode_wavenumber(cell: &FluidCell, mode_index: usize) -> Result<f64> {
    cell.validate()?;
    if mode_index == 0 {
        return Err(domain("mode index starts at 1"));
    }
    if cell.depth <= cell.radius {
        return Err(domain(format!(
            "depth {} m does not exceed radius {} m; deep-container dispersion does not apply",
            cell.depth, cell.radius
        )));
    }
    let wall = |x: f64| {
        let j = bessel_j_orders(2, x);
        j[0] - j[2]
    };
    // Consecutive roots of J_1' are separated by roughly π; 40 grid points
    // per unit leaves a single root in each cell.
    let hi = PI * (mode_index as f64 + 1.0) + 2.0;
    let brackets = sign_change_brackets(wall, 0.5, hi, (hi * 40.0) as usize);
    let &(a, b) = brackets
        .get(mode_index - 1)
        .ok_or_else(|| Error::NonConvergence(format!("mode {mode_index} not bracketed on (0.5, {hi})")))?;
    let root = find_root(wall, a, b, WAVENUMBER_REL_TOL * 1e-4, 200).map_err(|e| {
        Error::NonConvergence(format!("wall condition root in [{a}, {b}]: {e}"))
    })?;
    Ok(root.x / cell.radius)
}

/// Gravity-capillary dispersion, optionally with the meniscus correction.
pub fn dispersion(cell: &FluidCell, wavenumber: f64, meniscus: bool) -> Result<f64> {
    cell.validate()?;
    if !(wavenumber > 0.0) {
        return Err(domain(format!("wavenumber must be positive, got {wavenumber}")));
    }
    let g_rho = cell.gravity * cell.density;
    let omega_sq = cell.gravity * wavenumber * (1.0 + cell.surface_tension * wavenumber.powi(2) / g_rho);
    if !meniscus {
        return Ok(omega_sq.sqrt());
    }
    let factor = 1.0 - 2.0 * cell.surface_tension * wavenumber / (g_rho * cell.radius);
    if factor <= 0.0 {
        return Err(domain(format!("meniscus factor {factor} is not positive")));
    }
    Ok((omega_sq * factor).sqrt())
}

impl SurfaceMode {
    /// Solve wavenumber and frequency of the given mode.
    pub fn solve(cell: &FluidCell, mode_index: usize, quality_factor: f64, meniscus: bool) -> Result<Self> {
        if !(quality_factor > 0.0) {
            return Err(domain(format!("quality factor must be positive, got {quality_factor}")));
        }
        let wavenumber = solve_mode_wavenumber(cell, mode_index)?;
        let angular_frequency = dispersion(cell, wavenumber, meniscus)?;
        Ok(SurfaceMode { wavenumber, angular_frequency, quality_factor, mode_index, radius: cell.radius })
    }

    pub fn frequency_hz(&self) -> f64 {
        self.angular_frequency / (2.0 * PI)
    }

    /// Energy damping rate `γ = ω_m / Q`, rad·s⁻¹.
    pub fn damping_rate(&self) -> f64 {
        self.angular_frequency / self.quality_factor
    }

    /// Tilt amplitude at drive frequency `omega_exc` for a mode whose
    /// on-resonance tilt amplitude is `peak_tilt` (driven damped oscillator).
    pub fn tilt_response(&self, omega_exc: f64, peak_tilt: f64) -> f64 {
        let wm = self.angular_frequency;
        let gamma = self.damping_rate();
        let den = ((wm * wm - omega_exc * omega_exc).powi(2) + (gamma * omega_exc).powi(2)).sqrt();
        peak_tilt * gamma * wm / den
    }

    /// Velocity-potential amplitude (m²·s⁻¹) belonging to a tilt amplitude.
    pub fn potential_amplitude(&self, theta_max: f64) -> f64 {
        self.angular_frequency * theta_max / self.wavenumber.powi(2)
    }
}

/// Cylindrical velocity components `(u_r, u_ϕ, u_z)`, m·s⁻¹.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Velocity {
    pub radial: f64,
    pub azimuthal: f64,
    pub vertical: f64,
}

impl Velocity {
    pub fn norm(&self) -> f64 {
        (self.radial.powi(2) + self.azimuthal.powi(2) + self.vertical.powi(2)).sqrt()
    }
}

fn check_radius(mode: &SurfaceMode, r: f64) -> Result<()> {
    // allow round-off at the wall
    if !(r >= 0.0) || r > mode.radius * (1.0 + 1e-12) {
        return Err(domain(format!("r = {r} outside [0, {}]", mode.radius)));
    }
    Ok(())
}

/// Flow field `u = −∇φ` at `(r, ϕ, z)`.
///
/// The potential amplitude is derived from the state's tilt amplitude,
/// `A_φ = ω θ_max / k²`.
pub fn velocity_field(mode: &SurfaceMode, state: &SurfaceState, r: f64, phi: f64, z: f64) -> Result<Velocity> {
    check_radius(mode, r)?;
    if z > 0.0 {
        return Err(domain(format!("z = {z} is above the free surface")));
    }
    let k = mode.wavenumber;
    let theta_max = state.amplitude * k / 2.0;
    let a = mode.potential_amplitude(theta_max);
    let j = bessel_j_orders(2, k * r);
    let common = a * (k * z).exp() * state.sin_wt(mode);
    // J_1(kr)/r → k/2 on the axis
    let j1_over_r = if k * r < 1e-8 { k / 2.0 } else { j[1] / r };
    Ok(Velocity {
        radial: -0.5 * common * k * (j[0] - j[2]) * phi.sin(),
        azimuthal: -common * j1_over_r * phi.cos(),
        vertical: -common * k * j[1] * phi.sin(),
    })
}

/// Free-surface elevation `h(r, ϕ, t)`, m.
pub fn surface_height(mode: &SurfaceMode, state: &SurfaceState, r: f64, phi: f64) -> Result<f64> {
    check_radius(mode, r)?;
    let j = bessel_j_orders(1, mode.wavenumber * r);
    Ok(state.amplitude * j[1] * state.sin_wt(mode) * phi.sin())
}

/// Tilt of the surface normal at the axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisTilt {
    /// Instantaneous tilt θ(t), rad.
    pub theta: f64,
    /// `θ_max = A k / 2`, rad.
    pub theta_max: f64,
    /// `false` when θ_max ≥ 0.1 rad and the small-angle form is unreliable.
    pub small_angle: bool,
}

pub const SMALL_ANGLE_LIMIT: f64 = 0.1;

pub fn axis_tilt(mode: &SurfaceMode, state: &SurfaceState) -> AxisTilt {
    let theta_max = state.amplitude * mode.wavenumber / 2.0;
    AxisTilt {
        theta: theta_max * state.sin_wt(mode),
        theta_max,
        small_angle: theta_max.abs() < SMALL_ANGLE_LIMIT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cell() -> FluidCell {
        FluidCell { density: 1000.0, surface_tension: 0.0, gravity: 9.81, radius: 1.0, depth: 10.0 }
    }

    #[test]
    fn first_root_unit_radius() {
        let k = solve_mode_wavenumber(&unit_cell(), 1).unwrap();
        assert!((k - 1.8412).abs() < 1e-4);
        assert!((k - 1.841_183_781_340_659).abs() < 1e-10);
    }

    #[test]
    fn second_root_matches_scan() {
        // brute-force scan of J0 − J2 on (1.9, 10) with a fine grid
        let f = |x: f64| crate::special::j0(x) - crate::special::j2(x);
        let n = 200_000;
        let h = (10.0 - 1.9) / n as f64;
        let mut scan_root = f64::NAN;
        for i in 0..n {
            let (a, b) = (1.9 + i as f64 * h, 1.9 + (i + 1) as f64 * h);
            if f(a).signum() != f(b).signum() {
                scan_root = a - f(a) * (b - a) / (f(b) - f(a));
                break;
            }
        }
        let k2 = solve_mode_wavenumber(&unit_cell(), 2).unwrap();
        assert!((k2 - scan_root).abs() < 1e-8, "{k2} vs {scan_root}");
        assert!((k2 - 5.331_442_773_525).abs() < 1e-9);
    }

    #[test]
    fn reference_cell_wavenumber() {
        let k = solve_mode_wavenumber(&FluidCell::helium3_cell(), 1).unwrap();
        assert!((k - 629.46).abs() < 0.01, "{k}");
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(solve_mode_wavenumber(&unit_cell(), 0).is_err());
        let shallow = FluidCell { depth: 0.5, ..unit_cell() };
        assert!(matches!(solve_mode_wavenumber(&shallow, 1), Err(Error::Domain(_))));
        let bad = FluidCell { density: -1.0, ..unit_cell() };
        assert!(matches!(solve_mode_wavenumber(&bad, 1), Err(Error::Config(_))));
        assert!(dispersion(&unit_cell(), 0.0, false).is_err());
    }

    #[test]
    fn validity_flag_for_moderate_depth() {
        let c = FluidCell { depth: 4.0, ..unit_cell() };
        assert!(!c.deep_water_valid());
        assert!(solve_mode_wavenumber(&c, 1).is_ok());
        assert!(FluidCell::helium3_cell().deep_water_valid());
    }

    #[test]
    fn pure_gravity_dispersion() {
        let w = dispersion(&unit_cell(), 2.5, false).unwrap();
        assert_eq!(w, (9.81f64 * 2.5).sqrt());
    }

    #[test]
    fn reference_cell_frequencies() {
        let cell = FluidCell::helium3_cell();
        let k = solve_mode_wavenumber(&cell, 1).unwrap();
        let f_men = dispersion(&cell, k, true).unwrap() / (2.0 * PI);
        let f_bare = dispersion(&cell, k, false).unwrap() / (2.0 * PI);
        assert!((f_men - 12.4).abs() < 0.1, "{f_men}");
        // direct evaluation: sqrt(g k (1 + σk²/(gρ)))/2π
        let g_rho = 9.81 * 81.9;
        let expected = (9.81 * k * (1.0 + 155e-6 * k * k / g_rho)).sqrt() / (2.0 * PI);
        assert!((f_bare - expected).abs() < 1e-12);
        assert!((f_bare - 12.976).abs() < 1e-3, "{f_bare}");
    }

    #[test]
    fn meniscus_factor_must_stay_positive() {
        let cell = FluidCell { surface_tension: 1.0, density: 1.0, gravity: 1.0, radius: 0.1, depth: 1.0 };
        assert!(matches!(dispersion(&cell, 1.0, true), Err(Error::Domain(_))));
    }

    fn reference_mode() -> SurfaceMode {
        SurfaceMode::solve(&FluidCell::helium3_cell(), 1, 65.0, true).unwrap()
    }

    #[test]
    fn no_radial_flow_at_wall() {
        let mode = reference_mode();
        let state = SurfaceState::from_tilt(&mode, 0.01, 0.02);
        for &phi in &[0.3, 1.2, 2.0] {
            let u_wall = velocity_field(&mode, &state, mode.radius, phi, -1e-4).unwrap();
            let u_mid = velocity_field(&mode, &state, 0.5 * mode.radius, phi, -1e-4).unwrap();
            assert!(u_wall.radial.abs() < 1e-8 * u_mid.norm(), "{u_wall:?}");
        }
    }

    #[test]
    fn zero_amplitude_zero_flow() {
        let mode = reference_mode();
        let state = SurfaceState { amplitude: 0.0, phase: 0.0, time: 0.3 };
        let u = velocity_field(&mode, &state, 1e-3, 0.7, -1e-3).unwrap();
        assert_eq!(u.norm(), 0.0);
    }

    #[test]
    fn axis_limit_of_flow() {
        let mode = reference_mode();
        let t = PI / 2.0 / mode.angular_frequency;
        let state = SurfaceState::from_tilt(&mode, 0.01, t);
        let r = 1e-6 * mode.radius;
        let u = velocity_field(&mode, &state, r, PI / 2.0, 0.0).unwrap();
        let k = mode.wavenumber;
        let a = mode.potential_amplitude(0.01);
        // series: J1(x) ≈ x/2, J0 − J2 ≈ 1
        assert!((u.vertical - (-a * k * (k * r / 2.0))).abs() < 1e-9 * a * k * k * r);
        assert!((u.radial - (-a * k / 2.0)).abs() < 1e-9 * a * k);
        assert!(u.vertical.abs() < 1e-5 * u.radial.abs());
    }

    #[test]
    fn flow_is_divergence_free() {
        let mode = reference_mode();
        let state = SurfaceState::from_tilt(&mode, 0.02, 0.011);
        let k = mode.wavenumber;
        let lambda = 2.0 * PI / k;
        let h = 1e-5 / k;
        let points = [(0.3, 0.4, -0.1), (0.7, 2.1, -0.5), (0.5, 4.0, -0.02), (0.9, 5.5, -1.3)];
        for &(rf, phi, zf) in &points {
            let (r, z) = (rf * mode.radius, zf / k);
            let u = |r: f64, phi: f64, z: f64| velocity_field(&mode, &state, r, phi, z).unwrap();
            let d_rur = ((r + h) * u(r + h, phi, z).radial - (r - h) * u(r - h, phi, z).radial) / (2.0 * h * r);
            let d_uphi = (u(r, phi + 1e-5, z).azimuthal - u(r, phi - 1e-5, z).azimuthal) / (2e-5 * r);
            let d_uz = (u(r, phi, z + h).vertical - u(r, phi, z - h).vertical) / (2.0 * h);
            let div = d_rur + d_uphi + d_uz;
            let mag = u(r, phi, z).norm().max(1e-300);
            assert!(div.abs() < 1e-6 * mag / lambda, "div {div:e} at {rf},{phi},{zf}");
        }
    }

    #[test]
    fn height_edge_cases() {
        let mode = reference_mode();
        let state = SurfaceState::from_tilt(&mode, 0.01, 0.013);
        assert_eq!(surface_height(&mode, &state, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(surface_height(&mode, &state, 1e-3, 0.0).unwrap(), 0.0);
        assert!(surface_height(&mode, &state, 2.0 * mode.radius, 0.0).is_err());
        assert!(velocity_field(&mode, &state, 1e-3, 0.0, 1e-3).is_err());
    }

    #[test]
    fn surface_volume_is_conserved() {
        // Gauss–Legendre-free check: composite Simpson in r and ϕ
        let mode = reference_mode();
        let state = SurfaceState::from_tilt(&mode, 0.01, 0.013);
        let (nr, nphi) = (400, 256);
        let mut total = 0.0;
        let mut abs_total = 0.0;
        for i in 0..=nr {
            let r = mode.radius * i as f64 / nr as f64;
            let wr = if i == 0 || i == nr { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            for j in 0..nphi {
                let phi = 2.0 * PI * j as f64 / nphi as f64;
                let h = surface_height(&mode, &state, r, phi).unwrap();
                total += wr * h * r;
                abs_total += wr * h.abs() * r;
            }
        }
        assert!(total.abs() < 1e-6 * abs_total);
    }

    #[test]
    fn tilt_matches_height_slope() {
        let mode = reference_mode();
        let state = SurfaceState::from_tilt(&mode, 0.015, 0.017);
        let tilt = axis_tilt(&mode, &state);
        assert!((tilt.theta_max - 0.015).abs() < 1e-15);
        assert!(tilt.small_angle);
        let r = 1e-4 * mode.radius;
        let dr = 1e-9;
        let slope = (surface_height(&mode, &state, r + dr, PI / 2.0).unwrap()
            - surface_height(&mode, &state, r - dr, PI / 2.0).unwrap())
            / (2.0 * dr);
        assert!((slope.atan() - tilt.theta).abs() < 1e-4 * tilt.theta.abs());
    }

    #[test]
    fn tilt_at_quarter_period() {
        let mode = reference_mode();
        let t = PI / 2.0 / mode.angular_frequency;
        let state = SurfaceState { amplitude: 1e-5, phase: 0.0, time: t };
        let tilt = axis_tilt(&mode, &state);
        assert!((tilt.theta - 1e-5 * mode.wavenumber / 2.0).abs() < 1e-15);
        let zero = axis_tilt(&mode, &SurfaceState { amplitude: 0.0, ..state });
        assert_eq!(zero.theta, 0.0);
        let big = axis_tilt(&mode, &SurfaceState { amplitude: 1e-3, ..state });
        assert!(!big.small_angle);
    }

    #[test]
    fn dispersion_monotone_in_k() {
        let cell = FluidCell::helium3_cell();
        let mut prev = 0.0;
        for i in 1..200 {
            let w = dispersion(&cell, i as f64 * 10.0, false).unwrap();
            assert!(w > prev);
            prev = w;
        }
    }

    #[test]
    fn response_peaks_at_resonance() {
        let mode = reference_mode();
        let wm = mode.angular_frequency;
        let peak = mode.tilt_response(wm, 0.01);
        assert!((peak - 0.01).abs() < 1e-4 * 0.01);
        assert!(mode.tilt_response(1.05 * wm, 0.01) < 0.5 * peak);
    }
}
