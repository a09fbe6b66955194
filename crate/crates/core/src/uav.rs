//! Two-dimensional point-mass UAV model in the vertical plane.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Bound on the attack angle, rad.
pub const ALPHA_MAX: f64 = PI / 18.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UavParameters {
    /// Thrust-specific fuel consumption, kg/(s N).
    pub sigma: f64,
    /// Air density, kg/m^3.
    pub rho: f64,
    /// Wing planform area, m^2.
    #[serde(rename = "S")]
    pub wing_area: f64,
    #[serde(rename = "C_D0")]
    pub cd0: f64,
    #[serde(rename = "C_L0")]
    pub cl0: f64,
    #[serde(rename = "C_Lalpha")]
    pub cl_alpha: f64,
    /// Mass, kg.
    #[serde(rename = "m")]
    pub mass: f64,
    pub g: f64,
    /// Oswald efficiency.
    pub e0: f64,
    #[serde(rename = "AR")]
    pub aspect_ratio: f64,
    /// Thrust bound, N.
    #[serde(rename = "T_max")]
    pub t_max: f64,
    pub x0: f64,
    pub z0: f64,
}

impl Default for UavParameters {
    fn default() -> Self {
        Self {
            sigma: 0.012,
            rho: 1.2682,
            wing_area: 0.55,
            cd0: 0.03,
            cl0: 0.28,
            cl_alpha: 3.45,
            mass: 13.5,
            g: 9.81,
            e0: 0.9,
            aspect_ratio: 15.2445,
            t_max: 140.0,
            x0: 0.0,
            z0: 4000.0,
        }
    }
}

impl UavParameters {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma", self.sigma),
            ("rho", self.rho),
            ("S", self.wing_area),
            ("m", self.mass),
            ("g", self.g),
            ("e0", self.e0),
            ("AR", self.aspect_ratio),
            ("T_max", self.t_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [
            ("C_D0", self.cd0),
            ("C_L0", self.cl0),
            ("C_Lalpha", self.cl_alpha),
            ("x0", self.x0),
            ("z0", self.z0),
        ] {
            if !v.is_finite() {
                return Err(invalid(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        self.sigma / (2.0 * PI)
    }

    pub fn c2(&self) -> f64 {
        0.5 * self.rho * self.wing_area
    }

    pub fn c3(&self) -> f64 {
        self.c2() / self.mass
    }

    pub fn c4(&self) -> f64 {
        PI * self.e0 * self.aspect_ratio
    }

    /// `C_L0 + C_Lα α`.
    pub fn lift_coefficient(&self, alpha: f64) -> f64 {
        self.cl0 + self.cl_alpha * alpha
    }

    pub fn drag_coefficient(&self, alpha: f64) -> f64 {
        let cl = self.lift_coefficient(alpha);
        self.cd0 + cl * cl / self.c4()
    }

    /// Attack angle giving unit load factor at speed `v`, unclipped.
    pub fn trim_alpha(&self, v: f64) -> Result<f64> {
        check_speed(v)?;
        Ok((self.mass * self.g / (self.c2() * v * v) - self.cl0) / self.cl_alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightState {
    pub x: f64,
    pub z: f64,
    pub gamma: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub alpha: f64,
    pub thrust: f64,
}

impl ControlInput {
    pub fn is_admissible(&self, params: &UavParameters) -> bool {
        self.alpha.abs() <= ALPHA_MAX && (0.0..=params.t_max).contains(&self.thrust)
    }
}

fn check_speed(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("speed must be positive, got {v}")))
    }
}

pub fn lift(params: &UavParameters, v: f64, alpha: f64) -> Result<f64> {
    check_speed(v)?;
    Ok(params.c2() * params.lift_coefficient(alpha) * v * v)
}

pub fn drag(params: &UavParameters, v: f64, alpha: f64) -> Result<f64> {
    check_speed(v)?;
    Ok(params.c2() * params.drag_coefficient(alpha) * v * v)
}

/// `(∂D/∂V, ∂D/∂α)`.
pub fn drag_partials(params: &UavParameters, v: f64, alpha: f64) -> Result<(f64, f64)> {
    check_speed(v)?;
    let c2 = params.c2();
    let cl = params.lift_coefficient(alpha);
    Ok((
        2.0 * c2 * params.drag_coefficient(alpha) * v,
        2.0 * c2 * cl * params.cl_alpha / params.c4() * v * v,
    ))
}

pub fn load_factor(params: &UavParameters, v: f64, alpha: f64) -> Result<f64> {
    Ok(lift(params, v, alpha)? / (params.mass * params.g))
}

/// Time derivative of `(x, z, γ, V)`.
pub fn state_derivative(params: &UavParameters, state: &FlightState, u: &ControlInput) -> Result<FlightState> {
    let v = state.v;
    let n = load_factor(params, v, u.alpha)?;
    let d = drag(params, v, u.alpha)?;
    let (s, c) = state.gamma.sin_cos();
    Ok(FlightState {
        x: v * c,
        z: v * s,
        gamma: params.g / v * (n - c),
        v: (u.thrust - d) / params.mass - params.g * s,
    })
}

/// Smoothed bang-bang thrust law on `[0, 140]` N driven by the speed costate.
pub fn saturation_thrust(sigma: f64, mass: f64, t_f: f64, lambda_v: f64, s_m: f64) -> Result<f64> {
    if !(s_m > 0.0) {
        return Err(invalid(format!("smoothing factor must be positive, got {s_m}")));
    }
    let arg = -s_m * (sigma + lambda_v * t_f / mass) + PI / 2.0;
    Ok(70.0 + 140.0 / PI * arg.atan())
}

/// Relative difference `|a - b|` scaled by the mean magnitude; zero when both vanish.
pub fn symmetric_relative_change(a: f64, b: f64) -> f64 {
    let scale = 0.5 * (a.abs() + b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub s_m: f64,
    pub phi: f64,
    pub phi_perturbed: f64,
    pub relative_change: f64,
    /// Output relative change divided by input relative change.
    pub amplification: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub sigma: f64,
    pub mass: f64,
    pub t_f: f64,
    pub lambda: f64,
    pub lambda_perturbed: f64,
    pub input_relative_change: f64,
    pub rows: Vec<SensitivityRow>,
}

pub const DEFAULT_SMOOTHING_FACTORS: [f64; 6] = [1e5, 1e6, 1e7, 1e8, 1e9, 1e10];
pub const DEFAULT_LAMBDA_PAIR: (f64, f64) = (-0.01626, -0.01627);
/// Period assumed for the thrust-law sensitivity study, s.
pub const SENSITIVITY_PERIOD: f64 = 9.96;

pub fn sensitivity_table(
    sigma: f64,
    mass: f64,
    t_f: f64,
    lambda_pair: (f64, f64),
    s_m_list: &[f64],
) -> Result<SensitivityTable> {
    if s_m_list.is_empty() {
        return Err(invalid("need at least one smoothing factor"));
    }
    let (la, lb) = lambda_pair;
    let input = symmetric_relative_change(la, lb);
    let rows = s_m_list
        .iter()
        .map(|&s_m| {
            let phi = saturation_thrust(sigma, mass, t_f, la, s_m)?;
            let phi_perturbed = saturation_thrust(sigma, mass, t_f, lb, s_m)?;
            let relative_change = symmetric_relative_change(phi, phi_perturbed);
            Ok(SensitivityRow {
                s_m,
                phi,
                phi_perturbed,
                relative_change,
                amplification: if input > 0.0 { relative_change / input } else { 0.0 },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityTable {
        sigma,
        mass,
        t_f,
        lambda: la,
        lambda_perturbed: lb,
        input_relative_change: input,
        rows,
    })
}
