//! Rig geometry, material constants and the operator command.
//!
//! Everything here is SI. The on-disk representation (`ParamsFile`,
//! `ControlFile`) uses mm / MPa / g / deg and is converted on load.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ModelError};
use crate::units::*;

/// Default upper bound on tube pressure, the highest value the pouring
/// sequence uses.
pub const DEFAULT_MAX_PRESSURE: f64 = 0.3e6;

/// Geometry and material constants of the rig.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorParams {
    pub inner_diameter: f64,
    pub outer_diameter: f64,
    /// Length of the actuation part (whole tube).
    pub rest_length: f64,
    pub youngs_modulus: f64,
    pub actuation_mass: f64,
    pub gravity: f64,
    pub top_shaft_spacing: f64,
    pub bottom_shaft_spacing: f64,
    /// Degrees.
    pub dip_angle: f64,
    /// Distance of the tracked marker point from the motor frame in the
    /// undeformed state. The closed-form C-bend formulas use this as their
    /// arc length.
    pub marker_offset: f64,
}

impl Default for ActuatorParams {
    fn default() -> Self {
        ActuatorParams {
            inner_diameter: 7.0 * MM,
            outer_diameter: 10.0 * MM,
            rest_length: 300.0 * MM,
            youngs_modulus: 1.15 * MPA,
            actuation_mass: 78.0 * GRAM,
            gravity: 9.81,
            top_shaft_spacing: 38.0 * MM,
            bottom_shaft_spacing: 15.0 * MM,
            dip_angle: 87.648,
            marker_offset: 290.0 * MM,
        }
    }
}

impl ActuatorParams {
    /// Tube wall cross-section.
    pub fn cross_section_area(&self) -> f64 {
        PI * (self.outer_diameter.powi(2) - self.inner_diameter.powi(2)) / 4.0
    }

    /// Area the internal pressure acts on.
    pub fn bore_area(&self) -> f64 {
        PI * self.inner_diameter.powi(2) / 4.0
    }

    /// Second moment of area of the tube wall.
    pub fn second_moment(&self) -> f64 {
        PI * (self.outer_diameter.powi(4) - self.inner_diameter.powi(4)) / 64.0
    }

    /// Arc length used by the closed-form C-bend model (the marker length).
    pub fn arc_length(&self) -> f64 {
        self.marker_offset
    }

    pub fn with_arc_length(mut self, length: f64) -> Self {
        self.marker_offset = length;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("inner_diameter", self.inner_diameter),
            ("outer_diameter", self.outer_diameter),
            ("rest_length", self.rest_length),
            ("youngs_modulus", self.youngs_modulus),
            ("actuation_mass", self.actuation_mass),
            ("gravity", self.gravity),
            ("top_shaft_spacing", self.top_shaft_spacing),
            ("bottom_shaft_spacing", self.bottom_shaft_spacing),
            ("dip_angle", self.dip_angle),
            ("marker_offset", self.marker_offset),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
        }
        if self.inner_diameter <= 0.0 || self.outer_diameter <= self.inner_diameter {
            return Err(ModelError::Geometry(format!(
                "need 0 < inner diameter < outer diameter, got {} / {}",
                self.inner_diameter, self.outer_diameter
            )));
        }
        for (name, value) in [
            ("rest_length", self.rest_length),
            ("youngs_modulus", self.youngs_modulus),
            ("marker_offset", self.marker_offset),
        ] {
            if value <= 0.0 {
                return Err(ModelError::NotPositive { name, value });
            }
        }
        if self.actuation_mass < 0.0 {
            return Err(ModelError::Geometry("actuation mass is negative".into()));
        }
        if self.top_shaft_spacing < 0.0 || self.bottom_shaft_spacing < 0.0 {
            return Err(ModelError::Geometry("negative shaft spacing".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let file: ParamsFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<inline>".into(),
            message: e.to_string(),
        })?;
        let params = ActuatorParams::from(file);
        params.validate()?;
        Ok(params)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ParamsFile::from(*self)).expect("params serialize")
    }
}

/// External (mm / MPa / g / deg) form of [`ActuatorParams`]. Missing keys
/// fall back to the canonical defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsFile {
    pub inner_diameter_mm: f64,
    pub outer_diameter_mm: f64,
    pub rest_length_mm: f64,
    pub youngs_modulus_mpa: f64,
    pub actuation_mass_g: f64,
    pub gravity_m_s2: f64,
    pub top_shaft_spacing_mm: f64,
    pub bottom_shaft_spacing_mm: f64,
    pub dip_angle_deg: f64,
    pub marker_offset_mm: f64,
}

impl Default for ParamsFile {
    fn default() -> Self {
        ActuatorParams::default().into()
    }
}

impl From<ActuatorParams> for ParamsFile {
    fn from(p: ActuatorParams) -> Self {
        ParamsFile {
            inner_diameter_mm: m_to_mm(p.inner_diameter),
            outer_diameter_mm: m_to_mm(p.outer_diameter),
            rest_length_mm: m_to_mm(p.rest_length),
            youngs_modulus_mpa: pa_to_mpa(p.youngs_modulus),
            actuation_mass_g: kg_to_g(p.actuation_mass),
            gravity_m_s2: p.gravity,
            top_shaft_spacing_mm: m_to_mm(p.top_shaft_spacing),
            bottom_shaft_spacing_mm: m_to_mm(p.bottom_shaft_spacing),
            dip_angle_deg: p.dip_angle,
            marker_offset_mm: m_to_mm(p.marker_offset),
        }
    }
}

impl From<ParamsFile> for ActuatorParams {
    fn from(f: ParamsFile) -> Self {
        ActuatorParams {
            inner_diameter: mm_to_m(f.inner_diameter_mm),
            outer_diameter: mm_to_m(f.outer_diameter_mm),
            rest_length: mm_to_m(f.rest_length_mm),
            youngs_modulus: mpa_to_pa(f.youngs_modulus_mpa),
            actuation_mass: g_to_kg(f.actuation_mass_g),
            gravity: f.gravity_m_s2,
            top_shaft_spacing: mm_to_m(f.top_shaft_spacing_mm),
            bottom_shaft_spacing: mm_to_m(f.bottom_shaft_spacing_mm),
            dip_angle: f.dip_angle_deg,
            marker_offset: mm_to_m(f.marker_offset_mm),
        }
    }
}

/// The operator's command. Angles in degrees, pressures in Pa, lengths in m.
///
/// Twist angles are positive when the tube top is rotated to the left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub theta_left: f64,
    pub theta_right: f64,
    pub pressure_left: f64,
    pub pressure_right: f64,
    pub thread_length_left: f64,
    pub thread_length_right: f64,
}

impl ControlInput {
    /// Untwisted, unpressurized, threads at the tube rest length.
    pub fn relaxed(params: &ActuatorParams) -> Self {
        ControlInput {
            theta_left: 0.0,
            theta_right: 0.0,
            pressure_left: 0.0,
            pressure_right: 0.0,
            thread_length_left: params.rest_length,
            thread_length_right: params.rest_length,
        }
    }

    pub fn with_twist(mut self, left: f64, right: f64) -> Self {
        self.theta_left = left;
        self.theta_right = right;
        self
    }

    pub fn with_pressures(mut self, left: f64, right: f64) -> Self {
        self.pressure_left = left;
        self.pressure_right = right;
        self
    }

    pub fn with_threads(mut self, left: f64, right: f64) -> Self {
        self.thread_length_left = left;
        self.thread_length_right = right;
        self
    }

    /// Swap the tubes and mirror the twist: `(θ1, θ2, p1, p2) -> (-θ2, -θ1, p2, p1)`.
    pub fn mirrored(&self) -> Self {
        ControlInput {
            theta_left: -self.theta_right,
            theta_right: -self.theta_left,
            pressure_left: self.pressure_right,
            pressure_right: self.pressure_left,
            thread_length_left: self.thread_length_right,
            thread_length_right: self.thread_length_left,
        }
    }

    pub fn thetas(&self) -> [f64; 2] {
        [self.theta_left, self.theta_right]
    }

    pub fn pressures(&self) -> [f64; 2] {
        [self.pressure_left, self.pressure_right]
    }

    pub fn thread_lengths(&self) -> [f64; 2] {
        [self.thread_length_left, self.thread_length_right]
    }

    pub fn check_finite(&self) -> Result<(), ModelError> {
        let fields = [
            ("theta_left", self.theta_left),
            ("theta_right", self.theta_right),
            ("pressure_left", self.pressure_left),
            ("pressure_right", self.pressure_right),
            ("thread_length_left", self.thread_length_left),
            ("thread_length_right", self.thread_length_right),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
        }
        Ok(())
    }

    pub fn validate(&self, max_pressure: f64) -> Result<(), ModelError> {
        self.check_finite()?;
        for (side, p) in [("left", self.pressure_left), ("right", self.pressure_right)] {
            if !(0.0..=max_pressure).contains(&p) {
                return Err(ModelError::InvalidControl(format!(
                    "{side} pressure {:.4} MPa outside [0, {:.4}] MPa",
                    pa_to_mpa(p),
                    pa_to_mpa(max_pressure)
                )));
            }
        }
        for (side, l) in [
            ("left", self.thread_length_left),
            ("right", self.thread_length_right),
        ] {
            if l < 0.0 {
                return Err(ModelError::InvalidControl(format!(
                    "{side} thread length is negative"
                )));
            }
        }
        Ok(())
    }

    /// Linear blend towards `target`; `t = 0` gives `self`, `t = 1` gives `target`.
    pub fn lerp(&self, target: &ControlInput, t: f64) -> ControlInput {
        let mix = |a: f64, b: f64| if t >= 1.0 { b } else { a + (b - a) * t };
        ControlInput {
            theta_left: mix(self.theta_left, target.theta_left),
            theta_right: mix(self.theta_right, target.theta_right),
            pressure_left: mix(self.pressure_left, target.pressure_left),
            pressure_right: mix(self.pressure_right, target.pressure_right),
            thread_length_left: mix(self.thread_length_left, target.thread_length_left),
            thread_length_right: mix(self.thread_length_right, target.thread_length_right),
        }
    }
}

/// External (deg / MPa / mm) form of [`ControlInput`]; used by config files
/// and the service wire format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlDto {
    pub theta_left_deg: f64,
    pub theta_right_deg: f64,
    pub p_left_mpa: f64,
    pub p_right_mpa: f64,
    pub thread_left_mm: f64,
    pub thread_right_mm: f64,
}

impl From<ControlInput> for ControlDto {
    fn from(c: ControlInput) -> Self {
        ControlDto {
            theta_left_deg: c.theta_left,
            theta_right_deg: c.theta_right,
            p_left_mpa: pa_to_mpa(c.pressure_left),
            p_right_mpa: pa_to_mpa(c.pressure_right),
            thread_left_mm: m_to_mm(c.thread_length_left),
            thread_right_mm: m_to_mm(c.thread_length_right),
        }
    }
}

impl From<ControlDto> for ControlInput {
    fn from(c: ControlDto) -> Self {
        ControlInput {
            theta_left: c.theta_left_deg,
            theta_right: c.theta_right_deg,
            pressure_left: mpa_to_pa(c.p_left_mpa),
            pressure_right: mpa_to_pa(c.p_right_mpa),
            thread_length_left: mm_to_m(c.thread_left_mm),
            thread_length_right: mm_to_m(c.thread_right_mm),
        }
    }
}
