//! Quasi-static equilibrium of the two-tube rig as a pair of discretized
//! elastic rods coupled by penalties (threads, sleeve, bottom connector).

pub mod ad;
mod energy;
pub mod export;
mod metrics;
mod solver;
mod state;
pub mod vec3;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{ConfigError, ModelError};
use crate::params::ActuatorParams;

pub use energy::{energy_breakdown, energy_gradient, total_energy, EnergyBreakdown};
pub use metrics::{shape_metrics, ShapeMetrics};
pub use solver::{
    simulate_ramp, solve_equilibrium, solve_equilibrium_observed, RampOutcome, SolveProgress,
};
pub use state::{build_rig, ConnectorPose, Diagnostics, RigModel, RigState, Triad, Tube};

#[derive(Debug, Error)]
pub enum RodError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid solver options: {0}")]
    Options(String),
    #[error("energy is not finite; the state diverged")]
    Diverged,
    #[error("state does not match the rig discretization: {0}")]
    Layout(String),
    #[error("pressure schedule is not monotone at entry {0}")]
    NonMonotoneSchedule(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AxialLaw {
    /// `(E A / 2 l0) (l - l0)²` per segment.
    #[default]
    Linear,
    /// Incompressible uniaxial neo-Hookean, `C10 (λ² + 2/λ - 3)` per unit volume.
    NeoHookean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub neo_hookean_c10: f64,
    pub neo_hookean_d1: f64,
    pub youngs_modulus: f64,
    /// Per tube, N·m².
    pub bending_stiffness: f64,
    pub axial_law: AxialLaw,
}

impl MaterialParams {
    /// Tube-wall material: `EI = E π (do⁴ - di⁴) / 64`.
    pub fn for_params(params: &ActuatorParams) -> Self {
        MaterialParams {
            neo_hookean_c10: 0.46e6,
            neo_hookean_d1: 0.0,
            youngs_modulus: params.youngs_modulus,
            bending_stiffness: params.youngs_modulus * params.second_moment(),
            axial_law: AxialLaw::Linear,
        }
    }

    /// Bending stiffness that makes the small-pressure C-bend of the rod
    /// model reproduce the closed-form arc with outer-edge spring constant
    /// `k`. With the thread at `do/2`, the rod bends by
    /// `β = p Ai (do/2) L / (EA do²/4 + EI)`, and matching the closed form over
    /// the marker length gives `EI = k do² Lm - EA do²/4`.
    pub fn matched_to_spring_constant(params: &ActuatorParams, k: f64) -> Self {
        let base = MaterialParams::for_params(params);
        let d_o = params.outer_diameter;
        let ea = base.youngs_modulus * params.cross_section_area();
        MaterialParams {
            bending_stiffness: k * d_o * d_o * params.arc_length() - ea * d_o * d_o / 4.0,
            ..base
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, value) in [
            ("youngs_modulus", self.youngs_modulus),
            ("bending_stiffness", self.bending_stiffness),
            ("neo_hookean_c10", self.neo_hookean_c10),
        ] {
            if !value.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
            if value <= 0.0 {
                return Err(ModelError::NotPositive { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyWeights {
    /// N/m (thread excess length squared).
    pub thread: f64,
    /// N/m (inter-tube spacing error squared).
    pub sleeve: f64,
    /// N/m (connector spacing error squared; angular terms scaled by the
    /// connector width squared).
    pub connector: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        PenaltyWeights {
            thread: 1e4,
            sleeve: 1e3,
            connector: 1e4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub segment_count: usize,
    /// Euclidean norm of the energy gradient, N.
    pub gradient_tolerance: f64,
    /// Per continuation step.
    pub max_iterations: usize,
    pub pressure_ramp_steps: usize,
    pub penalty_weights: PenaltyWeights,
    pub gravity: bool,
    pub lbfgs_memory: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            segment_count: 30,
            gradient_tolerance: 1e-6,
            max_iterations: 20_000,
            pressure_ramp_steps: 20,
            penalty_weights: PenaltyWeights::default(),
            gravity: true,
            lbfgs_memory: 30,
        }
    }
}

impl SolverOptions {
    pub fn without_gravity(mut self) -> Self {
        self.gravity = false;
        self
    }

    pub fn with_segments(mut self, n: usize) -> Self {
        self.segment_count = n;
        self
    }

    pub fn validate(&self) -> Result<(), RodError> {
        if self.segment_count < 8 {
            return Err(RodError::Options(format!(
                "segment_count must be >= 8, got {}",
                self.segment_count
            )));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(RodError::Options("gradient_tolerance must be > 0".into()));
        }
        if self.max_iterations == 0 || self.pressure_ramp_steps == 0 || self.lbfgs_memory == 0 {
            return Err(RodError::Options(
                "iteration, ramp and memory counts must be > 0".into(),
            ));
        }
        let w = self.penalty_weights;
        if !(w.thread > 0.0 && w.sleeve > 0.0 && w.connector > 0.0) {
            return Err(RodError::Options("penalty weights must be > 0".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn material_defaults() {
        let p = ActuatorParams::default();
        let m = MaterialParams::for_params(&p);
        assert_eq!(m.neo_hookean_c10, 0.46e6);
        assert_eq!(m.neo_hookean_d1, 0.0);
        assert_eq!(m.youngs_modulus, p.youngs_modulus);
        let ei = 1.15e6 * std::f64::consts::PI * (1e-8 - 0.007f64.powi(4)) / 64.0;
        assert!((m.bending_stiffness - ei).abs() < 1e-15);
    }

    #[test]
    fn matched_stiffness_exceeds_tube_wall() {
        let p = ActuatorParams::default();
        let m = MaterialParams::matched_to_spring_constant(&p, 200.6);
        assert!(m.bending_stiffness > MaterialParams::for_params(&p).bending_stiffness);
        assert!((m.bending_stiffness - 4.665e-3).abs() < 1e-5);
    }

    #[test]
    fn options_validation() {
        SolverOptions::default().validate().unwrap();
        assert!(SolverOptions::default().with_segments(7).validate().is_err());
        let mut o = SolverOptions::default();
        o.gradient_tolerance = 0.0;
        assert!(o.validate().is_err());
    }

    #[test]
    fn options_from_toml() {
        let o: SolverOptions = toml::from_str("segment_count = 12\n[penalty_weights]\nthread = 5e3\n").unwrap();
        assert_eq!(o.segment_count, 12);
        assert_eq!(o.penalty_weights.thread, 5e3);
        assert_eq!(o.penalty_weights.sleeve, 1e3);
    }
}
