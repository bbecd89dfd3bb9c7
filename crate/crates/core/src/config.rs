//! Simulation context shared by the CLI, the service and the scenario
//! runner: rig parameters, material and solver options.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::params::ActuatorParams;
use crate::rod::{AxialLaw, MaterialParams, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimContext {
    pub params: ActuatorParams,
    pub material: MaterialParams,
    pub options: SolverOptions,
}

impl Default for SimContext {
    fn default() -> Self {
        let params = ActuatorParams::default();
        SimContext {
            params,
            material: MaterialParams::for_params(&params),
            options: SolverOptions::default(),
        }
    }
}

/// Material section of a config document. With nothing set the tube-wall
/// material of the rig parameters is used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialFile {
    /// Choose `EI` so the small-pressure C-bend matches this outer-edge
    /// spring constant, N/m.
    pub matched_spring_constant: Option<f64>,
    /// Explicit `EI` per tube, N·m². Wins over `matched_spring_constant`.
    pub bending_stiffness: Option<f64>,
    pub axial_law: Option<AxialLaw>,
    pub neo_hookean_c10_mpa: Option<f64>,
}

impl MaterialFile {
    pub fn resolve(&self, params: &ActuatorParams) -> MaterialParams {
        let mut m = match self.matched_spring_constant {
            Some(k) => MaterialParams::matched_to_spring_constant(params, k),
            None => MaterialParams::for_params(params),
        };
        if let Some(ei) = self.bending_stiffness {
            m.bending_stiffness = ei;
        }
        if let Some(law) = self.axial_law {
            m.axial_law = law;
        }
        if let Some(c10) = self.neo_hookean_c10_mpa {
            m.neo_hookean_c10 = c10 * 1e6;
        }
        m
    }
}

/// References to parameter and solver documents plus an inline material.
/// Relative paths resolve against the directory of the referring file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContextFile {
    pub params: Option<PathBuf>,
    pub solver: Option<PathBuf>,
    pub material: MaterialFile,
}

impl ContextFile {
    pub fn resolve(&self, base_dir: &Path) -> Result<SimContext, ConfigError> {
        let params = match &self.params {
            Some(p) => ActuatorParams::load(base_dir.join(p))?,
            None => ActuatorParams::default(),
        };
        let options = match &self.solver {
            Some(p) => SolverOptions::load(base_dir.join(p))?,
            None => SolverOptions::default(),
        };
        let material = self.material.resolve(&params);
        material.validate()?;
        Ok(SimContext {
            params,
            material,
            options,
        })
    }
}

pub(crate) fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
    toml::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub(crate) fn parent_dir(path: &Path) -> &Path {
    path.parent().unwrap_or_else(|| Path::new("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_material_is_tube_wall() {
        let p = ActuatorParams::default();
        assert_eq!(MaterialFile::default().resolve(&p), MaterialParams::for_params(&p));
    }

    #[test]
    fn material_overrides() {
        let p = ActuatorParams::default();
        let f: MaterialFile =
            toml::from_str("matched_spring_constant = 200.6\naxial_law = \"neo_hookean\"").unwrap();
        let m = f.resolve(&p);
        assert_eq!(m.axial_law, AxialLaw::NeoHookean);
        assert!((m.bending_stiffness - 4.665e-3).abs() < 1e-5);
        let f: MaterialFile = toml::from_str("bending_stiffness = 0.001\nmatched_spring_constant = 200.6").unwrap();
        assert_eq!(f.resolve(&p).bending_stiffness, 0.001);
    }

    #[test]
    fn missing_referenced_file_names_path() {
        let f = ContextFile {
            params: Some("nope.toml".into()),
            ..Default::default()
        };
        let err = f.resolve(Path::new("/tmp/does-not-exist")).unwrap_err();
        assert!(err.to_string().contains("nope.toml"));
    }
}
