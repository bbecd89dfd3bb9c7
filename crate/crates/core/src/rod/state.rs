use serde::{Deserialize, Serialize};

use super::energy::{self, EnergyBreakdown};
use super::vec3::{arr, V3};
use super::{MaterialParams, PenaltyWeights, RodError, SolverOptions};
use crate::error::ModelError;
use crate::model::thread_azimuth;
use crate::params::{ActuatorParams, ControlInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tube {
    Left,
    Right,
}

impl Tube {
    pub const BOTH: [Tube; 2] = [Tube::Left, Tube::Right];

    pub fn index(self) -> usize {
        match self {
            Tube::Left => 0,
            Tube::Right => 1,
        }
    }
}

/// Fixed data of one tube: clamped base, its clamp direction and rest
/// segment length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeRest {
    pub base: [f64; 3],
    pub base_tangent: [f64; 3],
    /// Azimuth zero of the thread guides at the base (forward, +y).
    pub base_front: [f64; 3],
    pub segment_length: f64,
}

/// Rest values held by the connector penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectorRest {
    pub width: f64,
    pub tangent_dot: f64,
    pub left_dot: f64,
    pub right_dot: f64,
}

/// Everything about the discretized rig that does not change during a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigModel {
    pub segments: usize,
    pub tubes: [TubeRest; 2],
    /// Rest spacing of corresponding nodes, index 0 at the base.
    pub nominal_width: Vec<f64>,
    pub connector: ConnectorRest,
    pub weights: PenaltyWeights,
    pub gravity: bool,
    pub node_mass: f64,
    pub thread_radius: f64,
    /// Position of the tracked marker along the centerline, as a fraction
    /// of the rest length.
    pub marker_fraction: f64,
}

impl RigModel {
    pub fn dof_count(&self) -> usize {
        6 * self.segments
    }
}

/// Orthonormal frame of one segment: tangent, thread-azimuth zero
/// direction (`front`) and `side = front × tangent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triad {
    pub tangent: [f64; 3],
    pub front: [f64; 3],
    pub side: [f64; 3],
}

impl Triad {
    /// Largest deviation of the Gram matrix from identity.
    pub fn orthonormality_error(&self) -> f64 {
        let v = [self.tangent, self.front, self.side];
        let mut err = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((arr::dot(v[i], v[j]) - target).abs());
            }
        }
        err
    }
}

/// Rigid pose of the bottom connector. `axes` are the columns of its
/// rotation: across (left to right tip), forward normal, axial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectorPose {
    pub origin: [f64; 3],
    pub axes: [[f64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub total_energy: f64,
    pub terms: EnergyBreakdown,
    /// N, left then right.
    pub thread_tensions: [f64; 2],
    pub thread_path_lengths: [f64; 2],
    /// Per segment, 1/m; the first entry is the turn at the clamp.
    pub curvature: [Vec<f64>; 2],
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Configuration of both rods and the connector.
///
/// `nodes[j][0]` is the clamped base of tube `j`; the free coordinates are
/// nodes `1..=N` of the left tube followed by those of the right tube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigState {
    pub model: RigModel,
    pub nodes: [Vec<[f64; 3]>; 2],
    pub frames: [Vec<Triad>; 2],
    pub connector: ConnectorPose,
    pub control: ControlInput,
    pub diagnostics: Diagnostics,
}

/// Straight undeformed rig for `control`.
///
/// Bases sit at `x = ±top/2`, tips at `x = ±bottom/2`, both tubes exactly
/// `rest_length` long. Diagnostics are evaluated with the tube-wall
/// material of `params`.
pub fn build_rig(
    params: &ActuatorParams,
    control: &ControlInput,
    opts: &SolverOptions,
) -> Result<RigState, RodError> {
    params.validate()?;
    opts.validate()?;
    control.check_finite()?;
    let (top, bottom) = (params.top_shaft_spacing, params.bottom_shaft_spacing);
    if top < 0.0 || bottom < 0.0 {
        return Err(ModelError::Geometry("shaft spacings must be non-negative".into()).into());
    }
    let l0 = params.rest_length;
    let offset = (top - bottom) / 2.0;
    if offset.abs() >= l0 {
        return Err(ModelError::Geometry(format!(
            "spacing difference {:.1} mm exceeds the tube length",
            2.0 * offset * 1e3
        ))
        .into());
    }
    let depth = (l0 * l0 - offset * offset).sqrt();
    let n = opts.segment_count;

    let mut tubes = Vec::with_capacity(2);
    let mut nodes: [Vec<[f64; 3]>; 2] = Default::default();
    for (j, sign) in [(0usize, -1.0), (1, 1.0)] {
        let base = [sign * top / 2.0, 0.0, 0.0];
        let tip = [sign * bottom / 2.0, 0.0, depth];
        nodes[j] = (0..=n).map(|i| arr::lerp(base, tip, i as f64 / n as f64)).collect();
        tubes.push(TubeRest {
            base,
            base_tangent: arr::unit(arr::sub(tip, base)),
            base_front: [0.0, 1.0, 0.0],
            segment_length: l0 / n as f64,
        });
    }
    let tubes = [tubes[0], tubes[1]];

    let nominal_width = (0..=n).map(|i| arr::distance(nodes[0][i], nodes[1][i])).collect();
    let (tl, tr) = (tubes[0].base_tangent, tubes[1].base_tangent);
    let u = arr::unit(arr::sub(nodes[1][n], nodes[0][n]));
    let connector = ConnectorRest {
        width: arr::distance(nodes[0][n], nodes[1][n]),
        tangent_dot: arr::dot(tl, tr),
        left_dot: arr::dot(tl, u),
        right_dot: arr::dot(tr, u),
    };

    let model = RigModel {
        segments: n,
        tubes,
        nominal_width,
        connector,
        weights: opts.penalty_weights,
        gravity: opts.gravity,
        node_mass: params.actuation_mass / (2.0 * (n + 1) as f64),
        thread_radius: params.outer_diameter / 2.0,
        marker_fraction: (params.marker_offset / l0).clamp(0.0, 1.0),
    };

    let mut state = RigState {
        model,
        nodes,
        frames: Default::default(),
        connector: ConnectorPose {
            origin: [0.0; 3],
            axes: [[0.0; 3]; 3],
        },
        control: *control,
        diagnostics: Diagnostics::default(),
    };
    let material = MaterialParams::for_params(params);
    state.refresh(params, &material)?;
    state.diagnostics.converged = state.diagnostics.gradient_norm <= opts.gradient_tolerance;
    Ok(state)
}

impl RigState {
    pub fn segments(&self) -> usize {
        self.model.segments
    }

    pub fn node_count(&self) -> usize {
        self.model.segments + 1
    }

    pub fn tube(&self, tube: Tube) -> &[[f64; 3]] {
        &self.nodes[tube.index()]
    }

    /// Free coordinates, m.
    pub fn dofs(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.model.dof_count());
        for tube in &self.nodes {
            for p in &tube[1..] {
                x.extend_from_slice(p);
            }
        }
        x
    }

    /// Overwrite the free coordinates. Frames and diagnostics are stale
    /// until [`RigState::refresh`].
    pub fn set_dofs(&mut self, x: &[f64]) -> Result<(), RodError> {
        let n = self.model.segments;
        if x.len() != self.model.dof_count() {
            return Err(RodError::Layout(format!(
                "expected {} coordinates, got {}",
                self.model.dof_count(),
                x.len()
            )));
        }
        for (j, tube) in self.nodes.iter_mut().enumerate() {
            for i in 0..n {
                let k = 3 * (j * n + i);
                tube[i + 1] = [x[k], x[k + 1], x[k + 2]];
            }
        }
        Ok(())
    }

    /// Check that node arrays agree with the model.
    pub fn check_layout(&self) -> Result<(), RodError> {
        for (j, tube) in self.nodes.iter().enumerate() {
            if tube.len() != self.node_count() {
                return Err(RodError::Layout(format!(
                    "tube {j} has {} nodes, expected {}",
                    tube.len(),
                    self.node_count()
                )));
            }
            if tube[0] != self.model.tubes[j].base {
                return Err(RodError::Layout(format!("tube {j} base moved")));
            }
            if tube.iter().flatten().any(|v| !v.is_finite()) {
                return Err(RodError::Diverged);
            }
        }
        Ok(())
    }

    /// Mean of corresponding left and right nodes, base first.
    pub fn centerline(&self) -> Vec<[f64; 3]> {
        self.nodes[0]
            .iter()
            .zip(&self.nodes[1])
            .map(|(a, b)| arr::midpoint(*a, *b))
            .collect()
    }

    /// Thread guide azimuths (deg) at segment midpoints, base first.
    pub fn guide_azimuths(&self, tube: Tube, params: &ActuatorParams) -> Vec<f64> {
        let n = self.model.segments;
        let theta = self.control.thetas()[tube.index()];
        (0..n)
            .map(|i| {
                let s = params.rest_length * (1.0 - (i as f64 + 0.5) / n as f64);
                thread_azimuth(s, theta, params)
            })
            .collect()
    }

    /// Recompute frames, connector pose and diagnostics (except the
    /// iteration count and convergence flag) for `self.control`.
    pub fn refresh(
        &mut self,
        params: &ActuatorParams,
        material: &MaterialParams,
    ) -> Result<(), RodError> {
        self.check_layout()?;
        let x = self.dofs();
        let n = self.model.segments;

        for j in 0..2 {
            let kin = energy::tube_kinematics::<f64>(&self.model, &x, j);
            self.frames[j] = (0..n)
                .map(|i| {
                    let t = kin.tangents[i];
                    let f = kin.fronts[i];
                    Triad {
                        tangent: t.val(),
                        front: f.val(),
                        side: f.cross(t).val(),
                    }
                })
                .collect();
            let ds0 = self.model.tubes[j].segment_length;
            let mut prev = V3::<f64>::cst(self.model.tubes[j].base_tangent);
            self.diagnostics.curvature[j] = kin
                .tangents
                .iter()
                .map(|&t| {
                    let c = prev.cross(t).norm();
                    let k = 2.0 * c / (1.0 + prev.dot(t)) / ds0;
                    prev = t;
                    k
                })
                .collect();
        }

        let (tl, tr) = (self.frames[0][n - 1].tangent, self.frames[1][n - 1].tangent);
        let (pl, pr) = (self.nodes[0][n], self.nodes[1][n]);
        let u = arr::unit(arr::sub(pr, pl));
        let mean = arr::add(tl, tr);
        let axial = arr::unit(arr::sub(mean, arr::scale(u, arr::dot(mean, u))));
        self.connector = ConnectorPose {
            origin: arr::midpoint(pl, pr),
            axes: [u, arr::cross(axial, u), axial],
        };

        let (terms, paths) = energy::breakdown(&self.model, &x, &self.control, params, material);
        let (total, grad) = energy::value_and_grad(&self.model, &x, &self.control, params, material);
        if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(RodError::Diverged);
        }
        let w = self.model.weights.thread;
        let lengths = self.control.thread_lengths();
        let d = &mut self.diagnostics;
        d.total_energy = total;
        d.terms = terms;
        d.thread_path_lengths = paths;
        d.thread_tensions = [0, 1].map(|j| 2.0 * w * (paths[j] - lengths[j]).max(0.0));
        d.gradient_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rig(n: usize) -> RigState {
        let p = ActuatorParams::default();
        let opts = SolverOptions::default().with_segments(n).without_gravity();
        build_rig(&p, &ControlInput::relaxed(&p), &opts).unwrap()
    }

    #[test]
    fn node_count_matches_segments() {
        let s = rig(8);
        assert_eq!(s.tube(Tube::Left).len(), 9);
        assert_eq!(s.tube(Tube::Right).len(), 9);
        assert_eq!(s.dofs().len(), 48);
    }

    #[test]
    fn trapezoid_geometry() {
        let s = rig(30);
        let l = s.tube(Tube::Left);
        let r = s.tube(Tube::Right);
        assert!((arr::distance(l[0], r[0]) - 0.038).abs() < 1e-15);
        assert!((arr::distance(l[30], r[30]) - 0.015).abs() < 1e-15);
        assert_eq!(l[0][2], 0.0);
        // tip depth agrees with L0 sin(dip) to well under a millimetre
        let expect = 0.3 * 87.648f64.to_radians().sin();
        assert!((l[30][2] - expect).abs() < 0.1e-3, "{}", l[30][2]);
        assert!((l[30][2] - 0.2997).abs() < 0.1e-3);
        let len: f64 = l.windows(2).map(|w| arr::distance(w[0], w[1])).sum();
        assert!((len - 0.3).abs() < 1e-12);
    }

    #[test]
    fn untwisted_guides_face_forward() {
        let p = ActuatorParams::default();
        let s = rig(10);
        for tube in Tube::BOTH {
            assert!(s.guide_azimuths(tube, &p).iter().all(|&a| a == 0.0));
            assert!(s.frames[tube.index()].iter().all(|f| f.front == [0.0, 1.0, 0.0]));
        }
    }

    #[test]
    fn twisted_guides_taper_to_zero() {
        let p = ActuatorParams::default();
        let opts = SolverOptions::default().with_segments(10);
        let c = ControlInput::relaxed(&p).with_twist(-90.0, 40.0);
        let s = build_rig(&p, &c, &opts).unwrap();
        let a = s.guide_azimuths(Tube::Left, &p);
        assert!((a[0] + 85.5).abs() < 1e-12);
        assert!((a[9] + 4.5).abs() < 1e-12);
        assert!(a.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn frames_are_orthonormal() {
        let s = rig(12);
        for f in s.frames.iter().flatten() {
            assert!(f.orthonormality_error() < 1e-12);
        }
    }

    #[test]
    fn rest_state_is_energy_free() {
        let s = rig(16);
        let d = &s.diagnostics;
        assert!(d.total_energy.abs() < 1e-15, "{:?}", d.terms);
        assert!(d.gradient_norm < 1e-9);
        assert!(d.converged);
        assert!(d.thread_tensions.iter().all(|&t| t < 1e-9));
        assert!(d.curvature.iter().flatten().all(|&k| k.abs() < 1e-12));
    }

    #[test]
    fn connector_pose_at_rest() {
        let s = rig(10);
        assert!((s.connector.origin[0]).abs() < 1e-15);
        let axes = s.connector.axes;
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for k in 0..3 {
            assert!(arr::distance(axes[k], id[k]) < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut p = ActuatorParams::default();
        p.bottom_shaft_spacing = -0.001;
        let c = ControlInput::relaxed(&p);
        assert!(build_rig(&p, &c, &SolverOptions::default()).is_err());
        let mut p = ActuatorParams::default();
        p.top_shaft_spacing = 1.0;
        assert!(build_rig(&p, &c, &SolverOptions::default()).is_err());
    }

    #[test]
    fn dof_round_trip() {
        let mut s = rig(8);
        let mut x = s.dofs();
        x[5] += 0.01;
        s.set_dofs(&x).unwrap();
        assert_eq!(s.dofs(), x);
        assert!(s.set_dofs(&x[1..]).is_err());
    }
}
