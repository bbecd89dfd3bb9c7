//! Total potential energy of the rig and its gradient.
//!
//! Terms, per tube unless noted:
//! - pneumatic work `-p Ai (l - l0)` summed over segments
//! - axial elasticity (linear or neo-Hookean, see [`AxialLaw`])
//! - bending `(EI / 2 l0) |κb|²` at interior nodes plus the clamp at the
//!   motor frame, with `|κb| = 2 tan(φ/2)` of the turning angle
//! - gravity on lumped node masses (z is down)
//! - thread: quadratic penalty on the excess of the guide polyline length
//!   over the paid-out thread length; guides sit at radius `do/2` and at
//!   the azimuth set by the twist, in a frame parallel-transported from the
//!   motor frame
//! - sleeve (both tubes): spacing of corresponding nodes held at nominal
//! - connector (both tubes): tip spacing and relative tip orientation held
//!   at their rest values

use serde::{Deserialize, Serialize};

use super::ad::{value_and_gradient, Real};
use super::state::{RigModel, RigState};
use super::vec3::V3;
use super::{AxialLaw, MaterialParams, RodError};
use crate::params::{ActuatorParams, ControlInput};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub pneumatic: f64,
    pub axial: f64,
    pub bending: f64,
    pub gravity: f64,
    pub thread: f64,
    pub sleeve: f64,
    pub connector: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.pneumatic
            + self.axial
            + self.bending
            + self.gravity
            + self.thread
            + self.sleeve
            + self.connector
    }
}

#[derive(Clone, Copy)]
pub(crate) struct Terms<S> {
    pub pneumatic: S,
    pub axial: S,
    pub bending: S,
    pub gravity: S,
    pub thread: S,
    pub sleeve: S,
    pub connector: S,
}

impl<S: Real> Terms<S> {
    fn zero() -> Self {
        let z = S::cst(0.0);
        Terms {
            pneumatic: z,
            axial: z,
            bending: z,
            gravity: z,
            thread: z,
            sleeve: z,
            connector: z,
        }
    }

    fn total(&self) -> S {
        self.pneumatic
            + self.axial
            + self.bending
            + self.gravity
            + self.thread
            + self.sleeve
            + self.connector
    }

    fn values(&self) -> EnergyBreakdown {
        EnergyBreakdown {
            pneumatic: self.pneumatic.val(),
            axial: self.axial.val(),
            bending: self.bending.val(),
            gravity: self.gravity.val(),
            thread: self.thread.val(),
            sleeve: self.sleeve.val(),
            connector: self.connector.val(),
        }
    }
}

/// Minimal rotation taking unit `a` to unit `b`, applied to `v ⊥ a`.
#[inline]
pub(crate) fn transport<S: Real>(a: V3<S>, b: V3<S>, v: V3<S>) -> V3<S> {
    let k = b.dot(v) / (a.dot(b) + 1.0);
    v - (a + b).scale(k)
}

/// `|κb|²` for consecutive edges `a`, `b`: `4 |a × b|² / (|a||b| + a·b)²`.
#[inline]
fn curvature_binormal_sq<S: Real>(a: V3<S>, la: S, b: V3<S>, lb: S) -> S {
    let c = a.cross(b);
    let den = la * lb + a.dot(b);
    c.norm_sq() * 4.0 / (den * den)
}

/// Positions, edges and parallel-transported frames of one tube.
pub(crate) struct TubeKinematics<S> {
    pub nodes: Vec<V3<S>>,
    pub edges: Vec<V3<S>>,
    pub lengths: Vec<S>,
    pub tangents: Vec<V3<S>>,
    pub fronts: Vec<V3<S>>,
}

pub(crate) fn tube_kinematics<S: Real>(model: &RigModel, x: &[S], tube: usize) -> TubeKinematics<S> {
    let n = model.segments;
    let rest = &model.tubes[tube];
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(V3::cst(rest.base));
    let off = tube * 3 * n;
    for i in 0..n {
        nodes.push(V3::from_slice(&x[off + 3 * i..off + 3 * i + 3]));
    }
    let mut edges = Vec::with_capacity(n);
    let mut lengths = Vec::with_capacity(n);
    let mut tangents = Vec::with_capacity(n);
    let mut fronts = Vec::with_capacity(n);
    let mut t_prev = V3::cst(rest.base_tangent);
    let mut f_prev = V3::cst(rest.base_front);
    for i in 0..n {
        let e = nodes[i + 1] - nodes[i];
        let l = e.norm();
        let t = e.div(l);
        let f = transport(t_prev, t, f_prev);
        edges.push(e);
        lengths.push(l);
        tangents.push(t);
        fronts.push(f);
        t_prev = t;
        f_prev = f;
    }
    TubeKinematics {
        nodes,
        edges,
        lengths,
        tangents,
        fronts,
    }
}

/// Thread guide polyline length of one tube.
pub(crate) fn thread_path<S: Real>(
    model: &RigModel,
    kin: &TubeKinematics<S>,
    tube: usize,
    theta_deg: f64,
) -> S {
    let n = model.segments;
    let r = model.thread_radius;
    let rest = &model.tubes[tube];
    let theta = theta_deg.to_radians();

    let base_side = V3::<f64>::cst(rest.base_front).cross(V3::cst(rest.base_tangent));
    let top = V3::<S>::cst(rest.base)
        + V3::cst(rest.base_front).scale_f(r * theta.cos())
        + V3::cst(base_side.val()).scale_f(r * theta.sin());

    let mut length = S::cst(0.0);
    let mut prev = top;
    for i in 0..n {
        // azimuth at the segment midpoint, arc position measured from the distal end
        let alpha = theta * (1.0 - (i as f64 + 0.5) / n as f64);
        let f = kin.fronts[i];
        let s = f.cross(kin.tangents[i]);
        let mid = (kin.nodes[i] + kin.nodes[i + 1]).scale_f(0.5);
        let guide = mid + f.scale_f(r * alpha.cos()) + s.scale_f(r * alpha.sin());
        length += (guide - prev).norm();
        prev = guide;
    }
    let anchor = kin.nodes[n] + kin.fronts[n - 1].scale_f(r);
    length += (anchor - prev).norm();
    length
}

pub(crate) struct Evaluation<S> {
    pub terms: Terms<S>,
    pub thread_paths: [S; 2],
}

pub(crate) fn evaluate<S: Real>(
    model: &RigModel,
    x: &[S],
    control: &ControlInput,
    params: &ActuatorParams,
    material: &MaterialParams,
) -> Evaluation<S> {
    let n = model.segments;
    let mut terms = Terms::zero();
    let bore = params.bore_area();
    let area = params.cross_section_area();
    let ea = material.youngs_modulus * area;
    let ei = material.bending_stiffness;
    let weights = model.weights;

    let kin = [tube_kinematics(model, x, 0), tube_kinematics(model, x, 1)];
    let mut thread_paths = [S::cst(0.0); 2];

    for (j, k) in kin.iter().enumerate() {
        let rest = &model.tubes[j];
        let ds0 = rest.segment_length;
        let pressure = control.pressures()[j];

        for &l in &k.lengths {
            let stretch = l - ds0;
            terms.pneumatic += stretch * (-pressure * bore);
            terms.axial += match material.axial_law {
                AxialLaw::Linear => stretch * stretch * (ea / (2.0 * ds0)),
                AxialLaw::NeoHookean => {
                    let lambda = l / ds0;
                    (lambda * lambda + S::cst(2.0) / lambda - 3.0)
                        * (material.neo_hookean_c10 * area * ds0)
                }
            };
        }

        let bend = ei / (2.0 * ds0);
        let clamp = V3::cst(rest.base_tangent);
        terms.bending +=
            curvature_binormal_sq(clamp, S::cst(1.0), k.edges[0], k.lengths[0]) * bend;
        for i in 1..n {
            terms.bending +=
                curvature_binormal_sq(k.edges[i - 1], k.lengths[i - 1], k.edges[i], k.lengths[i])
                    * bend;
        }

        if model.gravity {
            let w = model.node_mass * params.gravity;
            for node in &k.nodes[1..] {
                terms.gravity += node.z * (-w);
            }
        }

        let path = thread_path(model, k, j, control.thetas()[j]);
        let excess = (path - control.thread_lengths()[j]).relu();
        terms.thread += excess * excess * weights.thread;
        thread_paths[j] = path;
    }

    for i in 1..=n {
        let d = (kin[0].nodes[i] - kin[1].nodes[i]).norm() - model.nominal_width[i];
        terms.sleeve += d * d * weights.sleeve;
    }

    let c = &model.connector;
    let across = kin[1].nodes[n] - kin[0].nodes[n];
    let width = across.norm();
    let u = across.div(width);
    let (tl, tr) = (kin[0].tangents[n - 1], kin[1].tangents[n - 1]);
    let angular = (tl.dot(tr) - c.tangent_dot).sq()
        + (tl.dot(u) - c.left_dot).sq()
        + (tr.dot(u) - c.right_dot).sq();
    terms.connector =
        ((width - c.width).sq() + angular * (c.width * c.width)) * weights.connector;

    Evaluation {
        terms,
        thread_paths,
    }
}

pub(crate) fn value(
    model: &RigModel,
    x: &[f64],
    control: &ControlInput,
    params: &ActuatorParams,
    material: &MaterialParams,
) -> f64 {
    evaluate(model, x, control, params, material).terms.total()
}

pub(crate) fn value_and_grad(
    model: &RigModel,
    x: &[f64],
    control: &ControlInput,
    params: &ActuatorParams,
    material: &MaterialParams,
) -> (f64, Vec<f64>) {
    value_and_gradient(x, |v| {
        evaluate(model, v, control, params, material).terms.total()
    })
}

pub(crate) fn breakdown(
    model: &RigModel,
    x: &[f64],
    control: &ControlInput,
    params: &ActuatorParams,
    material: &MaterialParams,
) -> (EnergyBreakdown, [f64; 2]) {
    let e = evaluate(model, x, control, params, material);
    (e.terms.values(), e.thread_paths)
}

fn checked(v: f64) -> Result<f64, RodError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(RodError::Diverged)
    }
}

/// Total potential energy, J.
pub fn total_energy(
    state: &RigState,
    control: &ControlInput,
    params: &ActuatorParams,
    material: &MaterialParams,
) -> Result<f64, RodError> {
    checked(value(&state.model, &state.dofs(), control, params, material))
}

pub fn energy_breakdown(
    state: &RigState,
    control: &ControlInput,
    params: &ActuatorParams,
    material: &MaterialParams,
) -> Result<EnergyBreakdown, RodError> {
    let (b, _) = breakdown(&state.model, &state.dofs(), control, params, material);
    checked(b.total())?;
    Ok(b)
}

/// Gradient with respect to [`RigState::dofs`], N.
pub fn energy_gradient(
    state: &RigState,
    control: &ControlInput,
    params: &ActuatorParams,
    material: &MaterialParams,
) -> Result<Vec<f64>, RodError> {
    let (v, g) = value_and_grad(&state.model, &state.dofs(), control, params, material);
    checked(v)?;
    if g.iter().any(|x| !x.is_finite()) {
        return Err(RodError::Diverged);
    }
    Ok(g)
}
