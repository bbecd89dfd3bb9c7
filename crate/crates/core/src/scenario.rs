//! Scripted grab-and-pour sequence run against the rod simulator, with
//! geometric checks against a ghost bottle.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{parent_dir, read_toml, ContextFile, SimContext};
use crate::error::{ConfigError, ModelError};
use crate::params::{ActuatorParams, ControlDto, ControlInput, DEFAULT_MAX_PRESSURE};
use crate::rod::vec3::arr;
use crate::rod::{build_rig, shape_metrics, solve_equilibrium, RigState, RodError};
use crate::units::*;

/// Joint twist applied to both tubes in the last step, degrees.
pub const FINAL_TWIST_OFFSET: f64 = -30.0;
/// Minimum wrap after the left tube is pressurized, degrees.
pub const WRAP_THRESHOLD: f64 = 180.0;
/// Points farther than this multiple of the bottle radius from its axis do
/// not count towards the wrap angle.
pub const WRAP_RADIUS_FACTOR: f64 = 1.5;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("step {index} ({label}): {source}")]
    InvalidStep {
        index: usize,
        label: String,
        #[source]
        source: ModelError,
    },
    #[error("invalid bottle: {0}")]
    Bottle(String),
    #[error("override refers to missing step {0}")]
    Override(usize),
    #[error(transparent)]
    Rod(#[from] RodError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// Mean centerline comes within `radius + do` of the bottle axis.
    Embraces,
    /// Wrap angle at least [`WRAP_THRESHOLD`].
    Wraps,
    /// Absolute winding grows relative to the previous step.
    WindingGrows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlStep {
    pub label: String,
    pub target: ControlInput,
    pub predicate: Option<Predicate>,
}

/// The six-step grab-and-pour sequence for the default rig.
pub fn grab_pour_script() -> Vec<ControlStep> {
    grab_pour_script_for(&ActuatorParams::default())
}

/// The grab-and-pour sequence with threads at the rest length of `params`.
pub fn grab_pour_script_for(params: &ActuatorParams) -> Vec<ControlStep> {
    let base = ControlInput::relaxed(params);
    let step = |label: &str, t: (f64, f64), p: (f64, f64), predicate| ControlStep {
        label: label.to_string(),
        target: base.with_twist(t.0, t.1).with_pressures(mpa_to_pa(p.0), mpa_to_pa(p.1)),
        predicate,
    };
    let d = FINAL_TWIST_OFFSET;
    vec![
        step("twist both to -90 deg, pressurize to 0.1 MPa", (-90.0, -90.0), (0.1, 0.1), None),
        step("twist right to +10 deg", (-90.0, 10.0), (0.1, 0.1), None),
        step("pressurize both to 0.2 MPa", (-90.0, 10.0), (0.2, 0.2), Some(Predicate::Embraces)),
        step("left to 0.25 MPa", (-90.0, 10.0), (0.25, 0.2), Some(Predicate::Wraps)),
        step("right down to 0.1 MPa", (-90.0, 10.0), (0.25, 0.1), Some(Predicate::WindingGrows)),
        step("rotate over the cup, left to 0.3 MPa", (-90.0 + d, 10.0 + d), (0.3, 0.1), None),
    ]
}

/// Ghost bottle: a cylinder about an infinite axis. Lengths in m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BottleSpec {
    pub base: [f64; 3],
    pub axis: [f64; 3],
    pub height: f64,
    pub diameter: f64,
    /// Informational, kg.
    pub mass: f64,
    pub contents_mass: f64,
}

impl BottleSpec {
    /// Validates dimensions and normalizes the axis.
    pub fn new(base: [f64; 3], axis: [f64; 3], height: f64, diameter: f64) -> Result<Self, ScenarioError> {
        let n = arr::norm(axis);
        if !(n.is_finite() && n > 0.0) {
            return Err(ScenarioError::Bottle("axis must be a nonzero vector".into()));
        }
        if !base.iter().all(|v| v.is_finite()) {
            return Err(ScenarioError::Bottle("base must be finite".into()));
        }
        if !(height > 0.0 && diameter > 0.0 && height.is_finite() && diameter.is_finite()) {
            return Err(ScenarioError::Bottle("dimensions must be positive".into()));
        }
        Ok(BottleSpec {
            base,
            axis: arr::scale(axis, 1.0 / n),
            height,
            diameter,
            mass: 0.018,
            contents_mass: 0.042,
        })
    }

    /// Upright bottle placed against the default rig, material and solver
    /// settings: its axis passes through the center of the coil formed
    /// after the fourth step (see [`fit_coil_axis`]), rounded to the
    /// millimetre. `base` is the bottom center; `axis` points to the mouth.
    pub fn calibrated() -> Self {
        BottleSpec::new(
            vec_to_m(CALIBRATED_BASE_MM),
            CALIBRATED_AXIS,
            0.205,
            0.065,
        )
        .expect("valid fixture")
    }

    pub fn radius(&self) -> f64 {
        self.diameter / 2.0
    }

    /// Distance of `p` from the axis and its azimuth about it.
    fn cylindrical(&self, p: [f64; 3]) -> (f64, f64) {
        let (e1, e2) = perpendicular_basis(self.axis);
        let d = arr::sub(p, self.base);
        let along = arr::dot(d, self.axis);
        let radial = arr::sub(d, arr::scale(self.axis, along));
        (arr::norm(radial), arr::dot(radial, e2).atan2(arr::dot(radial, e1)))
    }

    pub fn axis_distance(&self, p: [f64; 3]) -> f64 {
        self.cylindrical(p).0
    }
}

const CALIBRATED_BASE_MM: [f64; 3] = [-36.0, 30.0, 230.0];
const CALIBRATED_AXIS: [f64; 3] = [0.0, 0.0, -1.0];

fn perpendicular_basis(axis: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if axis[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let e1 = arr::unit(arr::sub(helper, arr::scale(axis, arr::dot(helper, axis))));
    (e1, arr::cross(axis, e1))
}

/// Net azimuth (deg) swept about the bottle axis by consecutive centerline
/// points that both lie within [`WRAP_RADIUS_FACTOR`] radii of the axis.
pub fn wrap_angle(centerline: &[[f64; 3]], bottle: &BottleSpec) -> f64 {
    let limit = WRAP_RADIUS_FACTOR * bottle.radius();
    let polar: Vec<(f64, f64)> = centerline.iter().map(|&p| bottle.cylindrical(p)).collect();
    let mut total = 0.0;
    for w in polar.windows(2) {
        let ((r0, a0), (r1, a1)) = (w[0], w[1]);
        if r0 > limit || r1 > limit || r0 == 0.0 || r1 == 0.0 {
            continue;
        }
        let mut d = a1 - a0;
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        total += d;
    }
    total.abs().to_degrees()
}

/// Axis of the best-fit circle through `points`: normal of their
/// least-squares plane through the fitted center. The axis is oriented
/// with non-negative z.
pub fn fit_coil_axis(points: &[[f64; 3]]) -> Option<([f64; 3], [f64; 3])> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let c = points.iter().fold(Vector3::zeros(), |s, p| s + Vector3::from(*p)) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = Vector3::from(*p) - c;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let k = eig.eigenvalues.imin();
    let mut normal = eig.eigenvectors.column(k).into_owned();
    if normal[2] < 0.0 {
        normal = -normal;
    }
    let axis = [normal[0], normal[1], normal[2]];
    let (e1, e2) = perpendicular_basis(axis);
    // algebraic circle fit in the plane: u² + v² + a u + b v + c = 0
    let mut m = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for p in points {
        let d = arr::sub(*p, [c[0], c[1], c[2]]);
        let (u, v) = (arr::dot(d, e1), arr::dot(d, e2));
        let row = Vector3::new(u, v, 1.0);
        m += row * row.transpose();
        rhs -= row * (u * u + v * v);
    }
    let sol = m.lu().solve(&rhs)?;
    let (cu, cv) = (-sol[0] / 2.0, -sol[1] / 2.0);
    let center = arr::add(
        [c[0], c[1], c[2]],
        arr::add(arr::scale(e1, cu), arr::scale(e2, cv)),
    );
    Some((center, axis))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateOutcome {
    pub predicate: Predicate,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// 1-based.
    pub step: usize,
    pub label: String,
    pub control: ControlDto,
    pub converged: bool,
    pub iterations: usize,
    pub tip_mm: [f64; 3],
    pub winding_deg: f64,
    pub wrap_deg: f64,
    pub min_axis_distance_mm: f64,
    pub predicate: Option<PredicateOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub steps: Vec<StepReport>,
    /// 1-based step that did not converge.
    pub failed_at: Option<usize>,
    pub bottle: BottleSpec,
}

impl ScenarioReport {
    pub fn all_converged(&self) -> bool {
        self.failed_at.is_none() && self.steps.iter().all(|s| s.converged)
    }

    pub fn predicates_passed(&self) -> bool {
        self.steps
            .iter()
            .filter_map(|s| s.predicate.as_ref())
            .all(|p| p.passed)
    }

    pub fn passed(&self) -> bool {
        self.all_converged() && self.predicates_passed()
    }

    pub fn wrap_after(&self, step: usize) -> Option<f64> {
        self.steps.iter().find(|s| s.step == step).map(|s| s.wrap_deg)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>4}  {:>5}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}  check",
            "step", "conv", "tip x", "tip y", "tip z", "winding", "wrap", "axis d"
        );
        for s in &self.steps {
            let check = match &s.predicate {
                Some(p) => format!(
                    "{:?} {} ({:.1} vs {:.1})",
                    p.predicate,
                    if p.passed { "pass" } else { "FAIL" },
                    p.value,
                    p.threshold
                ),
                None => String::new(),
            };
            let _ = writeln!(
                out,
                "{:>4}  {:>5}  {:>8.1}  {:>8.1}  {:>8.1}  {:>8.1}  {:>8.1}  {:>8.1}  {}",
                s.step,
                s.converged,
                s.tip_mm[0],
                s.tip_mm[1],
                s.tip_mm[2],
                s.winding_deg,
                s.wrap_deg,
                s.min_axis_distance_mm,
                check
            );
        }
        if let Some(i) = self.failed_at {
            let _ = writeln!(out, "failed at step {i}");
        }
        out
    }
}

/// Reject steps whose pressures leave `[0, 0.3 MPa]` or are otherwise invalid.
pub fn validate_script(script: &[ControlStep]) -> Result<(), ScenarioError> {
    for (i, s) in script.iter().enumerate() {
        s.target
            .validate(DEFAULT_MAX_PRESSURE)
            .map_err(|source| ScenarioError::InvalidStep {
                index: i + 1,
                label: s.label.clone(),
                source,
            })?;
    }
    Ok(())
}

fn min_axis_distance(line: &[[f64; 3]], bottle: &BottleSpec) -> f64 {
    line.iter()
        .map(|&p| bottle.axis_distance(p))
        .fold(f64::INFINITY, f64::min)
}

/// Execute `script` step by step, warm-starting each solve from the
/// previous equilibrium. Stops after the first step that does not converge.
pub fn run_scenario(
    script: &[ControlStep],
    bottle: &BottleSpec,
    ctx: &SimContext,
) -> Result<ScenarioReport, ScenarioError> {
    run_scenario_observed(script, bottle, ctx, |_, _| {})
}

/// [`run_scenario`] calling `on_step` with each step report and state.
pub fn run_scenario_observed(
    script: &[ControlStep],
    bottle: &BottleSpec,
    ctx: &SimContext,
    mut on_step: impl FnMut(&StepReport, &RigState),
) -> Result<ScenarioReport, ScenarioError> {
    validate_script(script)?;
    let mut report = ScenarioReport {
        steps: Vec::with_capacity(script.len()),
        failed_at: None,
        bottle: *bottle,
    };
    if script.is_empty() {
        return Ok(report);
    }
    let (params, material, opts) = (&ctx.params, &ctx.material, &ctx.options);
    let mut state = build_rig(params, &ControlInput::relaxed(params), opts)?;
    let mut previous_winding: Option<f64> = None;
    for (i, step) in script.iter().enumerate() {
        state = solve_equilibrium(&state, &step.target, params, material, opts)?;
        let metrics = shape_metrics(&state);
        let line = state.centerline();
        let wrap = wrap_angle(&line, bottle);
        let axis_d = min_axis_distance(&line, bottle);
        let predicate = step.predicate.map(|p| match p {
            Predicate::Embraces => {
                let threshold = m_to_mm(bottle.radius() + params.outer_diameter);
                let value = m_to_mm(axis_d);
                PredicateOutcome {
                    predicate: p,
                    passed: value <= threshold,
                    value,
                    threshold,
                }
            }
            Predicate::Wraps => PredicateOutcome {
                predicate: p,
                passed: wrap >= WRAP_THRESHOLD,
                value: wrap,
                threshold: WRAP_THRESHOLD,
            },
            Predicate::WindingGrows => {
                let before = previous_winding.map_or(0.0, f64::abs);
                PredicateOutcome {
                    predicate: p,
                    passed: metrics.winding_angle.abs() > before,
                    value: metrics.winding_angle.abs(),
                    threshold: before,
                }
            }
        });
        let entry = StepReport {
            step: i + 1,
            label: step.label.clone(),
            control: step.target.into(),
            converged: state.diagnostics.converged,
            iterations: state.diagnostics.iterations,
            tip_mm: vec_to_mm(metrics.tip.as_array()),
            winding_deg: metrics.winding_angle,
            wrap_deg: wrap,
            min_axis_distance_mm: m_to_mm(axis_d),
            predicate,
        };
        on_step(&entry, &state);
        let converged = entry.converged;
        report.steps.push(entry);
        if !converged {
            report.failed_at = Some(i + 1);
            break;
        }
        previous_winding = Some(metrics.winding_angle);
    }
    Ok(report)
}

/// On-disk scenario document. Lengths in mm, angles in deg, pressures in MPa.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    #[serde(flatten)]
    pub context: ContextFile,
    pub bottle: Option<BottleFile>,
    /// Informational only.
    pub cup: Option<CupFile>,
    #[serde(rename = "override")]
    pub overrides: Vec<StepOverride>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BottleFile {
    pub base_mm: [f64; 3],
    pub axis: [f64; 3],
    #[serde(default = "default_height")]
    pub height_mm: f64,
    #[serde(default = "default_diameter")]
    pub diameter_mm: f64,
}

fn default_height() -> f64 {
    205.0
}

fn default_diameter() -> f64 {
    65.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CupFile {
    pub position_mm: [f64; 3],
}

/// Replaces fields of one step (1-based) of the shipped script.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepOverride {
    pub step: usize,
    pub theta_left_deg: Option<f64>,
    pub theta_right_deg: Option<f64>,
    pub p_left_mpa: Option<f64>,
    pub p_right_mpa: Option<f64>,
    pub thread_left_mm: Option<f64>,
    pub thread_right_mm: Option<f64>,
}

impl StepOverride {
    fn apply(&self, c: &mut ControlInput) {
        let set = |dst: &mut f64, v: Option<f64>, f: fn(f64) -> f64| {
            if let Some(v) = v {
                *dst = f(v);
            }
        };
        set(&mut c.theta_left, self.theta_left_deg, |v| v);
        set(&mut c.theta_right, self.theta_right_deg, |v| v);
        set(&mut c.pressure_left, self.p_left_mpa, mpa_to_pa);
        set(&mut c.pressure_right, self.p_right_mpa, mpa_to_pa);
        set(&mut c.thread_length_left, self.thread_left_mm, mm_to_m);
        set(&mut c.thread_length_right, self.thread_right_mm, mm_to_m);
    }
}

/// Everything needed for a run, resolved from a [`ScenarioConfig`].
#[derive(Debug, Clone)]
pub struct ScenarioSetup {
    pub context: SimContext,
    pub script: Vec<ControlStep>,
    pub bottle: BottleSpec,
}

impl ScenarioSetup {
    pub fn calibrated() -> Self {
        ScenarioSetup {
            context: SimContext::default(),
            script: grab_pour_script(),
            bottle: BottleSpec::calibrated(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let cfg: ScenarioConfig = read_toml(path)?;
        cfg.resolve(parent_dir(path))
    }
}

impl ScenarioConfig {
    pub fn resolve(&self, base_dir: &Path) -> Result<ScenarioSetup, ScenarioError> {
        let context = self.context.resolve(base_dir)?;
        let mut script = grab_pour_script_for(&context.params);
        for o in &self.overrides {
            let step = o
                .step
                .checked_sub(1)
                .and_then(|i| script.get_mut(i))
                .ok_or(ScenarioError::Override(o.step))?;
            o.apply(&mut step.target);
        }
        let bottle = match &self.bottle {
            Some(b) => BottleSpec::new(vec_to_m(b.base_mm), b.axis, mm_to_m(b.height_mm), mm_to_m(b.diameter_mm))?,
            None => BottleSpec::calibrated(),
        };
        Ok(ScenarioSetup {
            context,
            script,
            bottle,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bottle() -> BottleSpec {
        BottleSpec::new([0.1, 0.05, 0.0], [0.0, 0.0, 1.0], 0.205, 0.065).unwrap()
    }

    fn circle(b: &BottleSpec, radius: f64, sweep: f64, n: usize) -> Vec<[f64; 3]> {
        let (e1, e2) = perpendicular_basis(b.axis);
        (0..=n)
            .map(|i| {
                let t = sweep * i as f64 / n as f64;
                let r = arr::add(arr::scale(e1, radius * t.cos()), arr::scale(e2, radius * t.sin()));
                arr::add(b.base, arr::add(r, arr::scale(b.axis, 0.1)))
            })
            .collect()
    }

    #[test]
    fn script_has_six_steps_with_nominal_pressures() {
        let s = grab_pour_script();
        assert_eq!(s.len(), 6);
        let mpa = |c: &ControlInput| (pa_to_mpa(c.pressure_left), pa_to_mpa(c.pressure_right));
        assert_eq!(s[0].target.thetas(), [-90.0, -90.0]);
        assert_eq!(mpa(&s[0].target), (0.1, 0.1));
        assert_eq!(s[1].target.theta_right, 10.0);
        assert_eq!(mpa(&s[2].target), (0.2, 0.2));
        assert_eq!(mpa(&s[3].target), (0.25, 0.2));
        assert_eq!(mpa(&s[4].target), (0.25, 0.1));
        assert_eq!(mpa(&s[5].target).0, 0.3);
        assert_eq!(grab_pour_script(), s);
    }

    #[test]
    fn wrap_of_synthetic_circles() {
        let b = bottle();
        let full = circle(&b, b.radius(), 2.0 * std::f64::consts::PI, 72);
        assert!((wrap_angle(&full, &b) - 360.0).abs() < 1e-9);
        let half = circle(&b, b.radius(), std::f64::consts::PI, 36);
        assert!((wrap_angle(&half, &b) - 180.0).abs() < 1e-9);
        let far = circle(&b, 2.0 * b.radius(), std::f64::consts::PI, 36);
        assert_eq!(wrap_angle(&far, &b), 0.0);
    }

    #[test]
    fn straight_line_far_away_has_no_wrap() {
        let b = bottle();
        let line: Vec<[f64; 3]> = (0..=30).map(|i| [-0.2, 0.0, i as f64 * 0.01]).collect();
        assert_eq!(wrap_angle(&line, &b), 0.0);
    }

    #[test]
    fn empty_script_is_empty_report() {
        let r = run_scenario(&[], &bottle(), &SimContext::default()).unwrap();
        assert!(r.steps.is_empty());
        assert!(r.passed());
    }

    #[test]
    fn over_pressure_rejected_before_running() {
        let mut s = grab_pour_script();
        s[3].target.pressure_left = 0.5e6;
        let err = run_scenario(&s, &bottle(), &SimContext::default()).unwrap_err();
        assert!(matches!(err, ScenarioError::InvalidStep { index: 4, .. }), "{err}");
    }

    #[test]
    fn bottle_validation() {
        assert!(BottleSpec::new([0.0; 3], [0.0; 3], 0.2, 0.06).is_err());
        assert!(BottleSpec::new([0.0; 3], [0.0, 0.0, 1.0], -0.2, 0.06).is_err());
        let b = BottleSpec::new([0.0; 3], [0.0, 0.0, 2.0], 0.2, 0.06).unwrap();
        assert_eq!(b.axis, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn coil_axis_of_tilted_circle() {
        let b = BottleSpec::new([0.01, -0.02, 0.15], [0.3, 0.1, 1.0], 0.2, 0.06).unwrap();
        let pts = circle(&b, 0.025, 5.0, 40);
        let (center, axis) = fit_coil_axis(&pts).unwrap();
        assert!(arr::norm(arr::cross(axis, b.axis)) < 1e-9);
        assert!(b.axis_distance(center) < 1e-9);
    }

    #[test]
    fn config_overrides_and_bottle() {
        let cfg: ScenarioConfig = toml::from_str(
            "[bottle]\nbase_mm = [10.0, 20.0, 30.0]\naxis = [0.0, 0.0, 1.0]\n[cup]\nposition_mm = [0.0, 0.0, 0.0]\n[[override]]\nstep = 6\ntheta_left_deg = -100.0\n",
        )
        .unwrap();
        let setup = cfg.resolve(Path::new(".")).unwrap();
        assert_eq!(setup.script[5].target.theta_left, -100.0);
        assert!((setup.bottle.base[1] - 0.02).abs() < 1e-15);
        assert_eq!(setup.bottle.diameter, 0.065);
        let bad: ScenarioConfig = toml::from_str("[[override]]\nstep = 9\n").unwrap();
        assert!(bad.resolve(Path::new(".")).is_err());
    }

    proptest! {
        #[test]
        fn wrap_invariant_under_axis_rotation_and_shift(
            angle in 0.0..std::f64::consts::TAU, shift in -0.5..0.5f64, sweep in 0.1..6.0f64,
        ) {
            let b = bottle();
            let line = circle(&b, 0.03, sweep, 50);
            let base = wrap_angle(&line, &b);
            let (s, c) = angle.sin_cos();
            let moved: Vec<[f64; 3]> = line
                .iter()
                .map(|p| {
                    let d = arr::sub(*p, b.base);
                    let r = [c * d[0] - s * d[1], s * d[0] + c * d[1], d[2] + shift];
                    arr::add(b.base, r)
                })
                .collect();
            prop_assert!((wrap_angle(&moved, &b) - base).abs() < 1e-9);
        }
    }
}
