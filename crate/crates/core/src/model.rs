//! Closed-form statics: motion-pattern classification, linear extension and
//! the constant-curvature C-bend.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::params::{ActuatorParams, ControlInput};

/// Default tolerance for "≈" when matching twist angles, degrees.
pub const DEFAULT_ANGLE_TOL: f64 = 5.0;

/// Thread lengths within this distance of the tube rest length count as tight.
pub const THREAD_LENGTH_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chirality {
    Clockwise,
    CounterClockwise,
}

impl Chirality {
    pub fn opposite(self) -> Self {
        match self {
            Chirality::Clockwise => Chirality::CounterClockwise,
            Chirality::CounterClockwise => Chirality::Clockwise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "chirality")]
pub enum MotionPattern {
    LinearExtension,
    CShaped,
    JShaped,
    SShaped,
    Helical(Chirality),
    Spiral,
    Unclassified,
}

impl fmt::Display for MotionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MotionPattern::LinearExtension => f.write_str("Linear extension"),
            MotionPattern::CShaped => f.write_str("C-shaped"),
            MotionPattern::JShaped => f.write_str("J-shaped"),
            MotionPattern::SShaped => f.write_str("S-shaped"),
            MotionPattern::Helical(Chirality::Clockwise) => f.write_str("Helical (CW)"),
            MotionPattern::Helical(Chirality::CounterClockwise) => f.write_str("Helical (CCW)"),
            MotionPattern::Spiral => f.write_str("Spiral"),
            MotionPattern::Unclassified => f.write_str("Unclassified"),
        }
    }
}

/// Map a command onto one of the canonical motion patterns.
///
/// Rules are checked in order; the first match wins. Thread lengths only
/// matter for the untwisted patterns: both slack selects linear extension,
/// both at the rest length selects the C-bend.
pub fn classify_pattern(
    control: &ControlInput,
    params: &ActuatorParams,
    angle_tol: f64,
) -> Result<MotionPattern, ModelError> {
    control.check_finite()?;
    if !angle_tol.is_finite() || angle_tol < 0.0 {
        return Err(ModelError::NonFinite("angle_tol"));
    }
    let near = |a: f64, b: f64| (a - b).abs() <= angle_tol;
    let (t1, t2) = (control.theta_left, control.theta_right);

    if near(t1, 0.0) && near(t2, 0.0) {
        let [l1, l2] = control.thread_lengths();
        let tight = |l: f64| (l - params.rest_length).abs() <= THREAD_LENGTH_TOL;
        let slack = |l: f64| l > params.rest_length + THREAD_LENGTH_TOL;
        return Ok(if slack(l1) && slack(l2) {
            MotionPattern::LinearExtension
        } else if tight(l1) && tight(l2) {
            MotionPattern::CShaped
        } else {
            MotionPattern::Unclassified
        });
    }
    if near(t1, -90.0) && near(t2, 90.0) {
        return Ok(MotionPattern::JShaped);
    }
    if near(t1, -180.0) && near(t2, 180.0) {
        return Ok(MotionPattern::SShaped);
    }
    if near(t1, t2) && !near(t1, 0.0) && !near(t2, 0.0) && t1.signum() == t2.signum() {
        let chirality = if t1 < 0.0 {
            Chirality::CounterClockwise
        } else {
            Chirality::Clockwise
        };
        return Ok(MotionPattern::Helical(chirality));
    }
    // typical right-tube range is 0..40 deg; anything strictly inside (0, 90) counts
    if (near(t1, -90.0) && t2 > 0.0 && t2 < 90.0) || (near(t2, 90.0) && t1 < 0.0 && t1 > -90.0) {
        return Ok(MotionPattern::Spiral);
    }
    Ok(MotionPattern::Unclassified)
}

/// Pressurized length under equal pressure in both tubes, from the force
/// balance at the bottom connector.
pub fn linear_extension_length(pressure: f64, params: &ActuatorParams) -> Result<f64, ModelError> {
    if !pressure.is_finite() {
        return Err(ModelError::NonFinite("pressure"));
    }
    if pressure < 0.0 {
        return Err(ModelError::InvalidControl("pressure must be >= 0".into()));
    }
    params.validate()?;
    let ActuatorParams {
        inner_diameter: di,
        outer_diameter: d_o,
        ..
    } = *params;
    let load = 2.0 * params.actuation_mass * params.gravity + pressure * PI * di * di;
    let stiffness = params.youngs_modulus * PI * (d_o * d_o - di * di);
    Ok((load / stiffness + 1.0) * params.rest_length)
}

/// Whether threads paid out by `slack` stay loose at `pressure`
/// (pressurized length strictly below `L0 + slack`).
pub fn thread_stays_slack(
    pressure: f64,
    slack: f64,
    params: &ActuatorParams,
) -> Result<bool, ModelError> {
    Ok(linear_extension_length(pressure, params)? < params.rest_length + slack)
}

/// Constant-curvature arc of the C-bend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcGeometry {
    /// Center angle, rad.
    pub center_angle: f64,
    /// Inner diameter of the arc, m. `+inf` for the straight configuration.
    pub inner_diameter: f64,
    /// Thread traction, N.
    pub thread_tension: f64,
}

impl ArcGeometry {
    pub fn is_straight(&self) -> bool {
        self.center_angle == 0.0
    }

    /// Elongation of the outer edge relative to the inner (thread) edge.
    pub fn outer_elongation(&self, params: &ActuatorParams) -> f64 {
        self.center_angle * params.outer_diameter
    }
}

fn check_spring(k: f64) -> Result<(), ModelError> {
    if !k.is_finite() {
        return Err(ModelError::NonFinite("k"));
    }
    if k <= 0.0 {
        return Err(ModelError::NotPositive {
            name: "k",
            value: k,
        });
    }
    Ok(())
}

/// Arc geometry of the C-bend for pressure `pressure` and outer-edge spring
/// constant `k` (N/m). The inner edge keeps the thread length
/// [`ActuatorParams::arc_length`].
pub fn c_bend_geometry(
    pressure: f64,
    k: f64,
    params: &ActuatorParams,
) -> Result<ArcGeometry, ModelError> {
    if !pressure.is_finite() {
        return Err(ModelError::NonFinite("pressure"));
    }
    if pressure < 0.0 {
        return Err(ModelError::InvalidControl("pressure must be >= 0".into()));
    }
    check_spring(k)?;
    params.validate()?;
    if pressure == 0.0 {
        return Ok(ArcGeometry {
            center_angle: 0.0,
            inner_diameter: f64::INFINITY,
            thread_tension: 0.0,
        });
    }
    let push = pressure * PI * params.inner_diameter.powi(2);
    let center_angle = push / (8.0 * k * params.outer_diameter);
    let inner_diameter = 16.0 * k * params.outer_diameter * params.arc_length() / push;
    // T = k (L - L0) with L - L0 = p π di² / (8k)
    let thread_tension = push / 8.0;
    Ok(ArcGeometry {
        center_angle,
        inner_diameter,
        thread_tension,
    })
}

/// World-frame point, m (x right, y forward, z down, origin at the bottom
/// center of the motor frame).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl TipPosition {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        TipPosition { x, y, z }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn distance(&self, other: &TipPosition) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}

impl From<[f64; 3]> for TipPosition {
    fn from(v: [f64; 3]) -> Self {
        TipPosition::new(v[0], v[1], v[2])
    }
}

/// Tip (marker) coordinates of the C-bend. `x` is identically zero.
pub fn c_bend_tip(pressure: f64, k: f64, params: &ActuatorParams) -> Result<TipPosition, ModelError> {
    let arc = c_bend_geometry(pressure, k, params)?;
    let length = params.arc_length();
    if arc.is_straight() {
        return Ok(TipPosition::new(0.0, 0.0, length));
    }
    let beta = arc.center_angle;
    let radius = length / beta + params.outer_diameter / 2.0;
    // 1 - cos β written as 2 sin²(β/2) so tiny pressures keep their precision
    let half = (beta / 2.0).sin();
    Ok(TipPosition::new(
        0.0,
        radius * 2.0 * half * half,
        radius * beta.sin(),
    ))
}

/// Azimuth (deg) of the thread guide on the tube surface at arc position
/// `s` measured from the distal (bottom) end; zero is the forward side.
pub fn thread_azimuth(s: f64, theta: f64, params: &ActuatorParams) -> f64 {
    let frac = (s / params.rest_length).clamp(0.0, 1.0);
    frac * theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> ActuatorParams {
        ActuatorParams::default()
    }

    fn control(t1: f64, t2: f64) -> ControlInput {
        ControlInput::relaxed(&params())
            .with_twist(t1, t2)
            .with_pressures(0.1e6, 0.1e6)
    }

    #[test]
    fn classify_canonical_patterns() {
        let p = params();
        let tol = DEFAULT_ANGLE_TOL;
        assert_eq!(
            classify_pattern(&control(-90.0, 90.0), &p, tol).unwrap(),
            MotionPattern::JShaped
        );
        let slack = control(0.0, 0.0).with_threads(0.32, 0.32);
        assert_eq!(
            classify_pattern(&slack, &p, tol).unwrap(),
            MotionPattern::LinearExtension
        );
        assert_eq!(
            classify_pattern(&control(0.0, 0.0), &p, tol).unwrap(),
            MotionPattern::CShaped
        );
        assert_eq!(
            classify_pattern(&control(-180.0, 180.0), &p, tol).unwrap(),
            MotionPattern::SShaped
        );
        assert_eq!(
            classify_pattern(&control(-90.0, -90.0), &p, tol).unwrap(),
            MotionPattern::Helical(Chirality::CounterClockwise)
        );
        assert_eq!(
            classify_pattern(&control(90.0, 90.0), &p, tol).unwrap(),
            MotionPattern::Helical(Chirality::Clockwise)
        );
        assert_eq!(
            classify_pattern(&control(-90.0, 10.0), &p, tol).unwrap(),
            MotionPattern::Spiral
        );
        assert_eq!(
            classify_pattern(&control(37.0, -140.0), &p, tol).unwrap(),
            MotionPattern::Unclassified
        );
    }

    #[test]
    fn classify_rejects_non_finite() {
        let c = control(f64::INFINITY, 0.0);
        assert!(classify_pattern(&c, &params(), 5.0).is_err());
    }

    #[test]
    fn classify_tolerance_edges() {
        let p = params();
        assert_eq!(
            classify_pattern(&control(-86.0, 94.0), &p, 5.0).unwrap(),
            MotionPattern::JShaped
        );
        assert_eq!(
            classify_pattern(&control(-84.0, 90.0), &p, 5.0).unwrap(),
            MotionPattern::Spiral
        );
        // one thread slack, one tight
        let mixed = control(0.0, 0.0).with_threads(0.32, 0.3);
        assert_eq!(
            classify_pattern(&mixed, &p, 5.0).unwrap(),
            MotionPattern::Unclassified
        );
    }

    proptest! {
        #[test]
        fn mirrored_helix_flips_chirality(t1 in -200.0f64..200.0, t2 in -200.0f64..200.0) {
            let p = params();
            let c = control(t1, t2);
            let a = classify_pattern(&c, &p, 5.0).unwrap();
            let b = classify_pattern(&c.mirrored(), &p, 5.0).unwrap();
            if let MotionPattern::Helical(ch) = a {
                prop_assert_eq!(b, MotionPattern::Helical(ch.opposite()));
            }
            // deterministic
            prop_assert_eq!(a, classify_pattern(&c, &p, 5.0).unwrap());
        }
    }

    #[test]
    fn linear_extension_values() {
        let mut p = params();
        let l = linear_extension_length(0.2e6, &p).unwrap();
        assert!((l * 1e3 - 352.6).abs() < 0.1, "{}", l * 1e3);
        let l = linear_extension_length(0.1e6, &p).unwrap();
        assert!((l * 1e3 - 327.6).abs() < 0.1, "{}", l * 1e3);
        p.actuation_mass = 0.0;
        assert_eq!(linear_extension_length(0.0, &p).unwrap(), p.rest_length);
    }

    #[test]
    fn linear_extension_rejects_degenerate_tube() {
        let p = ActuatorParams {
            outer_diameter: 0.005,
            ..params()
        };
        assert!(linear_extension_length(0.1e6, &p).is_err());
        assert!(linear_extension_length(-1.0, &params()).is_err());
    }

    #[test]
    fn slack_check() {
        let p = params();
        // 352.6 mm at 0.2 MPa
        assert!(thread_stays_slack(0.2e6, 0.06, &p).unwrap());
        assert!(!thread_stays_slack(0.2e6, 0.05, &p).unwrap());
    }

    #[test]
    fn c_bend_reference_values() {
        let p = params();
        let arc = c_bend_geometry(0.1e6, 200.6, &p).unwrap();
        assert!((arc.center_angle - 0.959).abs() < 5e-4);
        assert!((arc.inner_diameter - 0.605).abs() < 5e-4);
        let arc = c_bend_geometry(0.05e6, 200.6, &p).unwrap();
        assert!((arc.center_angle - 0.480).abs() < 5e-4);
    }

    #[test]
    fn c_bend_zero_pressure_is_straight() {
        let p = params();
        let arc = c_bend_geometry(0.0, 200.6, &p).unwrap();
        assert_eq!(arc.center_angle, 0.0);
        assert!(arc.inner_diameter.is_infinite());
        let tip = c_bend_tip(0.0, 200.6, &p).unwrap();
        assert_eq!(tip, TipPosition::new(0.0, 0.0, 0.29));
        assert!(c_bend_geometry(0.1e6, 0.0, &p).is_err());
    }

    #[test]
    fn c_bend_tip_values() {
        let p = params();
        let tip = c_bend_tip(0.1e6, 200.6, &p).unwrap();
        assert_eq!(tip.x, 0.0);
        assert!((tip.y * 1e3 - 130.88).abs() < 0.05);
        assert!((tip.z * 1e3 - 251.62).abs() < 0.05);
        let tiny = c_bend_tip(1e-3, 200.6, &p).unwrap();
        assert!(tiny.y.abs() < 1e-8 && (tiny.z - 0.29).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn arc_identities(p in 1e3f64..5e5, k in 10.0f64..2000.0) {
            let params = params();
            let a = c_bend_geometry(p, k, &params).unwrap();
            let b = c_bend_geometry(2.0 * p, k, &params).unwrap();
            let rel = |x: f64, y: f64| ((x - y) / y).abs();
            prop_assert!(rel(b.center_angle, 2.0 * a.center_angle) < 1e-9);
            prop_assert!(rel(b.inner_diameter, a.inner_diameter / 2.0) < 1e-9);
            let l0 = params.arc_length();
            prop_assert!(rel(a.center_angle * a.inner_diameter / 2.0, l0) < 1e-9);
            let outer = a.center_angle * (a.inner_diameter / 2.0 + params.outer_diameter);
            let expected = l0 + p * PI * params.inner_diameter.powi(2) / (8.0 * k);
            prop_assert!(rel(outer, expected) < 1e-9);
            prop_assert!(c_bend_tip(p, k, &params).unwrap().x == 0.0);
        }

        #[test]
        fn monotone_in_pressure(p in 1e3f64..4e5, dp in 1.0f64..1e5) {
            let params = params();
            let l1 = linear_extension_length(p, &params).unwrap();
            let l2 = linear_extension_length(p + dp, &params).unwrap();
            prop_assert!(l2 > l1);
            let a = c_bend_geometry(p, 200.6, &params).unwrap();
            let b = c_bend_geometry(p + dp, 200.6, &params).unwrap();
            prop_assert!(b.center_angle > a.center_angle);
            prop_assert!(b.inner_diameter < a.inner_diameter);
        }
    }

    #[test]
    fn azimuth_boundaries() {
        let p = params();
        assert_eq!(thread_azimuth(0.0, 123.0, &p), 0.0);
        assert_eq!(thread_azimuth(p.rest_length, -90.0, &p), -90.0);
        assert!((thread_azimuth(p.rest_length / 2.0, 180.0, &p) - 90.0).abs() < 1e-12);
    }
}
