use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::state::RigState;
use super::vec3::arr;
use crate::model::{Chirality, TipPosition};

/// Horizontal radius below which points are ignored by the winding sum.
const WINDING_MIN_RADIUS: f64 = 1e-3;
const AXIS_CROSSING: f64 = PI * (1.0 - 1e-6);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeMetrics {
    pub tip: TipPosition,
    /// Signed forward-bending curvature of the mean centerline per interior
    /// node, 1/m, base first. Positive bends toward +y.
    pub curvature_profile: Vec<f64>,
    /// Degrees, positive clockwise seen from above (right-handed about +z,
    /// which points down).
    pub winding_angle: f64,
    pub chirality: Option<Chirality>,
    /// m.
    pub bend_plane_deviation: f64,
}

pub fn shape_metrics(state: &RigState) -> ShapeMetrics {
    let line = state.centerline();
    let winding = winding_angle(&line);
    ShapeMetrics {
        tip: marker_point(&line, state.model.marker_fraction).into(),
        curvature_profile: signed_curvature(&line),
        winding_angle: winding,
        chirality: if winding > 0.0 {
            Some(Chirality::Clockwise)
        } else if winding < 0.0 {
            Some(Chirality::CounterClockwise)
        } else {
            None
        },
        bend_plane_deviation: plane_deviation(&line),
    }
}

/// Point at `fraction` of the node index range, linearly interpolated.
pub fn marker_point(line: &[[f64; 3]], fraction: f64) -> [f64; 3] {
    let n = line.len() - 1;
    let u = fraction.clamp(0.0, 1.0) * n as f64;
    let i = (u.floor() as usize).min(n.saturating_sub(1));
    arr::lerp(line[i], line[(i + 1).min(n)], u - i as f64)
}

/// Turning of consecutive edges projected on the y-z plane, divided by
/// the mean edge length.
pub fn signed_curvature(line: &[[f64; 3]]) -> Vec<f64> {
    line.windows(3)
        .map(|w| {
            let a = arr::sub(w[1], w[0]);
            let b = arr::sub(w[2], w[1]);
            let (la, lb) = (arr::norm(a), arr::norm(b));
            let c = arr::cross(a, b);
            let kb = 2.0 / (la * lb + arr::dot(a, b));
            // bending towards +y while running down +z turns about -x
            -c[0] * kb / (0.5 * (la + lb))
        })
        .collect()
}

/// Total azimuth swept about the vertical through the base center, deg.
pub fn winding_angle(line: &[[f64; 3]]) -> f64 {
    let origin = line[0];
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for p in line {
        let (x, y) = (p[0] - origin[0], p[1] - origin[1]);
        if x.hypot(y) < WINDING_MIN_RADIUS {
            continue;
        }
        let a = y.atan2(x);
        if let Some(q) = prev {
            let mut d = a - q;
            while d > PI {
                d -= 2.0 * PI;
            }
            while d < -PI {
                d += 2.0 * PI;
            }
            // a half-turn jump means the curve passed through the axis: no sweep
            if d.abs() < AXIS_CROSSING {
                total += d;
            }
        }
        prev = Some(a);
    }
    total.to_degrees()
}

/// Largest distance from the least-squares plane.
pub fn plane_deviation(line: &[[f64; 3]]) -> f64 {
    let n = line.len() as f64;
    let c = line.iter().fold(Vector3::zeros(), |s, p| s + Vector3::from(*p)) / n;
    let mut cov = Matrix3::zeros();
    for p in line {
        let d = Vector3::from(*p) - c;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |m, (i, &v)| if v < m.1 { (i, v) } else { m });
    let normal = eig.eigenvectors.column(k).into_owned();
    line.iter()
        .map(|p| (Vector3::from(*p) - c).dot(&normal).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_line_metrics() {
        let line: Vec<[f64; 3]> = (0..=10).map(|i| [0.0, 0.0, i as f64 * 0.03]).collect();
        assert!(signed_curvature(&line).iter().all(|&k| k == 0.0));
        assert_eq!(winding_angle(&line), 0.0);
        assert!(plane_deviation(&line) < 1e-12);
        assert_eq!(marker_point(&line, 290.0 / 300.0)[2], 0.29);
    }

    #[test]
    fn arc_curvature_sign_and_value() {
        // circle of radius 0.2 in the y-z plane bending towards +y
        let r = 0.2;
        let line: Vec<[f64; 3]> = (0..=20)
            .map(|i| {
                let t = i as f64 * 0.05;
                [0.0, r * (1.0 - t.cos()), r * t.sin()]
            })
            .collect();
        for k in signed_curvature(&line) {
            assert!((k - 1.0 / r).abs() < 1e-3 / r, "{k}");
        }
        assert!(plane_deviation(&line) < 1e-12);
    }

    #[test]
    fn winding_of_helix() {
        // right-handed about +z: x = cos, y = sin gives positive sweep
        let line: Vec<[f64; 3]> = (0..=100)
            .map(|i| {
                let t = i as f64 * 0.05;
                [0.05 * t.cos(), 0.05 * t.sin(), 0.01 * t]
            })
            .collect();
        let base = [[0.0, 0.0, 0.0]];
        let full: Vec<[f64; 3]> = base.iter().chain(line.iter()).copied().collect();
        assert!((winding_angle(&full) - 5.0f64.to_degrees()).abs() < 1e-9);
        let mirrored: Vec<[f64; 3]> = full.iter().map(|p| [-p[0], p[1], p[2]]).collect();
        assert!((winding_angle(&mirrored) + 5.0f64.to_degrees()).abs() < 1e-9);
        assert!(plane_deviation(&full) > 0.01);
    }

    #[test]
    fn planar_curve_through_axis_has_no_winding() {
        let line: Vec<[f64; 3]> = (0..=20)
            .map(|i| [0.0, 0.01 * (i as f64 - 10.0), 0.01 * i as f64])
            .collect();
        assert_eq!(winding_angle(&line), 0.0);
    }
}
