//! Tip trajectory ingestion: camera-to-world transform, Gaussian smoothing,
//! file I/O and model/measurement comparison.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{m_to_mm, mm_to_m};

/// Default smoothing width, samples (about 0.17 s at 30 fps).
pub const DEFAULT_SIGMA: f64 = 5.0;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("no samples")]
    NoSamples,
    #[error("missing or wrong header: expected t_s,x,y,z,frame")]
    MissingHeader,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: timestamp {t} s does not increase")]
    NonMonotone { line: usize, t: f64 },
    #[error("line {line}: frame {found} differs from {expected}")]
    MixedFrames {
        line: usize,
        expected: Frame,
        found: Frame,
    },
    #[error("sigma must be positive, got {0}")]
    Sigma(f64),
    #[error("series must be in the world frame")]
    NotWorldFrame,
    #[error("time ranges do not overlap")]
    Disjoint,
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Camera,
    World,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frame::Camera => "camera",
            Frame::World => "world",
        })
    }
}

impl std::str::FromStr for Frame {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "camera" => Ok(Frame::Camera),
            "world" => Ok(Frame::World),
            other => Err(format!("unknown frame {other:?}")),
        }
    }
}

/// Position of the depth camera in the world frame. The axis assignment is
/// fixed: camera x backward, y downward, z leftward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraExtrinsics {
    pub translation: [f64; 3],
}

impl CameraExtrinsics {
    pub fn new(translation: [f64; 3]) -> Self {
        CameraExtrinsics { translation }
    }
}

pub fn camera_to_world(p: [f64; 3], ext: &CameraExtrinsics) -> [f64; 3] {
    let t = ext.translation;
    [-p[2] + t[0], -p[0] + t[1], p[1] + t[2]]
}

pub fn world_to_camera(p: [f64; 3], ext: &CameraExtrinsics) -> [f64; 3] {
    let t = ext.translation;
    let (x, y, z) = (p[0] - t[0], p[1] - t[1], p[2] - t[2]);
    [-y, z, -x]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub point: [f64; 3],
}

/// Time-stamped points in one frame; timestamps strictly increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySeries {
    frame: Frame,
    samples: Vec<Sample>,
}

impl TrajectorySeries {
    pub fn new(frame: Frame, samples: Vec<Sample>) -> Result<Self, TrajectoryError> {
        if samples.is_empty() {
            return Err(TrajectoryError::NoSamples);
        }
        for (i, w) in samples.windows(2).enumerate() {
            if w[1].t <= w[0].t || !w[1].t.is_finite() {
                return Err(TrajectoryError::NonMonotone {
                    line: i + 2,
                    t: w[1].t,
                });
            }
        }
        Ok(TrajectorySeries { frame, samples })
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_world(&self, ext: &CameraExtrinsics) -> TrajectorySeries {
        match self.frame {
            Frame::World => self.clone(),
            Frame::Camera => TrajectorySeries {
                frame: Frame::World,
                samples: self
                    .samples
                    .iter()
                    .map(|s| Sample {
                        t: s.t,
                        point: camera_to_world(s.point, ext),
                    })
                    .collect(),
            },
        }
    }

    fn map_points(&self, f: impl Fn(usize, [f64; 3]) -> [f64; 3]) -> TrajectorySeries {
        TrajectorySeries {
            frame: self.frame,
            samples: self
                .samples
                .iter()
                .enumerate()
                .map(|(i, s)| Sample {
                    t: s.t,
                    point: f(i, s.point),
                })
                .collect(),
        }
    }

    /// Linear interpolation; `None` outside the sampled time range.
    pub fn at(&self, t: f64) -> Option<[f64; 3]> {
        let s = &self.samples;
        if t < s[0].t || t > s[s.len() - 1].t {
            return None;
        }
        let hi = s.partition_point(|x| x.t < t);
        if s[hi].t == t {
            return Some(s[hi].point);
        }
        let (a, b) = (&s[hi - 1], &s[hi]);
        let w = (t - a.t) / (b.t - a.t);
        Some(std::array::from_fn(|k| a.point[k] + w * (b.point[k] - a.point[k])))
    }
}

/// Index into `0..n` for an arbitrary offset with half-sample symmetric
/// reflection (`d c b a | a b c d | d c b a`).
fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Normalized Gaussian kernel truncated at `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Per-coordinate Gaussian smoothing; timestamps are kept.
pub fn gaussian_smooth(
    series: &TrajectorySeries,
    sigma: f64,
) -> Result<TrajectorySeries, TrajectoryError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(TrajectoryError::Sigma(sigma));
    }
    if series.is_empty() {
        return Err(TrajectoryError::NoSamples);
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let n = series.len();
    let pts = &series.samples;
    Ok(series.map_points(|i, _| {
        let mut acc = [0.0; 3];
        for (j, w) in kernel.iter().enumerate() {
            let src = reflect_index(i as isize + j as isize - radius, n);
            for (a, v) in acc.iter_mut().zip(pts[src].point) {
                *a += w * v;
            }
        }
        acc
    }))
}

/// Multiply each point's distance from the camera origin by `1 + u`,
/// `u ~ U(-fraction, fraction)`. Deterministic for a given seed.
pub fn add_depth_noise(series: &TrajectorySeries, fraction: f64, seed: u64) -> TrajectorySeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales: Vec<f64> = (0..series.len())
        .map(|_| 1.0 + rng.gen_range(-fraction..=fraction))
        .collect();
    series.map_points(|i, p| p.map(|v| v * scales[i]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMetrics {
    pub rms: f64,
    pub max_abs: f64,
    pub per_axis_rms: [f64; 3],
    pub count: usize,
}

/// Pointwise Euclidean error of `model` at the measured timestamps. Model
/// values between its own samples are linearly interpolated; measured
/// samples outside the model's time range are skipped.
pub fn compare_trajectories(
    model: &TrajectorySeries,
    measured: &TrajectorySeries,
) -> Result<ComparisonMetrics, TrajectoryError> {
    if model.frame != Frame::World || measured.frame != Frame::World {
        return Err(TrajectoryError::NotWorldFrame);
    }
    let mut sq = 0.0;
    let mut axis = [0.0; 3];
    let mut max_abs: f64 = 0.0;
    let mut count = 0usize;
    for s in &measured.samples {
        let Some(m) = model.at(s.t) else { continue };
        let d: [f64; 3] = std::array::from_fn(|k| m[k] - s.point[k]);
        let e2 = d.iter().map(|v| v * v).sum::<f64>();
        sq += e2;
        for k in 0..3 {
            axis[k] += d[k] * d[k];
        }
        max_abs = max_abs.max(e2.sqrt());
        count += 1;
    }
    if count == 0 {
        return Err(TrajectoryError::Disjoint);
    }
    let n = count as f64;
    Ok(ComparisonMetrics {
        rms: (sq / n).sqrt(),
        max_abs,
        per_axis_rms: axis.map(|a| (a / n).sqrt()),
        count,
    })
}

#[derive(Debug, Deserialize)]
struct Row {
    t_s: f64,
    x: f64,
    y: f64,
    z: f64,
    frame: String,
}

/// Parse `t_s,x,y,z,frame` rows with coordinates in mm.
pub fn read_trajectory(reader: impl Read) -> Result<TrajectorySeries, TrajectoryError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|_| TrajectoryError::MissingHeader)?;
    if headers.iter().collect::<Vec<_>>() != ["t_s", "x", "y", "z", "frame"] {
        return Err(TrajectoryError::MissingHeader);
    }
    let mut samples: Vec<Sample> = Vec::new();
    let mut frame: Option<Frame> = None;
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| TrajectoryError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let f: Frame = row
            .frame
            .parse()
            .map_err(|message| TrajectoryError::Malformed { line, message })?;
        match frame {
            None => frame = Some(f),
            Some(expected) if expected != f => {
                return Err(TrajectoryError::MixedFrames {
                    line,
                    expected,
                    found: f,
                })
            }
            _ => {}
        }
        if let Some(last) = samples.last() {
            if row.t_s <= last.t {
                return Err(TrajectoryError::NonMonotone { line, t: row.t_s });
            }
        }
        let point = [row.x, row.y, row.z].map(mm_to_m);
        if !(row.t_s.is_finite() && point.iter().all(|v| v.is_finite())) {
            return Err(TrajectoryError::Malformed {
                line,
                message: "non-finite value".into(),
            });
        }
        samples.push(Sample { t: row.t_s, point });
    }
    let frame = frame.ok_or(TrajectoryError::NoSamples)?;
    TrajectorySeries::new(frame, samples)
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<TrajectorySeries, TrajectoryError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| TrajectoryError::Io(format!("{}: {e}", path.display())))?;
    read_trajectory(file)
}

pub fn write_trajectory(series: &TrajectorySeries, out: impl Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "x", "y", "z", "frame"])?;
    for s in series.samples() {
        let p = s.point.map(m_to_mm);
        w.write_record([
            s.t.to_string(),
            p[0].to_string(),
            p[1].to_string(),
            p[2].to_string(),
            series.frame().to_string(),
        ])?;
    }
    w.flush()
}
