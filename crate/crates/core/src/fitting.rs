//! Least-squares identification of the C-bend spring constant.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{c_bend_tip, TipPosition};
use crate::params::ActuatorParams;
use crate::units::{mm_to_m, mpa_to_pa};

pub const DEFAULT_BOUNDS: (f64, f64) = (50.0, 500.0);
pub const DEFAULT_STEP: f64 = 0.05;
pub const DEFAULT_TOL: f64 = 0.05;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("no observations")]
    Empty,
    #[error("invalid bounds [{0}, {1}]: need 0 < lo < hi")]
    Bounds(f64, f64),
    #[error("step must be positive, got {0}")]
    Step(f64),
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("observation {index}: {reason}")]
    Observation { index: usize, reason: String },
    #[error("residual is non-finite over the whole bracket")]
    NonFinite,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One measured marker position at a given pressure (world frame, SI).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub pressure: f64,
    pub tip: TipPosition,
}

impl Observation {
    pub fn new(pressure: f64, tip: TipPosition) -> Self {
        Observation { pressure, tip }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub k: f64,
    /// Sum of squared y/z errors, m².
    pub residual: f64,
    /// `(model - measured)` in y and z, m.
    pub per_observation_errors: Vec<(f64, f64)>,
}

fn check_observations(obs: &[Observation]) -> Result<(), FitError> {
    if obs.is_empty() {
        return Err(FitError::Empty);
    }
    for (index, o) in obs.iter().enumerate() {
        if !(o.pressure.is_finite() && o.pressure > 0.0) {
            return Err(FitError::Observation {
                index,
                reason: format!("pressure must be positive, got {}", o.pressure),
            });
        }
        if !o.tip.as_array().iter().all(|v| v.is_finite()) {
            return Err(FitError::Observation {
                index,
                reason: "non-finite tip".into(),
            });
        }
    }
    Ok(())
}

fn errors_at(k: f64, obs: &[Observation], params: &ActuatorParams) -> Vec<(f64, f64)> {
    obs.iter()
        .map(|o| match c_bend_tip(o.pressure, k, params) {
            Ok(tip) => (tip.y - o.tip.y, tip.z - o.tip.z),
            Err(_) => (f64::NAN, f64::NAN),
        })
        .collect()
}

fn objective(k: f64, obs: &[Observation], params: &ActuatorParams) -> f64 {
    if !(k > 0.0 && k.is_finite()) {
        return f64::NAN;
    }
    errors_at(k, obs, params)
        .iter()
        .map(|(dy, dz)| dy * dy + dz * dz)
        .sum()
}

/// Sum over observations of squared y and z errors of the C-bend tip
/// model. The measured x coordinate does not enter.
pub fn residual(k: f64, obs: &[Observation], params: &ActuatorParams) -> Result<f64, FitError> {
    check_observations(obs)?;
    if !(k > 0.0 && k.is_finite()) {
        return Err(FitError::Bounds(k, k));
    }
    Ok(objective(k, obs, params))
}

fn check_bounds(bounds: (f64, f64)) -> Result<(), FitError> {
    let (lo, hi) = bounds;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
        return Err(FitError::Bounds(lo, hi));
    }
    Ok(())
}

fn finish(k: f64, obs: &[Observation], params: &ActuatorParams) -> FitResult {
    let per_observation_errors = errors_at(k, obs, params);
    let residual = per_observation_errors
        .iter()
        .map(|(dy, dz)| dy * dy + dz * dz)
        .sum();
    FitResult {
        k,
        residual,
        per_observation_errors,
    }
}

/// Exhaustive evaluation at `lo, lo + step, …` (plus `hi` itself).
pub fn grid_search_k(
    obs: &[Observation],
    params: &ActuatorParams,
    bounds: (f64, f64),
    step: f64,
) -> Result<FitResult, FitError> {
    check_observations(obs)?;
    check_bounds(bounds)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(FitError::Step(step));
    }
    let (lo, hi) = bounds;
    let count = ((hi - lo) / step).floor() as usize;
    let mut best: Option<(f64, f64)> = None;
    let mut consider = |k: f64| {
        let r = objective(k, obs, params);
        if r.is_finite() && best.is_none_or(|(_, br)| r < br) {
            best = Some((k, r));
        }
    };
    for i in 0..=count {
        consider(lo + i as f64 * step);
    }
    if lo + count as f64 * step < hi {
        consider(hi);
    }
    let (k, _) = best.ok_or(FitError::NonFinite)?;
    Ok(finish(k, obs, params))
}

/// Global minimizer of [`residual`] over `bounds`: a coarse scan locates the
/// basin, golden-section search refines it to `tol`.
pub fn fit_spring_constant(
    obs: &[Observation],
    params: &ActuatorParams,
    bounds: (f64, f64),
    tol: f64,
) -> Result<FitResult, FitError> {
    check_observations(obs)?;
    check_bounds(bounds)?;
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(FitError::Tolerance(tol));
    }
    let (lo, hi) = bounds;
    const SCAN: usize = 512;
    let h = (hi - lo) / SCAN as f64;
    let samples: Vec<(f64, f64)> = (0..=SCAN)
        .map(|i| {
            let k = if i == SCAN { hi } else { lo + i as f64 * h };
            (k, objective(k, obs, params))
        })
        .collect();
    let (best_i, _) = samples
        .iter()
        .enumerate()
        .filter(|(_, (_, r))| r.is_finite())
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .ok_or(FitError::NonFinite)?;
    let mut a = samples[best_i.saturating_sub(1)].0;
    let mut b = samples[(best_i + 1).min(SCAN)].0;

    let f = |k: f64| {
        let r = objective(k, obs, params);
        if r.is_finite() {
            r
        } else {
            f64::INFINITY
        }
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > tol * 1e-3 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mut k = 0.5 * (a + b);
    // the bracket may sit against a bound where the minimum is the bound itself
    for candidate in [samples[best_i].0, lo, hi] {
        if f(candidate) < f(k) {
            k = candidate;
        }
    }
    Ok(finish(k, obs, params))
}

#[derive(Debug, Deserialize)]
struct ObservationRow {
    #[serde(rename = "p_MPa")]
    p_mpa: f64,
    x_mm: f64,
    y_mm: f64,
    z_mm: f64,
}

/// Parse `p_MPa,x_mm,y_mm,z_mm` rows.
pub fn read_observations(reader: impl Read) -> Result<Vec<Observation>, FitError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| FitError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let expected = ["p_MPa", "x_mm", "y_mm", "z_mm"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(FitError::Parse {
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<ObservationRow>() {
        let row = row.map_err(|e| FitError::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        out.push(Observation::new(
            mpa_to_pa(row.p_mpa),
            TipPosition::new(mm_to_m(row.x_mm), mm_to_m(row.y_mm), mm_to_m(row.z_mm)),
        ));
    }
    check_observations(&out)?;
    Ok(out)
}

pub fn load_observations(path: impl AsRef<Path>) -> Result<Vec<Observation>, FitError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| FitError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_observations(file)
}

/// The four C-bend measurements used to identify `k`, in mm / MPa.
pub const MEASURED_TIPS: [(f64, f64, f64, f64); 4] = [
    (0.05, 0.0, 80.0, 276.0),
    (0.10, 0.0, 125.0, 239.0),
    (0.15, 0.0, 157.0, 185.0),
    (0.20, 0.0, 171.0, 138.0),
];

pub fn measured_observations() -> Vec<Observation> {
    MEASURED_TIPS
        .iter()
        .map(|&(p, x, y, z)| {
            Observation::new(
                mpa_to_pa(p),
                TipPosition::new(mm_to_m(x), mm_to_m(y), mm_to_m(z)),
            )
        })
        .collect()
}
