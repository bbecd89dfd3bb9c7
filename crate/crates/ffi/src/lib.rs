//! C interface to the trunk actuator toolkit.
//!
//! All quantities are SI (m, Pa, N/m) except angles, which are degrees.
//! Every function returns a [`TrunkStatus`]; on failure a message is
//! available from [`trunk_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use trunk_core::fitting::{fit_spring_constant, Observation};
use trunk_core::model::{self, Chirality, MotionPattern, TipPosition};
use trunk_core::params::{ActuatorParams, ControlInput, DEFAULT_MAX_PRESSURE};
use trunk_core::rod::{self, MaterialParams, RigState, SolverOptions};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrunkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotConverged = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrunkPattern {
    LinearExtension = 0,
    CShaped = 1,
    JShaped = 2,
    SShaped = 3,
    HelicalClockwise = 4,
    HelicalCounterClockwise = 5,
    Spiral = 6,
    Unclassified = 7,
}

/// Rig parameters, SI units; `dip_angle_deg` in degrees.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrunkParams {
    pub inner_diameter: f64,
    pub outer_diameter: f64,
    pub rest_length: f64,
    pub youngs_modulus: f64,
    pub actuation_mass: f64,
    pub gravity: f64,
    pub top_shaft_spacing: f64,
    pub bottom_shaft_spacing: f64,
    pub dip_angle_deg: f64,
    pub marker_offset: f64,
}

/// Operator command: twist in degrees, pressures in Pa, thread lengths in m.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrunkControl {
    pub theta_left_deg: f64,
    pub theta_right_deg: f64,
    pub pressure_left: f64,
    pub pressure_right: f64,
    pub thread_length_left: f64,
    pub thread_length_right: f64,
}

/// Measured marker position at one pressure.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrunkObservation {
    pub pressure: f64,
    pub tip: [f64; 3],
}

/// Live rod simulation; create with [`trunk_sim_new`], release with
/// [`trunk_sim_free`].
pub struct TrunkSim {
    params: ActuatorParams,
    material: MaterialParams,
    options: SolverOptions,
    state: RigState,
}

impl From<ActuatorParams> for TrunkParams {
    fn from(p: ActuatorParams) -> Self {
        TrunkParams {
            inner_diameter: p.inner_diameter,
            outer_diameter: p.outer_diameter,
            rest_length: p.rest_length,
            youngs_modulus: p.youngs_modulus,
            actuation_mass: p.actuation_mass,
            gravity: p.gravity,
            top_shaft_spacing: p.top_shaft_spacing,
            bottom_shaft_spacing: p.bottom_shaft_spacing,
            dip_angle_deg: p.dip_angle,
            marker_offset: p.marker_offset,
        }
    }
}

impl From<TrunkParams> for ActuatorParams {
    fn from(p: TrunkParams) -> Self {
        ActuatorParams {
            inner_diameter: p.inner_diameter,
            outer_diameter: p.outer_diameter,
            rest_length: p.rest_length,
            youngs_modulus: p.youngs_modulus,
            actuation_mass: p.actuation_mass,
            gravity: p.gravity,
            top_shaft_spacing: p.top_shaft_spacing,
            bottom_shaft_spacing: p.bottom_shaft_spacing,
            dip_angle: p.dip_angle_deg,
            marker_offset: p.marker_offset,
        }
    }
}

impl From<TrunkControl> for ControlInput {
    fn from(c: TrunkControl) -> Self {
        ControlInput {
            theta_left: c.theta_left_deg,
            theta_right: c.theta_right_deg,
            pressure_left: c.pressure_left,
            pressure_right: c.pressure_right,
            thread_length_left: c.thread_length_left,
            thread_length_right: c.thread_length_right,
        }
    }
}

impl From<MotionPattern> for TrunkPattern {
    fn from(p: MotionPattern) -> Self {
        match p {
            MotionPattern::LinearExtension => TrunkPattern::LinearExtension,
            MotionPattern::CShaped => TrunkPattern::CShaped,
            MotionPattern::JShaped => TrunkPattern::JShaped,
            MotionPattern::SShaped => TrunkPattern::SShaped,
            MotionPattern::Helical(Chirality::Clockwise) => TrunkPattern::HelicalClockwise,
            MotionPattern::Helical(Chirality::CounterClockwise) => TrunkPattern::HelicalCounterClockwise,
            MotionPattern::Spiral => TrunkPattern::Spiral,
            MotionPattern::Unclassified => TrunkPattern::Unclassified,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(TrunkStatus, String);

impl Failure {
    fn invalid(e: impl ToString) -> Self {
        Failure(TrunkStatus::InvalidArgument, e.to_string())
    }
}

/// Run `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> TrunkStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TrunkStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TrunkStatus::Panic
        }
    }
}

unsafe fn read<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(TrunkStatus::NullPointer, format!("{name} is null")))
}

unsafe fn write<T>(p: *mut T, name: &str, value: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure(TrunkStatus::NullPointer, format!("{name} is null")));
    }
    p.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn trunk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `out` must be null or point to writable memory for one `TrunkParams`.
#[no_mangle]
pub unsafe extern "C" fn trunk_params_default(out: *mut TrunkParams) -> TrunkStatus {
    guard(|| write(out, "out", ActuatorParams::default().into()))
}

/// Actuator length under equal pressure `pressure` in both tubes, m.
///
/// # Safety
/// Pointers must be null or valid for one element.
#[no_mangle]
pub unsafe extern "C" fn trunk_linear_extension_length(
    params: *const TrunkParams,
    pressure: f64,
    out_length: *mut f64,
) -> TrunkStatus {
    guard(|| {
        let p: ActuatorParams = (*read(params, "params")?).into();
        let len = model::linear_extension_length(pressure, &p).map_err(Failure::invalid)?;
        write(out_length, "out_length", len)
    })
}

/// Closed-form C-bend marker position, m, written as x, y, z.
///
/// # Safety
/// `params` valid for one element, `out_tip` valid for three doubles.
#[no_mangle]
pub unsafe extern "C" fn trunk_c_bend_tip(
    params: *const TrunkParams,
    pressure: f64,
    k: f64,
    out_tip: *mut f64,
) -> TrunkStatus {
    guard(|| {
        let p: ActuatorParams = (*read(params, "params")?).into();
        let tip = model::c_bend_tip(pressure, k, &p).map_err(Failure::invalid)?;
        write(out_tip.cast::<[f64; 3]>(), "out_tip", tip.as_array())
    })
}

/// # Safety
/// Pointers must be null or valid for one element.
#[no_mangle]
pub unsafe extern "C" fn trunk_classify_pattern(
    params: *const TrunkParams,
    control: *const TrunkControl,
    angle_tol_deg: f64,
    out_pattern: *mut TrunkPattern,
) -> TrunkStatus {
    guard(|| {
        let p: ActuatorParams = (*read(params, "params")?).into();
        let c: ControlInput = (*read(control, "control")?).into();
        let pattern = model::classify_pattern(&c, &p, angle_tol_deg).map_err(Failure::invalid)?;
        write(out_pattern, "out_pattern", pattern.into())
    })
}

/// Least-squares outer-edge spring constant over `[k_min, k_max]`, N/m.
///
/// # Safety
/// `observations` must point to `count` elements; other pointers valid for
/// one element. `out_residual` may be null.
#[no_mangle]
pub unsafe extern "C" fn trunk_fit_spring_constant(
    params: *const TrunkParams,
    observations: *const TrunkObservation,
    count: usize,
    k_min: f64,
    k_max: f64,
    out_k: *mut f64,
    out_residual: *mut f64,
) -> TrunkStatus {
    guard(|| {
        let p: ActuatorParams = (*read(params, "params")?).into();
        if observations.is_null() {
            return Err(Failure(TrunkStatus::NullPointer, "observations is null".into()));
        }
        let obs: Vec<Observation> = std::slice::from_raw_parts(observations, count)
            .iter()
            .map(|o| Observation::new(o.pressure, TipPosition::from(o.tip)))
            .collect();
        let fit = fit_spring_constant(&obs, &p, (k_min, k_max), trunk_core::fitting::DEFAULT_TOL)
            .map_err(Failure::invalid)?;
        write(out_k, "out_k", fit.k)?;
        if !out_residual.is_null() {
            out_residual.write(fit.residual);
        }
        Ok(())
    })
}

/// Relaxed rig in equilibrium with `segments` segments per tube, using the
/// tube-wall material. Gravity is on when `gravity` is nonzero.
///
/// # Safety
/// `params` valid for one element, `out_sim` writable.
#[no_mangle]
pub unsafe extern "C" fn trunk_sim_new(
    params: *const TrunkParams,
    segments: usize,
    gravity: i32,
    out_sim: *mut *mut TrunkSim,
) -> TrunkStatus {
    guard(|| {
        let p: ActuatorParams = (*read(params, "params")?).into();
        if out_sim.is_null() {
            return Err(Failure(TrunkStatus::NullPointer, "out_sim is null".into()));
        }
        let mut options = SolverOptions::default().with_segments(segments);
        options.gravity = gravity != 0;
        let material = MaterialParams::for_params(&p);
        let relaxed = ControlInput::relaxed(&p);
        let rig = rod::build_rig(&p, &relaxed, &options).map_err(Failure::invalid)?;
        let state = rod::solve_equilibrium(&rig, &relaxed, &p, &material, &options).map_err(Failure::invalid)?;
        let sim = Box::new(TrunkSim {
            params: p,
            material,
            options,
            state,
        });
        out_sim.write(Box::into_raw(sim));
        Ok(())
    })
}

/// # Safety
/// `sim` must come from [`trunk_sim_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn trunk_sim_free(sim: *mut TrunkSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Solve for `control` starting from the current state. Returns
/// `NotConverged` (state still updated) when the tolerance was not met.
///
/// # Safety
/// `sim` from [`trunk_sim_new`], `control` valid for one element.
#[no_mangle]
pub unsafe extern "C" fn trunk_sim_apply_control(sim: *mut TrunkSim, control: *const TrunkControl) -> TrunkStatus {
    guard(|| {
        let sim = sim
            .as_mut()
            .ok_or_else(|| Failure(TrunkStatus::NullPointer, "sim is null".into()))?;
        let c: ControlInput = (*read(control, "control")?).into();
        c.validate(DEFAULT_MAX_PRESSURE).map_err(Failure::invalid)?;
        let next = rod::solve_equilibrium(&sim.state, &c, &sim.params, &sim.material, &sim.options)
            .map_err(Failure::invalid)?;
        let converged = next.diagnostics.converged;
        sim.state = next;
        if converged {
            Ok(())
        } else {
            Err(Failure(TrunkStatus::NotConverged, "solve did not reach the gradient tolerance".into()))
        }
    })
}

/// Marker position of the current state, m, as x, y, z.
///
/// # Safety
/// `sim` from [`trunk_sim_new`], `out_tip` valid for three doubles.
#[no_mangle]
pub unsafe extern "C" fn trunk_sim_tip(sim: *const TrunkSim, out_tip: *mut f64) -> TrunkStatus {
    guard(|| {
        let sim = read(sim, "sim")?;
        write(out_tip.cast::<[f64; 3]>(), "out_tip", rod::shape_metrics(&sim.state).tip.as_array())
    })
}

/// Number of mean-centerline points (segments + 1).
///
/// # Safety
/// `sim` from [`trunk_sim_new`], `out_count` writable.
#[no_mangle]
pub unsafe extern "C" fn trunk_sim_node_count(sim: *const TrunkSim, out_count: *mut usize) -> TrunkStatus {
    guard(|| {
        let sim = read(sim, "sim")?;
        write(out_count, "out_count", sim.state.node_count())
    })
}

/// Copy the mean centerline, base first, into `out_xyz` as consecutive
/// x, y, z triples. `capacity` is the number of points `out_xyz` can hold.
///
/// # Safety
/// `sim` from [`trunk_sim_new`], `out_xyz` valid for `3 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn trunk_sim_centerline(sim: *const TrunkSim, out_xyz: *mut f64, capacity: usize) -> TrunkStatus {
    guard(|| {
        let sim = read(sim, "sim")?;
        if out_xyz.is_null() {
            return Err(Failure(TrunkStatus::NullPointer, "out_xyz is null".into()));
        }
        let line = sim.state.centerline();
        if capacity < line.len() {
            return Err(Failure(
                TrunkStatus::BufferTooSmall,
                format!("need room for {} points, got {capacity}", line.len()),
            ));
        }
        let out = std::slice::from_raw_parts_mut(out_xyz, 3 * line.len());
        for (dst, p) in out.chunks_exact_mut(3).zip(&line) {
            dst.copy_from_slice(p);
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_round_trip() {
        let p = ActuatorParams::default();
        assert_eq!(ActuatorParams::from(TrunkParams::from(p)), p);
    }

    #[test]
    fn error_message_is_cleared_on_success() {
        let mut len = 0.0;
        let mut p = std::mem::MaybeUninit::<TrunkParams>::uninit();
        unsafe {
            assert_eq!(trunk_params_default(p.as_mut_ptr()), TrunkStatus::Ok);
            let p = p.assume_init();
            assert_eq!(trunk_linear_extension_length(&p, -1.0, &mut len), TrunkStatus::InvalidArgument);
            assert!(!trunk_last_error_message().is_null());
            assert_eq!(trunk_linear_extension_length(&p, 0.1e6, &mut len), TrunkStatus::Ok);
            assert!(trunk_last_error_message().is_null());
        }
    }
}
