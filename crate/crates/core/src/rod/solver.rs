//! L-BFGS minimization with control continuation.

use std::collections::VecDeque;

use super::energy;
use super::metrics::shape_metrics;
use super::state::{RigModel, RigState};
use super::{MaterialParams, RodError, SolverOptions};
use crate::measurement::{Frame, Sample, TrajectorySeries};
use crate::params::{ActuatorParams, ControlInput};

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;
/// Energy differences below this (relative) are treated as rounding noise
/// and the line search falls back to the directional-derivative test.
const ENERGY_NOISE: f64 = 1e-13;
/// Gradient norm (N) that ends an intermediate continuation step.
const INTERMEDIATE_TOLERANCE: f64 = 1e-3;

/// Snapshot handed to the observer after every accepted iterate.
#[derive(Debug, Clone, Copy)]
pub struct SolveProgress<'a> {
    /// Continuation step, 1-based.
    pub step: usize,
    pub steps: usize,
    /// Iteration within the current step.
    pub iteration: usize,
    pub energy: f64,
    pub gradient_norm: f64,
    pub control: &'a ControlInput,
    pub dofs: &'a [f64],
}

struct Problem<'a> {
    model: &'a RigModel,
    control: ControlInput,
    params: &'a ActuatorParams,
    material: &'a MaterialParams,
}

impl Problem<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        energy::value(self.model, x, &self.control, self.params, self.material)
    }

    fn value_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        energy::value_and_grad(self.model, x, &self.control, self.params, self.material)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

enum StepOutcome {
    Converged,
    Exhausted,
    Stalled,
    Aborted,
}

struct Minimizer {
    memory: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    capacity: usize,
    max_step: f64,
}

impl Minimizer {
    /// Two-loop recursion: `-H g`.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.memory.len());
        for (s, y, rho) in self.memory.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in self.memory.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }

    fn remember(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if sy <= 1e-12 * norm(&s) * norm(&y) {
            return;
        }
        if self.memory.len() == self.capacity {
            self.memory.pop_front();
        }
        self.memory.push_back((s, y, 1.0 / sy));
    }

    #[allow(clippy::too_many_arguments)]
    fn run(
        &mut self,
        problem: &Problem,
        x: &mut Vec<f64>,
        tol: f64,
        max_iterations: usize,
        step: (usize, usize),
        iterations: &mut usize,
        observer: &mut dyn FnMut(&SolveProgress) -> bool,
    ) -> Result<StepOutcome, RodError> {
        let (mut f, mut g) = problem.value_and_grad(x);
        if !f.is_finite() {
            return Err(RodError::Diverged);
        }
        for it in 0..max_iterations {
            let gnorm = norm(&g);
            if gnorm <= tol {
                return Ok(StepOutcome::Converged);
            }
            let mut d = self.direction(&g);
            let mut gd = dot(&g, &d);
            if !(gd < 0.0) {
                self.memory.clear();
                d = g.iter().map(|v| -v).collect();
                gd = -gnorm * gnorm;
            }
            let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut alpha = if self.memory.is_empty() {
                (self.max_step / dmax).min(1.0 / gnorm)
            } else {
                1.0f64.min(self.max_step / dmax)
            };

            let noise = ENERGY_NOISE * f.abs().max(1e-3);
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
                let ft = problem.value(&trial);
                if ft.is_finite() {
                    if ft < f && ft <= f + ARMIJO_C1 * alpha * gd {
                        let (ft, gt) = problem.value_and_grad(&trial);
                        accepted = Some((trial, ft, gt));
                        break;
                    }
                    if ft <= f + noise {
                        // decrease is below rounding; accept if the slope along d shrank
                        let (ft, gt) = problem.value_and_grad(&trial);
                        let slope = dot(&gt, &d);
                        if slope >= 0.9 * gd && slope <= -0.8 * gd {
                            accepted = Some((trial, ft, gt));
                            break;
                        }
                    }
                }
                alpha *= 0.5;
            }
            let Some((xn, fn_, gn)) = accepted else {
                if self.memory.is_empty() {
                    return Ok(StepOutcome::Stalled);
                }
                self.memory.clear();
                continue;
            };
            let s: Vec<f64> = xn.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            self.remember(s, y);
            *x = xn;
            f = fn_;
            g = gn;
            *iterations += 1;
            let progress = SolveProgress {
                step: step.0,
                steps: step.1,
                iteration: it + 1,
                energy: f,
                gradient_norm: norm(&g),
                control: &problem.control,
                dofs: x,
            };
            if !observer(&progress) {
                return Ok(StepOutcome::Aborted);
            }
        }
        Ok(if norm(&g) <= tol {
            StepOutcome::Converged
        } else {
            StepOutcome::Exhausted
        })
    }
}

/// Minimize the energy for `control`, starting from `initial`.
///
/// The control is ramped linearly from `initial.control` to `control` in
/// `opts.pressure_ramp_steps` increments (a single increment when they are
/// equal), each warm-started from the previous minimizer. The returned
/// state is converged only if the final gradient norm is within tolerance.
pub fn solve_equilibrium(
    initial: &RigState,
    control: &ControlInput,
    params: &ActuatorParams,
    material: &MaterialParams,
    opts: &SolverOptions,
) -> Result<RigState, RodError> {
    solve_equilibrium_observed(initial, control, params, material, opts, &mut |_| true)
}

/// [`solve_equilibrium`] with a callback after every accepted iterate.
/// Returning `false` stops the solve; the state reached so far is returned
/// with the convergence flag unset.
pub fn solve_equilibrium_observed(
    initial: &RigState,
    control: &ControlInput,
    params: &ActuatorParams,
    material: &MaterialParams,
    opts: &SolverOptions,
    observer: &mut dyn FnMut(&SolveProgress) -> bool,
) -> Result<RigState, RodError> {
    opts.validate()?;
    material.validate()?;
    control.check_finite()?;
    initial.check_layout()?;
    if initial.model.segments != opts.segment_count {
        return Err(RodError::Layout(format!(
            "state has {} segments, options ask for {}",
            initial.model.segments, opts.segment_count
        )));
    }

    let mut state = initial.clone();
    state.model.weights = opts.penalty_weights;
    state.model.gravity = opts.gravity;
    let start = initial.control;
    let steps = if start == *control {
        1
    } else {
        opts.pressure_ramp_steps
    };

    let mut x = state.dofs();
    let mut minimizer = Minimizer {
        memory: VecDeque::with_capacity(opts.lbfgs_memory),
        capacity: opts.lbfgs_memory,
        max_step: 0.5 * state.model.tubes[0].segment_length,
    };
    let mut iterations = 0;
    let mut converged = false;
    let mut current = start;
    for k in 1..=steps {
        current = start.lerp(control, k as f64 / steps as f64);
        let problem = Problem {
            model: &state.model,
            control: current,
            params,
            material,
        };
        minimizer.memory.clear();
        let outcome = minimizer.run(
            &problem,
            &mut x,
            if k == steps {
                opts.gradient_tolerance
            } else {
                opts.gradient_tolerance.max(INTERMEDIATE_TOLERANCE)
            },
            opts.max_iterations,
            (k, steps),
            &mut iterations,
            observer,
        )?;
        match outcome {
            StepOutcome::Converged => converged = true,
            StepOutcome::Exhausted | StepOutcome::Stalled => converged = false,

            StepOutcome::Aborted => {
                converged = false;
                break;
            }
        }
    }

    state.set_dofs(&x)?;
    state.control = current;
    state.refresh(params, material)?;
    state.diagnostics.iterations = iterations;
    state.diagnostics.converged = converged && state.diagnostics.gradient_norm <= opts.gradient_tolerance;
    Ok(state)
}

/// Result of [`simulate_ramp`]. `states` holds every converged entry in
/// schedule order; on failure it stops before the first entry that did not
/// converge, whose index is `failed_at`.
#[derive(Debug, Clone)]
pub struct RampOutcome {
    pub states: Vec<RigState>,
    /// Tip per converged entry, world frame, `t` = entry index.
    pub trajectory: Option<TrajectorySeries>,
    pub failed_at: Option<usize>,
}

fn check_monotone(schedule: &[(f64, f64)], start: [f64; 2]) -> Result<(), RodError> {
    for tube in 0..2 {
        let seq: Vec<f64> = std::iter::once(start[tube])
            .chain(schedule.iter().map(|p| if tube == 0 { p.0 } else { p.1 }))
            .collect();
        let mut dir = 0.0f64;
        for (i, w) in seq.windows(2).enumerate() {
            let delta = w[1] - w[0];
            if delta != 0.0 {
                let d = delta.signum();
                if dir != 0.0 && d != dir {
                    return Err(RodError::NonMonotoneSchedule(i));
                }
                dir = d;
            }
        }
    }
    Ok(())
}

/// Step through `(p_left, p_right)` pairs (Pa), keeping the twist and
/// thread lengths of `initial.control`.
///
/// Each entry is warm-started from the previous one. Its continuation uses
/// a share of `opts.pressure_ramp_steps` proportional to its pressure
/// change relative to the largest excursion of the schedule (at least one
/// step). Unless `allow_non_monotone` is set, each tube's pressure sequence
/// (starting from the initial state) must not change direction.
pub fn simulate_ramp(
    initial: &RigState,
    schedule: &[(f64, f64)],
    params: &ActuatorParams,
    material: &MaterialParams,
    opts: &SolverOptions,
    allow_non_monotone: bool,
) -> Result<RampOutcome, RodError> {
    let start = initial.control.pressures();
    if !allow_non_monotone {
        check_monotone(schedule, start)?;
    }
    let span = schedule
        .iter()
        .map(|&(l, r)| (l - start[0]).abs().max((r - start[1]).abs()))
        .fold(0.0, f64::max);
    let mut states = Vec::with_capacity(schedule.len());
    let mut samples = Vec::with_capacity(schedule.len());
    let mut failed_at = None;
    let mut current = initial.clone();
    for (i, &(pl, pr)) in schedule.iter().enumerate() {
        let [cl, cr] = current.control.pressures();
        let change = (pl - cl).abs().max((pr - cr).abs());
        let mut o = *opts;
        o.pressure_ramp_steps = if span > 0.0 {
            ((opts.pressure_ramp_steps as f64 * change / span).ceil() as usize)
                .clamp(1, opts.pressure_ramp_steps)
        } else {
            1
        };
        let target = current.control.with_pressures(pl, pr);
        let next = solve_equilibrium(&current, &target, params, material, &o)?;
        if !next.diagnostics.converged {
            failed_at = Some(i);
            break;
        }
        samples.push(Sample {
            t: i as f64,
            point: shape_metrics(&next).tip.as_array(),
        });
        states.push(next.clone());
        current = next;
    }
    let trajectory = if samples.is_empty() {
        None
    } else {
        Some(TrajectorySeries::new(Frame::World, samples).expect("indices increase"))
    };
    Ok(RampOutcome {
        states,
        trajectory,
        failed_at,
    })
}

#[cfg(test)]
mod tests {
    use super::super::build_rig;
    use super::*;

    fn setup(n: usize) -> (ActuatorParams, MaterialParams, SolverOptions) {
        let p = ActuatorParams::default();
        let m = MaterialParams::for_params(&p);
        let o = SolverOptions::default().with_segments(n).without_gravity();
        (p, m, o)
    }

    #[test]
    fn zero_pressure_stays_put() {
        let (p, m, o) = setup(10);
        let c = ControlInput::relaxed(&p);
        let s0 = build_rig(&p, &c, &o).unwrap();
        let s = solve_equilibrium(&s0, &c, &p, &m, &o).unwrap();
        assert!(s.diagnostics.converged);
        assert_eq!(s.nodes, s0.nodes);
    }

    #[test]
    fn energy_never_increases() {
        let (p, m, mut o) = setup(10);
        o.pressure_ramp_steps = 1;
        let s0 = build_rig(&p, &ControlInput::relaxed(&p), &o).unwrap();
        let c = ControlInput::relaxed(&p).with_pressures(0.1e6, 0.1e6);
        let mut last = f64::INFINITY;
        let mut ok = true;
        let s = solve_equilibrium_observed(&s0, &c, &p, &m, &o, &mut |pr| {
            ok &= pr.energy <= last;
            last = pr.energy;
            true
        })
        .unwrap();
        assert!(ok);
        assert!(s.diagnostics.converged, "{}", s.diagnostics.gradient_norm);
    }

    #[test]
    fn observer_can_abort() {
        let (p, m, o) = setup(10);
        let s0 = build_rig(&p, &ControlInput::relaxed(&p), &o).unwrap();
        let c = ControlInput::relaxed(&p).with_pressures(0.1e6, 0.1e6);
        let mut calls = 0;
        let s = solve_equilibrium_observed(&s0, &c, &p, &m, &o, &mut |_| {
            calls += 1;
            calls < 5
        })
        .unwrap();
        assert_eq!(calls, 5);
        assert!(!s.diagnostics.converged);
    }

    #[test]
    fn iteration_cap_leaves_flag_unset() {
        let (p, m, mut o) = setup(10);
        o.max_iterations = 3;
        o.pressure_ramp_steps = 1;
        let s0 = build_rig(&p, &ControlInput::relaxed(&p), &o).unwrap();
        let c = ControlInput::relaxed(&p).with_pressures(0.2e6, 0.2e6);
        let s = solve_equilibrium(&s0, &c, &p, &m, &o).unwrap();
        assert!(!s.diagnostics.converged);
        assert!(s.diagnostics.iterations <= 3);
    }

    #[test]
    fn monotone_check() {
        assert!(check_monotone(&[(0.1, 0.1), (0.2, 0.2)], [0.0, 0.0]).is_ok());
        assert!(check_monotone(&[(0.2, 0.1), (0.1, 0.0)], [0.3, 0.3]).is_ok());
        assert!(check_monotone(&[(0.1, 0.1), (0.1, 0.1)], [0.0, 0.0]).is_ok());
        assert!(matches!(
            check_monotone(&[(0.2, 0.0), (0.1, 0.0)], [0.0, 0.0]),
            Err(RodError::NonMonotoneSchedule(1))
        ));
    }

    #[test]
    fn single_zero_entry_ramp() {
        let (p, m, o) = setup(10);
        let s0 = build_rig(&p, &ControlInput::relaxed(&p), &o).unwrap();
        let out = simulate_ramp(&s0, &[(0.0, 0.0)], &p, &m, &o, false).unwrap();
        assert_eq!(out.states.len(), 1);
        assert_eq!(out.states[0].nodes, s0.nodes);
        assert_eq!(out.failed_at, None);
        assert_eq!(out.trajectory.unwrap().len(), 1);
    }
}
