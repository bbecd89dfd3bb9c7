use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::sync::watch;

use super::runlog::{RunLog, RunRecord};
use super::ServiceError;
use crate::config::SimContext;
use crate::error::ModelError;
use crate::model::{classify_pattern, DEFAULT_ANGLE_TOL};
use crate::params::{ControlDto, ControlInput, DEFAULT_MAX_PRESSURE};
use crate::rod::{build_rig, shape_metrics, solve_equilibrium, solve_equilibrium_observed, EnergyBreakdown, RigState};
use crate::units::vec_to_mm;

/// Spacing of in-progress frames during a solve.
pub const FRAME_INTERVAL: Duration = Duration::from_millis(50);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStatus {
    /// Equilibrium for `target` reached (see `converged`).
    Idle,
    /// Intermediate iterate of a running solve.
    Solving,
    /// The last solve raised an error; the state is the previous one.
    Failed,
}

/// Snapshot of the live rig, in mm / MPa / deg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    /// Strictly increasing per service.
    pub seq: u64,
    /// Control request this frame belongs to, 0 for the initial state.
    pub request_id: u64,
    pub status: FrameStatus,
    pub converged: bool,
    /// Control the shown geometry is in equilibrium with (or being solved for).
    pub control: ControlDto,
    pub target: ControlDto,
    pub pattern: String,
    pub tip_mm: [f64; 3],
    pub centerline_mm: Vec<[f64; 3]>,
    pub left_mm: Vec<[f64; 3]>,
    pub right_mm: Vec<[f64; 3]>,
    pub winding_deg: f64,
    /// J.
    pub energies: EnergyBreakdown,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub message: Option<String>,
}

fn pattern_label(control: &ControlInput, ctx: &SimContext) -> String {
    classify_pattern(control, &ctx.params, DEFAULT_ANGLE_TOL)
        .map(|p| p.to_string())
        .unwrap_or_else(|_| "Unclassified".into())
}

fn frame(seq: u64, request_id: u64, status: FrameStatus, state: &RigState, target: &ControlInput, ctx: &SimContext) -> StateFrame {
    let metrics = shape_metrics(state);
    let mm = |v: &[[f64; 3]]| v.iter().map(|p| vec_to_mm(*p)).collect::<Vec<_>>();
    let d = &state.diagnostics;
    StateFrame {
        seq,
        request_id,
        status,
        converged: status == FrameStatus::Idle && d.converged,
        control: state.control.into(),
        target: (*target).into(),
        pattern: pattern_label(target, ctx),
        tip_mm: vec_to_mm(metrics.tip.as_array()),
        centerline_mm: mm(&state.centerline()),
        left_mm: mm(&state.nodes[0]),
        right_mm: mm(&state.nodes[1]),
        winding_deg: metrics.winding_angle,
        energies: d.terms,
        gradient_norm: d.gradient_norm,
        iterations: d.iterations,
        message: None,
    }
}

struct Mailbox {
    target: Option<(u64, ControlInput)>,
    next_id: u64,
    shutdown: bool,
}

struct Shared {
    mailbox: Mutex<Mailbox>,
    wake: Condvar,
    /// Id of the newest request; a running solve aborts when it changes.
    latest: AtomicU64,
}

/// The live simulation. A dedicated thread is the only writer of the rig
/// state; readers get [`StateFrame`] snapshots through a watch channel.
pub struct LiveSim {
    shared: Arc<Shared>,
    frames: watch::Receiver<StateFrame>,
    context: SimContext,
    worker: Option<JoinHandle<()>>,
}

impl LiveSim {
    /// Solve the relaxed rig to equilibrium and start the worker. With a
    /// storage root, every finished solve is appended to a new run log.
    pub fn start(context: SimContext, storage_root: Option<&Path>) -> Result<Self, ServiceError> {
        let (params, opts) = (context.params, context.options);
        let relaxed = ControlInput::relaxed(&params);
        let rig = build_rig(&params, &relaxed, &opts)?;
        let state = solve_equilibrium(&rig, &relaxed, &params, &context.material, &opts)?;
        let log = match storage_root {
            Some(root) => Some(RunLog::create(root).map_err(|e| ServiceError::io("cannot create run log", e))?),
            None => None,
        };
        let (tx, rx) = watch::channel(frame(0, 0, FrameStatus::Idle, &state, &relaxed, &context));
        let shared = Arc::new(Shared {
            mailbox: Mutex::new(Mailbox {
                target: None,
                next_id: 1,
                shutdown: false,
            }),
            wake: Condvar::new(),
            latest: AtomicU64::new(0),
        });
        let worker = Worker {
            shared: shared.clone(),
            publisher: Publisher { tx, seq: 0 },
            context,
            state,
            log,
        };
        let handle = std::thread::Builder::new()
            .name("trunk-solver".into())
            .spawn(move || worker.run())
            .map_err(|e| ServiceError::io("cannot spawn solver thread", e))?;
        Ok(LiveSim {
            shared,
            frames: rx,
            context,
            worker: Some(handle),
        })
    }

    pub fn context(&self) -> &SimContext {
        &self.context
    }

    /// Validate and queue a control. A newer control replaces a queued one
    /// and aborts a running solve, which then continues from where it got
    /// to. Returns the request id.
    pub fn apply_control(&self, control: ControlInput) -> Result<u64, ModelError> {
        control.validate(DEFAULT_MAX_PRESSURE)?;
        let mut mb = self.shared.mailbox.lock().expect("mailbox poisoned");
        let id = mb.next_id;
        mb.next_id += 1;
        mb.target = Some((id, control));
        self.shared.latest.store(id, Ordering::SeqCst);
        self.shared.wake.notify_all();
        Ok(id)
    }

    pub fn snapshot(&self) -> StateFrame {
        self.frames.borrow().clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<StateFrame> {
        self.frames.clone()
    }
}

impl Drop for LiveSim {
    fn drop(&mut self) {
        if let Ok(mut mb) = self.shared.mailbox.lock() {
            mb.shutdown = true;
        }
        self.shared.latest.store(u64::MAX, Ordering::SeqCst);
        self.shared.wake.notify_all();
        if let Some(h) = self.worker.take() {
            let _ = h.join();
        }
    }
}

struct Publisher {
    tx: watch::Sender<StateFrame>,
    seq: u64,
}

impl Publisher {
    fn send(&mut self, mut f: StateFrame) {
        self.seq += 1;
        f.seq = self.seq;
        self.tx.send_replace(f);
    }
}

struct Worker {
    shared: Arc<Shared>,
    publisher: Publisher,
    context: SimContext,
    state: RigState,
    log: Option<RunLog>,
}

impl Worker {
    fn next_target(&self) -> Option<(u64, ControlInput)> {
        let mut mb = self.shared.mailbox.lock().expect("mailbox poisoned");
        loop {
            if mb.shutdown {
                return None;
            }
            if let Some(t) = mb.target.take() {
                return Some(t);
            }
            mb = self.shared.wake.wait(mb).expect("mailbox poisoned");
        }
    }

    fn superseded(&self, id: u64) -> bool {
        self.shared.latest.load(Ordering::SeqCst) != id
    }

    fn run(mut self) {
        while let Some((id, target)) = self.next_target() {
            let ctx = self.context;
            self.publisher
                .send(frame(0, id, FrameStatus::Solving, &self.state, &target, &ctx));

            let publisher = &mut self.publisher;
            let shared = &self.shared;
            let mut scratch = self.state.clone();
            let mut last = Instant::now();
            let result = solve_equilibrium_observed(
                &self.state,
                &target,
                &ctx.params,
                &ctx.material,
                &ctx.options,
                &mut |pr| {
                    if shared.latest.load(Ordering::SeqCst) != id {
                        return false;
                    }
                    if last.elapsed() >= FRAME_INTERVAL {
                        last = Instant::now();
                        scratch.control = *pr.control;
                        if scratch.set_dofs(pr.dofs).is_ok()
                            && scratch.refresh(&ctx.params, &ctx.material).is_ok()
                        {
                            scratch.diagnostics.iterations = pr.iteration;
                            publisher.send(frame(0, id, FrameStatus::Solving, &scratch, &target, &ctx));
                        }
                    }
                    true
                },
            );
            match result {
                Ok(state) => {
                    self.state = state;
                    if self.superseded(id) {
                        continue;
                    }
                    let f = frame(0, id, FrameStatus::Idle, &self.state, &target, &ctx);
                    self.record(&f);
                    self.publisher.send(f);
                }
                Err(e) => {
                    log::warn!("solve for request {id} failed: {e}");
                    let mut f = frame(0, id, FrameStatus::Failed, &self.state, &target, &ctx);
                    f.message = Some(e.to_string());
                    self.publisher.send(f);
                }
            }
        }
    }

    fn record(&mut self, f: &StateFrame) {
        let Some(log) = self.log.as_mut() else { return };
        let r = RunRecord {
            seq: 0,
            timestamp_ms: 0,
            request_id: f.request_id,
            control: f.target,
            tip_mm: f.tip_mm,
            converged: f.converged,
            pattern: f.pattern.clone(),
            iterations: f.iterations,
        };
        if let Err(e) = log.append(r) {
            log::warn!("cannot append to run log {}: {e}", log.path().display());
        }
    }
}
