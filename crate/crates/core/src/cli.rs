//! `trunk` command-line front end.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::{parent_dir, read_toml, ContextFile};
use crate::fitting::{fit_spring_constant, grid_search_k, load_observations, DEFAULT_STEP, DEFAULT_TOL};
use crate::measurement::{compare_trajectories, gaussian_smooth, load_trajectory, write_trajectory, CameraExtrinsics, ComparisonMetrics, Frame, TrajectorySeries};
use crate::model::{c_bend_tip, linear_extension_length};
use crate::params::{ActuatorParams, ControlInput, DEFAULT_MAX_PRESSURE};
use crate::rod::export::{write_record, CenterlineRecord};
use crate::rod::{build_rig, shape_metrics, simulate_ramp, solve_equilibrium};
use crate::scenario::ScenarioSetup;
use crate::service::{storage_root_from_env, ServiceConfig};
use crate::units::{m_to_mm, mm_to_m, mpa_to_pa, vec_to_m, vec_to_mm};

/// Operation ran but did not succeed: a threshold failed or a solve did
/// not converge.
pub const EXIT_FAILED: u8 = 1;
/// Bad flags or subcommand (clap's own code).
pub const EXIT_USAGE: u8 = 2;
/// Input files missing or invalid.
pub const EXIT_INPUT: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "trunk", version, about = "Two-tube pneumatic trunk actuator toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictPattern {
    /// Both tubes pressurized, threads at rest length.
    C,
    /// Both tubes pressurized, threads slack.
    Linear,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Identify the outer-edge spring constant from C-bend tip measurements.
    FitK {
        /// CSV with header p_MPa,x_mm,y_mm,z_mm.
        #[arg(long)]
        data: PathBuf,
        /// Marker distance used as the arc length, mm.
        #[arg(long)]
        l0_mm: Option<f64>,
        #[arg(long, default_value_t = 50.0)]
        kmin: f64,
        #[arg(long, default_value_t = 500.0)]
        kmax: f64,
        /// Actuator parameter file (TOML).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        format: OutputFormat,
        /// Also write the JSON document here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Closed-form tip prediction.
    Predict {
        #[arg(long, value_enum)]
        pattern: PredictPattern,
        #[arg(long)]
        p_mpa: f64,
        /// Outer-edge spring constant, N/m (C pattern only).
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        l0_mm: Option<f64>,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        format: OutputFormat,
    },
    /// Rod simulation of a pressure schedule.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Centerlines, one JSON record per schedule entry.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Tip trajectory CSV (t_s = entry index).
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        format: OutputFormat,
    },
    /// Compare a model trajectory against a measured one.
    Compare {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        measured: PathBuf,
        /// Camera position in the world frame, mm, as x,y,z. Required for
        /// camera-frame inputs.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        camera_mm: Option<Vec<f64>>,
        /// Smooth the measured series with this Gaussian width, samples.
        #[arg(long)]
        smooth_sigma: Option<f64>,
        #[arg(long, default_value_t = 30.0)]
        max_rms_mm: f64,
        #[arg(long, default_value_t = 45.0)]
        max_abs_mm: f64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        format: OutputFormat,
    },
    /// Run the grab-and-pour control script.
    Scenario {
        /// Scenario config (TOML); the calibrated setup when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
        format: OutputFormat,
    },
    /// Run the live simulation service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured listen address.
        #[arg(long)]
        listen: Option<String>,
    },
}

/// Failure of a subcommand with the exit code to report.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn input(e: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: e.to_string(),
        }
    }

    fn failed(e: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_FAILED,
            message: e.to_string(),
        }
    }
}

/// Text written to stdout plus whether the operation met its criteria.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub success: bool,
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(out) => {
            print!("{}", out.stdout);
            let _ = std::io::stdout().flush();
            if out.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILED)
            }
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

pub fn run(command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::FitK {
            data,
            l0_mm,
            kmin,
            kmax,
            params,
            format,
            output,
        } => fit_k(&data, load_params(params.as_deref(), l0_mm)?, (kmin, kmax), format, output.as_deref()),
        Command::Predict {
            pattern,
            p_mpa,
            k,
            l0_mm,
            params,
            format,
        } => predict(pattern, p_mpa, k, &load_params(params.as_deref(), l0_mm)?, format),
        Command::Simulate {
            config,
            out,
            trajectory,
            format,
        } => simulate(&config, out.as_deref(), trajectory.as_deref(), format),
        Command::Compare {
            model,
            measured,
            camera_mm,
            smooth_sigma,
            max_rms_mm,
            max_abs_mm,
            format,
        } => {
            let camera = match camera_mm.as_deref() {
                None => None,
                Some(&[x, y, z]) => Some(CameraExtrinsics::new(vec_to_m([x, y, z]))),
                Some(_) => return Err(CliError::input("--camera-mm takes three values x,y,z")),
            };
            compare(&model, &measured, camera, smooth_sigma, (max_rms_mm, max_abs_mm), format)
        }
        Command::Scenario { config, out, format } => scenario(config.as_deref(), out.as_deref(), format),
        Command::Serve { config, listen } => serve(config.as_deref(), listen),
    }
}

fn load_params(path: Option<&Path>, l0_mm: Option<f64>) -> Result<ActuatorParams, CliError> {
    let mut p = match path {
        Some(p) => ActuatorParams::load(p).map_err(CliError::input)?,
        None => ActuatorParams::default(),
    };
    if let Some(l0) = l0_mm {
        p.marker_offset = mm_to_m(l0);
    }
    p.validate().map_err(CliError::input)?;
    Ok(p)
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitDocument {
    pub k_n_per_m: f64,
    pub residual_mm2: f64,
    pub grid_k_n_per_m: f64,
    pub l0_mm: f64,
    pub bounds_n_per_m: [f64; 2],
    pub points: Vec<FitPoint>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FitPoint {
    pub p_mpa: f64,
    pub measured_mm: [f64; 3],
    pub predicted_mm: [f64; 3],
    pub error_mm: f64,
}

fn fit_k(
    data: &Path,
    params: ActuatorParams,
    bounds: (f64, f64),
    format: OutputFormat,
    output: Option<&Path>,
) -> Result<Outcome, CliError> {
    let obs = load_observations(data).map_err(CliError::input)?;
    let fit = fit_spring_constant(&obs, &params, bounds, DEFAULT_TOL).map_err(CliError::failed)?;
    let grid = grid_search_k(&obs, &params, bounds, DEFAULT_STEP).map_err(CliError::failed)?;
    let mut points = Vec::with_capacity(obs.len());
    for o in &obs {
        let tip = c_bend_tip(o.pressure, fit.k, &params).map_err(CliError::failed)?;
        points.push(FitPoint {
            p_mpa: o.pressure / 1e6,
            measured_mm: vec_to_mm(o.tip.as_array()),
            predicted_mm: vec_to_mm(tip.as_array()),
            error_mm: m_to_mm(tip.distance(&o.tip)),
        });
    }
    let doc = FitDocument {
        k_n_per_m: fit.k,
        residual_mm2: fit.residual * 1e6,
        grid_k_n_per_m: grid.k,
        l0_mm: m_to_mm(params.marker_offset),
        bounds_n_per_m: [bounds.0, bounds.1],
        points,
    };
    let text = json(&doc);
    if let Some(path) = output {
        write_file(path, &text)?;
    }
    let stdout = match format {
        OutputFormat::Json => text,
        OutputFormat::Table => {
            let mut s = String::new();
            let _ = writeln!(s, "k = {:.4} N/m  (grid {:.2} N/m)", doc.k_n_per_m, doc.grid_k_n_per_m);
            let _ = writeln!(s, "residual = {:.4} mm^2", doc.residual_mm2);
            let _ = writeln!(s, "{:>7} {:>9} {:>9} {:>9} {:>9} {:>8}", "p_MPa", "y_mm", "z_mm", "y_fit", "z_fit", "err_mm");
            for p in &doc.points {
                let _ = writeln!(
                    s,
                    "{:>7.3} {:>9.2} {:>9.2} {:>9.2} {:>9.2} {:>8.2}",
                    p.p_mpa, p.measured_mm[1], p.measured_mm[2], p.predicted_mm[1], p.predicted_mm[2], p.error_mm
                );
            }
            s
        }
    };
    Ok(Outcome { stdout, success: true })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictDocument {
    pub pattern: String,
    pub p_mpa: f64,
    pub k_n_per_m: Option<f64>,
    pub tip_mm: [f64; 3],
    /// Whole-actuator length for the linear pattern.
    pub length_mm: Option<f64>,
    /// Bending center angle for the C pattern.
    pub center_angle_deg: Option<f64>,
}

fn predict(
    pattern: PredictPattern,
    p_mpa: f64,
    k: Option<f64>,
    params: &ActuatorParams,
    format: OutputFormat,
) -> Result<Outcome, CliError> {
    let p = mpa_to_pa(p_mpa);
    let doc = match pattern {
        PredictPattern::C => {
            let k = k.ok_or_else(|| CliError::input("--k is required for the C pattern"))?;
            let tip = c_bend_tip(p, k, params).map_err(CliError::input)?;
            let geo = crate::model::c_bend_geometry(p, k, params).map_err(CliError::input)?;
            PredictDocument {
                pattern: "C-shaped".into(),
                p_mpa,
                k_n_per_m: Some(k),
                tip_mm: vec_to_mm(tip.as_array()),
                length_mm: None,
                center_angle_deg: Some(geo.center_angle.to_degrees()),
            }
        }
        PredictPattern::Linear => {
            let len = linear_extension_length(p, params).map_err(CliError::input)?;
            let stretch = len / params.rest_length;
            PredictDocument {
                pattern: "Linear extension".into(),
                p_mpa,
                k_n_per_m: None,
                tip_mm: [0.0, 0.0, m_to_mm(params.marker_offset * stretch)],
                length_mm: Some(m_to_mm(len)),
                center_angle_deg: None,
            }
        }
    };
    let stdout = match format {
        OutputFormat::Json => json(&doc),
        OutputFormat::Table => {
            let t = doc.tip_mm;
            let mut s = format!("{} at {} MPa\ntip = ({:.3}, {:.3}, {:.3}) mm\n", doc.pattern, doc.p_mpa, t[0], t[1], t[2]);
            if let Some(l) = doc.length_mm {
                let _ = writeln!(s, "length = {l:.3} mm");
            }
            if let Some(b) = doc.center_angle_deg {
                let _ = writeln!(s, "center angle = {b:.3} deg");
            }
            s
        }
    };
    Ok(Outcome { stdout, success: true })
}

/// `simulate` config document.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    #[serde(flatten)]
    pub context: ContextFile,
    pub control: InitialControl,
    pub schedule: Schedule,
}

/// Twist and thread lengths held during the ramp.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialControl {
    pub theta_left_deg: f64,
    pub theta_right_deg: f64,
    /// Rest length when omitted.
    pub thread_left_mm: Option<f64>,
    pub thread_right_mm: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    /// `[p_left, p_right]` per entry, MPa.
    pub pressures_mpa: Vec<[f64; 2]>,
    pub allow_non_monotone: bool,
}

#[derive(Debug, Serialize)]
struct SimulateRow {
    step: usize,
    p_left_mpa: f64,
    p_right_mpa: f64,
    tip_mm: [f64; 3],
    winding_deg: f64,
    iterations: usize,
    converged: bool,
}

fn simulate(config: &Path, out: Option<&Path>, trajectory: Option<&Path>, format: OutputFormat) -> Result<Outcome, CliError> {
    let cfg: SimulateConfig = read_toml(config).map_err(CliError::input)?;
    let ctx = cfg.context.resolve(parent_dir(config)).map_err(CliError::input)?;
    if cfg.schedule.pressures_mpa.is_empty() {
        return Err(CliError::input(format!("{}: schedule.pressures_mpa is empty", config.display())));
    }
    let c = cfg.control;
    let thread = |v: Option<f64>| v.map(mm_to_m).unwrap_or(ctx.params.rest_length);
    let initial = ControlInput::relaxed(&ctx.params)
        .with_twist(c.theta_left_deg, c.theta_right_deg)
        .with_threads(thread(c.thread_left_mm), thread(c.thread_right_mm));
    initial.validate(DEFAULT_MAX_PRESSURE).map_err(CliError::input)?;
    let schedule: Vec<(f64, f64)> = cfg
        .schedule
        .pressures_mpa
        .iter()
        .map(|[l, r]| (mpa_to_pa(*l), mpa_to_pa(*r)))
        .collect();
    for &(l, r) in &schedule {
        initial.with_pressures(l, r).validate(DEFAULT_MAX_PRESSURE).map_err(CliError::input)?;
    }

    let (params, material, opts) = (ctx.params, ctx.material, ctx.options);
    let rig = build_rig(&params, &initial, &opts).map_err(CliError::input)?;
    let start = solve_equilibrium(&rig, &initial, &params, &material, &opts).map_err(CliError::failed)?;
    let outcome = simulate_ramp(&start, &schedule, &params, &material, &opts, cfg.schedule.allow_non_monotone)
        .map_err(CliError::input)?;

    if let Some(path) = out {
        let mut buf = Vec::new();
        for (i, s) in outcome.states.iter().enumerate() {
            write_record(&CenterlineRecord::from_state(i, s), &mut buf).expect("write to memory");
        }
        write_file(path, &String::from_utf8(buf).expect("utf-8 json"))?;
    }
    if let (Some(path), Some(series)) = (trajectory, outcome.trajectory.as_ref()) {
        let mut buf = Vec::new();
        write_trajectory(series, &mut buf).expect("write to memory");
        write_file(path, &String::from_utf8(buf).expect("utf-8 csv"))?;
    }

    let rows: Vec<SimulateRow> = outcome
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let m = shape_metrics(s);
            SimulateRow {
                step: i,
                p_left_mpa: s.control.pressure_left / 1e6,
                p_right_mpa: s.control.pressure_right / 1e6,
                tip_mm: vec_to_mm(m.tip.as_array()),
                winding_deg: m.winding_angle,
                iterations: s.diagnostics.iterations,
                converged: s.diagnostics.converged,
            }
        })
        .collect();
    let success = outcome.failed_at.is_none();
    let stdout = match format {
        OutputFormat::Json => json(&serde_json::json!({ "entries": rows, "failed_at": outcome.failed_at })),
        OutputFormat::Table => {
            let mut s = format!(
                "{:>4} {:>7} {:>7} {:>9} {:>9} {:>9} {:>9} {:>6}\n",
                "step", "pL_MPa", "pR_MPa", "x_mm", "y_mm", "z_mm", "wind_deg", "iters"
            );
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{:>4} {:>7.3} {:>7.3} {:>9.2} {:>9.2} {:>9.2} {:>9.1} {:>6}",
                    r.step, r.p_left_mpa, r.p_right_mpa, r.tip_mm[0], r.tip_mm[1], r.tip_mm[2], r.winding_deg, r.iterations
                );
            }
            if let Some(i) = outcome.failed_at {
                let _ = writeln!(s, "entry {i} did not converge");
            }
            s
        }
    };
    Ok(Outcome { stdout, success })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CompareDocument {
    pub rms_mm: f64,
    pub max_abs_mm: f64,
    pub per_axis_rms_mm: [f64; 3],
    pub count: usize,
    pub max_rms_mm: f64,
    pub max_abs_limit_mm: f64,
    pub passed: bool,
}

fn to_world(series: TrajectorySeries, camera: Option<CameraExtrinsics>, path: &Path) -> Result<TrajectorySeries, CliError> {
    match (series.frame(), camera) {
        (Frame::World, _) => Ok(series),
        (Frame::Camera, Some(ext)) => Ok(series.to_world(&ext)),
        (Frame::Camera, None) => Err(CliError::input(format!(
            "{} is in the camera frame; pass --camera-mm",
            path.display()
        ))),
    }
}

fn compare(
    model: &Path,
    measured: &Path,
    camera: Option<CameraExtrinsics>,
    sigma: Option<f64>,
    limits: (f64, f64),
    format: OutputFormat,
) -> Result<Outcome, CliError> {
    let m = to_world(load_trajectory(model).map_err(CliError::input)?, camera, model)?;
    let mut d = to_world(load_trajectory(measured).map_err(CliError::input)?, camera, measured)?;
    if let Some(s) = sigma {
        d = gaussian_smooth(&d, s).map_err(CliError::input)?;
    }
    let ComparisonMetrics {
        rms,
        max_abs,
        per_axis_rms,
        count,
    } = compare_trajectories(&m, &d).map_err(CliError::input)?;
    let doc = CompareDocument {
        rms_mm: m_to_mm(rms),
        max_abs_mm: m_to_mm(max_abs),
        per_axis_rms_mm: vec_to_mm(per_axis_rms),
        count,
        max_rms_mm: limits.0,
        max_abs_limit_mm: limits.1,
        passed: m_to_mm(rms) <= limits.0 && m_to_mm(max_abs) <= limits.1,
    };
    let stdout = match format {
        OutputFormat::Json => json(&doc),
        OutputFormat::Table => format!(
            "samples  {}\nrms      {:.3} mm (limit {})\nmax      {:.3} mm (limit {})\naxis rms {:.3} {:.3} {:.3} mm\n{}\n",
            doc.count,
            doc.rms_mm,
            doc.max_rms_mm,
            doc.max_abs_mm,
            doc.max_abs_limit_mm,
            doc.per_axis_rms_mm[0],
            doc.per_axis_rms_mm[1],
            doc.per_axis_rms_mm[2],
            if doc.passed { "PASS" } else { "FAIL" }
        ),
    };
    Ok(Outcome {
        stdout,
        success: doc.passed,
    })
}

fn scenario(config: Option<&Path>, out: Option<&Path>, format: OutputFormat) -> Result<Outcome, CliError> {
    let setup = match config {
        Some(p) => ScenarioSetup::load(p).map_err(CliError::input)?,
        None => ScenarioSetup::calibrated(),
    };
    let report = crate::scenario::run_scenario(&setup.script, &setup.bottle, &setup.context).map_err(CliError::input)?;
    let text = json(&report);
    if let Some(p) = out {
        write_file(p, &text)?;
    }
    let stdout = match format {
        OutputFormat::Json => text,
        OutputFormat::Table => report.to_table(),
    };
    Ok(Outcome {
        stdout,
        success: report.passed(),
    })
}

fn serve(config: Option<&Path>, listen: Option<String>) -> Result<Outcome, CliError> {
    let (mut cfg, base) = match config {
        Some(p) => ServiceConfig::load(p).map_err(CliError::input)?,
        None => (ServiceConfig::default(), PathBuf::from(".")),
    };
    if let Some(l) = listen {
        cfg.listen = l;
    }
    let resolved = cfg.resolve(&base, storage_root_from_env()).map_err(CliError::input)?;
    let rt = tokio::runtime::Runtime::new().map_err(CliError::failed)?;
    rt.block_on(crate::service::serve(resolved)).map_err(CliError::failed)?;
    Ok(Outcome {
        stdout: String::new(),
        success: true,
    })
}
