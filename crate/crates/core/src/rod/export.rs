//! Line-delimited centerline export: one JSON object per state.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::metrics::shape_metrics;
use super::state::RigState;
use crate::units::{m_to_mm, pa_to_mpa, vec_to_mm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterlineRecord {
    pub step: usize,
    pub p_left_mpa: f64,
    pub p_right_mpa: f64,
    /// `[x, y, z, x, y, z, ...]` mm, left tube base to tip then right tube.
    pub nodes_mm: Vec<f64>,
    pub tip_mm: [f64; 3],
    pub converged: bool,
}

impl CenterlineRecord {
    pub fn from_state(step: usize, state: &RigState) -> Self {
        let nodes_mm = state
            .nodes
            .iter()
            .flatten()
            .flat_map(|p| p.map(m_to_mm))
            .collect();
        CenterlineRecord {
            step,
            p_left_mpa: pa_to_mpa(state.control.pressure_left),
            p_right_mpa: pa_to_mpa(state.control.pressure_right),
            nodes_mm,
            tip_mm: vec_to_mm(shape_metrics(state).tip.as_array()),
            converged: state.diagnostics.converged,
        }
    }
}

pub fn write_record(record: &CenterlineRecord, mut out: impl Write) -> io::Result<()> {
    serde_json::to_writer(&mut out, record)?;
    out.write_all(b"\n")
}

pub fn read_records(input: impl BufRead) -> io::Result<Vec<CenterlineRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(io::Error::other)?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ActuatorParams, ControlInput};
    use crate::rod::{build_rig, SolverOptions};

    #[test]
    fn record_round_trip() {
        let p = ActuatorParams::default();
        let c = ControlInput::relaxed(&p).with_pressures(0.1e6, 0.05e6);
        let s = build_rig(&p, &c, &SolverOptions::default().with_segments(8)).unwrap();
        let r = CenterlineRecord::from_state(3, &s);
        assert_eq!(r.nodes_mm.len(), 2 * 9 * 3);
        assert_eq!(r.nodes_mm[0], -19.0);
        assert!((r.p_left_mpa - 0.1).abs() < 1e-12);
        let mut buf = Vec::new();
        write_record(&r, &mut buf).unwrap();
        write_record(&r, &mut buf).unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        assert_eq!(back, vec![r.clone(), r]);
    }
}
