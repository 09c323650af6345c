//! Offline simulation runs and their per-tick logs.

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::actuation::motor_positions;
use crate::controller::{self, pose_errors};
use crate::geometry::Pose;
use crate::linalg::Svd;
use crate::metrics::{ErrorSummary, TrackingSeries};
use crate::rcm::{self, AugmentedState, JacobianBundle, AUG_DOF};
use crate::solver::PriorityCase;
use crate::{Error, Result};

use super::config::RunConfig;
use super::trajectory::{gen_trajectory, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub time: f64,
    pub q_aug: [f64; AUG_DOF],
    /// Position then quaternion `[x, y, z, w]`.
    pub tip: [f64; 7],
    pub desired: [f64; 7],
    pub e_p: [f64; 3],
    pub e_o: [f64; 3],
    pub rcm_error: f64,
    pub motor: [f64; 4],
    /// Singular values of the linear and angular rows of the tip Jacobian.
    pub sv_linear: [f64; 3],
    pub sv_angular: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunLog {
    pub case: PriorityCase,
    pub rows: Vec<LogRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub case: PriorityCase,
    pub samples: usize,
    pub duration: f64,
    pub linear_error: ErrorSummary,
    pub angular_error: ErrorSummary,
    pub max_rcm_error: f64,
    pub final_lambda: f64,
    /// Set when the run stopped on a solver fault.
    pub fault: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub log: RunLog,
    pub summary: RunSummary,
    pub trajectory: Trajectory,
    pub final_state: AugmentedState,
}

impl RunOutcome {
    pub fn ok(&self) -> bool {
        self.summary.fault.is_none()
    }
}

pub fn pose_columns(p: &Pose) -> [f64; 7] {
    let q = p.quaternion_xyzw();
    [
        p.translation.x,
        p.translation.y,
        p.translation.z,
        q[0],
        q[1],
        q[2],
        q[3],
    ]
}

fn sv3(j: &nalgebra::SMatrix<f64, 3, AUG_DOF>) -> [f64; 3] {
    let s = Svd::new(&DMatrix::from_column_slice(3, AUG_DOF, j.as_slice()));
    [s.singular_values[0], s.singular_values[1], s.singular_values[2]]
}

/// Builds the log row for `state` against `desired`.
pub fn record(
    time: f64,
    state: &AugmentedState,
    bundle: &JacobianBundle,
    desired: &Pose,
    trocar: &Vector3<f64>,
    cfg: &RunConfig,
) -> LogRow {
    let (e_p, e_o) = pose_errors(desired, &bundle.poses.tip);
    let q = state.to_vector();
    let m = motor_positions(&state.psi, &cfg.kinematics.continuum, &cfg.actuation);
    LogRow {
        time,
        q_aug: q.into(),
        tip: pose_columns(&bundle.poses.tip),
        desired: pose_columns(desired),
        e_p: e_p.into(),
        e_o: e_o.into(),
        rcm_error: rcm::shaft_distance(&bundle.poses, trocar),
        motor: m.into(),
        sv_linear: sv3(&bundle.j_linear()),
        sv_angular: sv3(&bundle.j_angular()),
    }
}

/// Runs the configured trajectory plus the settle time at `control.dt`.
///
/// The loop is deterministic. A solver fault ends the run early; the
/// partial log is returned with the fault recorded in the summary.
pub fn run_simulation(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let kin = &cfg.kinematics;
    let mut state = cfg.initial.state();
    let trocar = cfg.trocar();
    let trajectory = gen_trajectory(&cfg.trajectory, &state, kin)?;
    let dt = cfg.control.dt;
    let total = trajectory.duration() + cfg.settle;
    let steps = (total / dt).round() as usize;

    let mut rows = Vec::with_capacity(steps + 1);
    let mut fault = None;
    for k in 0..=steps {
        let t = k as f64 * dt;
        let desired = trajectory.pose_at(t);
        let bundle = rcm::assemble(&state, kin);
        rows.push(record(t, &state, &bundle, &desired, &trocar, cfg));
        if k == steps {
            break;
        }
        match controller::step(&state, &desired, cfg.case, &trocar, kin, &cfg.control, t) {
            Ok((next, _)) => state = next,
            Err(e) => {
                log::error!("{e}");
                fault = Some(e.to_string());
                break;
            }
        }
    }
    let log = RunLog { case: cfg.case, rows };
    let summary = summarize(&log, fault);
    Ok(RunOutcome {
        log,
        summary,
        trajectory,
        final_state: state,
    })
}

pub fn summarize(log: &RunLog, fault: Option<String>) -> RunSummary {
    let ep: Vec<f64> = log.rows.iter().map(|r| Vector3::from(r.e_p).norm()).collect();
    let eo: Vec<f64> = log.rows.iter().map(|r| Vector3::from(r.e_o).norm()).collect();
    RunSummary {
        case: log.case,
        samples: log.rows.len(),
        duration: log.rows.last().map_or(0.0, |r| r.time),
        linear_error: ErrorSummary::of(&ep),
        angular_error: ErrorSummary::of(&eo),
        max_rcm_error: log.rows.iter().map(|r| r.rcm_error).fold(0.0, f64::max),
        final_lambda: log.rows.last().map_or(f64::NAN, |r| r.q_aug[AUG_DOF - 1]),
        fault,
    }
}

impl LogRow {
    /// The row flattened in [`RunLog::header`] order.
    pub fn values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(42);
        v.push(self.time);
        v.extend(self.q_aug);
        v.extend(self.tip);
        v.extend(self.desired);
        v.extend(self.e_p);
        v.extend(self.e_o);
        v.push(self.rcm_error);
        v.extend(self.motor);
        v.extend(self.sv_linear);
        v.extend(self.sv_angular);
        v
    }
}

impl RunLog {
    pub fn header() -> Vec<String> {
        let mut h = vec!["time".to_string()];
        h.extend((1..=7).map(|i| format!("q{i}")));
        h.extend(["theta", "delta", "lambda"].map(String::from));
        for prefix in ["tip", "des"] {
            h.extend(["x", "y", "z", "qx", "qy", "qz", "qw"].map(|c| format!("{prefix}_{c}")));
        }
        h.extend(["e_px", "e_py", "e_pz", "e_ox", "e_oy", "e_oz", "rcm_error"].map(String::from));
        h.extend((1..=4).map(|i| format!("motor{i}")));
        h.extend((1..=3).map(|i| format!("sv_l{i}")));
        h.extend((1..=3).map(|i| format!("sv_a{i}")));
        h
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::header().join(","))?;
        for r in &self.rows {
            // `{:e}` prints the shortest exact representation.
            let line: Vec<String> = r.values().iter().map(|x| format!("{x:e}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv(text: &str, case: PriorityCase) -> Result<RunLog> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Config("empty log".into()))?
            .split(',')
            .collect();
        if header != Self::header() {
            return Err(Error::Config("log header does not match this version".into()));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("log line {}: {e}", n + 2)))?;
            if v.len() != header.len() {
                return Err(Error::Config(format!("log line {} has {} fields", n + 2, v.len())));
            }
            let take = |a: usize, b: usize| v[a..b].to_vec();
            rows.push(LogRow {
                time: v[0],
                q_aug: take(1, 11).try_into().expect("sized"),
                tip: take(11, 18).try_into().expect("sized"),
                desired: take(18, 25).try_into().expect("sized"),
                e_p: take(25, 28).try_into().expect("sized"),
                e_o: take(28, 31).try_into().expect("sized"),
                rcm_error: v[31],
                motor: take(32, 36).try_into().expect("sized"),
                sv_linear: take(36, 39).try_into().expect("sized"),
                sv_angular: take(39, 42).try_into().expect("sized"),
            });
        }
        Ok(RunLog { case, rows })
    }

    pub fn series(&self, label: &str) -> TrackingSeries {
        TrackingSeries {
            label: label.into(),
            e_p: self.rows.iter().map(|r| Vector3::from(r.e_p).norm()).collect(),
            e_o: self.rows.iter().map(|r| Vector3::from(r.e_o).norm()).collect(),
            sv_linear: self.rows.iter().map(|r| r.sv_linear).collect(),
            sv_angular: self.rows.iter().map(|r| r.sv_angular).collect(),
        }
    }
}

/// Path of the JSON summary written next to a CSV log.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes the CSV log and its JSON summary sidecar.
pub fn write_outputs(outcome: &RunOutcome, csv: &Path) -> Result<PathBuf> {
    let file = std::io::BufWriter::new(std::fs::File::create(csv)?);
    outcome.log.write_csv(file)?;
    let side = summary_path(csv);
    std::fs::write(&side, serde_json::to_string_pretty(&outcome.summary)?)?;
    Ok(side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::trajectory::TrajectorySpec;

    fn short() -> RunConfig {
        RunConfig {
            trajectory: TrajectorySpec::circle(0.03, 0.3),
            settle: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn header_matches_row_width() {
        let out = run_simulation(&short()).unwrap();
        let mut buf = Vec::new();
        out.log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let n = lines.next().unwrap().split(',').count();
        assert_eq!(n, 42);
        assert!(lines.all(|l| l.split(',').count() == n));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let out = run_simulation(&short()).unwrap();
        let mut buf = Vec::new();
        out.log.write_csv(&mut buf).unwrap();
        let back = RunLog::read_csv(std::str::from_utf8(&buf).unwrap(), out.log.case).unwrap();
        assert_eq!(back, out.log);
    }

    #[test]
    fn times_strictly_increase() {
        let out = run_simulation(&short()).unwrap();
        assert!(out.log.rows.windows(2).all(|w| w[1].time > w[0].time));
        assert_eq!(out.log.rows.len(), 301);
    }

    #[test]
    fn outputs_land_next_to_each_other() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_simulation(&short()).unwrap();
        let csv = dir.path().join("run.csv");
        let side = write_outputs(&out, &csv).unwrap();
        assert!(csv.exists());
        let s: RunSummary = serde_json::from_str(&std::fs::read_to_string(side).unwrap()).unwrap();
        assert_eq!(s, out.summary);
    }
}
