//! Run configuration with JSON loading and dotted command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::actuation::ActuationParams;
use crate::continuum::{ContinuumConfig, THETA_STRAIGHT};
use crate::controller::ControlConfig;
use crate::geometry::Pose;
use crate::manipulator::{JointVector, ARM_DOF};
use crate::rcm::{AugmentedState, Kinematics};
use crate::solver::PriorityCase;
use crate::teleop::validate_scale;
use crate::{Error, Result};

use super::trajectory::TrajectorySpec;

/// Arm posture with the wrist at (0.35, 0, 0.45) m and the shaft pointing
/// straight down. Joints 1, 3, 5 and 7 are zero and `q6 = q4 − q2`.
pub const HOME_ARM: [f64; ARM_DOF] = [
    0.0,
    -0.439_226_389_517_958_6,
    0.0,
    0.887_641_290_603_872_9,
    0.0,
    1.326_867_680_121_831_5,
    0.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialState {
    pub q_arm: [f64; ARM_DOF],
    pub theta: f64,
    pub delta: f64,
    pub lambda: f64,
}

impl Default for InitialState {
    fn default() -> Self {
        Self {
            q_arm: HOME_ARM,
            theta: THETA_STRAIGHT - 0.4,
            delta: 0.0,
            lambda: 0.4,
        }
    }
}

impl InitialState {
    pub fn state(&self) -> AugmentedState {
        AugmentedState {
            q_arm: JointVector::from_column_slice(&self.q_arm),
            psi: ContinuumConfig::new(self.theta, self.delta),
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// Snapshot broadcast rate (Hz), at most 60.
    pub broadcast_hz: f64,
    /// Haptic base expressed in the robot base.
    pub registration: Pose,
    pub motion_scale: f64,
    /// Pace the control loop against the wall clock.
    pub realtime: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8765,
            broadcast_hz: 60.0,
            registration: Pose::identity(),
            motion_scale: 1.0,
            realtime: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub kinematics: Kinematics,
    pub actuation: ActuationParams,
    pub control: ControlConfig,
    pub case: PriorityCase,
    pub initial: InitialState,
    pub trajectory: TrajectorySpec,
    /// Time simulated after the path ends (s).
    pub settle: f64,
    /// CSV log destination; the summary goes next to it as `.json`.
    pub output: Option<PathBuf>,
    pub service: ServiceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kinematics: Kinematics::default(),
            actuation: ActuationParams::default(),
            control: ControlConfig::default(),
            case: PriorityCase::Case0,
            initial: InitialState::default(),
            trajectory: TrajectorySpec::default(),
            settle: 0.5,
            output: None,
            service: ServiceConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.kinematics.validate()?;
        self.actuation.validate()?;
        self.control.validate()?;
        self.trajectory.validate()?;
        let s = self.initial.state();
        if !s.is_finite() {
            return Err(Error::Config("initial state must be finite".into()));
        }
        if !(self.kinematics.continuum.theta_min..=THETA_STRAIGHT).contains(&s.psi.theta) {
            return Err(Error::Config("initial theta lies outside its bounds".into()));
        }
        let lb = self.control.lambda_bounds;
        if !(lb.lower..=lb.upper).contains(&s.lambda) {
            return Err(Error::Config("initial lambda lies outside its bounds".into()));
        }
        if !(self.settle >= 0.0 && self.settle.is_finite()) {
            return Err(Error::Config("settle time must be non-negative".into()));
        }
        validate_scale(self.service.motion_scale)?;
        if !(self.service.broadcast_hz > 0.0 && self.service.broadcast_hz <= 60.0) {
            return Err(Error::Config("broadcast rate must lie in (0, 60] Hz".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Loads `path` (or the defaults) and applies `overrides` in order.
    pub fn load_with_overrides(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let base = match path {
            Some(p) => serde_json::from_str::<Value>(&std::fs::read_to_string(p)?)?,
            None => Value::Object(Default::default()),
        };
        Self::from_value_with_overrides(base, overrides)
    }

    /// Fills `base` (possibly partial) with defaults, then applies the
    /// dotted `overrides` in order and validates.
    pub fn from_value_with_overrides(base: Value, overrides: &[(String, String)]) -> Result<Self> {
        let mut value = serde_json::to_value(serde_json::from_value::<RunConfig>(base)?)?;
        for (k, v) in overrides {
            apply_override(&mut value, k, v)?;
        }
        let cfg: RunConfig = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Trocar position: the constrained point of the initial posture taken
    /// at the desired interpolation value.
    pub fn trocar(&self) -> nalgebra::Vector3<f64> {
        let s = AugmentedState {
            lambda: self.control.solver.lambda0,
            ..self.initial.state()
        };
        crate::rcm::rcm_point(&s, &self.kinematics)
    }
}

/// Sets the field at dotted `path` (array elements by index) to `raw`,
/// parsed as JSON when possible and as a string otherwise.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> Result<()> {
    let parsed = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed override key '{path}'")));
    }
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if !map.contains_key(*part) {
                    return Err(Error::Config(format!("unknown config key '{path}'")));
                }
                map.get_mut(*part).expect("checked above")
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("'{part}' in '{path}' is not an index")))?;
                items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} out of range in '{path}'")))?
            }
            _ => return Err(Error::Config(format!("'{path}' descends into a scalar"))),
        };
        if last {
            *cur = parsed;
            return Ok(());
        }
    }
    unreachable!("path has at least one part")
}
