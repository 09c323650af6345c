//! Resolved motion rate control.
//!
//! Each tick turns the pose error into a speed-scheduled desired twist,
//! resolves it into augmented joint rates with the selected priority case
//! and integrates the state with an explicit Euler step.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::continuum::THETA_STRAIGHT;
use crate::geometry::{rotation_error, Pose, Twist};
use crate::manipulator::JointLimits;
use crate::rcm::{self, AugVector, AugmentedState, Kinematics, LambdaBounds, LAMBDA_INDEX, THETA_INDEX};
use crate::solver::{self, PriorityCase, SolverConfig};
use crate::{Error, Result};

/// Below this norm an error is treated as zero and yields no twist.
pub const DEAD_BAND: f64 = 1e-9;

/// Speed schedule of the resolved-rate law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateParams {
    pub v_max: f64,
    pub v_min: f64,
    pub w_max: f64,
    pub w_min: f64,
    pub gamma_p: f64,
    pub gamma_o: f64,
    pub eps_p: f64,
    pub eps_o: f64,
}

impl Default for RateParams {
    fn default() -> Self {
        Self {
            v_max: 0.020,
            v_min: 0.001,
            w_max: 0.5,
            w_min: 0.02,
            gamma_p: 0.001,
            gamma_o: 0.01,
            eps_p: 5.0,
            eps_o: 5.0,
        }
    }
}

impl RateParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.v_min >= 0.0
            && self.v_min < self.v_max
            && self.w_min >= 0.0
            && self.w_min < self.w_max
            && self.gamma_p > 0.0
            && self.gamma_o > 0.0
            && self.eps_p > 1.0
            && self.eps_o > 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("rate parameters violate their bounds".into()))
        }
    }
}

/// Everything the control step needs besides the state and target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    pub rate: RateParams,
    pub solver: SolverConfig,
    /// Integration step (s).
    pub dt: f64,
    /// Gain on the trocar offset across the shaft, the actual constraint
    /// violation (1/s). Zero commands a pure zero RCM velocity.
    pub rcm_gain: f64,
    /// Gain on the trocar offset along the shaft (1/s). This part is
    /// absorbed by `λ`, so it sets how fast `λ` settles.
    pub lambda_gain: f64,
    pub lambda_bounds: LambdaBounds,
    pub joint_limits: JointLimits,
    /// Augmented-state columns that never move (e.g. a locked arm).
    pub frozen: Vec<usize>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            rate: RateParams::default(),
            solver: SolverConfig::default(),
            dt: 1e-3,
            rcm_gain: 200.0,
            lambda_gain: 2.0,
            lambda_bounds: LambdaBounds::default(),
            joint_limits: JointLimits::default(),
            frozen: Vec::new(),
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        self.rate.validate()?;
        self.solver.validate()?;
        if !(self.dt > 0.0 && self.dt <= 0.05) {
            return Err(Error::Config("dt must lie in (0, 0.05] s".into()));
        }
        for (name, k) in [("rcm_gain", self.rcm_gain), ("lambda_gain", self.lambda_gain)] {
            if !(k >= 0.0 && k * self.dt < 1.0) {
                return Err(Error::Config(format!("{name} must be non-negative and below 1/dt")));
            }
        }
        let lb = self.lambda_bounds;
        if !(0.0 <= lb.lower && lb.lower < lb.upper && lb.upper <= 1.0) {
            return Err(Error::Config(
                "lambda bounds must satisfy 0 <= lower < upper <= 1".into(),
            ));
        }
        if !(lb.lower..=lb.upper).contains(&self.solver.lambda0) {
            return Err(Error::Config("lambda0 lies outside the lambda bounds".into()));
        }
        if self.frozen.iter().any(|&c| c >= rcm::AUG_DOF) {
            return Err(Error::Config("frozen column index out of range".into()));
        }
        Ok(())
    }
}

/// Diagnostics of one control tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlTick {
    pub dt: f64,
    pub twist: Twist,
    pub e_p: Vector3<f64>,
    pub e_o: Vector3<f64>,
    pub qdot: AugVector,
    /// The bending angle or `λ` sat on a bound and was held there.
    pub limited: bool,
}

pub fn pose_errors(desired: &Pose, current: &Pose) -> (Vector3<f64>, Vector3<f64>) {
    (
        desired.translation - current.translation,
        rotation_error(&desired.rotation, &current.rotation),
    )
}

fn schedule(err: f64, lo: f64, hi: f64, gamma: f64, eps: f64) -> f64 {
    let chi = ((err - gamma) / (gamma * (eps - 1.0))).clamp(0.0, 1.0);
    if err > gamma * eps {
        hi
    } else {
        lo + (hi - lo) * chi
    }
}

/// Scheduled linear and angular speed magnitudes.
pub fn schedule_speeds(e_p: &Vector3<f64>, e_o: &Vector3<f64>, p: &RateParams) -> (f64, f64) {
    (
        schedule(e_p.norm(), p.v_min, p.v_max, p.gamma_p, p.eps_p),
        schedule(e_o.norm(), p.w_min, p.w_max, p.gamma_o, p.eps_o),
    )
}

fn directed(e: &Vector3<f64>, mag: f64) -> Vector3<f64> {
    let n = e.norm();
    if n < DEAD_BAND {
        Vector3::zeros()
    } else {
        e * (mag / n)
    }
}

pub fn desired_twist(e_p: &Vector3<f64>, e_o: &Vector3<f64>, p: &RateParams) -> Twist {
    let (v, w) = schedule_speeds(e_p, e_o, p);
    Twist::new(directed(e_p, v), directed(e_o, w))
}

/// Desired twist whose magnitude is also capped at `‖e‖/dt`, so that one
/// Euler step never travels past the target. Without the cap the `v_min`
/// floor makes the tip chatter around the goal.
pub fn limited_twist(e_p: &Vector3<f64>, e_o: &Vector3<f64>, p: &RateParams, dt: f64) -> Twist {
    let (v, w) = schedule_speeds(e_p, e_o, p);
    Twist::new(
        directed(e_p, v.min(e_p.norm() / dt)),
        directed(e_o, w.min(e_o.norm() / dt)),
    )
}

/// Indices of bounded columns that sit on a bound and are being pushed past it.
fn saturated(state: &AugmentedState, qdot: &AugVector, kin: &Kinematics, cfg: &ControlConfig) -> Vec<usize> {
    const ON_BOUND: f64 = 1e-12;
    let mut out = Vec::new();
    let theta = state.psi.theta;
    let td = qdot[THETA_INDEX];
    if (theta <= kin.continuum.theta_min + ON_BOUND && td < 0.0) || (theta >= THETA_STRAIGHT - ON_BOUND && td > 0.0) {
        out.push(THETA_INDEX);
    }
    let l = state.lambda;
    let ld = qdot[LAMBDA_INDEX];
    if (l <= cfg.lambda_bounds.lower + ON_BOUND && ld < 0.0) || (l >= cfg.lambda_bounds.upper - ON_BOUND && ld > 0.0) {
        out.push(LAMBDA_INDEX);
    }
    out
}

/// Velocity commanded to the constrained point: a stiff pull toward the
/// trocar across the shaft and a gentle one along it.
pub fn rcm_correction(
    trocar: &Vector3<f64>,
    p_rcm: &Vector3<f64>,
    poses: &rcm::StatePoses,
    cfg: &ControlConfig,
) -> Vector3<f64> {
    let e = trocar - p_rcm;
    let shaft = poses.ins.translation - poses.ee.translation;
    let along = match shaft.try_normalize(1e-12) {
        Some(u) => u * u.dot(&e),
        None => Vector3::zeros(),
    };
    cfg.rcm_gain * (e - along) + cfg.lambda_gain * along
}

/// Resolves a desired tip twist into augmented rates, holding frozen and
/// saturated columns still. Saturated columns are found iteratively: a
/// column is dropped from every task and the stack is solved again.
pub fn resolve_rates(
    state: &AugmentedState,
    twist: &Twist,
    trocar: &Vector3<f64>,
    case: PriorityCase,
    kin: &Kinematics,
    cfg: &ControlConfig,
) -> (AugVector, bool) {
    let base = rcm::assemble(state, kin);
    let p_rcm = base.poses.ee.translation + state.lambda * (base.poses.ins.translation - base.poses.ee.translation);
    let xi_rcm = rcm_correction(trocar, &p_rcm, &base.poses, cfg);

    let mut locked = cfg.frozen.clone();
    let mut limited = false;
    loop {
        let mut bundle = base.clone();
        bundle.lock_columns(&locked);
        let mut qdot = solver::solve_case(case, &bundle, twist, &xi_rcm, &cfg.solver);
        if locked.contains(&LAMBDA_INDEX) {
            // The null-space bias acts on λ directly; a locked λ must not drift.
            qdot[LAMBDA_INDEX] = 0.0;
        }
        for &c in &locked {
            qdot[c] = 0.0;
        }
        let extra: Vec<usize> = saturated(state, &qdot, kin, cfg)
            .into_iter()
            .filter(|c| !locked.contains(c))
            .collect();
        if extra.is_empty() {
            return (qdot, limited);
        }
        limited = true;
        locked.extend(extra);
    }
}

/// Explicit Euler update with `δ` wrapping and bound clamping. Returns the
/// new state and whether any clamp was applied.
pub fn integrate(
    state: &AugmentedState,
    qdot: &AugVector,
    dt: f64,
    kin: &Kinematics,
    cfg: &ControlConfig,
) -> (AugmentedState, bool) {
    let mut next = AugmentedState::from_vector(&(state.to_vector() + qdot * dt));
    let mut clamped = next.psi.normalize(&kin.continuum);
    let l = next.lambda.clamp(cfg.lambda_bounds.lower, cfg.lambda_bounds.upper);
    clamped |= l != next.lambda;
    next.lambda = l;
    clamped |= cfg.joint_limits.clamp(&mut next.q_arm);
    (next, clamped)
}

/// One control tick at `cfg.dt`. The RCM task commands a zero velocity of
/// the constrained point plus a proportional pull toward `trocar`.
///
/// A non-finite solution rejects the tick: the error carries `time` and the
/// caller keeps its previous state.
pub fn step(
    state: &AugmentedState,
    desired: &Pose,
    case: PriorityCase,
    trocar: &Vector3<f64>,
    kin: &Kinematics,
    cfg: &ControlConfig,
    time: f64,
) -> Result<(AugmentedState, ControlTick)> {
    let current = rcm::state_poses(state, kin).tip;
    let (e_p, e_o) = pose_errors(desired, &current);
    let twist = limited_twist(&e_p, &e_o, &cfg.rate, cfg.dt);
    let (qdot, limited) = resolve_rates(state, &twist, trocar, case, kin, cfg);
    if !qdot.iter().all(|x| x.is_finite()) {
        return Err(Error::SolverFault { time });
    }
    let (next, clamped) = integrate(state, &qdot, cfg.dt, kin, cfg);
    if clamped {
        log::warn!("t = {time:.3} s: state clamped to its bounds");
    }
    Ok((
        next,
        ControlTick {
            dt: cfg.dt,
            twist,
            e_p,
            e_o,
            qdot,
            limited: limited || clamped,
        },
    ))
}
