//! Constant-curvature kinematics of the four-tendon continuum segment.
//!
//! The segment is described by `ψ = (θ, δ)`: `θ` is the tangent angle of the
//! backbone at the tip (π/2 when straight) and `δ` orients the bending plane
//! about the base-disk z axis. Frame {1} (bending plane) is `Rot(z, −δ)` of
//! frame {ins}, and the tip frame is `Rot(z, −δ)·Rot(y, θ0 − θ)·Rot(z, δ)`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2x4, Matrix4x2, Matrix6x2, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::geometry::{rot_y, rot_z, Pose};
use crate::{Error, Result};

/// Tangent angle of the straight configuration.
pub const THETA_STRAIGHT: f64 = FRAC_PI_2;
/// Angular spacing of the four tendons on the pitch circle.
pub const DIVISION_ANGLE: f64 = FRAC_PI_2;
pub const TENDON_COUNT: usize = 4;

/// Bend angles below this use the series form of the arc.
pub const SERIES_THRESHOLD: f64 = 1e-4;
/// Tendon vectors shorter than this are treated as the straight pose.
pub const STRAIGHT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuumParams {
    /// Primary backbone length (m).
    pub length: f64,
    /// Pitch-circle radius of the secondary backbones (m).
    pub pitch_radius: f64,
    /// Lower bound of `θ` (rad); the upper bound is the straight pose.
    pub theta_min: f64,
}

impl Default for ContinuumParams {
    fn default() -> Self {
        Self {
            length: 0.030,
            pitch_radius: 0.0018,
            theta_min: PI / 18.0,
        }
    }
}

impl ContinuumParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !(self.pitch_radius > 0.0) {
            return Err(Error::Config(
                "continuum length and pitch radius must be positive".into(),
            ));
        }
        if !(self.theta_min >= 0.0 && self.theta_min < THETA_STRAIGHT) {
            return Err(Error::Config("continuum theta_min must lie in [0, pi/2)".into()));
        }
        Ok(())
    }
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumConfig {
    pub theta: f64,
    pub delta: f64,
}

impl ContinuumConfig {
    pub fn new(theta: f64, delta: f64) -> Self {
        Self { theta, delta }
    }

    pub fn straight() -> Self {
        Self::new(THETA_STRAIGHT, 0.0)
    }

    /// Bend angle `θ0 − θ`.
    pub fn bend(&self) -> f64 {
        THETA_STRAIGHT - self.theta
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.theta, self.delta)
    }

    /// Clamps `θ` into `[theta_min, θ0]` and wraps `δ`. Returns whether `θ`
    /// was clamped.
    pub fn normalize(&mut self, params: &ContinuumParams) -> bool {
        self.delta = wrap_angle(self.delta);
        let clamped = self.theta.clamp(params.theta_min, THETA_STRAIGHT);
        let hit = clamped != self.theta;
        self.theta = clamped;
        hit
    }
}

/// Tendon length offsets `ℓ_i = L_i − L` (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TendonDisplacements(pub Vector4<f64>);

/// Result of inverting the tendon map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveredConfig {
    pub config: ContinuumConfig,
    /// `δ` is undefined at the straight pose; the caller's previous value was kept.
    pub straight: bool,
}

fn tendon_angle(delta: f64, i: usize) -> f64 {
    delta + i as f64 * DIVISION_ANGLE
}

pub fn tendon_lengths(psi: &ContinuumConfig, params: &ContinuumParams) -> TendonDisplacements {
    let k = params.pitch_radius * (psi.theta - THETA_STRAIGHT);
    TendonDisplacements(Vector4::from_fn(|i, _| k * tendon_angle(psi.delta, i).cos()))
}

/// Inverts [`tendon_lengths`]. `previous_delta` is returned unchanged when the
/// tendons describe the straight pose.
pub fn config_from_tendons(
    tendons: &TendonDisplacements,
    params: &ContinuumParams,
    previous_delta: f64,
) -> RecoveredConfig {
    let l = &tendons.0;
    if l.norm() < STRAIGHT_EPS {
        return RecoveredConfig {
            config: ContinuumConfig::new(THETA_STRAIGHT, previous_delta),
            straight: true,
        };
    }
    let (sb, cb) = DIVISION_ANGLE.sin_cos();
    let delta = (l[1] - l[0] * cb).atan2(-l[0] * sb);
    let k = (0..TENDON_COUNT)
        .max_by(|&a, &b| {
            let ca = tendon_angle(delta, a).cos().abs();
            let cb = tendon_angle(delta, b).cos().abs();
            ca.total_cmp(&cb)
        })
        .unwrap_or(0);
    let theta = THETA_STRAIGHT + l[k] / (params.pitch_radius * tendon_angle(delta, k).cos());
    RecoveredConfig {
        config: ContinuumConfig::new(theta, wrap_angle(delta)),
        straight: false,
    }
}

/// `(1 − cos φ)/φ`, `sin φ/φ` and their derivatives in `φ`.
struct ArcTerms {
    f: f64,
    g: f64,
    df: f64,
    dg: f64,
}

fn arc_terms(phi: f64) -> ArcTerms {
    if phi.abs() < SERIES_THRESHOLD {
        let p2 = phi * phi;
        ArcTerms {
            f: phi * (0.5 - p2 / 24.0 + p2 * p2 / 720.0),
            g: 1.0 - p2 / 6.0 + p2 * p2 / 120.0,
            df: 0.5 - p2 / 8.0 + p2 * p2 / 144.0,
            dg: phi * (-1.0 / 3.0 + p2 / 30.0),
        }
    } else {
        let (s, c) = phi.sin_cos();
        ArcTerms {
            f: (1.0 - c) / phi,
            g: s / phi,
            df: (phi * s - (1.0 - c)) / (phi * phi),
            dg: (phi * c - s) / (phi * phi),
        }
    }
}

/// Tip position in the base-disk frame {ins}.
pub fn tip_position(psi: &ContinuumConfig, params: &ContinuumParams) -> Vector3<f64> {
    let t = arc_terms(psi.bend());
    let (sd, cd) = psi.delta.sin_cos();
    params.length * Vector3::new(t.f * cd, -t.f * sd, t.g)
}

/// Tip pose relative to the base disk {ins}.
pub fn tip_pose(psi: &ContinuumConfig, params: &ContinuumParams) -> Pose {
    let rotation = rot_z(-psi.delta) * rot_y(psi.bend()) * rot_z(psi.delta);
    Pose::new(rotation, tip_position(psi, params))
}

/// `J_xψ`: maps `ψ̇` to the tip twist relative to {ins}, expressed in {ins}.
pub fn instrument_jacobian(psi: &ContinuumConfig, params: &ContinuumParams) -> Matrix6x2<f64> {
    let t = arc_terms(psi.bend());
    let (sd, cd) = psi.delta.sin_cos();
    let (st, ct) = psi.theta.sin_cos();
    let l = params.length;
    // dφ/dθ = −1
    Matrix6x2::new(
        -l * t.df * cd,
        -l * t.f * sd,
        l * t.df * sd,
        -l * t.f * cd,
        -l * t.dg,
        0.0,
        -sd,
        cd * ct,
        -cd,
        -sd * ct,
        0.0,
        -1.0 + st,
    )
}

/// `J_ℓψ`: row `i` is `[r cos δ_i, −r(θ − θ0) sin δ_i]`.
pub fn actuation_jacobian(psi: &ContinuumConfig, params: &ContinuumParams) -> Matrix4x2<f64> {
    let r = params.pitch_radius;
    let bend = psi.theta - THETA_STRAIGHT;
    Matrix2x4::from_fn(|row, i| {
        let a = tendon_angle(psi.delta, i);
        if row == 0 {
            r * a.cos()
        } else {
            -r * bend * a.sin()
        }
    })
    .transpose()
}
