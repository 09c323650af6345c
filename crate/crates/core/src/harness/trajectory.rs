//! Timed desired-pose sequences for the simulated experiments.

use std::f64::consts::PI;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::continuum::ContinuumConfig;
use crate::geometry::{axis_angle, Pose};
use crate::rcm::{self, AugmentedState, Kinematics};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Circle,
    Square,
    Sinusoid,
    Arc,
    Hold,
    /// Bends the segment further, then sweeps its bending plane, with the
    /// pose taken from the instrument kinematics. Reachable by the
    /// continuum joints alone.
    BendSweep,
}

/// Plane in which the geometric paths are drawn. Both pass through the
/// starting tip position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PathPlane {
    /// Normal along the base z-axis, in-plane axes base x and y.
    #[default]
    Horizontal,
    /// Normal along the starting tip z-axis, in-plane axes tip x and y.
    ToolNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum OrientationPolicy {
    /// Keep the starting tip orientation.
    #[default]
    Fixed,
    /// Turn about the plane normal with the path heading.
    Tangent,
    /// Rock about `axis` (base frame, default x) by
    /// `amplitude · sin(2π · periods · s)` along the normalized path
    /// parameter `s`.
    Tilt {
        amplitude: f64,
        periods: f64,
        #[serde(default = "default_tilt_axis")]
        axis: [f64; 3],
    },
}

fn default_tilt_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    /// Circle and arc radius (m).
    pub radius: f64,
    /// Square side (m).
    pub side: f64,
    /// Sinusoid amplitude (m).
    pub amplitude: f64,
    /// Sinusoid and arc length (m).
    pub length: f64,
    /// Sinusoid periods over its length.
    pub periods: f64,
    /// Additional bend for the bend-sweep path (rad).
    pub bend: f64,
    /// Bending-plane sweep for the bend-sweep path (rad).
    pub sweep: f64,
    /// Number of samples; per side for the square.
    pub samples: usize,
    /// Time to traverse the path (s).
    pub duration: f64,
    pub plane: PathPlane,
    pub orientation: OrientationPolicy,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Circle,
            radius: 0.015,
            side: 0.023,
            amplitude: 0.003,
            length: 0.05,
            periods: 1.0,
            bend: 1.0,
            sweep: 1.96,
            samples: 500,
            duration: 15.0,
            plane: PathPlane::Horizontal,
            orientation: OrientationPolicy::Fixed,
        }
    }
}

impl TrajectorySpec {
    pub fn circle(diameter: f64, duration: f64) -> Self {
        Self {
            kind: TrajectoryKind::Circle,
            radius: diameter / 2.0,
            duration,
            ..Default::default()
        }
    }

    pub fn square(side: f64, samples_per_side: usize, duration: f64) -> Self {
        Self {
            kind: TrajectoryKind::Square,
            side,
            samples: samples_per_side,
            duration,
            plane: PathPlane::ToolNormal,
            ..Default::default()
        }
    }

    pub fn hold(duration: f64) -> Self {
        Self {
            kind: TrajectoryKind::Hold,
            samples: 2,
            duration,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [self.radius, self.side, self.amplitude, self.length, self.bend]
            .iter()
            .all(|x| *x >= 0.0 && x.is_finite());
        if !nonneg || !self.sweep.is_finite() || !(self.periods >= 0.0) {
            return Err(Error::Config(
                "trajectory dimensions must be finite and non-negative".into(),
            ));
        }
        if self.samples < 2 {
            return Err(Error::Config("trajectory needs at least 2 samples".into()));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config("trajectory duration must be positive".into()));
        }
        if self.kind == TrajectoryKind::Arc && self.radius <= 0.0 && self.length > 0.0 {
            return Err(Error::Config("arc radius must be positive".into()));
        }
        if let OrientationPolicy::Tilt {
            amplitude,
            periods,
            axis,
        } = self.orientation
        {
            if !amplitude.is_finite() || !periods.is_finite() {
                return Err(Error::Config("tilt parameters must be finite".into()));
            }
            if !axis.iter().all(|x| x.is_finite()) || Vector3::from(axis).norm() < 1e-9 {
                return Err(Error::Config("tilt axis must be a finite non-zero vector".into()));
            }
        }
        Ok(())
    }
}

/// Poses sampled at increasing times, linearly interpolated in between
/// (spherically for the rotation).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub poses: Vec<Pose>,
    /// Continuum configuration behind each sample, when the path was built
    /// from one.
    pub configs: Option<Vec<ContinuumConfig>>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    fn segment(&self, t: f64) -> (usize, f64) {
        let n = self.times.len();
        if n < 2 || t <= self.times[0] {
            return (0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 2, 1.0);
        }
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let span = self.times[i + 1] - self.times[i];
        (i, if span > 0.0 { (t - self.times[i]) / span } else { 0.0 })
    }

    pub fn pose_at(&self, t: f64) -> Pose {
        if self.poses.len() == 1 {
            return self.poses[0];
        }
        let (i, a) = self.segment(t);
        let (p0, p1) = (&self.poses[i], &self.poses[i + 1]);
        if a <= 0.0 {
            return *p0;
        }
        if a >= 1.0 {
            return *p1;
        }
        let q0 = UnitQuaternion::from_matrix(&p0.rotation);
        let q1 = UnitQuaternion::from_matrix(&p1.rotation);
        let q = q0.try_slerp(&q1, a, 1e-12).unwrap_or(if a < 0.5 { q0 } else { q1 });
        Pose::new(
            q.to_rotation_matrix().into_inner(),
            p0.translation.lerp(&p1.translation, a),
        )
    }

    /// Continuum configuration at `t` (linear in `θ` and `δ`).
    pub fn config_at(&self, t: f64) -> Option<ContinuumConfig> {
        let c = self.configs.as_ref()?;
        if c.len() == 1 {
            return Some(c[0]);
        }
        let (i, a) = self.segment(t);
        Some(ContinuumConfig::new(
            c[i].theta + a * (c[i + 1].theta - c[i].theta),
            c[i].delta + a * (c[i + 1].delta - c[i].delta),
        ))
    }
}

fn plane_axes(plane: PathPlane, start: &Pose) -> (Vector3<f64>, Vector3<f64>) {
    match plane {
        PathPlane::Horizontal => (Vector3::x(), Vector3::y()),
        PathPlane::ToolNormal => (start.rotation.column(0).into(), start.rotation.column(1).into()),
    }
}

/// In-plane offsets `(x, y)` from the start, for `n` samples.
fn offsets(spec: &TrajectorySpec) -> Vec<(f64, f64)> {
    let n = spec.samples;
    let s = |k: usize| k as f64 / (n - 1) as f64;
    match spec.kind {
        TrajectoryKind::Hold | TrajectoryKind::BendSweep => vec![(0.0, 0.0); n],
        TrajectoryKind::Circle => {
            let r = spec.radius;
            (0..n)
                .map(|k| {
                    let (sn, cs) = (2.0 * PI * s(k)).sin_cos();
                    (r * (cs - 1.0), r * sn)
                })
                .collect()
        }
        TrajectoryKind::Arc => {
            let r = spec.radius;
            let span = if r > 0.0 { spec.length / r } else { 0.0 };
            (0..n)
                .map(|k| {
                    let (sn, cs) = (span * s(k)).sin_cos();
                    (r * (cs - 1.0), r * sn)
                })
                .collect()
        }
        TrajectoryKind::Sinusoid => (0..n)
            .map(|k| {
                let u = s(k);
                (spec.length * u, spec.amplitude * (2.0 * PI * spec.periods * u).sin())
            })
            .collect(),
        TrajectoryKind::Square => {
            let a = spec.side;
            let corners = [(0.0, 0.0), (a, 0.0), (a, a), (0.0, a), (0.0, 0.0)];
            let mut out = Vec::with_capacity(4 * n + 1);
            for w in corners.windows(2) {
                let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                for j in 0..n {
                    let u = j as f64 / n as f64;
                    out.push((x0 + u * (x1 - x0), y0 + u * (y1 - y0)));
                }
            }
            out.push((0.0, 0.0));
            out
        }
    }
}

fn headings(pts: &[(f64, f64)]) -> Vec<f64> {
    let n = pts.len();
    let raw: Vec<f64> = (0..n)
        .map(|k| {
            let (a, b) = if k + 1 < n {
                (k, k + 1)
            } else {
                (k.saturating_sub(1), k)
            };
            let dx = pts[b].0 - pts[a].0;
            let dy = pts[b].1 - pts[a].1;
            if dx.abs() + dy.abs() < 1e-15 {
                f64::NAN
            } else {
                dy.atan2(dx)
            }
        })
        .collect();
    // Unwrap and measure relative to the first defined heading.
    let first = raw.iter().copied().find(|h| h.is_finite()).unwrap_or(0.0);
    let mut out = Vec::with_capacity(n);
    let mut prev = first;
    for h in raw {
        let h = if h.is_finite() { h } else { prev };
        let mut d = h - prev;
        d -= 2.0 * PI * (d / (2.0 * PI)).round();
        prev += d;
        out.push(prev - first);
    }
    out
}

fn orientation(
    policy: OrientationPolicy,
    start: &Matrix3<f64>,
    normal: &Vector3<f64>,
    s: f64,
    heading: f64,
) -> Matrix3<f64> {
    match policy {
        OrientationPolicy::Fixed => *start,
        OrientationPolicy::Tangent => axis_angle(normal, heading) * start,
        OrientationPolicy::Tilt {
            amplitude,
            periods,
            axis,
        } => {
            let axis = Vector3::from(axis).normalize();
            axis_angle(&axis, amplitude * (2.0 * PI * periods * s).sin()) * start
        }
    }
}

fn sample_times(n: usize, duration: f64) -> Vec<f64> {
    (0..n).map(|k| duration * k as f64 / (n - 1) as f64).collect()
}

/// Builds the path for `spec` starting at the tip pose of `initial`.
pub fn gen_trajectory(spec: &TrajectorySpec, initial: &AugmentedState, kin: &Kinematics) -> Result<Trajectory> {
    spec.validate()?;
    if spec.kind == TrajectoryKind::BendSweep {
        return Ok(bend_sweep(spec, initial, kin));
    }
    let start = rcm::state_poses(initial, kin).tip;
    let (u, v) = plane_axes(spec.plane, &start);
    let normal = u.cross(&v);
    let pts = offsets(spec);
    let heads = headings(&pts);
    let n = pts.len();
    let poses = pts
        .iter()
        .zip(&heads)
        .enumerate()
        .map(|(k, (&(x, y), &h))| {
            let s = k as f64 / (n - 1) as f64;
            Pose::new(
                orientation(spec.orientation, &start.rotation, &normal, s, h),
                start.translation + x * u + y * v,
            )
        })
        .collect();
    Ok(Trajectory {
        times: sample_times(n, spec.duration),
        poses,
        configs: None,
    })
}

/// The first half bends the segment by `spec.bend`, the second half
/// sweeps `δ` by `spec.sweep`, with the arm and `λ` at their initial
/// values. Each phase is sampled in proportion to its duration.
fn bend_sweep(spec: &TrajectorySpec, initial: &AugmentedState, kin: &Kinematics) -> Trajectory {
    let n = spec.samples;
    let theta0 = initial.psi.theta;
    let theta1 = (theta0 - spec.bend).max(kin.continuum.theta_min);
    let delta0 = initial.psi.delta;
    let configs: Vec<ContinuumConfig> = (0..n)
        .map(|k| {
            let s = k as f64 / (n - 1) as f64;
            if s <= 0.5 {
                ContinuumConfig::new(theta0 + (theta1 - theta0) * 2.0 * s, delta0)
            } else {
                ContinuumConfig::new(theta1, delta0 + spec.sweep * (2.0 * s - 1.0))
            }
        })
        .collect();
    let poses = configs
        .iter()
        .map(|c| rcm::state_poses(&AugmentedState { psi: *c, ..*initial }, kin).tip)
        .collect();
    Trajectory {
        times: sample_times(n, spec.duration),
        poses,
        configs: Some(configs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::InitialState;
    use approx::assert_relative_eq;

    fn setup() -> (AugmentedState, Kinematics) {
        (InitialState::default().state(), Kinematics::default())
    }

    #[test]
    fn zero_radius_circle_is_constant() {
        let (s, k) = setup();
        let t = gen_trajectory(
            &TrajectorySpec {
                radius: 0.0,
                ..TrajectorySpec::circle(0.0, 5.0)
            },
            &s,
            &k,
        )
        .unwrap();
        assert!(t.poses.iter().all(|p| *p == t.poses[0]));
    }

    #[test]
    fn circle_points_lie_on_the_circle_and_close() {
        let (s, k) = setup();
        let t = gen_trajectory(&TrajectorySpec::circle(0.03, 15.0), &s, &k).unwrap();
        let start = t.poses[0].translation;
        let center: Vector3<f64> = start - 0.015 * Vector3::x();
        let chords: Vec<f64> = t
            .poses
            .windows(2)
            .map(|w| (w[1].translation - w[0].translation).norm())
            .collect();
        for p in &t.poses {
            assert!(((p.translation - center).norm() - 0.015).abs() < 1e-12);
            assert!((p.translation.z - start.z).abs() < 1e-15);
        }
        let (lo, hi) = chords
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
        assert!(hi - lo < 1e-12);
        assert!((t.poses.last().unwrap().translation - start).norm() < 1e-12);
    }

    #[test]
    fn square_corners() {
        let (s, k) = setup();
        let spec = TrajectorySpec::square(0.023, 500, 16.0);
        let t = gen_trajectory(&spec, &s, &k).unwrap();
        assert_eq!(t.len(), 2001);
        let start = t.poses[0];
        let u: Vector3<f64> = start.rotation.column(0).into();
        let v: Vector3<f64> = start.rotation.column(1).into();
        let expect = [
            Vector3::zeros(),
            0.023 * u,
            0.023 * (u + v),
            0.023 * v,
            Vector3::zeros(),
        ];
        for (c, e) in expect.iter().enumerate() {
            let got = t.poses[c * 500].translation - start.translation;
            assert!((got - e).norm() < 1e-15, "corner {c}");
        }
        // The plane normal is the tip axis, held fixed.
        for p in &t.poses {
            assert_eq!(p.rotation, start.rotation);
            assert!((p.translation - start.translation).dot(&start.rotation.column(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn sinusoid_and_arc_shapes() {
        let (s, k) = setup();
        let spec = TrajectorySpec {
            kind: TrajectoryKind::Sinusoid,
            length: 0.05,
            amplitude: 0.003,
            ..Default::default()
        };
        let t = gen_trajectory(&spec, &s, &k).unwrap();
        let d = t.poses.last().unwrap().translation - t.poses[0].translation;
        assert_relative_eq!(d.x, 0.05, epsilon = 1e-15);
        let peak = t
            .poses
            .iter()
            .map(|p| p.translation.y - t.poses[0].translation.y)
            .fold(0.0, f64::max);
        assert!((peak - 0.003).abs() < 1e-6);

        let spec = TrajectorySpec {
            kind: TrajectoryKind::Arc,
            radius: 0.02,
            length: 0.05,
            ..Default::default()
        };
        let t = gen_trajectory(&spec, &s, &k).unwrap();
        let len: f64 = t
            .poses
            .windows(2)
            .map(|w| (w[1].translation - w[0].translation).norm())
            .sum();
        assert!((len - 0.05).abs() < 1e-6);
    }

    #[test]
    fn interpolation_hits_samples_and_midpoints() {
        let (s, k) = setup();
        let t = gen_trajectory(&TrajectorySpec::circle(0.03, 10.0), &s, &k).unwrap();
        assert_eq!(t.pose_at(t.times[7]).translation, t.poses[7].translation);
        let mid = t.pose_at(0.5 * (t.times[3] + t.times[4])).translation;
        assert_relative_eq!(
            mid,
            0.5 * (t.poses[3].translation + t.poses[4].translation),
            epsilon = 1e-15
        );
        assert_eq!(t.pose_at(-1.0), t.poses[0]);
        assert_eq!(t.pose_at(99.0).translation, t.poses.last().unwrap().translation);
    }

    #[test]
    fn tangent_policy_follows_heading() {
        let (s, k) = setup();
        let spec = TrajectorySpec {
            orientation: OrientationPolicy::Tangent,
            ..TrajectorySpec::circle(0.03, 10.0)
        };
        let t = gen_trajectory(&spec, &s, &k).unwrap();
        let quarter = t.poses[(t.len() - 1) / 4];
        let rel = quarter.rotation * t.poses[0].rotation.transpose();
        let e = crate::geometry::rotation_error(&rel, &Matrix3::identity());
        assert!((e - Vector3::new(0.0, 0.0, PI / 2.0)).norm() < 0.02);
    }

    #[test]
    fn bend_sweep_is_reachable_by_the_segment() {
        let (s, k) = setup();
        let spec = TrajectorySpec {
            kind: TrajectoryKind::BendSweep,
            bend: 0.5,
            sweep: 1.0,
            samples: 101,
            duration: 10.0,
            ..Default::default()
        };
        let t = gen_trajectory(&spec, &s, &k).unwrap();
        let c = t.configs.as_ref().unwrap();
        assert_relative_eq!(c[50].theta, s.psi.theta - 0.5, epsilon = 1e-12);
        assert_relative_eq!(c[100].delta, s.psi.delta + 1.0, epsilon = 1e-12);
        assert_eq!(t.poses[0], rcm::state_poses(&s, &k).tip);
    }

    #[test]
    fn invalid_specs() {
        let (s, k) = setup();
        let bad = TrajectorySpec {
            samples: 1,
            ..Default::default()
        };
        assert!(gen_trajectory(&bad, &s, &k).is_err());
        let bad = TrajectorySpec {
            radius: -1.0,
            ..Default::default()
        };
        assert!(gen_trajectory(&bad, &s, &k).is_err());
        assert!(serde_json::from_str::<TrajectorySpec>(r#"{"kind":"spiral"}"#).is_err());
    }
}
