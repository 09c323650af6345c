//! Forward kinematics and geometric Jacobians of the 7-DoF serial arm.

use nalgebra::{Matrix6xX, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{rot_x, rot_z, Pose};
use crate::{Error, Result};

pub const ARM_DOF: usize = 7;

pub type JointVector = SVector<f64, ARM_DOF>;
pub type ArmJacobian = SMatrix<f64, 6, ARM_DOF>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DhConvention {
    /// `Rz(θ)·Tz(d)·Tx(a)·Rx(α)`; joint k turns about `z_{k−1}`.
    Standard,
    /// `Rx(α)·Tx(a)·Rz(θ)·Tz(d)`; joint k turns about `z_k`.
    #[default]
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    #[default]
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    pub theta_offset: f64,
    pub d: f64,
    pub alpha: f64,
    pub a: f64,
    #[serde(default)]
    pub kind: JointKind,
}

impl DhRow {
    pub fn revolute(theta_offset: f64, d: f64, alpha: f64, a: f64) -> Self {
        Self {
            theta_offset,
            d,
            alpha,
            a,
            kind: JointKind::Revolute,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DhTable {
    pub convention: DhConvention,
    pub rows: Vec<DhRow>,
}

impl Default for DhTable {
    /// Home-configuration parameters of the 7-DoF arm (meters, radians).
    fn default() -> Self {
        use std::f64::consts::FRAC_PI_2 as H;
        let d = [0.267, 0.0, 0.293, 0.0, 0.3425, 0.0, 0.097];
        let alpha = [0.0, -H, H, H, H, H, -H];
        let a = [0.0, 0.0, 0.0, 0.0525, 0.0775, 0.0, 0.076];
        Self {
            convention: DhConvention::Modified,
            rows: (0..ARM_DOF)
                .map(|i| DhRow::revolute(0.0, d[i], alpha[i], a[i]))
                .collect(),
        }
    }
}

impl DhTable {
    pub fn validate(&self) -> Result<()> {
        if self.rows.len() != ARM_DOF {
            return Err(Error::Config(format!(
                "DH table needs {ARM_DOF} rows, got {}",
                self.rows.len()
            )));
        }
        let finite = self
            .rows
            .iter()
            .all(|r| [r.theta_offset, r.d, r.alpha, r.a].iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::Config("DH table has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Fixed transform from frame {7} to the continuum base disk {ins}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToolOffset(pub Pose);

impl Default for ToolOffset {
    fn default() -> Self {
        Self(Pose::from_translation(Vector3::new(0.0, 0.0, 0.230)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
}

impl Default for JointLimits {
    fn default() -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        Self {
            lower: -two_pi,
            upper: two_pi,
        }
    }
}

impl JointLimits {
    /// Clamps in place; returns whether any joint was limited.
    pub fn clamp(&self, q: &mut JointVector) -> bool {
        let mut hit = false;
        for v in q.iter_mut() {
            let c = v.clamp(self.lower, self.upper);
            hit |= c != *v;
            *v = c;
        }
        hit
    }
}

/// Homogeneous link transform for one DH row at joint value `q`. For a
/// prismatic row `q` is added to `d` instead of the angle.
pub fn link_transform(row: &DhRow, q: f64, convention: DhConvention) -> Pose {
    let (theta, d) = match row.kind {
        JointKind::Revolute => (q + row.theta_offset, row.d),
        JointKind::Prismatic => (row.theta_offset, row.d + q),
    };
    match convention {
        DhConvention::Standard => {
            let (st, ct) = theta.sin_cos();
            let (sa, ca) = row.alpha.sin_cos();
            Pose::new(
                nalgebra::Matrix3::new(ct, -ca * st, sa * st, st, ct * ca, -sa * ct, 0.0, sa, ca),
                Vector3::new(row.a * ct, row.a * st, d),
            )
        }
        DhConvention::Modified => {
            let twist = Pose::new(rot_x(row.alpha), Vector3::new(row.a, 0.0, 0.0));
            twist.compose(&Pose::new(rot_z(theta), Vector3::new(0.0, 0.0, d)))
        }
    }
}

/// Poses of frames {0}..{7} in the base frame (`frames[0]` is the base).
pub fn frame_chain(q: &JointVector, dh: &DhTable) -> Vec<Pose> {
    let mut frames = Vec::with_capacity(ARM_DOF + 1);
    let mut t = Pose::identity();
    frames.push(t);
    for (row, &qi) in dh.rows.iter().zip(q.iter()) {
        t = t.compose(&link_transform(row, qi, dh.convention));
        frames.push(t);
    }
    frames
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPoses {
    pub ee: Pose,
    pub ins: Pose,
}

pub fn forward_kinematics(q: &JointVector, dh: &DhTable, tool: &ToolOffset) -> ArmPoses {
    let ee = *frame_chain(q, dh).last().expect("chain has a base frame");
    ArmPoses {
        ee,
        ins: ee.compose(&tool.0),
    }
}

/// Joint axes and the points they pass through, in the base frame.
fn joint_axes(frames: &[Pose], convention: DhConvention) -> impl Iterator<Item = (Vector3<f64>, Vector3<f64>)> + '_ {
    let offset = match convention {
        DhConvention::Standard => 0,
        DhConvention::Modified => 1,
    };
    (0..ARM_DOF).map(move |k| {
        let f = &frames[k + offset];
        (f.rotation.column(2).into_owned(), f.translation)
    })
}

/// Geometric Jacobian of the point `target` (base coordinates) rigidly
/// attached to the last link.
pub fn geometric_jacobian(q: &JointVector, dh: &DhTable, target: &Vector3<f64>) -> ArmJacobian {
    let frames = frame_chain(q, dh);
    jacobian_from_frames(&frames, dh, target)
}

pub(crate) fn jacobian_from_frames(frames: &[Pose], dh: &DhTable, target: &Vector3<f64>) -> ArmJacobian {
    let mut j = ArmJacobian::zeros();
    for (k, (z, o)) in joint_axes(frames, dh.convention).enumerate() {
        let col = match dh.rows[k].kind {
            JointKind::Revolute => {
                let lin = z.cross(&(target - o));
                [lin.x, lin.y, lin.z, z.x, z.y, z.z]
            }
            JointKind::Prismatic => [z.x, z.y, z.z, 0.0, 0.0, 0.0],
        };
        for (r, v) in col.iter().enumerate() {
            j[(r, k)] = *v;
        }
    }
    j
}

/// Dynamic-width copy, used where Jacobians are stacked.
pub fn to_dynamic(j: &ArmJacobian) -> Matrix6xX<f64> {
    Matrix6xX::from_column_slice(j.as_slice())
}
