//! Remote-center-of-motion kinematics over the augmented state
//! `q_aug = (q_arm, ψ, λ)`, and assembly of the tip and constraint
//! Jacobians.

use nalgebra::{DMatrix, Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::continuum::{self, ContinuumConfig, ContinuumParams};
use crate::geometry::{skew, Pose};
use crate::manipulator::{self, ArmJacobian, DhTable, JointVector, ToolOffset, ARM_DOF};
use crate::{Error, Result};

/// Width of the augmented state: 7 arm joints, `θ`, `δ`, `λ`.
pub const AUG_DOF: usize = ARM_DOF + 3;
pub const THETA_INDEX: usize = ARM_DOF;
pub const DELTA_INDEX: usize = ARM_DOF + 1;
pub const LAMBDA_INDEX: usize = ARM_DOF + 2;

pub type AugVector = SVector<f64, AUG_DOF>;
pub type TipJacobian = SMatrix<f64, 6, AUG_DOF>;
pub type RcmJacobian = SMatrix<f64, 3, AUG_DOF>;

/// Everything needed to evaluate the kinematics of arm plus instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Kinematics {
    pub dh: DhTable,
    pub tool: ToolOffset,
    pub continuum: ContinuumParams,
}

impl Kinematics {
    pub fn validate(&self) -> Result<()> {
        self.dh.validate()?;
        self.continuum.validate()?;
        if !self.tool.0.is_finite() || self.tool.0.orthonormality_error() > 1e-9 {
            return Err(Error::Config("tool offset is not a valid pose".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for LambdaBounds {
    fn default() -> Self {
        Self {
            lower: 0.02,
            upper: 0.98,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentedState {
    pub q_arm: JointVector,
    pub psi: ContinuumConfig,
    pub lambda: f64,
}

impl AugmentedState {
    pub fn to_vector(&self) -> AugVector {
        let mut v = AugVector::zeros();
        v.fixed_rows_mut::<ARM_DOF>(0).copy_from(&self.q_arm);
        v[THETA_INDEX] = self.psi.theta;
        v[DELTA_INDEX] = self.psi.delta;
        v[LAMBDA_INDEX] = self.lambda;
        v
    }

    pub fn from_vector(v: &AugVector) -> Self {
        Self {
            q_arm: v.fixed_rows::<ARM_DOF>(0).into_owned(),
            psi: ContinuumConfig::new(v[THETA_INDEX], v[DELTA_INDEX]),
            lambda: v[LAMBDA_INDEX],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

/// Poses of the wrist {7}, base disk {ins} and tip, in the base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePoses {
    pub ee: Pose,
    pub ins: Pose,
    pub tip: Pose,
}

pub fn state_poses(s: &AugmentedState, kin: &Kinematics) -> StatePoses {
    let arm = manipulator::forward_kinematics(&s.q_arm, &kin.dh, &kin.tool);
    let tip = arm.ins.compose(&continuum::tip_pose(&s.psi, &kin.continuum));
    StatePoses {
        ee: arm.ee,
        ins: arm.ins,
        tip,
    }
}

pub fn rcm_point(s: &AugmentedState, kin: &Kinematics) -> Vector3<f64> {
    let arm = manipulator::forward_kinematics(&s.q_arm, &kin.dh, &kin.tool);
    interpolate(&arm.ee.translation, &arm.ins.translation, s.lambda)
}

fn interpolate(ee: &Vector3<f64>, ins: &Vector3<f64>, lambda: f64) -> Vector3<f64> {
    ee + lambda * (ins - ee)
}

/// Distance from `trocar` to the shaft line through {7} and {ins}.
pub fn shaft_distance(poses: &StatePoses, trocar: &Vector3<f64>) -> f64 {
    let axis = poses.ins.translation - poses.ee.translation;
    let rel = trocar - poses.ee.translation;
    let n = axis.norm();
    if n < 1e-12 {
        return rel.norm();
    }
    rel.cross(&axis).norm() / n
}

/// Jacobians of one augmented state.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBundle {
    pub j_ee: ArmJacobian,
    pub j_ins: ArmJacobian,
    pub j_x_psi: nalgebra::Matrix6x2<f64>,
    /// `J'_T = [J_L; J_A]`, zero `λ` column.
    pub j_tip: TipJacobian,
    /// `J'_rcm`, zero `ψ` columns.
    pub j_rcm: RcmJacobian,
    pub poses: StatePoses,
    pub lambda: f64,
}

impl JacobianBundle {
    pub fn j_linear(&self) -> SMatrix<f64, 3, AUG_DOF> {
        self.j_tip.fixed_rows::<3>(0).into_owned()
    }

    pub fn j_angular(&self) -> SMatrix<f64, 3, AUG_DOF> {
        self.j_tip.fixed_rows::<3>(3).into_owned()
    }

    /// `J_aug`: `J'_T` stacked over `J'_rcm` (9×10).
    pub fn j_aug(&self) -> SMatrix<f64, 9, AUG_DOF> {
        let mut j = SMatrix::<f64, 9, AUG_DOF>::zeros();
        j.fixed_rows_mut::<6>(0).copy_from(&self.j_tip);
        j.fixed_rows_mut::<3>(6).copy_from(&self.j_rcm);
        j
    }

    pub fn j_aug_dynamic(&self) -> DMatrix<f64> {
        let j = self.j_aug();
        DMatrix::from_column_slice(9, AUG_DOF, j.as_slice())
    }

    /// Zeroes the given augmented-state columns in every stacked Jacobian.
    pub fn lock_columns(&mut self, columns: &[usize]) {
        for &c in columns {
            self.j_tip.column_mut(c).fill(0.0);
            self.j_rcm.column_mut(c).fill(0.0);
        }
    }
}

fn rcm_from(j_ee: &ArmJacobian, j_ins: &ArmJacobian, poses: &StatePoses, lambda: f64) -> RcmJacobian {
    let mut j = RcmJacobian::zeros();
    let blend = j_ee + lambda * (j_ins - j_ee);
    j.fixed_view_mut::<3, ARM_DOF>(0, 0)
        .copy_from(&blend.fixed_rows::<3>(0));
    let d_ins = poses.ins.translation - poses.ee.translation;
    j.fixed_view_mut::<3, 1>(0, LAMBDA_INDEX).copy_from(&d_ins);
    j
}

fn tip_from(j_ins: &ArmJacobian, j_x_psi: &nalgebra::Matrix6x2<f64>, poses: &StatePoses) -> TipJacobian {
    let n = poses.ins.translation - poses.tip.translation;
    let mut transport = SMatrix::<f64, 6, 6>::identity();
    transport.fixed_view_mut::<3, 3>(0, 3).copy_from(&skew(&n));
    let j_aux = transport * j_ins;

    let r = poses.ins.rotation;
    let mut adj = SMatrix::<f64, 6, 6>::zeros();
    adj.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    adj.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    let cont = adj * j_x_psi;

    let mut j = TipJacobian::zeros();
    j.fixed_view_mut::<6, ARM_DOF>(0, 0).copy_from(&j_aux);
    j.fixed_view_mut::<6, 2>(0, THETA_INDEX).copy_from(&cont);
    j
}

/// `J'_rcm` (3×10).
pub fn rcm_jacobian(s: &AugmentedState, kin: &Kinematics) -> RcmJacobian {
    assemble(s, kin).j_rcm
}

/// `J'_T` (6×10) and the tip pose in the base frame.
pub fn tip_jacobian(s: &AugmentedState, kin: &Kinematics) -> (TipJacobian, Pose) {
    let b = assemble(s, kin);
    (b.j_tip, b.poses.tip)
}

pub fn assemble(s: &AugmentedState, kin: &Kinematics) -> JacobianBundle {
    let frames = manipulator::frame_chain(&s.q_arm, &kin.dh);
    let ee = frames[ARM_DOF];
    let ins = ee.compose(&kin.tool.0);
    let tip = ins.compose(&continuum::tip_pose(&s.psi, &kin.continuum));
    let poses = StatePoses { ee, ins, tip };

    let j_ee = manipulator::jacobian_from_frames(&frames, &kin.dh, &ee.translation);
    let j_ins = manipulator::jacobian_from_frames(&frames, &kin.dh, &ins.translation);
    let j_x_psi = continuum::instrument_jacobian(&s.psi, &kin.continuum);

    JacobianBundle {
        j_rcm: rcm_from(&j_ee, &j_ins, &poses, s.lambda),
        j_tip: tip_from(&j_ins, &j_x_psi, &poses),
        j_ee,
        j_ins,
        j_x_psi,
        poses,
        lambda: s.lambda,
    }
}

/// Rotation of the shaft, exposed for callers that build orientation targets.
pub fn shaft_rotation(s: &AugmentedState, kin: &Kinematics) -> Matrix3<f64> {
    manipulator::forward_kinematics(&s.q_arm, &kin.dh, &kin.tool)
        .ins
        .rotation
}
