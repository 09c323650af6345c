//! Finite-difference verification of every analytic Jacobian.

use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::continuum::{self, ContinuumConfig, THETA_STRAIGHT};
use crate::geometry::rotation_error;
use crate::manipulator::{self, JointVector};
use crate::rcm::{self, AugVector, AugmentedState, Kinematics, AUG_DOF};

const STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianCheck {
    pub name: String,
    pub max_relative_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    pub samples: usize,
    pub checks: Vec<JacobianCheck>,
}

impl JacobianReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&JacobianCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// `‖A − B‖_F / max(‖B‖_F, 1e-3)`. The floor keeps vanishing blocks (for
/// example near-zero columns) from turning rounding noise into large ratios.
fn relative(analytic: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    (analytic - reference).norm() / reference.norm().max(1e-3)
}

fn central<F>(x: &[f64], rows: usize, f: F) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut j = DMatrix::zeros(rows, x.len());
    let mut xp = x.to_vec();
    for c in 0..x.len() {
        xp[c] = x[c] + STEP;
        let a = f(&xp);
        xp[c] = x[c] - STEP;
        let b = f(&xp);
        xp[c] = x[c];
        for r in 0..rows {
            j[(r, c)] = (a[r] - b[r]) / (2.0 * STEP);
        }
    }
    j
}

/// Angular velocity columns of a rotation-valued map.
fn central_rotation<F>(x: &[f64], f: F) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Matrix3<f64>,
{
    let mut j = DMatrix::zeros(3, x.len());
    let mut xp = x.to_vec();
    for c in 0..x.len() {
        xp[c] = x[c] + STEP;
        let a = f(&xp);
        xp[c] = x[c] - STEP;
        let b = f(&xp);
        xp[c] = x[c];
        let w = rotation_error(&a, &b) / (2.0 * STEP);
        j.set_column(c, &w);
    }
    j
}

fn to_dyn<const R: usize, const C: usize>(m: &nalgebra::SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

fn pose_jacobian<F>(x: &[f64], f: F) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> crate::geometry::Pose,
{
    let lin = central(x, 3, |y| f(y).translation.as_slice().to_vec());
    let ang = central_rotation(x, |y| f(y).rotation);
    let mut j = DMatrix::zeros(6, x.len());
    j.rows_mut(0, 3).copy_from(&lin);
    j.rows_mut(3, 3).copy_from(&ang);
    j
}

fn random_state(rng: &mut ChaCha8Rng, kin: &Kinematics) -> AugmentedState {
    let lo = kin.continuum.theta_min;
    AugmentedState {
        q_arm: JointVector::from_fn(|_, _| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)),
        psi: ContinuumConfig::new(
            rng.gen_range(lo + 2.0 * STEP..THETA_STRAIGHT - 1e-3),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        ),
        lambda: rng.gen_range(0.0..1.0),
    }
}

/// Checks analytic Jacobians built from `analytic` against finite
/// differences of the forward maps of `reference`.
///
/// Passing the same kinematics twice is the normal use; different ones
/// inject a model fault into the analytic side.
pub fn check_jacobians_against(
    analytic: &Kinematics,
    reference: &Kinematics,
    samples: usize,
    seed: u64,
) -> JacobianReport {
    let names = ["J_lpsi", "J_ppsi", "J_wpsi", "J_ee", "J_ins", "J_rcm", "J_T", "J_aug"];
    let mut worst = [0.0f64; 8];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let s = random_state(&mut rng, reference);
        let psi = [s.psi.theta, s.psi.delta];
        let cp = &reference.continuum;
        let cfg = |y: &[f64]| ContinuumConfig::new(y[0], y[1]);

        // Continuum segment.
        let jl = central(&psi, 4, |y| {
            continuum::tendon_lengths(&cfg(y), cp).0.as_slice().to_vec()
        });
        worst[0] = worst[0].max(relative(
            &to_dyn(&continuum::actuation_jacobian(&s.psi, &analytic.continuum)),
            &jl,
        ));
        let jx = to_dyn(&continuum::instrument_jacobian(&s.psi, &analytic.continuum));
        let jp = central(&psi, 3, |y| continuum::tip_position(&cfg(y), cp).as_slice().to_vec());
        let jw = central_rotation(&psi, |y| continuum::tip_pose(&cfg(y), cp).rotation);
        worst[1] = worst[1].max(relative(&jx.rows(0, 3).into_owned(), &jp));
        worst[2] = worst[2].max(relative(&jx.rows(3, 3).into_owned(), &jw));

        // Arm.
        let q: Vec<f64> = s.q_arm.iter().copied().collect();
        let qv = |y: &[f64]| JointVector::from_column_slice(y);
        let fk = |y: &[f64]| manipulator::forward_kinematics(&qv(y), &reference.dh, &reference.tool);
        let a_arm = manipulator::forward_kinematics(&s.q_arm, &analytic.dh, &analytic.tool);
        let j_ee = manipulator::geometric_jacobian(&s.q_arm, &analytic.dh, &a_arm.ee.translation);
        let j_ins = manipulator::geometric_jacobian(&s.q_arm, &analytic.dh, &a_arm.ins.translation);
        worst[3] = worst[3].max(relative(&to_dyn(&j_ee), &pose_jacobian(&q, |y| fk(y).ee)));
        worst[4] = worst[4].max(relative(&to_dyn(&j_ins), &pose_jacobian(&q, |y| fk(y).ins)));

        // Augmented state.
        let x: Vec<f64> = s.to_vector().iter().copied().collect();
        let sv = |y: &[f64]| AugmentedState::from_vector(&AugVector::from_column_slice(y));
        let bundle = rcm::assemble(&s, analytic);
        let jr = central(&x, 3, |y| rcm::rcm_point(&sv(y), reference).as_slice().to_vec());
        let jt = pose_jacobian(&x, |y| rcm::state_poses(&sv(y), reference).tip);
        worst[5] = worst[5].max(relative(&to_dyn(&bundle.j_rcm), &jr));
        worst[6] = worst[6].max(relative(&to_dyn(&bundle.j_tip), &jt));
        let mut ja = DMatrix::zeros(9, AUG_DOF);
        ja.rows_mut(0, 6).copy_from(&jt);
        ja.rows_mut(6, 3).copy_from(&jr);
        worst[7] = worst[7].max(relative(&bundle.j_aug_dynamic(), &ja));
    }
    let checks = names
        .iter()
        .zip(worst)
        .map(|(n, w)| JacobianCheck {
            name: n.to_string(),
            max_relative_error: w,
            pass: w < TOLERANCE,
        })
        .collect();
    JacobianReport { samples, checks }
}

pub fn check_jacobians(kin: &Kinematics, samples: usize, seed: u64) -> JacobianReport {
    check_jacobians_against(kin, kin, samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_kinematics_pass() {
        let r = check_jacobians(&Kinematics::default(), 50, 1);
        assert!(r.pass(), "{r:?}");
    }

    #[test]
    fn corrupted_dh_fails_the_arm_checks() {
        let good = Kinematics::default();
        let mut bad = good.clone();
        bad.dh.rows[2].d += 0.01;
        let r = check_jacobians_against(&bad, &good, 20, 2);
        assert!(!r.get("J_ee").unwrap().pass);
        assert!(r.get("J_lpsi").unwrap().pass);
    }
}
