//! Pseudoinverses and prioritized redundancy resolution.
//!
//! The hierarchical solver works on dynamic matrices so it can be used with
//! any number of columns; the case solvers wrap it with the task stacks of
//! the instrument (RCM, linear, angular) over the 10-wide augmented state.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::Twist;
use crate::linalg::Svd;
use crate::rcm::{AugVector, JacobianBundle, AUG_DOF, LAMBDA_INDEX};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Singular values below `svd_truncation · σ_ref` are discarded.
    pub svd_truncation: f64,
    /// Null-space gain on the `λ` objective (1/s).
    pub alpha: f64,
    /// Desired RCM interpolation value.
    pub lambda0: f64,
    /// Optional damping of the pseudoinverse. Zero keeps the projectors
    /// exact; the live service may raise it for robustness near singularities.
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            svd_truncation: 1e-8,
            alpha: 1.0,
            lambda0: 0.4,
            damping: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.svd_truncation > 0.0 && self.svd_truncation <= 1e-2) {
            return Err(Error::Config("svd_truncation must lie in (0, 1e-2]".into()));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config("alpha must be non-negative".into()));
        }
        if !(self.lambda0 > 0.0 && self.lambda0 < 1.0) {
            return Err(Error::Config("lambda0 must lie in (0, 1)".into()));
        }
        if !(self.damping >= 0.0) {
            return Err(Error::Config("damping must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PriorityCase {
    /// RCM and tip twist stacked into one augmented system.
    #[default]
    Case0,
    /// RCM, then linear twist, then angular twist.
    Case1,
    /// RCM, then angular twist, then linear twist.
    Case2,
}

impl PriorityCase {
    pub const ALL: [PriorityCase; 3] = [PriorityCase::Case0, PriorityCase::Case1, PriorityCase::Case2];

    pub fn index(self) -> u8 {
        match self {
            PriorityCase::Case0 => 0,
            PriorityCase::Case1 => 1,
            PriorityCase::Case2 => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            0 => Some(PriorityCase::Case0),
            1 => Some(PriorityCase::Case1),
            2 => Some(PriorityCase::Case2),
            _ => None,
        }
    }
}

/// Truncated-SVD Moore–Penrose pseudoinverse, cut relative to the largest
/// singular value of `j`.
pub fn pinv(j: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    pinv_with(j, tau, None, 0.0)
}

/// Pseudoinverse with an explicit reference scale for the cutoff
/// (`σ < tau · reference` is discarded) and optional damping.
///
/// A projected task `J·P` can be numerically all-noise once its directions
/// are exhausted; measuring the cutoff against the unprojected task keeps
/// that noise from being inverted.
pub fn pinv_with(j: &DMatrix<f64>, tau: f64, reference: Option<f64>, damping: f64) -> DMatrix<f64> {
    let (rows, cols) = j.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = Svd::new(j);
    let sigma_max = svd.max();
    let cutoff = tau * reference.unwrap_or(sigma_max).max(sigma_max);
    let mut out = DMatrix::zeros(cols, rows);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let inv = if damping > 0.0 {
            s / (s * s + damping * damping)
        } else {
            1.0 / s
        };
        out += inv * svd.v.column(i) * svd.u.column(i).transpose();
    }
    out
}

/// Largest singular value (spectral norm).
pub fn spectral_norm(j: &DMatrix<f64>) -> f64 {
    if j.is_empty() {
        return 0.0;
    }
    Svd::new(j).max()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub jacobian: DMatrix<f64>,
    pub rate: DVector<f64>,
}

impl Task {
    pub fn new(jacobian: DMatrix<f64>, rate: DVector<f64>) -> Self {
        Self { jacobian, rate }
    }
}

/// Ordered tasks (highest priority first) and the bias `η` applied in the
/// null space of all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskStack {
    pub tasks: Vec<Task>,
    pub bias: DVector<f64>,
}

impl TaskStack {
    pub const MAX_LEVELS: usize = 4;

    pub fn new(tasks: Vec<Task>, bias: DVector<f64>) -> Result<Self> {
        if tasks.is_empty() || tasks.len() > Self::MAX_LEVELS {
            return Err(Error::Config(format!(
                "task stack must hold 1..={} tasks",
                Self::MAX_LEVELS
            )));
        }
        let n = bias.len();
        for t in &tasks {
            if t.jacobian.ncols() != n || t.jacobian.nrows() != t.rate.len() {
                return Err(Error::Config("task dimensions do not match the stack".into()));
            }
        }
        Ok(Self { tasks, bias })
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }
}

/// Full output of the recursion, including the projector after each level.
#[derive(Debug, Clone)]
pub struct HierarchySolution {
    pub qdot: DVector<f64>,
    /// `P_1 .. P_K`.
    pub projectors: Vec<DMatrix<f64>>,
}

pub fn solve_hierarchy_detailed(stack: &TaskStack, tau: f64, damping: f64) -> HierarchySolution {
    let n = stack.dim();
    let mut qdot = DVector::zeros(n);
    let mut p = DMatrix::identity(n, n);
    let mut projectors = Vec::with_capacity(stack.tasks.len());
    for task in &stack.tasks {
        let jp = &task.jacobian * &p;
        let reference = spectral_norm(&task.jacobian);
        let jp_pinv = pinv_with(&jp, tau, Some(reference), damping);
        qdot += &jp_pinv * (&task.rate - &task.jacobian * &qdot);
        p -= &jp_pinv * &jp;
        projectors.push(p.clone());
    }
    qdot += &p * &stack.bias;
    HierarchySolution { qdot, projectors }
}

/// `q̇_k = q̇_{k−1} + (J_k P_{k−1})†(ẋ_k − J_k q̇_{k−1})`,
/// `P_k = P_{k−1} − (J_k P_{k−1})†(J_k P_{k−1})`, then `q̇_K + P_K η`.
pub fn solve_hierarchy(stack: &TaskStack, tau: f64) -> DVector<f64> {
    solve_hierarchy_detailed(stack, tau, 0.0).qdot
}

/// Gradient-descent bias on `g = ½(λ − λ0)²`, acting on the `λ` entry only.
pub fn nullspace_objective(lambda: f64, cfg: &SolverConfig) -> AugVector {
    let mut eta = AugVector::zeros();
    eta[LAMBDA_INDEX] = -cfg.alpha * (lambda - cfg.lambda0);
    eta
}

fn dyn_rows<const R: usize>(m: &nalgebra::SMatrix<f64, R, AUG_DOF>) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, AUG_DOF, m.as_slice())
}

fn dyn_vec(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn to_aug(v: &DVector<f64>) -> AugVector {
    AugVector::from_column_slice(v.as_slice())
}

/// `q̇ = J_aug† Φ̇ + (I − J_aug† J_aug) η` with `Φ̇ = [ξ_tip; ξ_rcm]`.
pub fn solve_case0(
    bundle: &JacobianBundle,
    tip_twist: &Twist,
    xi_rcm: &Vector3<f64>,
    eta: &AugVector,
    cfg: &SolverConfig,
) -> AugVector {
    let j = bundle.j_aug_dynamic();
    let t = tip_twist.to_vector();
    let phi = DVector::from_iterator(9, t.iter().chain(xi_rcm.iter()).copied());
    let jp = pinv_with(&j, cfg.svd_truncation, None, cfg.damping);
    let n = DMatrix::<f64>::identity(AUG_DOF, AUG_DOF) - &jp * &j;
    let eta = DVector::from_column_slice(eta.as_slice());
    to_aug(&(&jp * phi + n * eta))
}

/// The three-level stack for `case` (not used by case 0).
pub fn case_stack(
    case: PriorityCase,
    bundle: &JacobianBundle,
    v_des: &Vector3<f64>,
    w_des: &Vector3<f64>,
    xi_rcm: &Vector3<f64>,
    eta: &AugVector,
) -> TaskStack {
    let rcm = Task::new(dyn_rows(&bundle.j_rcm), dyn_vec(xi_rcm));
    let lin = Task::new(dyn_rows(&bundle.j_linear()), dyn_vec(v_des));
    let ang = Task::new(dyn_rows(&bundle.j_angular()), dyn_vec(w_des));
    let tasks = match case {
        PriorityCase::Case2 => vec![rcm, ang, lin],
        PriorityCase::Case0 | PriorityCase::Case1 => vec![rcm, lin, ang],
    };
    TaskStack {
        tasks,
        bias: DVector::from_column_slice(eta.as_slice()),
    }
}

pub fn solve_case1(
    bundle: &JacobianBundle,
    v_des: &Vector3<f64>,
    w_des: &Vector3<f64>,
    xi_rcm: &Vector3<f64>,
    cfg: &SolverConfig,
) -> AugVector {
    solve_prioritized(PriorityCase::Case1, bundle, v_des, w_des, xi_rcm, cfg)
}

pub fn solve_case2(
    bundle: &JacobianBundle,
    v_des: &Vector3<f64>,
    w_des: &Vector3<f64>,
    xi_rcm: &Vector3<f64>,
    cfg: &SolverConfig,
) -> AugVector {
    solve_prioritized(PriorityCase::Case2, bundle, v_des, w_des, xi_rcm, cfg)
}

fn solve_prioritized(
    case: PriorityCase,
    bundle: &JacobianBundle,
    v_des: &Vector3<f64>,
    w_des: &Vector3<f64>,
    xi_rcm: &Vector3<f64>,
    cfg: &SolverConfig,
) -> AugVector {
    let eta = nullspace_objective(bundle.lambda, cfg);
    let stack = case_stack(case, bundle, v_des, w_des, xi_rcm, &eta);
    to_aug(&solve_hierarchy_detailed(&stack, cfg.svd_truncation, cfg.damping).qdot)
}

/// Dispatches on `case`; `η` comes from [`nullspace_objective`].
pub fn solve_case(
    case: PriorityCase,
    bundle: &JacobianBundle,
    twist: &Twist,
    xi_rcm: &Vector3<f64>,
    cfg: &SolverConfig,
) -> AugVector {
    match case {
        PriorityCase::Case0 => {
            let eta = nullspace_objective(bundle.lambda, cfg);
            solve_case0(bundle, twist, xi_rcm, &eta, cfg)
        }
        _ => solve_prioritized(case, bundle, &twist.linear, &twist.angular, xi_rcm, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    /// Orthonormal basis of the null space of `a`, columns of `V` whose
    /// singular values vanish.
    fn null_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.ncols();
        // Pad to square so the SVD returns the full V.
        let mut padded = DMatrix::zeros(a.nrows().max(n), n);
        padded.view_mut((0, 0), a.shape()).copy_from(a);
        let svd = padded.svd(false, true);
        let vt = svd.v_t.unwrap();
        let smax = svd.singular_values.max().max(1e-300);
        let cols: Vec<_> = (0..n)
            .filter(|&i| svd.singular_values[i] <= 1e-10 * smax.max(1.0))
            .map(|i| vt.row(i).transpose())
            .collect();
        if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    }

    /// Sequential least squares over explicit null-space bases; returns the
    /// residual norm of each level.
    fn lexicographic_oracle(stack: &TaskStack) -> Vec<f64> {
        let n = stack.dim();
        let mut x = DVector::zeros(n);
        let mut basis = DMatrix::identity(n, n);
        let mut residuals = Vec::new();
        for t in &stack.tasks {
            if basis.ncols() > 0 {
                let a = &t.jacobian * &basis;
                let b = &t.rate - &t.jacobian * &x;
                let z = a.clone().svd(true, true).solve(&b, 1e-12).unwrap();
                x += &basis * z;
                let nb = null_basis(&a);
                basis = &basis * nb;
            }
            residuals.push((&t.jacobian * &x - &t.rate).norm());
        }
        residuals
    }

    #[test]
    fn pinv_of_identity_and_zero() {
        let i = DMatrix::<f64>::identity(4, 4);
        assert_relative_eq!(pinv(&i, 1e-8), i, epsilon = 1e-15);
        let z = DMatrix::<f64>::zeros(3, 5);
        assert_eq!(pinv(&z, 1e-8), DMatrix::<f64>::zeros(5, 3));
    }

    #[test]
    fn wide_full_rank_right_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let j = random_matrix(&mut rng, 3, 10);
            let jp = pinv(&j, 1e-8);
            assert_relative_eq!(&j * &jp, DMatrix::identity(3, 3), epsilon = 1e-9);
        }
    }

    #[test]
    fn single_identity_task() {
        let stack = TaskStack::new(
            vec![Task::new(
                DMatrix::identity(3, 3),
                DVector::from_vec(vec![1.0, -2.0, 0.5]),
            )],
            DVector::zeros(3),
        )
        .unwrap();
        assert_relative_eq!(solve_hierarchy(&stack, 1e-8), DVector::from_vec(vec![1.0, -2.0, 0.5]));
    }

    #[test]
    fn exhausted_direction_cannot_be_disturbed() {
        let stack = TaskStack::new(
            vec![
                Task::new(dmatrix![1.0, 0.0], DVector::from_vec(vec![1.0])),
                Task::new(dmatrix![1.0, 0.0], DVector::from_vec(vec![5.0])),
            ],
            DVector::zeros(2),
        )
        .unwrap();
        assert_relative_eq!(
            solve_hierarchy(&stack, 1e-8),
            DVector::from_vec(vec![1.0, 0.0]),
            epsilon = 1e-15
        );
    }

    #[test]
    fn stack_validation() {
        assert!(TaskStack::new(vec![], DVector::zeros(2)).is_err());
        let bad = Task::new(DMatrix::zeros(1, 3), DVector::zeros(1));
        assert!(TaskStack::new(vec![bad], DVector::zeros(2)).is_err());
    }

    #[test]
    fn objective_examples() {
        let cfg = SolverConfig::default();
        assert_eq!(nullspace_objective(0.4, &cfg), AugVector::zeros());
        let eta = nullspace_objective(0.5, &cfg);
        assert_relative_eq!(eta[LAMBDA_INDEX], -0.1, epsilon = 1e-15);
        assert_eq!(eta.rows(0, LAMBDA_INDEX).amax(), 0.0);
    }

    #[test]
    fn hierarchy_matches_lexicographic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let n = rng.gen_range(3..8);
            let levels = 3;
            let tasks = (0..levels)
                .map(|_| {
                    let m = rng.gen_range(1..4);
                    // Occasionally rank-deficient tasks.
                    let mut j = random_matrix(&mut rng, m, n);
                    if m > 1 && trial % 4 == 0 {
                        let r0 = j.row(0).clone_owned();
                        j.set_row(m - 1, &(2.0 * r0));
                    }
                    Task::new(j, random_vector(&mut rng, m))
                })
                .collect();
            let stack = TaskStack::new(tasks, DVector::zeros(n)).unwrap();
            let q = solve_hierarchy(&stack, 1e-10);
            let oracle = lexicographic_oracle(&stack);
            for (t, r) in stack.tasks.iter().zip(oracle) {
                let got = (&t.jacobian * &q - &t.rate).norm();
                assert!((got - r).abs() < 1e-8, "trial {trial}: {got} vs {r}");
            }
        }
    }

    fn random_bundle(rng: &mut ChaCha8Rng) -> JacobianBundle {
        use crate::continuum::ContinuumConfig;
        use crate::rcm::{assemble, AugmentedState, Kinematics};
        let q = crate::manipulator::JointVector::from_fn(|_, _| rng.gen_range(-2.5..2.5));
        let s = AugmentedState {
            q_arm: q,
            psi: ContinuumConfig::new(rng.gen_range(0.2..1.5), rng.gen_range(-3.0..3.0)),
            lambda: rng.gen_range(0.05..0.95),
        };
        assemble(&s, &Kinematics::default())
    }

    fn v3(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
        Vector3::from_fn(|_, _| rng.gen_range(-scale..scale))
    }

    /// Three-level closed form written out with explicit projectors.
    fn closed_form(
        j1: &DMatrix<f64>,
        x1: &DVector<f64>,
        j2: &DMatrix<f64>,
        x2: &DVector<f64>,
        j3: &DMatrix<f64>,
        x3: &DVector<f64>,
        eta: &DVector<f64>,
    ) -> DVector<f64> {
        let tau = 1e-8;
        let id = DMatrix::<f64>::identity(AUG_DOF, AUG_DOF);
        let j1p = pinv(j1, tau);
        let n1 = &id - &j1p * j1;
        let b = j2 * &n1;
        let bp = pinv(&b, tau);
        let d = &n1 - &bp * &b;
        let c = j3 * &d;
        let cp = pinv(&c, tau);
        let n3 = &d - &cp * &c;
        let q1 = &j1p * x1;
        let q2 = &q1 + &bp * (x2 - j2 * &q1);
        let q3 = &q2 + &cp * (x3 - j3 * &q2);
        q3 + n3 * eta
    }

    #[test]
    fn case0_zero_inputs_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_bundle(&mut rng);
        let q = solve_case0(
            &b,
            &Twist::zero(),
            &Vector3::zeros(),
            &AugVector::zeros(),
            &SolverConfig::default(),
        );
        assert_eq!(q, AugVector::zeros());
    }

    #[test]
    fn case0_reaches_achievable_rates_and_ignores_bias_in_task_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = SolverConfig::default();
        for _ in 0..100 {
            let b = random_bundle(&mut rng);
            let w = AugVector::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let phi = b.j_aug() * w;
            let tw = Twist::new(phi.fixed_rows::<3>(0).into(), phi.fixed_rows::<3>(3).into());
            let xi: Vector3<f64> = phi.fixed_rows::<3>(6).into();
            let q0 = solve_case0(&b, &tw, &xi, &AugVector::zeros(), &cfg);
            assert!((b.j_aug() * q0 - phi).amax() < 1e-8);
            let eta = AugVector::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let q1 = solve_case0(&b, &tw, &xi, &eta, &cfg);
            assert!((b.j_aug() * (q1 - q0)).amax() < 1e-9);
        }
    }

    #[test]
    fn cases_match_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = SolverConfig::default();
        for _ in 0..100 {
            let b = random_bundle(&mut rng);
            let (v, w, xi) = (v3(&mut rng, 0.02), v3(&mut rng, 0.5), v3(&mut rng, 0.001));
            let eta = DVector::from_column_slice(nullspace_objective(b.lambda, &cfg).as_slice());
            let jr = dyn_rows(&b.j_rcm);
            let jl = dyn_rows(&b.j_linear());
            let ja = dyn_rows(&b.j_angular());
            let c1 = closed_form(&jr, &dyn_vec(&xi), &jl, &dyn_vec(&v), &ja, &dyn_vec(&w), &eta);
            let c2 = closed_form(&jr, &dyn_vec(&xi), &ja, &dyn_vec(&w), &jl, &dyn_vec(&v), &eta);
            let q1 = solve_case1(&b, &v, &w, &xi, &cfg);
            let q2 = solve_case2(&b, &v, &w, &xi, &cfg);
            assert!((DVector::from_column_slice(q1.as_slice()) - c1).amax() < 1e-9);
            assert!((DVector::from_column_slice(q2.as_slice()) - c2).amax() < 1e-9);
        }
    }

    #[test]
    fn zero_commands_leave_only_the_regulation_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = SolverConfig::default();
        let z = Vector3::zeros();
        for case in [PriorityCase::Case1, PriorityCase::Case2] {
            let b = random_bundle(&mut rng);
            let eta = nullspace_objective(b.lambda, &cfg);
            let stack = case_stack(case, &b, &z, &z, &z, &eta);
            let p3 = solve_hierarchy_detailed(&stack, cfg.svd_truncation, 0.0).projectors[2].clone();
            let expected = p3 * DVector::from_column_slice(eta.as_slice());
            let q = solve_case(case, &b, &Twist::zero(), &z, &cfg);
            assert!((DVector::from_column_slice(q.as_slice()) - expected).amax() < 1e-12);
        }
    }

    #[test]
    fn lowest_level_cannot_disturb_higher_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = SolverConfig::default();
        for _ in 0..50 {
            let mut b = random_bundle(&mut rng);
            // Two frozen bending columns leave fewer unknowns than task rows.
            b.lock_columns(&[crate::rcm::THETA_INDEX, crate::rcm::DELTA_INDEX]);
            let (v, w, xi) = (v3(&mut rng, 0.02), v3(&mut rng, 0.5), v3(&mut rng, 0.001));
            let w2 = v3(&mut rng, 0.5);
            let v2 = v3(&mut rng, 0.02);
            let a = solve_case1(&b, &v, &w, &xi, &cfg);
            let c = solve_case1(&b, &v, &w2, &xi, &cfg);
            assert!((b.j_rcm * (a - c)).amax() < 1e-9);
            assert!((b.j_linear() * (a - c)).amax() < 1e-9);
            let a = solve_case2(&b, &v, &w, &xi, &cfg);
            let c = solve_case2(&b, &v2, &w, &xi, &cfg);
            assert!((b.j_rcm * (a - c)).amax() < 1e-9);
            assert!((b.j_angular() * (a - c)).amax() < 1e-9);
        }
    }

    fn matrix_with_condition(rng: &mut ChaCha8Rng, r: usize, c: usize, cond: f64) -> DMatrix<f64> {
        let a = random_matrix(rng, r, r).qr().q();
        let b = random_matrix(rng, c, c).qr().q();
        let k = r.min(c);
        let mut s = DMatrix::zeros(r, c);
        for i in 0..k {
            s[(i, i)] = cond.powf(-(i as f64) / (k.max(2) - 1) as f64);
        }
        a * s * b.transpose()
    }

    proptest! {
        #[test]
        fn moore_penrose_identities(seed in any::<u64>(), r in 1usize..7, c in 1usize..11, log_cond in 0.0f64..6.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let j = matrix_with_condition(&mut rng, r, c, 10f64.powf(log_cond) * 0.99);
            let x = pinv(&j, 1e-12);
            prop_assert!((&j * &x * &j - &j).amax() < 1e-9);
            prop_assert!((&x * &j * &x - &x).amax() < 1e-9 * x.amax().max(1.0));
            let jx = &j * &x;
            let xj = &x * &j;
            prop_assert!((&jx - jx.transpose()).amax() < 1e-9);
            prop_assert!((&xj - xj.transpose()).amax() < 1e-9);
        }

        #[test]
        fn projectors_idempotent_symmetric_and_annihilating(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 10;
            let tasks: Vec<_> = (0..3).map(|_| {
                let m = rng.gen_range(1..4);
                Task::new(random_matrix(&mut rng, m, n), random_vector(&mut rng, m))
            }).collect();
            let stack = TaskStack::new(tasks, random_vector(&mut rng, n)).unwrap();
            let sol = solve_hierarchy_detailed(&stack, 1e-8, 0.0);
            for (k, p) in sol.projectors.iter().enumerate() {
                prop_assert!((p * p - p).norm() < 1e-9);
                prop_assert!((p - p.transpose()).norm() < 1e-9);
                for t in &stack.tasks[..=k] {
                    prop_assert!((&t.jacobian * p).norm() < 1e-8);
                }
            }
        }

        #[test]
        fn appending_a_task_keeps_higher_residuals(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 6;
            let mut tasks: Vec<_> = (0..2).map(|_| {
                let m = rng.gen_range(1..4);
                Task::new(random_matrix(&mut rng, m, n), random_vector(&mut rng, m))
            }).collect();
            let before = solve_hierarchy(&TaskStack::new(tasks.clone(), DVector::zeros(n)).unwrap(), 1e-8);
            tasks.push(Task::new(random_matrix(&mut rng, 3, n), random_vector(&mut rng, 3)));
            let after = solve_hierarchy(&TaskStack::new(tasks.clone(), DVector::zeros(n)).unwrap(), 1e-8);
            for t in &tasks[..2] {
                let rb = (&t.jacobian * &before - &t.rate).norm();
                let ra = (&t.jacobian * &after - &t.rate).norm();
                prop_assert!((rb - ra).abs() < 1e-9);
            }
        }
    }
}
