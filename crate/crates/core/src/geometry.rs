//! Rigid-body primitives: poses, twists, the skew operator and the
//! rotation-error vector used by the rate controller.

use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

/// Below this angle (and within this distance of pi) the rotation-error
/// vector switches to its limit forms.
pub const SMALL_ANGLE: f64 = 1e-6;

/// Rigid transform stored as a rotation matrix and a translation (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::new(Matrix3::identity(), translation)
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    /// `self * other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose::new(rt, -(rt * self.translation))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Pose {
        Pose::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    /// Unit quaternion of the rotation part, `[x, y, z, w]`.
    pub fn quaternion_xyzw(&self) -> [f64; 4] {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation));
        [q.i, q.j, q.k, q.w]
    }

    /// Builds a pose from a position and an `[x, y, z, w]` quaternion. The
    /// quaternion is normalized; `None` if it has zero length.
    pub fn from_position_quaternion(p: [f64; 3], q: [f64; 4]) -> Option<Pose> {
        let raw = nalgebra::Quaternion::new(q[3], q[0], q[1], q[2]);
        let norm = raw.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return None;
        }
        let uq = UnitQuaternion::from_quaternion(raw);
        Some(Pose::new(
            uq.to_rotation_matrix().into_inner(),
            Vector3::new(p[0], p[1], p[2]),
        ))
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.iter().all(|x| x.is_finite()) && self.translation.iter().all(|x| x.is_finite())
    }

    /// Largest deviation from `RᵀR = I` and `det R = 1`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        gram.amax().max((self.rotation.determinant() - 1.0).abs())
    }
}

/// Spatial velocity, linear part stacked over angular part, in base-frame
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl Twist {
    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.linear.x,
            self.linear.y,
            self.linear.z,
            self.angular.x,
            self.angular.y,
            self.angular.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5]))
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.angular.iter()).all(|x| x.is_finite())
    }
}

/// `[v]×`, so that `skew(v) * w == v.cross(w)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] applied to the antisymmetric part of `m`, without the
/// factor one half: `[m32 - m23, m13 - m31, m21 - m12]`.
fn vee_difference(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation by `angle` about `axis` (normalized internally).
pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).into_inner()
}

/// Orientation error `e_o` between a desired and a current rotation.
///
/// `R_e = R_d R_cᵀ`; the result is the axis of `R_e` scaled by its angle
/// `Θ ∈ [0, π]`. The angle is recovered with `atan2` of the antisymmetric
/// and trace parts, which equals `arccos((tr R_e − 1)/2)` but keeps full
/// precision near zero.
pub fn rotation_error(desired: &Matrix3<f64>, current: &Matrix3<f64>) -> Vector3<f64> {
    let re = desired * current.transpose();
    let d = vee_difference(&re);
    let cos_t = ((re.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin_t = (0.5 * d.norm()).min(1.0);
    let theta = sin_t.atan2(cos_t);

    if theta < SMALL_ANGLE {
        return 0.5 * d;
    }
    if std::f64::consts::PI - theta < SMALL_ANGLE {
        // R_e + I = 2 u uᵀ near a half turn; pick its best-conditioned column.
        let sym = re + Matrix3::identity();
        let (col, _) = (0..3)
            .map(|j| (j, sym.column(j).norm()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let mut axis = sym.column(col).normalize();
        if axis.dot(&d) < 0.0 {
            axis = -axis;
        }
        return theta * axis;
    }
    (theta / (2.0 * theta.sin())) * d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cross_oracle(v: &Vector3<f64>, w: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            v[1] * w[2] - v[2] * w[1],
            v[2] * w[0] - v[0] * w[2],
            v[0] * w[1] - v[1] * w[0],
        )
    }

    /// Angle and axis through the quaternion logarithm, independent of the
    /// matrix route used by `rotation_error`.
    fn quaternion_log(r: &Matrix3<f64>) -> Vector3<f64> {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
        let q = if q.w < 0.0 {
            UnitQuaternion::new_unchecked(-q.into_inner())
        } else {
            q
        };
        let vec = q.imag();
        let n = vec.norm();
        if n < 1e-15 {
            return Vector3::zeros();
        }
        let angle = 2.0 * n.atan2(q.w);
        vec / n * angle
    }

    #[test]
    fn skew_of_zero_is_zero() {
        assert_eq!(skew(&Vector3::zeros()), Matrix3::zeros());
    }

    #[test]
    fn skew_unit_axes() {
        let w = skew(&Vector3::z()) * Vector3::x();
        assert_eq!(w, Vector3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn compose_identity() {
        let i = Pose::identity();
        assert_eq!(i.compose(&i), i);
    }

    #[test]
    fn translations_add() {
        let a = Pose::from_translation(Vector3::new(1.0, 2.0, 3.0));
        let b = Pose::from_translation(Vector3::new(-0.5, 0.25, 4.0));
        assert_eq!(a.compose(&b).translation, Vector3::new(0.5, 2.25, 7.0));
    }

    #[test]
    fn equal_rotations_have_zero_error() {
        let r = axis_angle(&Vector3::new(0.3, -1.0, 0.2), 1.1);
        assert_relative_eq!(rotation_error(&r, &r).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn quarter_turn_about_z() {
        let e = rotation_error(&rot_z(PI / 2.0), &Matrix3::identity());
        assert_relative_eq!(e, Vector3::new(0.0, 0.0, PI / 2.0), epsilon = 1e-12);
    }

    #[test]
    fn half_turn_branch() {
        let axis = Vector3::new(1.0, 2.0, -0.5).normalize();
        for angle in [PI, PI - 1e-7, PI - 2e-6] {
            let e = rotation_error(&axis_angle(&axis, angle), &Matrix3::identity());
            assert_relative_eq!(e.norm(), angle, epsilon = 1e-8);
            assert_relative_eq!(e.normalize().dot(&axis).abs(), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn tiny_angle_branch_is_first_order() {
        let axis = Vector3::new(-0.2, 0.9, 0.4).normalize();
        let e = rotation_error(&axis_angle(&axis, 3e-7), &Matrix3::identity());
        assert_relative_eq!(e, axis * 3e-7, max_relative = 1e-9);
    }

    #[test]
    fn quaternion_round_trip() {
        let p = Pose::new(
            axis_angle(&Vector3::new(0.1, 0.7, -0.3), 2.0),
            Vector3::new(0.1, -0.2, 0.3),
        );
        let q = p.quaternion_xyzw();
        let back = Pose::from_position_quaternion([0.1, -0.2, 0.3], q).unwrap();
        assert_relative_eq!(back.rotation, p.rotation, epsilon = 1e-12);
        assert!(Pose::from_position_quaternion([0.0; 3], [0.0; 4]).is_none());
    }

    fn vec3() -> impl Strategy<Value = Vector3<f64>> {
        prop::array::uniform3(-2.0f64..2.0).prop_map(|a| Vector3::new(a[0], a[1], a[2]))
    }

    fn unit_axis() -> impl Strategy<Value = Vector3<f64>> {
        vec3()
            .prop_filter("non-degenerate", |v| v.norm() > 1e-3)
            .prop_map(|v| v.normalize())
    }

    fn pose() -> impl Strategy<Value = Pose> {
        (unit_axis(), -PI..PI, vec3()).prop_map(|(u, a, t)| Pose::new(axis_angle(&u, a), t))
    }

    proptest! {
        #[test]
        fn skew_matches_cross_product(v in vec3(), w in vec3(), alpha in -3.0f64..3.0) {
            let s = skew(&v);
            prop_assert!((s + s.transpose()).amax() == 0.0);
            prop_assert!((s * w - cross_oracle(&v, &w)).amax() < 1e-14);
            prop_assert!((skew(&(alpha * v)) * w - alpha * (s * w)).amax() < 1e-13);
        }

        #[test]
        fn compose_with_inverse_is_identity(a in pose()) {
            let i = a.compose(&a.inverse());
            prop_assert!((i.rotation - Matrix3::identity()).amax() < 1e-9);
            prop_assert!(i.translation.amax() < 1e-9);
            let j = a.inverse().compose(&a);
            prop_assert!((j.rotation - Matrix3::identity()).amax() < 1e-9);
        }

        #[test]
        fn exp_log_consistency(u in unit_axis(), a in 1e-3f64..(PI - 0.1)) {
            let e = rotation_error(&axis_angle(&u, a), &Matrix3::identity());
            prop_assert!((e - a * u).amax() < 1e-8);
        }

        #[test]
        fn matches_quaternion_oracle(a in pose(), b in pose()) {
            let e = rotation_error(&a.rotation, &b.rotation);
            let oracle = quaternion_log(&(a.rotation * b.rotation.transpose()));
            prop_assume!(oracle.norm() < PI - 1e-3);
            prop_assert!((e.norm() - oracle.norm()).abs() < 1e-9);
            prop_assert!((e - oracle).amax() < 1e-8);
        }

        #[test]
        fn error_magnitude_is_symmetric(a in pose(), b in pose()) {
            let ab = rotation_error(&a.rotation, &b.rotation).norm();
            let ba = rotation_error(&b.rotation, &a.rotation).norm();
            prop_assert!((ab - ba).abs() < 1e-9);
        }
    }
}
