//! Rigid-transform algebra used by the solver and tracker.
//!
//! Transforms are stored as a rotation matrix and a translation in
//! millimeters. The six-parameter form `(x, y, z, theta_x, theta_y, theta_z)`
//! uses intrinsic z-x-y Euler angles: `R = R_y(theta_y) * R_x(theta_x) * R_z(theta_z)`.

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// |sin(theta_x)| at or above this is treated as gimbal lock.
const GIMBAL_LIMIT: f64 = 1.0 - 1e-9;
const SMALL_ANGLE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseParams {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta_x: f64,
    pub theta_y: f64,
    pub theta_z: f64,
}

impl PoseParams {
    pub fn new(x: f64, y: f64, z: f64, theta_x: f64, theta_y: f64, theta_z: f64) -> Self {
        PoseParams {
            x,
            y,
            z,
            theta_x,
            theta_y,
            theta_z,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.x,
            self.y,
            self.z,
            self.theta_x,
            self.theta_y,
            self.theta_z,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        PoseParams::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "TransformRepr", from = "TransformRepr")]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Serialized form: row-major rotation rows plus translation.
#[derive(Serialize, Deserialize)]
struct TransformRepr {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl From<RigidTransform> for TransformRepr {
    fn from(t: RigidTransform) -> Self {
        let r = &t.rotation;
        TransformRepr {
            rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl From<TransformRepr> for RigidTransform {
    fn from(t: TransformRepr) -> Self {
        let r = t.rotation;
        RigidTransform::new(
            Matrix3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            ),
            Vector3::from(t.translation),
        )
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        RigidTransform::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        RigidTransform::new(Matrix3::identity(), t)
    }

    pub fn from_rotation(r: Matrix3<f64>) -> Self {
        RigidTransform::new(r, Vector3::zeros())
    }

    /// Rotation by `angle` about the unit `axis` through `pivot`.
    pub fn rotation_about(axis: Vector3<f64>, angle: f64, pivot: Vector3<f64>) -> Self {
        let r = so3_exp(&(axis.normalize() * angle));
        RigidTransform::new(r, pivot - r * pivot)
    }

    pub fn from_params(p: &PoseParams) -> Self {
        params_to_transform(p)
    }

    pub fn to_params(&self) -> Result<PoseParams> {
        transform_to_params(self)
    }

    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        compose(self, other)
    }

    pub fn inverse(&self) -> RigidTransform {
        invert(self)
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Row-major 4x4 homogeneous matrix.
    pub fn to_homogeneous(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }

    pub fn from_homogeneous(m: &[f64; 16]) -> Self {
        RigidTransform::new(
            Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]),
            Vector3::new(m[3], m[7], m[11]),
        )
    }

    /// Re-orthonormalizes the rotation (polar projection via SVD).
    pub fn orthonormalized(&self) -> Self {
        let svd = self.rotation.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * vt;
        }
        RigidTransform::new(r, self.translation)
    }
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation from z-x-y Euler angles: z applied first, then x, then y.
pub fn euler_zxy_to_rotation(theta_x: f64, theta_y: f64, theta_z: f64) -> Matrix3<f64> {
    rot_y(theta_y) * rot_x(theta_x) * rot_z(theta_z)
}

/// Inverse of [`euler_zxy_to_rotation`], returning `(theta_x, theta_y, theta_z)`.
pub fn rotation_to_euler_zxy(r: &Matrix3<f64>) -> Result<(f64, f64, f64)> {
    // R[1][2] = -sin(theta_x); the other angles come from the row/column it shares.
    let sx = -r[(1, 2)];
    if sx.abs() >= GIMBAL_LIMIT {
        return Err(Error::GimbalLock(sx.abs()));
    }
    let cx = r[(1, 0)].hypot(r[(1, 1)]);
    let theta_x = sx.atan2(cx);
    let theta_y = r[(0, 2)].atan2(r[(2, 2)]);
    let theta_z = r[(1, 0)].atan2(r[(1, 1)]);
    Ok((theta_x, theta_y, theta_z))
}

pub fn params_to_transform(p: &PoseParams) -> RigidTransform {
    RigidTransform::new(
        euler_zxy_to_rotation(p.theta_x, p.theta_y, p.theta_z),
        Vector3::new(p.x, p.y, p.z),
    )
}

pub fn transform_to_params(t: &RigidTransform) -> Result<PoseParams> {
    let (theta_x, theta_y, theta_z) = rotation_to_euler_zxy(&t.rotation)?;
    Ok(PoseParams::new(
        t.translation.x,
        t.translation.y,
        t.translation.z,
        theta_x,
        theta_y,
        theta_z,
    ))
}

/// `a ∘ b`: apply `b` first, then `a`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    RigidTransform::new(
        a.rotation * b.rotation,
        a.rotation * b.translation + a.translation,
    )
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    let rt = t.rotation.transpose();
    RigidTransform::new(rt, -(rt * t.translation))
}

/// Geodesic rotation angle in `[0, pi]`.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    // atan2 form stays accurate near 0 and pi, unlike acos of the trace.
    let s = 0.5
        * Vector3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        )
        .norm();
    let c = 0.5 * (r.trace() - 1.0);
    s.atan2(c)
}

/// `(geodesic angle of R_a^T R_b, ||t_a - t_b||)`.
pub fn transform_distance(a: &RigidTransform, b: &RigidTransform) -> (f64, f64) {
    let rel = a.rotation.transpose() * b.rotation;
    (rotation_angle(&rel), (a.translation - b.translation).norm())
}

/// The skew generators `J_x, J_y, J_z` of rotations about each axis.
pub fn rotation_generators() -> [Matrix3<f64>; 3] {
    [
        Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0),
        Matrix3::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0),
        Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
    ]
}

pub fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Rodrigues' formula for the axis-angle vector `w`.
pub fn so3_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let k = skew(w);
    let (a, b) = if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Axis-angle vector of a rotation matrix.
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let theta = rotation_angle(r);
    let v = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    if theta < SMALL_ANGLE {
        return v * (0.5 + theta * theta / 12.0);
    }
    if std::f64::consts::PI - theta > 1e-4 {
        return v * (theta / (2.0 * theta.sin()));
    }
    // Near pi the antisymmetric part vanishes; the symmetric part is
    // cos(theta) I + (1 - cos(theta)) a a^T.
    let b = (r + r.transpose()) * 0.5 - Matrix3::identity() * theta.cos();
    let mut col = 0;
    for i in 1..3 {
        if b[(i, i)] > b[(col, col)] {
            col = i;
        }
    }
    let mut axis: Vector3<f64> = b.column(col).into_owned();
    axis /= axis.norm();
    if axis.dot(&v) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Left Jacobian of SO(3), used by the SE(3) exponential.
fn so3_left_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let k = skew(w);
    let (a, b) = if theta2 < SMALL_ANGLE * SMALL_ANGLE {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        let theta = theta2.sqrt();
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Matrix3::identity() + k * a + k * k * b
}

/// SE(3) exponential of the twist `(v, w)` (translation part first).
pub fn se3_exp(xi: &Vector6<f64>) -> RigidTransform {
    let v = Vector3::new(xi[0], xi[1], xi[2]);
    let w = Vector3::new(xi[3], xi[4], xi[5]);
    RigidTransform::new(so3_exp(&w), so3_left_jacobian(&w) * v)
}

pub fn se3_log(t: &RigidTransform) -> Vector6<f64> {
    let w = so3_log(&t.rotation);
    let jl = so3_left_jacobian(&w);
    let v = jl.lu().solve(&t.translation).unwrap_or(t.translation);
    Vector6::new(v.x, v.y, v.z, w.x, w.y, w.z)
}
