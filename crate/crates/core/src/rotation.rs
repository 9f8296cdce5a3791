//! Quaternion and axis-angle rotation math.
//!
//! Quaternions are stored `(w, x, y, z)` and act on vectors as `q v q*`.

use std::ops::{Mul, Neg};

use serde::{Deserialize, Serialize};

use crate::{Mat3, Vec3};

/// Below this rotation angle the axis-angle maps switch to series expansions.
const SMALL_ANGLE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 4]> for Quat {
    fn from(q: [f64; 4]) -> Self {
        Quat::new(q[0], q[1], q[2], q[3])
    }
}

impl From<Quat> for [f64; 4] {
    fn from(q: Quat) -> Self {
        q.to_array()
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn vector_part(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(self, other: Quat) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_unit(self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    /// Returns the unit quaternion in the same direction. Zero maps to identity.
    pub fn normalized(self) -> Quat {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Quat::IDENTITY;
        }
        Quat::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Raw Hamilton product, no renormalization.
    pub fn hamilton(self, b: Quat) -> Quat {
        let a = self;
        Quat::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    /// Rotation matrix of a unit quaternion.
    pub fn to_matrix(self) -> Mat3 {
        let Quat { w, x, y, z } = self;
        let (xx, yy, zz) = (x * x, y * y, z * z);
        let (xy, xz, yz) = (x * y, x * z, y * z);
        let (wx, wy, wz) = (w * x, w * y, w * z);
        Mat3::new(
            1.0 - 2.0 * (yy + zz),
            2.0 * (xy - wz),
            2.0 * (xz + wy),
            2.0 * (xy + wz),
            1.0 - 2.0 * (xx + zz),
            2.0 * (yz - wx),
            2.0 * (xz - wy),
            2.0 * (yz + wx),
            1.0 - 2.0 * (xx + yy),
        )
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        self.to_matrix() * v
    }

    /// Axis-angle vector (axis scaled by angle in radians), angle in `[0, pi]`.
    pub fn to_axis_angle(self) -> Vec3 {
        let q = if self.w < 0.0 { -self } else { self };
        let v = q.vector_part();
        let s = v.norm();
        if s < SMALL_ANGLE {
            // 2 asin(s) / s ~ 2 / w for small s.
            return v * (2.0 / q.w);
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    /// Spherical linear interpolation along the shorter arc.
    pub fn slerp(self, other: Quat, t: f64) -> Quat {
        let mut b = other;
        let mut cos = self.dot(b);
        if cos < 0.0 {
            b = -b;
            cos = -cos;
        }
        if cos > 1.0 - 1e-12 {
            let lerp = Quat::new(
                self.w + t * (b.w - self.w),
                self.x + t * (b.x - self.x),
                self.y + t * (b.y - self.y),
                self.z + t * (b.z - self.z),
            );
            return lerp.normalized();
        }
        let theta = cos.min(1.0).acos();
        let sin = theta.sin();
        let wa = ((1.0 - t) * theta).sin() / sin;
        let wb = (t * theta).sin() / sin;
        Quat::new(
            wa * self.w + wb * b.w,
            wa * self.x + wb * b.x,
            wa * self.y + wb * b.y,
            wa * self.z + wb * b.z,
        )
        .normalized()
    }

    /// Smallest rotation taking unit vector `from` onto unit vector `to`.
    pub fn between(from: Vec3, to: Vec3) -> Quat {
        let from = from.normalize();
        let to = to.normalize();
        let cos = from.dot(&to).clamp(-1.0, 1.0);
        let axis = from.cross(&to);
        let s = axis.norm();
        if s < 1e-12 {
            if cos > 0.0 {
                return Quat::IDENTITY;
            }
            // Antiparallel: half turn about any perpendicular axis.
            let helper = if from.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            let perp = from.cross(&helper).normalize();
            return axis_angle_to_quat(perp * std::f64::consts::PI);
        }
        axis_angle_to_quat(axis * (s.atan2(cos) / s))
    }
}

impl Mul for Quat {
    type Output = Quat;

    fn mul(self, rhs: Quat) -> Quat {
        quat_mul(self, rhs)
    }
}

impl Neg for Quat {
    type Output = Quat;

    fn neg(self) -> Quat {
        Quat::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Unit quaternion of the rotation by `|v|` radians about `v / |v|`.
pub fn axis_angle_to_quat(v: Vec3) -> Quat {
    let theta = v.norm();
    let half = 0.5 * theta;
    let k = if theta > SMALL_ANGLE {
        half.sin() / theta
    } else {
        0.5 - theta * theta / 48.0
    };
    Quat::new(half.cos(), k * v.x, k * v.y, k * v.z)
}

/// Hamilton product of two unit quaternions, renormalized.
pub fn quat_mul(a: Quat, b: Quat) -> Quat {
    a.hamilton(b).normalized()
}
