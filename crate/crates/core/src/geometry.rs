//! Planar and spatial rigid-body transforms plus the drive kinematics used
//! by the base. Angles are radians, distances are meters, frames are
//! right-handed with z up.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = a % two_pi;
    if r <= -PI {
        r += two_pi;
    } else if r > PI {
        r -= two_pi;
    }
    r
}

/// Planar pose: position plus heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub const IDENTITY: Pose2D = Pose2D { x: 0.0, y: 0.0, theta: 0.0 };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2D { x, y, theta }
    }

    /// `self` then `other`: the pose of `other` expressed in the frame
    /// `self` is expressed in.
    pub fn compose(&self, other: &Pose2D) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D {
            x: self.x + c * other.x - s * other.y,
            y: self.y + s * other.x + c * other.y,
            theta: normalize_angle(self.theta + other.theta),
        }
    }

    pub fn invert(&self) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D {
            x: -(c * self.x + s * self.y),
            y: -(-s * self.x + c * self.y),
            theta: normalize_angle(-self.theta),
        }
    }

    /// Maps a point from this pose's frame into the parent frame.
    pub fn transform_point(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }

    /// Lifts the planar pose into 3D (z = 0, yaw about +z).
    pub fn to_pose3d(&self) -> Pose3D {
        Pose3D {
            translation: [self.x, self.y, 0.0],
            rotation: Quat::from_axis_angle([0.0, 0.0, 1.0], self.theta),
        }
    }

    /// Euclidean distance between positions, ignoring heading.
    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Unit quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Axis is normalized internally; a zero axis yields the identity.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Quat {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n < 1e-12 {
            return Quat::IDENTITY;
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Quat { w: c, x: s * axis[0] / n, y: s * axis[1] / n, z: s * axis[2] / n }
    }

    /// Fixed-axis XYZ convention: yaw about z applied last.
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Quat {
        let qz = Quat::from_axis_angle([0.0, 0.0, 1.0], yaw);
        let qy = Quat::from_axis_angle([0.0, 1.0, 0.0], pitch);
        let qx = Quat::from_axis_angle([1.0, 0.0, 0.0], roll);
        qz.mul(&qy).mul(&qx)
    }

    /// Inverse of [`Quat::from_rpy`]. At the pitch singularity roll is
    /// reported as zero.
    pub fn to_rpy(&self) -> (f64, f64, f64) {
        let q = self.normalized();
        let r31 = 2.0 * (q.x * q.z - q.w * q.y);
        let sp = (-r31).clamp(-1.0, 1.0);
        if sp.abs() > 1.0 - 1e-12 {
            let pitch = (PI / 2.0).copysign(sp);
            let r12 = 2.0 * (q.x * q.y - q.w * q.z);
            let r22 = 1.0 - 2.0 * (q.x * q.x + q.z * q.z);
            (0.0, pitch, (-r12).atan2(r22))
        } else {
            let pitch = sp.asin();
            let roll = (2.0 * (q.y * q.z + q.w * q.x)).atan2(1.0 - 2.0 * (q.x * q.x + q.y * q.y));
            let yaw = (2.0 * (q.x * q.y + q.w * q.z)).atan2(1.0 - 2.0 * (q.y * q.y + q.z * q.z));
            (roll, pitch, yaw)
        }
    }

    pub fn mul(&self, o: &Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
        .renormalized()
    }

    pub fn conjugate(&self) -> Quat {
        Quat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Quat {
        let n = self.norm();
        Quat { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    /// Normalizes only when accumulated drift exceeds 1e-9.
    fn renormalized(self) -> Quat {
        if (self.norm() - 1.0).abs() > 1e-9 {
            self.normalized()
        } else {
            self
        }
    }

    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        // v' = v + 2w(u x v) + 2(u x (u x v)) with u the vector part.
        let u = [self.x, self.y, self.z];
        let uv = cross(u, v);
        let uuv = cross(u, uv);
        [
            v[0] + 2.0 * (self.w * uv[0] + uuv[0]),
            v[1] + 2.0 * (self.w * uv[1] + uuv[1]),
            v[2] + 2.0 * (self.w * uv[2] + uuv[2]),
        ]
    }

    /// Rotation angle carrying `other` onto `self`, in `[0, pi]`.
    pub fn angle_to(&self, other: &Quat) -> f64 {
        let d = (self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z)
            .abs()
            .clamp(-1.0, 1.0);
        2.0 * d.acos()
    }

    /// Axis-angle vector (axis scaled by angle) of the rotation.
    pub fn to_rotvec(&self) -> [f64; 3] {
        let q = if self.w < 0.0 {
            Quat { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
        } else {
            *self
        };
        let sin_half = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
        if sin_half < 1e-12 {
            return [0.0, 0.0, 0.0];
        }
        let angle = 2.0 * sin_half.atan2(q.w);
        [q.x / sin_half * angle, q.y / sin_half * angle, q.z / sin_half * angle]
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Spatial pose: translation plus unit-quaternion rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose3D {
    pub translation: [f64; 3],
    pub rotation: Quat,
}

impl Pose3D {
    pub const IDENTITY: Pose3D = Pose3D { translation: [0.0, 0.0, 0.0], rotation: Quat::IDENTITY };

    pub fn new(translation: [f64; 3], rotation: Quat) -> Self {
        Pose3D { translation, rotation }
    }

    pub fn from_xyz(x: f64, y: f64, z: f64) -> Self {
        Pose3D { translation: [x, y, z], rotation: Quat::IDENTITY }
    }

    pub fn compose(&self, other: &Pose3D) -> Pose3D {
        let t = self.rotation.rotate(other.translation);
        Pose3D {
            translation: [
                self.translation[0] + t[0],
                self.translation[1] + t[1],
                self.translation[2] + t[2],
            ],
            rotation: self.rotation.mul(&other.rotation),
        }
    }

    pub fn invert(&self) -> Pose3D {
        let inv = self.rotation.conjugate();
        let t = inv.rotate(self.translation);
        Pose3D { translation: [-t[0], -t[1], -t[2]], rotation: inv }
    }

    pub fn transform_point(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.rotation.rotate(p);
        [
            self.translation[0] + r[0],
            self.translation[1] + r[1],
            self.translation[2] + r[2],
        ]
    }
}

/// Planar body twist: forward speed and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist2D {
    /// Forward velocity (m/s).
    pub v: f64,
    /// Counterclockwise yaw rate (rad/s).
    pub w: f64,
}

impl Twist2D {
    pub const ZERO: Twist2D = Twist2D { v: 0.0, w: 0.0 };

    pub fn new(v: f64, w: f64) -> Self {
        Twist2D { v, w }
    }
}

/// Named joint positions and velocities; the three vectors run parallel.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    pub names: Vec<String>,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl JointState {
    /// Zero-velocity state. Panics if lengths differ.
    pub fn from_positions(names: Vec<String>, positions: Vec<f64>) -> Self {
        assert_eq!(names.len(), positions.len(), "joint name/position length mismatch");
        let velocities = vec![0.0; names.len()];
        JointState { names, positions, velocities }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.positions[i])
    }

    pub fn set_position(&mut self, name: &str, value: f64) -> bool {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            self.positions[i] = value;
            true
        } else {
            false
        }
    }
}

/// Differential-drive geometry. Both lengths must be positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffDriveParams {
    /// Wheel radius (m).
    pub wheel_radius: f64,
    /// Lateral distance between wheel contact points (m).
    pub wheel_base: f64,
}

/// Body twist produced by left/right wheel speeds (rad/s).
pub fn diff_drive_forward(params: &DiffDriveParams, wl: f64, wr: f64) -> Twist2D {
    assert!(params.wheel_radius > 0.0 && params.wheel_base > 0.0, "drive params must be positive");
    Twist2D {
        v: params.wheel_radius * (wl + wr) / 2.0,
        w: params.wheel_radius * (wr - wl) / params.wheel_base,
    }
}

/// Wheel speeds `(left, right)` in rad/s realizing a body twist.
pub fn diff_drive_inverse(params: &DiffDriveParams, twist: &Twist2D) -> (f64, f64) {
    assert!(params.wheel_radius > 0.0 && params.wheel_base > 0.0, "drive params must be positive");
    let half = twist.w * params.wheel_base / 2.0;
    ((twist.v - half) / params.wheel_radius, (twist.v + half) / params.wheel_radius)
}

/// Advances a unicycle pose by a constant twist for `dt` seconds along the
/// exact circular arc; below |w| = 1e-9 the motion is integrated as a
/// straight line.
pub fn integrate_unicycle(pose: &Pose2D, twist: &Twist2D, dt: f64) -> Pose2D {
    if twist.w.abs() < 1e-9 {
        let (s, c) = pose.theta.sin_cos();
        Pose2D {
            x: pose.x + twist.v * dt * c,
            y: pose.y + twist.v * dt * s,
            theta: pose.theta,
        }
    } else {
        let radius = twist.v / twist.w;
        let t1 = pose.theta + twist.w * dt;
        Pose2D {
            x: pose.x + radius * (t1.sin() - pose.theta.sin()),
            y: pose.y - radius * (t1.cos() - pose.theta.cos()),
            theta: normalize_angle(t1),
        }
    }
}
