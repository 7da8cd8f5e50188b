//! Rigid transforms and small linear-algebra helpers shared by every module.

use nalgebra::{Isometry3, Matrix3, Quaternion, Translation3, UnitQuaternion, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// A rigid transform: translation in meters plus a unit rotation.
///
/// Rotations are re-normalized whenever a pose is built from raw components,
/// so `|q| - 1` never exceeds floating-point noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub translation: Vec3,
    pub rotation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            translation: Vec3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn new(translation: Vec3, rotation: UnitQuaternion<f64>) -> Self {
        Self {
            translation,
            rotation: renormalize(rotation),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(translation, UnitQuaternion::identity())
    }

    /// Scalar-first quaternion components `(w, x, y, z)`.
    pub fn from_wxyz(translation: Vec3, wxyz: [f64; 4]) -> Self {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        Self::new(translation, UnitQuaternion::from_quaternion(q))
    }

    /// Fixed-axis roll/pitch/yaw as used by URDF and SDF (`Rz(yaw) Ry(pitch) Rx(roll)`).
    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Self::new(
            Vec3::new(xyz[0], xyz[1], xyz[2]),
            UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
        )
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn rpy(&self) -> [f64; 3] {
        let (r, p, y) = self.rotation.euler_angles();
        [r, p, y]
    }

    pub fn is_identity(&self) -> bool {
        self.translation == Vec3::zeros() && self.rotation == UnitQuaternion::identity()
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.translation), self.rotation)
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    /// `self ∘ other`: express `other` (given in this pose's frame) in the outer frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        Self::from_isometry(&(self.to_isometry() * other.to_isometry()))
    }

    pub fn inverse(&self) -> Pose {
        Self::from_isometry(&self.to_isometry().inverse())
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q.into_inner())
}

/// Distance between two rotations that ignores the `q ≡ -q` double cover.
pub fn quaternion_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let (a, b) = (a.coords, b.coords);
    (a - b).norm().min((a + b).norm())
}

/// Frobenius-relative difference, falling back to absolute when `reference` is zero.
pub fn relative_matrix_error(value: &Mat3, reference: &Mat3) -> f64 {
    let scale = reference.norm();
    let diff = (value - reference).norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Skew-free shift of an inertia tensor: `m((d·d)I - d dᵀ)`.
pub fn parallel_axis_term(mass: f64, offset: &Vec3) -> Mat3 {
    mass * (Mat3::identity() * offset.dot(offset) - offset * offset.transpose())
}

/// Rotation taking the +Z axis onto `dir` (any valid rotation if `dir` is ±Z).
pub fn rotation_from_z(dir: &Vec3) -> UnitQuaternion<f64> {
    let z = Vec3::z();
    let d = dir.normalize();
    UnitQuaternion::rotation_between(&z, &d)
        .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rpy_round_trip() {
        let pose = Pose::from_xyz_rpy([1.0, 2.0, 3.0], [0.3, -0.2, 1.1]);
        let back = Pose::from_xyz_rpy([1.0, 2.0, 3.0], pose.rpy());
        assert!(quaternion_distance(&pose.rotation, &back.rotation) < 1e-12);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let pose = Pose::from_xyz_rpy([0.5, -1.0, 2.0], [0.1, 0.2, 0.3]);
        let id = pose.compose(&pose.inverse());
        assert!(id.translation.norm() < 1e-12);
        assert!(quaternion_distance(&id.rotation, &UnitQuaternion::identity()) < 1e-12);
    }

    #[test]
    fn wxyz_is_scalar_first() {
        let pose = Pose::from_wxyz(Vec3::zeros(), [0.0, 0.0, 0.0, 2.0]);
        assert_eq!(pose.wxyz(), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn rotation_from_z_maps_axis() {
        for dir in [Vec3::x(), -Vec3::z(), Vec3::new(1.0, 2.0, -3.0)] {
            let q = rotation_from_z(&dir);
            assert!((q * Vec3::z() - dir.normalize()).norm() < 1e-12);
        }
    }
}
