//! Combining rigidly attached parts into one set of mass properties.

use crate::math::{parallel_axis_term, Mat3, Pose, Vec3};
use crate::scene::InertialProperties;

/// Combines parts whose frames are given by `pose` relative to a common target frame.
///
/// Returns `None` when the parts have no mass. Masses are summed in input
/// order, so the total is reproducible bit-for-bit.
pub fn consolidate_inertia(parts: &[(InertialProperties, Pose)]) -> Option<InertialProperties> {
    let moved: Vec<InertialProperties> = parts.iter().map(|(i, p)| i.transformed(p)).collect();
    let mass: f64 = moved.iter().map(|i| i.mass).sum();
    if !(mass > 0.0) {
        return None;
    }
    let com = moved
        .iter()
        .fold(Vec3::zeros(), |acc, i| acc + i.center_of_mass * i.mass)
        / mass;
    let inertia = moved.iter().fold(Mat3::zeros(), |acc, i| {
        acc + i.inertia + parallel_axis_term(i.mass, &(i.center_of_mass - com))
    });
    Some(InertialProperties::new(
        mass,
        com,
        (inertia + inertia.transpose()) / 2.0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_masses() {
        let point = InertialProperties::new(1.0, Vec3::zeros(), Mat3::zeros());
        let parts = [
            (point, Pose::from_translation(Vec3::new(-1.0, 0.0, 0.0))),
            (point, Pose::from_translation(Vec3::new(1.0, 0.0, 0.0))),
        ];
        let c = consolidate_inertia(&parts).unwrap();
        assert_eq!(c.mass, 2.0);
        assert!(c.center_of_mass.norm() < 1e-15);
        assert!((c.inertia[(1, 1)] - 2.0).abs() < 1e-15);
        assert!(c.inertia[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn massless_is_none() {
        assert!(consolidate_inertia(&[]).is_none());
    }
}
