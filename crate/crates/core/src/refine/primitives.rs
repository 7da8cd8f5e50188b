//! Closed-form mass properties of the primitive shapes, including non-uniform scale.

use std::f64::consts::PI;

use crate::math::{Mat3, Vec3};

use super::mirtich::MassProperties;

fn centered(volume: f64, density: f64, diag_per_mass: Vec3) -> MassProperties {
    let mass = density * volume;
    MassProperties {
        volume,
        mass,
        center_of_mass: Vec3::zeros(),
        inertia: Mat3::from_diagonal(&(diag_per_mass * mass)),
    }
}

/// Box with the given half extents.
pub fn box_properties(half: &Vec3, density: f64) -> MassProperties {
    let h = half.abs();
    let (x2, y2, z2) = (h.x * h.x, h.y * h.y, h.z * h.z);
    centered(
        8.0 * h.x * h.y * h.z,
        density,
        Vec3::new(y2 + z2, x2 + z2, x2 + y2) / 3.0,
    )
}

/// Ellipsoid with semi-axes `radii` (a sphere when all three are equal).
pub fn ellipsoid_properties(radii: &Vec3, density: f64) -> MassProperties {
    let r = radii.abs();
    let (a2, b2, c2) = (r.x * r.x, r.y * r.y, r.z * r.z);
    centered(
        4.0 / 3.0 * PI * r.x * r.y * r.z,
        density,
        Vec3::new(b2 + c2, a2 + c2, a2 + b2) / 5.0,
    )
}

/// Elliptic cylinder along Z with semi-axes `rx`, `ry` and half length `h`.
pub fn cylinder_properties(rx: f64, ry: f64, half_length: f64, density: f64) -> MassProperties {
    let (a, b, h) = (rx.abs(), ry.abs(), half_length.abs());
    let l2 = 4.0 * h * h;
    centered(
        PI * a * b * 2.0 * h,
        density,
        Vec3::new(b * b / 4.0 + l2 / 12.0, a * a / 4.0 + l2 / 12.0, (a * a + b * b) / 4.0),
    )
}
