//! Structural comparison of two worlds with numeric tolerances.
//!
//! Elements are matched by name. Poses are compared in the world frame so the
//! result does not depend on how a format chose to nest bodies.

use std::collections::BTreeMap;

use crate::math::{quaternion_distance, relative_matrix_error, Pose};

use super::{SceneJoint, SceneWorld, Shape, WORLD};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompareTolerance {
    /// Meters.
    pub position: f64,
    pub quaternion: f64,
    /// Relative error on mass, COM and inertia tensor.
    pub inertial: f64,
}

impl Default for CompareTolerance {
    fn default() -> Self {
        Self {
            position: 1e-6,
            quaternion: 1e-9,
            inertial: 1e-9,
        }
    }
}

fn pose_diff(what: &str, a: &Pose, b: &Pose, tol: &CompareTolerance, out: &mut Vec<String>) {
    let dp = (a.translation - b.translation).norm();
    if dp > tol.position {
        out.push(format!("{what}: position differs by {dp:e} m"));
    }
    let dq = quaternion_distance(&a.rotation, &b.rotation);
    if dq > tol.quaternion {
        out.push(format!("{what}: orientation differs by {dq:e}"));
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn joint_frame(j: &SceneJoint, poses: &std::collections::HashMap<String, Pose>) -> Pose {
    poses.get(&j.child_body).copied().unwrap_or_default().compose(&j.pose)
}

/// Lists every difference between `a` and `b`; an empty list means equal.
pub fn structural_diff(a: &SceneWorld, b: &SceneWorld, tol: &CompareTolerance) -> Vec<String> {
    let mut out = Vec::new();
    for (what, na, nb) in [
        ("body count", a.body_count(), b.body_count()),
        ("joint count", a.joint_count(), b.joint_count()),
        ("geometry count", a.geometry_count(), b.geometry_count()),
    ] {
        if na != nb {
            out.push(format!("{what}: {na} vs {nb}"));
        }
    }

    let pa = a.body_world_poses();
    let pb = b.body_world_poses();
    let bodies_b: BTreeMap<&str, _> = b.all_bodies().into_iter().map(|(x, _)| (x.name.as_str(), x)).collect();
    for (ba, _) in a.all_bodies() {
        let Some(bb) = bodies_b.get(ba.name.as_str()) else {
            out.push(format!("body `{}` missing", ba.name));
            continue;
        };
        let (wa, wb) = (pa[&ba.name], pb[&bb.name]);
        pose_diff(&format!("body `{}`", ba.name), &wa, &wb, tol, &mut out);
        match (&ba.inertial, &bb.inertial) {
            (Some(ia), Some(ib)) => {
                let (ia, ib) = (ia.transformed(&wa), ib.transformed(&wb));
                if rel(ia.mass, ib.mass) > tol.inertial {
                    out.push(format!("body `{}`: mass {} vs {}", ba.name, ia.mass, ib.mass));
                }
                let dc = (ia.center_of_mass - ib.center_of_mass).norm();
                let scale = ia.center_of_mass.norm().max(1.0);
                if dc > tol.position.max(tol.inertial * scale) {
                    out.push(format!("body `{}`: center of mass differs by {dc:e}", ba.name));
                }
                // Orientation noise of the body frame leaks into the tensor.
                let ei = relative_matrix_error(&ia.inertia, &ib.inertia);
                if ei > tol.inertial.max(4.0 * tol.quaternion) {
                    out.push(format!("body `{}`: inertia differs by {ei:e} (relative)", ba.name));
                }
            }
            (None, None) => {}
            _ => out.push(format!("body `{}`: inertial presence differs", ba.name)),
        }
    }

    let joints_b: BTreeMap<&str, &SceneJoint> = b.all_joints().into_iter().map(|j| (j.name.as_str(), j)).collect();
    for ja in a.all_joints() {
        let Some(jb) = joints_b.get(ja.name.as_str()) else {
            out.push(format!("joint `{}` missing", ja.name));
            continue;
        };
        let label = format!("joint `{}`", ja.name);
        if ja.joint_type != jb.joint_type {
            out.push(format!(
                "{label}: type {} vs {}",
                ja.joint_type.as_str(),
                jb.joint_type.as_str()
            ));
        }
        if ja.parent_body != jb.parent_body || ja.child_body != jb.child_body {
            out.push(format!(
                "{label}: connects {}→{} vs {}→{}",
                ja.parent_body, ja.child_body, jb.parent_body, jb.child_body
            ));
        }
        let (fa, fb) = (joint_frame(ja, &pa), joint_frame(jb, &pb));
        pose_diff(&label, &fa, &fb, tol, &mut out);
        if let (Some(xa), Some(xb)) = (ja.axis, jb.axis) {
            let (wa, wb) = (fa.rotation * xa.normalize(), fb.rotation * xb.normalize());
            if (wa - wb).norm() > tol.quaternion.max(1e-9) * 4.0 {
                out.push(format!("{label}: axis differs"));
            }
        } else if ja.axis.is_some() != jb.axis.is_some() {
            out.push(format!("{label}: axis presence differs"));
        }
        match (ja.limits, jb.limits) {
            (Some(la), Some(lb)) => {
                if (la.lower - lb.lower).abs() > 1e-9 * la.lower.abs().max(1.0)
                    || (la.upper - lb.upper).abs() > 1e-9 * la.upper.abs().max(1.0)
                {
                    out.push(format!("{label}: limits differ"));
                }
            }
            (None, None) => {}
            _ => out.push(format!("{label}: limit presence differs")),
        }
        if (ja.parent_body == WORLD) != (jb.parent_body == WORLD) {
            out.push(format!("{label}: world attachment differs"));
        }
    }

    let geoms_b: BTreeMap<&str, _> = b
        .all_geometries()
        .into_iter()
        .map(|(body, g)| (g.name.as_str(), (body, g)))
        .collect();
    for (body_a, ga) in a.all_geometries() {
        let Some((body_b, gb)) = geoms_b.get(ga.name.as_str()) else {
            out.push(format!("geometry `{}` missing", ga.name));
            continue;
        };
        let label = format!("geometry `{}`", ga.name);
        if ga.geom_type() != gb.geom_type() {
            out.push(format!("{label}: type {:?} vs {:?}", ga.geom_type(), gb.geom_type()));
            continue;
        }
        let wa = pa[&body_a.name].compose(&ga.pose);
        let wb = pb[&body_b.name].compose(&gb.pose);
        pose_diff(&label, &wa, &wb, tol, &mut out);
        let dims_equal = match (&ga.shape, &gb.shape) {
            (Shape::Cube { half_extents: x }, Shape::Cube { half_extents: y }) => (x - y).norm() <= tol.position,
            (Shape::Sphere { radius: x }, Shape::Sphere { radius: y }) => (x - y).abs() <= tol.position,
            (
                Shape::Cylinder {
                    radius: r1,
                    half_length: h1,
                },
                Shape::Cylinder {
                    radius: r2,
                    half_length: h2,
                },
            ) => (r1 - r2).abs() <= tol.position && (h1 - h2).abs() <= tol.position,
            (Shape::Mesh(x), Shape::Mesh(y)) => match (&x.data, &y.data) {
                (Some(mx), Some(my)) => {
                    mx.triangles.len() == my.triangles.len() && mx.vertices.len() == my.vertices.len()
                }
                _ => true,
            },
            _ => false,
        };
        if !dims_equal {
            out.push(format!("{label}: dimensions differ"));
        }
        if (ga.scale - gb.scale).norm() > tol.position {
            out.push(format!("{label}: scale differs"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::scene::{InertialProperties, SceneBody};

    #[test]
    fn nesting_does_not_matter() {
        let mut parent = SceneBody::new("p").with_pose(Pose::from_translation(Vec3::new(1.0, 0.0, 0.0)));
        let child = SceneBody::new("c").with_pose(Pose::from_translation(Vec3::new(0.0, 1.0, 0.0)));
        let flat_child = SceneBody::new("c").with_pose(Pose::from_translation(Vec3::new(1.0, 1.0, 0.0)));
        let flat = SceneWorld::with_bodies("w", vec![parent.clone(), flat_child]);
        parent.children.push(child);
        let nested = SceneWorld::with_bodies("w", vec![parent]);
        assert!(structural_diff(&nested, &flat, &CompareTolerance::default()).is_empty());
    }

    #[test]
    fn reports_mass_change() {
        let mut a = SceneBody::new("a");
        a.inertial = Some(InertialProperties::diagonal(
            1.0,
            Vec3::zeros(),
            Vec3::new(1.0, 1.0, 1.0),
        ));
        let mut b = a.clone();
        b.inertial.as_mut().unwrap().mass = 1.0 + 1e-6;
        let d = structural_diff(
            &SceneWorld::with_bodies("w", vec![a]),
            &SceneWorld::with_bodies("w", vec![b]),
            &CompareTolerance::default(),
        );
        assert_eq!(d.len(), 1);
    }
}
