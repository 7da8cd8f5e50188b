//! Seeded synthetic worlds, stages and inertials.

use nalgebra::{Quaternion, UnitQuaternion};
use rand::Rng;
use scenegraph_core::math::{Mat3, Vec3};
use scenegraph_core::scene::PropertyTriple;
use scenegraph_core::{InertialProperties, JointType, Pose, SceneBody, SceneGeometry, SceneJoint, SceneWorld, Shape};

pub fn random_rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    loop {
        let q = Quaternion::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = q.norm();
        if n > 0.1 && n <= 1.0 {
            return UnitQuaternion::from_quaternion(q);
        }
    }
}

pub fn random_pose(rng: &mut impl Rng, reach: f64) -> Pose {
    let t = Vec3::new(
        rng.gen_range(-reach..reach),
        rng.gen_range(-reach..reach),
        rng.gen_range(-reach..reach),
    );
    Pose::new(t, random_rotation(rng))
}

/// A physically valid inertial: principal moments of a random box, rotated.
/// Masses are multiples of 1/64, so sums of a few thousand of them are exact
/// in any order.
pub fn random_inertial(rng: &mut impl Rng) -> InertialProperties {
    let mass = rng.gen_range(1..640) as f64 / 64.0;
    let (a, b, c): (f64, f64, f64) = (
        rng.gen_range(0.05..1.0),
        rng.gen_range(0.05..1.0),
        rng.gen_range(0.05..1.0),
    );
    let diag = Vec3::new(b * b + c * c, a * a + c * c, a * a + b * b) * mass / 12.0;
    let r = random_rotation(rng).to_rotation_matrix();
    let com = Vec3::new(
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.5..0.5),
    );
    InertialProperties::new(
        mass,
        com,
        r.matrix() * Mat3::from_diagonal(&diag) * r.matrix().transpose(),
    )
}

/// `n` parts with poses, as handed to inertia consolidation.
pub fn random_chain(rng: &mut impl Rng, n: usize) -> Vec<(InertialProperties, Pose)> {
    (0..n).map(|_| (random_inertial(rng), random_pose(rng, 2.0))).collect()
}

/// A random kinematic tree of `bodies` links, each with one box and an
/// inertial, joined by revolute, prismatic and fixed joints.
pub fn random_world(rng: &mut impl Rng, bodies: usize) -> SceneWorld {
    let mut flat: Vec<(SceneBody, Option<usize>)> = Vec::with_capacity(bodies);
    for i in 0..bodies {
        let mut b = SceneBody::new(&format!("link_{i}")).with_pose(random_pose(rng, 1.0));
        b.inertial = Some(random_inertial(rng));
        let half = Vec3::new(
            rng.gen_range(0.01..0.3),
            rng.gen_range(0.01..0.3),
            rng.gen_range(0.01..0.3),
        );
        let mut g = SceneGeometry::new(&format!("link_{i}_box"), Shape::Cube { half_extents: half });
        g.pose = random_pose(rng, 0.2);
        b.geometries.push(g);
        let parent = (i > 0).then(|| rng.gen_range(0..i));
        flat.push((b, parent));
    }
    // Attach children bottom-up so every body lands inside its parent.
    let mut joints: Vec<Option<SceneJoint>> = vec![None; bodies];
    for (i, (_, parent)) in flat.iter().enumerate() {
        if let Some(p) = parent {
            let kind = match rng.gen_range(0..3) {
                0 => JointType::Revolute,
                1 => JointType::Prismatic,
                _ => JointType::Fixed,
            };
            let mut j = SceneJoint::new(&format!("joint_{i}"), kind, &format!("link_{p}"), &format!("link_{i}"));
            if kind.has_axis() {
                j.axis = Some(random_rotation(rng) * Vec3::z());
            }
            joints[i] = Some(j);
        }
    }
    let mut slots: Vec<Option<SceneBody>> = flat.iter().map(|(b, _)| Some(b.clone())).collect();
    for i in (1..bodies).rev() {
        let p = flat[i].1.expect("non-root");
        let child = slots[i].take().expect("attached once");
        let parent = slots[p].as_mut().expect("parents come first");
        parent.children.insert(0, child);
        if let Some(j) = joints[i].take() {
            parent.joints.insert(0, j);
        }
    }
    let mut world = SceneWorld::new("synthetic");
    if let Some(root) = slots[0].take() {
        world.push_body(root);
    }
    world
}

/// Root-level bodies, each with one cube whose look is described by
/// `triples` material triples: a material node, and a texture node with
/// its file and sampler settings.
pub fn material_heavy_world(bodies: usize, triples: usize) -> SceneWorld {
    let mut world = SceneWorld::new("materials");
    for i in 0..bodies {
        let mut b =
            SceneBody::new(&format!("item_{i}")).with_pose(Pose::from_translation(Vec3::new(i as f64, 0.0, 0.0)));
        let mut g = SceneGeometry::new(
            &format!("item_{i}_shape"),
            Shape::Cube {
                half_extents: Vec3::repeat(0.1),
            },
        );
        let (mat, tex) = (format!("paint_{i}"), format!("paint_{i}_albedo"));
        g.material.push(PropertyTriple::new(&mat, "kind", "material"));
        g.material.push(PropertyTriple::new(&mat, "texture", &tex));
        g.material.push(PropertyTriple::new(&tex, "kind", "texture"));
        for k in 3..triples {
            let (subject, predicate) = if k % 2 == 0 {
                (&mat, format!("shader_input_{k}"))
            } else {
                (&tex, format!("sampler_option_{k}"))
            };
            g.material.push(PropertyTriple::new(
                subject,
                &predicate,
                &format!("textures/set_{i}/layer_{k}.png"),
            ));
        }
        g.rgba = Some([0.5, 0.4, 0.3, 1.0]);
        b.geometries.push(g);
        world.push_body(b);
    }
    world
}
