use std::f64::consts::PI;

use nalgebra::UnitQuaternion;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenegraph_core::math::{relative_matrix_error, Mat3, Vec3};
use scenegraph_core::refine::{consolidate_inertia, mesh_mass_properties, refine_world, MassProperties, RefineOptions};
use scenegraph_core::{InertialProperties, JointType, MeshData, Pose, SceneBody, SceneJoint, SceneWorld};

fn unit_cube() -> MeshData {
    MeshData::cuboid(Vec3::repeat(0.5))
}

#[test]
fn unit_cube_is_exact() {
    let mp = mesh_mass_properties(&unit_cube(), 1.0).unwrap();
    assert!((mp.mass - 1.0).abs() < 1e-12);
    assert!(mp.center_of_mass.norm() < 1e-12);
    assert!((mp.inertia - Mat3::identity() / 6.0).abs().max() < 1e-12);
}

#[test]
fn icosphere_approaches_the_ball() {
    let (r, rho) = (0.7, 850.0);
    let mp = mesh_mass_properties(&MeshData::icosphere(r, 4), rho).unwrap();
    let mass = rho * 4.0 / 3.0 * PI * r.powi(3);
    let moment = 0.4 * mass * r * r;
    assert!((mp.mass - mass).abs() / mass < 0.01);
    for k in 0..3 {
        assert!((mp.inertia[(k, k)] - moment).abs() / moment < 0.01);
    }
}

/// A star-shaped polyhedron: an icosphere with each vertex pushed radially.
fn lumpy(seed: u64) -> MeshData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = MeshData::icosphere(1.0, 1);
    for v in &mut m.vertices {
        *v *= rng.gen_range(0.5..1.5);
    }
    m
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn close(a: &MassProperties, b: &MassProperties, length: f64) {
    assert!(rel(a.mass, b.mass) < 1e-9, "mass {} vs {}", a.mass, b.mass);
    assert!((a.center_of_mass - b.center_of_mass).norm() / length < 1e-9);
    assert!(relative_matrix_error(&a.inertia, &b.inertia) < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn translation_moves_only_the_center(seed in any::<u64>(), t in proptest::array::uniform3(-50.0f64..50.0)) {
        let m = lumpy(seed);
        let t = Vec3::from(t);
        let a = mesh_mass_properties(&m, 1.0).unwrap();
        let mut b = mesh_mass_properties(&m.translated(&t), 1.0).unwrap();
        b.center_of_mass -= t;
        close(&a, &b, 1.0 + t.norm());
    }

    #[test]
    fn rotation_rotates_the_tensor(seed in any::<u64>(), axis in proptest::array::uniform3(-1.0f64..1.0), angle in -PI..PI) {
        prop_assume!(Vec3::from(axis).norm() > 1e-3);
        let m = lumpy(seed);
        let q = UnitQuaternion::from_scaled_axis(Vec3::from(axis).normalize() * angle);
        let r = q.to_rotation_matrix().into_inner();
        let mut turned = m.clone();
        for v in &mut turned.vertices {
            *v = q * *v;
        }
        let a = mesh_mass_properties(&m, 1.0).unwrap();
        let b = mesh_mass_properties(&turned, 1.0).unwrap();
        let back = MassProperties {
            center_of_mass: r.transpose() * b.center_of_mass,
            inertia: r.transpose() * b.inertia * r,
            ..b
        };
        close(&a, &back, 1.0);
    }

    #[test]
    fn density_scales_mass_and_inertia(seed in any::<u64>(), k in 0.01f64..1e4) {
        let m = lumpy(seed);
        let a = mesh_mass_properties(&m, 1.0).unwrap();
        let b = mesh_mass_properties(&m, k).unwrap();
        let scaled = MassProperties { mass: a.mass * k, inertia: a.inertia * k, ..a };
        close(&scaled, &b, 1.0);
    }

    #[test]
    fn uniform_scale_follows_dimensional_analysis(seed in any::<u64>(), s in 0.01f64..100.0) {
        let m = lumpy(seed);
        let a = mesh_mass_properties(&m, 1.0).unwrap();
        let b = mesh_mass_properties(&m.scaled(&Vec3::repeat(s)), 1.0).unwrap();
        let expected = MassProperties {
            volume: a.volume * s.powi(3),
            mass: a.mass * s.powi(3),
            center_of_mass: a.center_of_mass * s,
            inertia: a.inertia * s.powi(5),
        };
        close(&expected, &b, s);
    }
}

#[test]
fn eight_octants_recompose_the_cube() {
    let whole = mesh_mass_properties(&unit_cube(), 2.5).unwrap();
    let octant = mesh_mass_properties(&MeshData::cuboid(Vec3::repeat(0.25)), 2.5).unwrap();
    let parts: Vec<(InertialProperties, Pose)> = (0..8)
        .map(|i| {
            let sign = |bit: usize| if i & bit == 0 { -0.25 } else { 0.25 };
            let pose = Pose::from_translation(Vec3::new(sign(1), sign(2), sign(4)));
            (
                InertialProperties::new(octant.mass, octant.center_of_mass, octant.inertia),
                pose,
            )
        })
        .collect();
    let sum = consolidate_inertia(&parts).unwrap();
    assert!(rel(sum.mass, whole.mass) < 1e-9);
    assert!(sum.center_of_mass.norm() < 1e-9);
    assert!(relative_matrix_error(&sum.inertia, &whole.inertia) < 1e-9);
}

/// A chain of bodies nested one inside the next, joined by a random mix of
/// fixed and revolute joints, with masses that are multiples of 1/64.
fn random_chain(rng: &mut ChaCha8Rng, n: usize) -> SceneWorld {
    let mut next: Option<(SceneBody, SceneJoint)> = None;
    for i in (0..n).rev() {
        let pose = Pose::new(
            Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ),
            UnitQuaternion::from_euler_angles(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-3.0..3.0),
            ),
        );
        let mut b = SceneBody::new(&format!("b{i}")).with_pose(pose);
        let mass = rng.gen_range(1..1000) as f64 / 64.0;
        b.inertial = Some(InertialProperties::diagonal(
            mass,
            Vec3::new(0.0, 0.0, 0.1),
            Vec3::new(0.02, 0.03, 0.04),
        ));
        if let Some((child, joint)) = next.take() {
            b.children.push(child);
            b.joints.push(joint);
        }
        if i > 0 {
            let kind = if rng.gen_bool(0.6) {
                JointType::Fixed
            } else {
                JointType::Revolute
            };
            let mut j = SceneJoint::new(&format!("j{i}"), kind, &format!("b{}", i - 1), &format!("b{i}"));
            j.axis = kind.has_axis().then(Vec3::z);
            next = Some((b, j));
        } else {
            return SceneWorld::with_bodies("chain", vec![b]);
        }
    }
    unreachable!()
}

fn total_mass(w: &SceneWorld) -> f64 {
    w.all_bodies()
        .iter()
        .filter_map(|(b, _)| b.inertial.map(|i| i.mass))
        .sum()
}

#[test]
fn consolidation_conserves_mass_exactly_on_random_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let n = rng.gen_range(2..12);
        let mut w = random_chain(&mut rng, n);
        let before = total_mass(&w);
        let report = refine_world(
            &mut w,
            &RefineOptions {
                consolidate: true,
                ..Default::default()
            },
        );
        assert_eq!(total_mass(&w), before);
        let fixed = w
            .all_joints()
            .iter()
            .filter(|j| j.joint_type == JointType::Fixed)
            .count();
        assert_eq!(report.consolidated, fixed);
    }
}
