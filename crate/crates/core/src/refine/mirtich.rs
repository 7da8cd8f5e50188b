//! Exact mass properties of closed triangle meshes.
//!
//! Volume integrals are reduced to face integrals by the divergence theorem
//! and then to line integrals over the projection of each face onto its
//! dominant coordinate plane (Mirtich, 1996). The result is exact up to
//! floating-point rounding for any closed, consistently oriented mesh.

use crate::math::{parallel_axis_term, Mat3, Vec3};
use crate::scene::MeshData;

use super::RefineError;

/// Raw integrals over the enclosed volume.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VolumeIntegrals {
    /// ∫ 1
    pub t0: f64,
    /// ∫ x, ∫ y, ∫ z
    pub t1: Vec3,
    /// ∫ x², ∫ y², ∫ z²
    pub t2: Vec3,
    /// ∫ xy, ∫ yz, ∫ zx
    pub tp: Vec3,
}

/// Mass properties with the inertia tensor taken about the center of mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassProperties {
    pub volume: f64,
    pub mass: f64,
    pub center_of_mass: Vec3,
    pub inertia: Mat3,
}

#[derive(Default)]
struct ProjectionIntegrals {
    p1: f64,
    pa: f64,
    pb: f64,
    paa: f64,
    pab: f64,
    pbb: f64,
    paaa: f64,
    paab: f64,
    pabb: f64,
    pbbb: f64,
}

fn projection_integrals(tri: &[Vec3; 3], a: usize, b: usize) -> ProjectionIntegrals {
    let mut p = ProjectionIntegrals::default();
    for i in 0..3 {
        let (v0, v1) = (tri[i], tri[(i + 1) % 3]);
        let (a0, b0, a1, b1) = (v0[a], v0[b], v1[a], v1[b]);
        let (da, db) = (a1 - a0, b1 - b0);
        let (a0_2, b0_2, a1_2, b1_2) = (a0 * a0, b0 * b0, a1 * a1, b1 * b1);
        let (a0_3, b0_3, a1_3, b1_3) = (a0_2 * a0, b0_2 * b0, a1_2 * a1, b1_2 * b1);
        let (a0_4, b0_4) = (a0_3 * a0, b0_3 * b0);

        let c1 = a1 + a0;
        let ca = a1 * c1 + a0_2;
        let caa = a1 * ca + a0_3;
        let caaa = a1 * caa + a0_4;
        let cb = b1 * (b1 + b0) + b0_2;
        let cbb = b1 * cb + b0_3;
        let cbbb = b1 * cbb + b0_4;
        let cab = 3.0 * a1_2 + 2.0 * a1 * a0 + a0_2;
        let kab = a1_2 + 2.0 * a1 * a0 + 3.0 * a0_2;
        let caab = a0 * cab + 4.0 * a1_3;
        let kaab = a1 * kab + 4.0 * a0_3;
        let cabb = 4.0 * b1_3 + 3.0 * b1_2 * b0 + 2.0 * b1 * b0_2 + b0_3;
        let kabb = b1_3 + 2.0 * b1_2 * b0 + 3.0 * b1 * b0_2 + 4.0 * b0_3;

        p.p1 += db * c1;
        p.pa += db * ca;
        p.paa += db * caa;
        p.paaa += db * caaa;
        p.pb += da * cb;
        p.pbb += da * cbb;
        p.pbbb += da * cbbb;
        p.pab += db * (b1 * cab + b0 * kab);
        p.paab += db * (b1 * caab + b0 * kaab);
        p.pabb += da * (a1 * cabb + a0 * kabb);
    }
    p.p1 /= 2.0;
    p.pa /= 6.0;
    p.paa /= 12.0;
    p.paaa /= 20.0;
    p.pb /= -6.0;
    p.pbb /= -12.0;
    p.pbbb /= -20.0;
    p.pab /= 24.0;
    p.paab /= 60.0;
    p.pabb /= -60.0;
    p
}

/// Accumulates the volume integrals of a closed, outward-oriented mesh.
pub fn volume_integrals(mesh: &MeshData) -> VolumeIntegrals {
    volume_integrals_shifted(mesh, &Vec3::zeros())
}

fn volume_integrals_shifted(mesh: &MeshData, shift: &Vec3) -> VolumeIntegrals {
    let mut t0 = 0.0;
    let mut t1 = [0.0; 3];
    let mut t2 = [0.0; 3];
    let mut tp = [0.0; 3];
    for t in &mesh.triangles {
        let tri = t.map(|i| mesh.vertices[i as usize] - shift);
        let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
        let len = n.norm();
        if len == 0.0 || !len.is_finite() {
            continue;
        }
        let n = n / len;
        let (nx, ny, nz) = (n.x.abs(), n.y.abs(), n.z.abs());
        let c = if nx > ny && nx > nz {
            0
        } else if ny > nz {
            1
        } else {
            2
        };
        let a = (c + 1) % 3;
        let b = (a + 1) % 3;

        let p = projection_integrals(&tri, a, b);
        let w = -n.dot(&tri[0]);
        let k1 = 1.0 / n[c];
        let k2 = k1 * k1;
        let k3 = k2 * k1;
        let k4 = k3 * k1;
        let (na, nb) = (n[a], n[b]);

        let fa = k1 * p.pa;
        let fb = k1 * p.pb;
        let fc = -k2 * (na * p.pa + nb * p.pb + w * p.p1);
        let faa = k1 * p.paa;
        let fbb = k1 * p.pbb;
        let fcc = k3
            * (na * na * p.paa
                + 2.0 * na * nb * p.pab
                + nb * nb * p.pbb
                + w * (2.0 * (na * p.pa + nb * p.pb) + w * p.p1));
        let faaa = k1 * p.paaa;
        let fbbb = k1 * p.pbbb;
        let fccc = -k4
            * (na * na * na * p.paaa
                + 3.0 * na * na * nb * p.paab
                + 3.0 * na * nb * nb * p.pabb
                + nb * nb * nb * p.pbbb
                + 3.0 * w * (na * na * p.paa + 2.0 * na * nb * p.pab + nb * nb * p.pbb)
                + w * w * (3.0 * (na * p.pa + nb * p.pb) + w * p.p1));
        let faab = k1 * p.paab;
        let fbbc = -k2 * (na * p.pabb + nb * p.pbbb + w * p.pbb);
        let fcca = k3
            * (na * na * p.paaa
                + 2.0 * na * nb * p.paab
                + nb * nb * p.pabb
                + w * (2.0 * (na * p.paa + nb * p.pab) + w * p.pa));

        t0 += n.x
            * if a == 0 {
                fa
            } else if b == 0 {
                fb
            } else {
                fc
            };
        t1[a] += n[a] * faa;
        t1[b] += n[b] * fbb;
        t1[c] += n[c] * fcc;
        t2[a] += n[a] * faaa;
        t2[b] += n[b] * fbbb;
        t2[c] += n[c] * fccc;
        tp[a] += n[a] * faab;
        tp[b] += n[b] * fbbc;
        tp[c] += n[c] * fcca;
    }
    VolumeIntegrals {
        t0,
        t1: Vec3::from(t1) / 2.0,
        t2: Vec3::from(t2) / 3.0,
        tp: Vec3::from(tp) / 2.0,
    }
}

/// Mass, center of mass and central inertia of a homogeneous closed mesh.
///
/// The mesh must be closed and consistently wound with outward normals.
pub fn mesh_mass_properties(mesh: &MeshData, density: f64) -> Result<MassProperties, RefineError> {
    mesh.check_indices()?;
    let mut probe = mesh.clone();
    let check = probe.validate()?;
    if check.boundary_edges > 0 || check.inconsistent_edges > 0 {
        return Err(RefineError::OpenMesh {
            boundary_edges: check.boundary_edges,
            inconsistent_edges: check.inconsistent_edges,
        });
    }
    // Integrate about the bounding-box center to keep the second moments small.
    let (lo, hi) = mesh.bounding_box().ok_or(RefineError::DegenerateVolume(0.0))?;
    let shift = (lo + hi) / 2.0;
    let vi = volume_integrals_shifted(mesh, &shift);
    let scale = (hi - lo).norm().powi(3);
    if vi.t0 < 0.0 && vi.t0.abs() > 1e-12 * scale {
        return Err(RefineError::InvertedMesh(vi.t0));
    }
    if !(vi.t0 > 1e-12 * scale) {
        return Err(RefineError::DegenerateVolume(vi.t0));
    }
    let mass = density * vi.t0;
    let r = vi.t1 / vi.t0;
    let mut j = Mat3::zeros();
    j[(0, 0)] = density * (vi.t2.y + vi.t2.z);
    j[(1, 1)] = density * (vi.t2.z + vi.t2.x);
    j[(2, 2)] = density * (vi.t2.x + vi.t2.y);
    j[(0, 1)] = -density * vi.tp.x;
    j[(1, 2)] = -density * vi.tp.y;
    j[(0, 2)] = -density * vi.tp.z;
    j[(1, 0)] = j[(0, 1)];
    j[(2, 1)] = j[(1, 2)];
    j[(2, 0)] = j[(0, 2)];
    let inertia = j - parallel_axis_term(mass, &r);
    Ok(MassProperties {
        volume: vi.t0,
        mass,
        center_of_mass: r + shift,
        inertia: (inertia + inertia.transpose()) / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_is_exact() {
        let cube = MeshData::cuboid(Vec3::new(0.5, 0.5, 0.5));
        let mp = mesh_mass_properties(&cube, 1.0).unwrap();
        assert!((mp.mass - 1.0).abs() < 1e-12);
        assert!(mp.center_of_mass.norm() < 1e-12);
        let expected = Mat3::from_diagonal_element(1.0 / 6.0);
        assert!((mp.inertia - expected).abs().max() < 1e-12);
    }

    #[test]
    fn offset_box_keeps_central_inertia() {
        let b = MeshData::cuboid(Vec3::new(0.5, 1.0, 1.5)).translated(&Vec3::new(3.0, -2.0, 7.0));
        let mp = mesh_mass_properties(&b, 2.0).unwrap();
        let m = 2.0 * 1.0 * 2.0 * 3.0;
        assert!((mp.mass - m).abs() < 1e-12);
        assert!((mp.center_of_mass - Vec3::new(3.0, -2.0, 7.0)).norm() < 1e-12);
        let ixx = m / 12.0 * (4.0 + 9.0);
        assert!((mp.inertia[(0, 0)] - ixx).abs() < 1e-11);
        assert!(mp.inertia[(0, 1)].abs() < 1e-11);
    }

    #[test]
    fn rejects_open_and_inverted_meshes() {
        let mut open = MeshData::cuboid(Vec3::new(1.0, 1.0, 1.0));
        open.triangles.pop();
        assert!(matches!(
            mesh_mass_properties(&open, 1.0),
            Err(RefineError::OpenMesh { boundary_edges: 3, .. })
        ));
        let mut inverted = MeshData::cuboid(Vec3::new(1.0, 1.0, 1.0));
        for t in &mut inverted.triangles {
            t.swap(1, 2);
        }
        assert!(matches!(
            mesh_mass_properties(&inverted, 1.0),
            Err(RefineError::InvertedMesh(_))
        ));
    }
}
