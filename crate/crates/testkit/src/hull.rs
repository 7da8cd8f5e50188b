//! Convex hulls by exhaustive facet search.
//!
//! A triangle of input points is a hull facet when every other point lies
//! on one side of its plane. With `n` points this is O(n⁴), which is fine
//! for the 20-point hulls the tests use. Points must be in general position
//! (no four coplanar on the hull), which random points are with probability one.

use rand::Rng;
use scenegraph_core::math::Vec3;
use scenegraph_core::MeshData;

/// Closed, outward-oriented hull of `points`. Points strictly inside the hull
/// are dropped from the vertex list.
pub fn convex_hull(points: &[Vec3]) -> MeshData {
    let n = points.len();
    let extent = points.iter().map(|p| p.norm()).fold(0.0, f64::max).max(1.0);
    let eps = 1e-12 * extent;
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let normal = (points[j] - points[i]).cross(&(points[k] - points[i]));
                if normal.norm() <= eps {
                    continue;
                }
                let (mut above, mut below) = (false, false);
                for (m, p) in points.iter().enumerate() {
                    if m == i || m == j || m == k {
                        continue;
                    }
                    let side = normal.dot(&(p - points[i]));
                    above |= side > eps;
                    below |= side < -eps;
                }
                match (above, below) {
                    (false, true) => faces.push([i, j, k]),
                    (true, false) => faces.push([i, k, j]),
                    _ => {}
                }
            }
        }
    }
    let mut index = vec![u32::MAX; n];
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(faces.len());
    for f in faces {
        let mut t = [0u32; 3];
        for (slot, &v) in t.iter_mut().zip(&f) {
            if index[v] == u32::MAX {
                index[v] = vertices.len() as u32;
                vertices.push(points[v]);
            }
            *slot = index[v];
        }
        triangles.push(t);
    }
    MeshData::new(vertices, triangles)
}

/// `n` points on a random ellipsoid around a random center, so that every
/// point is a hull vertex.
pub fn random_convex_points(rng: &mut impl Rng, n: usize) -> Vec<Vec3> {
    let radii = Vec3::new(
        rng.gen_range(0.3..2.0),
        rng.gen_range(0.3..2.0),
        rng.gen_range(0.3..2.0),
    );
    let center = Vec3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    );
    (0..n)
        .map(|_| loop {
            let v = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let r = v.norm();
            if r > 0.1 && r <= 1.0 {
                break center + (v / r).component_mul(&radii);
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_corners_give_twelve_facets() {
        // Jitter the corners so no four points share a plane.
        let pts: Vec<Vec3> = (0..8)
            .map(|i| {
                let f = i as f64;
                let corner = Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64);
                corner + 0.01 * Vec3::new((1.3 * f).sin(), (2.1 * f).cos(), (3.7 * f).sin())
            })
            .collect();
        let hull = convex_hull(&pts);
        assert_eq!(hull.vertices.len(), 8);
        // A simplicial polytope with V vertices has 2V - 4 facets.
        assert_eq!(hull.triangles.len(), 12);
    }

    #[test]
    fn interior_points_are_dropped() {
        let mut pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        pts.push(Vec3::new(0.1, 0.1, 0.1));
        let hull = convex_hull(&pts);
        assert_eq!((hull.vertices.len(), hull.triangles.len()), (4, 4));
    }
}
