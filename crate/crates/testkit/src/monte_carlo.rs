//! Mass properties by uniform sampling of the bounding box.
//!
//! A sample is inside the mesh when a ray from it along +x crosses the
//! surface an odd number of times. Triangles are bucketed by their extent in
//! the y-z plane so each ray only visits the triangles it can hit. The mesh
//! only needs to be closed; convexity is not assumed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenegraph_core::math::{Mat3, Vec3};
use scenegraph_core::MeshData;

/// Unit-density estimate; the inertia tensor is about the center of mass.
#[derive(Clone, Copy, Debug)]
pub struct MonteCarloEstimate {
    pub volume: f64,
    pub center_of_mass: Vec3,
    pub inertia: Mat3,
    pub inside: u64,
    pub samples: u64,
}

/// A triangle projected on the y-z plane, with the x of its plane as an
/// affine function of (y, z).
struct Facet {
    y: [f64; 3],
    z: [f64; 3],
    /// x = a + b·y + c·z
    a: f64,
    b: f64,
    c: f64,
}

impl Facet {
    fn new(p: [Vec3; 3]) -> Option<Self> {
        let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
        if n.x == 0.0 {
            return None;
        }
        let b = -n.y / n.x;
        let c = -n.z / n.x;
        Some(Self {
            y: [p[0].y, p[1].y, p[2].y],
            z: [p[0].z, p[1].z, p[2].z],
            a: p[0].x - b * p[0].y - c * p[0].z,
            b,
            c,
        })
    }

    fn covers(&self, y: f64, z: f64) -> bool {
        let edge =
            |i: usize, j: usize| (self.y[j] - self.y[i]) * (z - self.z[i]) - (self.z[j] - self.z[i]) * (y - self.y[i]);
        let (d0, d1, d2) = (edge(0, 1), edge(1, 2), edge(2, 0));
        (d0 > 0.0 && d1 > 0.0 && d2 > 0.0) || (d0 < 0.0 && d1 < 0.0 && d2 < 0.0)
    }
}

const BINS: usize = 128;

struct Grid {
    lo: Vec3,
    hi: Vec3,
    cells: Vec<Vec<usize>>,
    facets: Vec<Facet>,
}

impl Grid {
    fn new(mesh: &MeshData) -> Self {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &mesh.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        let mut grid = Self {
            lo,
            hi,
            cells: vec![Vec::new(); BINS * BINS],
            facets: Vec::new(),
        };
        for t in &mesh.triangles {
            let p = t.map(|i| mesh.vertices[i as usize]);
            let Some(f) = Facet::new(p) else { continue };
            let (ylo, yhi) = (
                f.y.iter().copied().fold(f64::INFINITY, f64::min),
                f.y.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            );
            let (zlo, zhi) = (
                f.z.iter().copied().fold(f64::INFINITY, f64::min),
                f.z.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            );
            let (y0, y1) = (grid.bin(ylo, 1), grid.bin(yhi, 1));
            let (z0, z1) = (grid.bin(zlo, 2), grid.bin(zhi, 2));
            let id = grid.facets.len();
            grid.facets.push(f);
            for by in y0..=y1 {
                for bz in z0..=z1 {
                    grid.cells[by * BINS + bz].push(id);
                }
            }
        }
        grid
    }

    fn bin(&self, v: f64, axis: usize) -> usize {
        let span = self.hi[axis] - self.lo[axis];
        if span <= 0.0 {
            return 0;
        }
        (((v - self.lo[axis]) / span * BINS as f64) as usize).min(BINS - 1)
    }

    fn inside(&self, p: &Vec3) -> bool {
        let cell = &self.cells[self.bin(p.y, 1) * BINS + self.bin(p.z, 2)];
        let mut crossings = 0u32;
        for &id in cell {
            let f = &self.facets[id];
            if f.covers(p.y, p.z) && f.a + f.b * p.y + f.c * p.z > p.x {
                crossings += 1;
            }
        }
        crossings % 2 == 1
    }
}

/// Estimates volume, center of mass and inertia of a closed mesh from
/// `samples` uniform points, reproducibly for a given `seed`.
pub fn monte_carlo_mass_properties(mesh: &MeshData, samples: u64, seed: u64) -> MonteCarloEstimate {
    let grid = Grid::new(mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (grid.lo, grid.hi);
    let center = (lo + hi) / 2.0;
    // Sums of 1, r and r rᵀ over inside points, relative to the box center.
    let mut count = 0u64;
    let mut first = Vec3::zeros();
    let mut second = Mat3::zeros();
    for _ in 0..samples {
        let p = Vec3::new(
            rng.gen_range(lo.x..hi.x),
            rng.gen_range(lo.y..hi.y),
            rng.gen_range(lo.z..hi.z),
        );
        if grid.inside(&p) {
            let r = p - center;
            count += 1;
            first += r;
            second += r * r.transpose();
        }
    }
    let box_volume = (hi - lo).product();
    let volume = box_volume * count as f64 / samples as f64;
    if count == 0 {
        return MonteCarloEstimate {
            volume,
            center_of_mass: center,
            inertia: Mat3::zeros(),
            inside: 0,
            samples,
        };
    }
    let mean = first / count as f64;
    let covariance = second / count as f64 - mean * mean.transpose();
    let inertia = volume * (Mat3::identity() * covariance.trace() - covariance);
    MonteCarloEstimate {
        volume,
        center_of_mass: center + mean,
        inertia,
        inside: count,
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_estimate_is_close_to_the_closed_form() {
        let mesh = MeshData::cuboid(Vec3::new(1.0, 0.5, 0.25));
        let est = monte_carlo_mass_properties(&mesh, 200_000, 7);
        // Samples fill the whole bounding box, so every one is inside.
        assert_eq!(est.inside, est.samples);
        assert!((est.volume - 1.0).abs() < 1e-12);
        let m = 1.0;
        let ixx = m / 12.0 * (1.0 + 0.25);
        assert!((est.inertia[(0, 0)] - ixx).abs() / ixx < 0.01);
    }

    #[test]
    fn tetrahedron_volume_converges() {
        let mesh = MeshData::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()],
            vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        );
        let est = monte_carlo_mass_properties(&mesh, 400_000, 11);
        assert!((est.volume - 1.0 / 6.0).abs() < 0.005);
        assert!((est.center_of_mass - Vec3::repeat(0.25)).norm() < 0.005);
    }
}
