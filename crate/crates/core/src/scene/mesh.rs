//! Triangle meshes: validation, generators for emulated primitives, and OBJ/STL I/O.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::math::Vec3;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("triangle {triangle} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange { triangle: usize, index: u32, count: usize },
    #[error("cannot read mesh `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed {format} mesh `{path}` at line {line}: {message}")]
    Malformed {
        format: &'static str,
        path: String,
        line: usize,
        message: String,
    },
    #[error("unsupported mesh format `{0}` (expected .obj or .stl)")]
    UnsupportedFormat(String),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeshData {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Per-vertex texture coordinates; empty when the mesh is untextured.
    pub uvs: Vec<[f64; 2]>,
    /// Source file and format, when the mesh was loaded from disk.
    pub provenance: Option<MeshProvenance>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshProvenance {
    pub path: String,
    pub format: String,
}

/// Result of [`MeshData::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeshCheck {
    pub removed_degenerate: usize,
    /// Undirected edges not shared by exactly two triangles.
    pub boundary_edges: usize,
    /// Directed edges used twice (neighbouring faces disagree on winding).
    pub inconsistent_edges: usize,
}

impl MeshCheck {
    pub fn is_closed_manifold(&self) -> bool {
        self.boundary_edges == 0 && self.inconsistent_edges == 0
    }
}

impl MeshData {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            triangles,
            uvs: Vec::new(),
            provenance: None,
        }
    }

    pub fn check_indices(&self) -> Result<(), MeshError> {
        let count = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            for &index in tri {
                if index as usize >= count {
                    return Err(MeshError::IndexOutOfRange {
                        triangle: t,
                        index,
                        count,
                    });
                }
            }
        }
        Ok(())
    }

    /// Drops zero-area triangles and reports manifoldness.
    pub fn validate(&mut self) -> Result<MeshCheck, MeshError> {
        self.check_indices()?;
        let before = self.triangles.len();
        let vertices = &self.vertices;
        self.triangles.retain(|t| {
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            (b - a).cross(&(c - a)).norm() > 0.0
        });
        let removed_degenerate = before - self.triangles.len();
        let (boundary_edges, inconsistent_edges) = edge_census(&self.triangles);
        Ok(MeshCheck {
            removed_degenerate,
            boundary_edges,
            inconsistent_edges,
        })
    }

    pub fn is_closed_manifold(&self) -> bool {
        let (b, i) = edge_census(&self.triangles);
        b == 0 && i == 0
    }

    pub fn scaled(&self, scale: &Vec3) -> MeshData {
        let mut out = self.clone();
        for v in &mut out.vertices {
            *v = v.component_mul(scale);
        }
        // A reflection flips every triangle's orientation.
        if scale.x * scale.y * scale.z < 0.0 {
            for t in &mut out.triangles {
                t.swap(1, 2);
            }
        }
        out
    }

    pub fn translated(&self, offset: &Vec3) -> MeshData {
        let mut out = self.clone();
        for v in &mut out.vertices {
            *v += offset;
        }
        out
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(
            self.vertices
                .iter()
                .fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v))),
        )
    }

    /// Every vertex lies inside (within `1e-8 ×` bounding diagonal) every face plane.
    pub fn is_convex(&self) -> bool {
        let Some((lo, hi)) = self.bounding_box() else {
            return true;
        };
        let tol = 1e-8 * (hi - lo).norm();
        self.triangles.iter().all(|t| {
            let [a, b, c] = t.map(|i| self.vertices[i as usize]);
            let n = (b - a).cross(&(c - a));
            let len = n.norm();
            if len == 0.0 {
                return true;
            }
            let n = n / len;
            self.vertices.iter().all(|v| n.dot(&(v - a)) <= tol)
        })
    }

    /// Axis-aligned box centred at the origin with outward-facing triangles.
    pub fn cuboid(half: Vec3) -> MeshData {
        let mut vertices = Vec::with_capacity(8);
        for i in 0..8 {
            vertices.push(Vec3::new(
                if i & 1 == 0 { -half.x } else { half.x },
                if i & 2 == 0 { -half.y } else { half.y },
                if i & 4 == 0 { -half.z } else { half.z },
            ));
        }
        let triangles = vec![
            [0, 2, 3],
            [0, 3, 1], // -z
            [4, 5, 7],
            [4, 7, 6], // +z
            [0, 1, 5],
            [0, 5, 4], // -y
            [2, 6, 7],
            [2, 7, 3], // +y
            [0, 4, 6],
            [0, 6, 2], // -x
            [1, 3, 7],
            [1, 7, 5], // +x
        ];
        MeshData::new(vertices, triangles)
    }

    /// Icosahedron subdivided `subdivisions` times and projected onto the sphere.
    pub fn icosphere(radius: f64, subdivisions: u32) -> MeshData {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vec3> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
        let mut triangles: Vec<[u32; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
            let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
                let key = (a.min(b), a.max(b));
                *midpoints.entry(key).or_insert_with(|| {
                    let m = ((vertices[a as usize] + vertices[b as usize]) / 2.0).normalize();
                    vertices.push(m);
                    (vertices.len() - 1) as u32
                })
            };
            let mut next = Vec::with_capacity(triangles.len() * 4);
            for [a, b, c] in triangles {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            triangles = next;
        }
        for v in &mut vertices {
            *v *= radius;
        }
        MeshData::new(vertices, triangles)
    }

    /// Cylinder along Z with hemispherical caps (MJCF capsule emulation).
    ///
    /// `segments` around the axis, `rings` latitude rings per hemisphere
    /// (including the equator). Vertex count is `2 * rings * segments + 2`.
    pub fn capsule(radius: f64, half_length: f64, segments: u32, rings: u32) -> MeshData {
        let segments = segments.max(3);
        let rings = rings.max(1);
        let mut vertices = vec![Vec3::new(0.0, 0.0, half_length + radius)];
        // Top hemisphere: rings from near the pole down to the equator.
        let mut ring_z = Vec::new();
        for r in 1..=rings {
            let polar = (r as f64 / rings as f64) * PI / 2.0;
            ring_z.push((polar.sin(), half_length + radius * polar.cos()));
        }
        for r in (1..=rings).rev() {
            let polar = (r as f64 / rings as f64) * PI / 2.0;
            ring_z.push((polar.sin(), -half_length - radius * polar.cos()));
        }
        for &(s, z) in &ring_z {
            for k in 0..segments {
                let phi = 2.0 * PI * k as f64 / segments as f64;
                vertices.push(Vec3::new(radius * s * phi.cos(), radius * s * phi.sin(), z));
            }
        }
        vertices.push(Vec3::new(0.0, 0.0, -half_length - radius));
        let bottom = (vertices.len() - 1) as u32;
        let ring = |r: u32, k: u32| 1 + r * segments + (k % segments);
        let mut triangles = Vec::new();
        for k in 0..segments {
            triangles.push([0, ring(0, k), ring(0, k + 1)]);
        }
        let ring_count = ring_z.len() as u32;
        for r in 0..ring_count - 1 {
            for k in 0..segments {
                let (a, b) = (ring(r, k), ring(r, k + 1));
                let (c, d) = (ring(r + 1, k), ring(r + 1, k + 1));
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        for k in 0..segments {
            triangles.push([bottom, ring(ring_count - 1, k + 1), ring(ring_count - 1, k)]);
        }
        MeshData::new(vertices, triangles)
    }

    /// Vertical prism over a simple polygon (counter-clockwise seen from +Z).
    pub fn prism(polygon: &[[f64; 2]], z_bottom: f64, z_top: f64) -> MeshData {
        let mut polygon = polygon.to_vec();
        if signed_area(&polygon) < 0.0 {
            polygon.reverse();
        }
        let polygon = polygon.as_slice();
        let n = polygon.len() as u32;
        let mut vertices = Vec::with_capacity(polygon.len() * 2);
        for &[x, y] in polygon {
            vertices.push(Vec3::new(x, y, z_bottom));
        }
        for &[x, y] in polygon {
            vertices.push(Vec3::new(x, y, z_top));
        }
        let mut triangles = Vec::new();
        for [a, b, c] in triangulate_polygon(polygon) {
            triangles.push([a + n, b + n, c + n]);
            triangles.push([a, c, b]);
        }
        for i in 0..n {
            let j = (i + 1) % n;
            triangles.push([i, j, j + n]);
            triangles.push([i, j + n, i + n]);
        }
        MeshData::new(vertices, triangles)
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for uv in &self.uvs {
            let _ = writeln!(out, "vt {} {}", uv[0], uv[1]);
        }
        let textured = !self.uvs.is_empty();
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| i + 1);
            if textured {
                let _ = writeln!(out, "f {a}/{a} {b}/{b} {c}/{c}");
            } else {
                let _ = writeln!(out, "f {a} {b} {c}");
            }
        }
        out
    }

    pub fn parse_obj(text: &str, path: &str) -> Result<MeshData, MeshError> {
        let malformed = |line: usize, message: String| MeshError::Malformed {
            format: "OBJ",
            path: path.to_string(),
            line,
            message,
        };
        let mut mesh = MeshData::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("v") => {
                    let coords: Vec<f64> = parts
                        .take(3)
                        .map(str::parse)
                        .collect::<Result<_, _>>()
                        .map_err(|e| malformed(lineno + 1, format!("{e}")))?;
                    if coords.len() != 3 {
                        return Err(malformed(lineno + 1, "vertex needs 3 coordinates".into()));
                    }
                    mesh.vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for p in parts {
                        let first = p.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|e| malformed(lineno + 1, format!("{e}")))?;
                        let resolved = if i < 0 { mesh.vertices.len() as i64 + i } else { i - 1 };
                        if resolved < 0 {
                            return Err(malformed(lineno + 1, format!("bad index {i}")));
                        }
                        idx.push(resolved as u32);
                    }
                    if idx.len() < 3 {
                        return Err(malformed(lineno + 1, "face needs 3 vertices".into()));
                    }
                    for k in 1..idx.len() - 1 {
                        mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        mesh.provenance = Some(MeshProvenance {
            path: path.to_string(),
            format: "obj".into(),
        });
        Ok(mesh)
    }

    pub fn parse_stl(bytes: &[u8], path: &str) -> Result<MeshData, MeshError> {
        let is_ascii = bytes.starts_with(b"solid") && std::str::from_utf8(bytes).map_or(false, |s| s.contains("facet"));
        let mut mesh = MeshData::default();
        let mut lookup: HashMap<[u64; 3], u32> = HashMap::new();
        let mut push = |mesh: &mut MeshData, v: Vec3| -> u32 {
            let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
            *lookup.entry(key).or_insert_with(|| {
                mesh.vertices.push(v);
                (mesh.vertices.len() - 1) as u32
            })
        };
        if is_ascii {
            let text = std::str::from_utf8(bytes).unwrap_or("");
            let mut tri = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let mut parts = line.split_whitespace();
                if parts.next() == Some("vertex") {
                    let c: Vec<f64> =
                        parts
                            .map(str::parse)
                            .collect::<Result<_, _>>()
                            .map_err(|e| MeshError::Malformed {
                                format: "STL",
                                path: path.to_string(),
                                line: lineno + 1,
                                message: format!("{e}"),
                            })?;
                    if c.len() != 3 {
                        return Err(MeshError::Malformed {
                            format: "STL",
                            path: path.to_string(),
                            line: lineno + 1,
                            message: "vertex needs 3 coordinates".into(),
                        });
                    }
                    tri.push(push(&mut mesh, Vec3::new(c[0], c[1], c[2])));
                    if tri.len() == 3 {
                        mesh.triangles.push([tri[0], tri[1], tri[2]]);
                        tri.clear();
                    }
                }
            }
        } else {
            if bytes.len() < 84 {
                return Err(MeshError::Malformed {
                    format: "STL",
                    path: path.to_string(),
                    line: 0,
                    message: "truncated header".into(),
                });
            }
            let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
            if bytes.len() < 84 + count * 50 {
                return Err(MeshError::Malformed {
                    format: "STL",
                    path: path.to_string(),
                    line: 0,
                    message: format!("expected {count} triangles"),
                });
            }
            let f = |o: usize| f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as f64;
            for t in 0..count {
                let base = 84 + t * 50 + 12;
                let mut ids = [0u32; 3];
                for (k, id) in ids.iter_mut().enumerate() {
                    let o = base + k * 12;
                    *id = push(&mut mesh, Vec3::new(f(o), f(o + 4), f(o + 8)));
                }
                mesh.triangles.push(ids);
            }
        }
        mesh.provenance = Some(MeshProvenance {
            path: path.to_string(),
            format: "stl".into(),
        });
        Ok(mesh)
    }

    pub fn load(path: &Path) -> Result<MeshData, MeshError> {
        let display = path.display().to_string();
        let bytes = std::fs::read(path).map_err(|source| MeshError::Io {
            path: display.clone(),
            source,
        })?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        match ext.as_str() {
            "obj" => MeshData::parse_obj(&String::from_utf8_lossy(&bytes), &display),
            "stl" => MeshData::parse_stl(&bytes, &display),
            other => Err(MeshError::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Resolves a mesh reference as written in a source document.
///
/// `package://pkg/rest` and `model://pkg/rest` are looked up under
/// `mesh_root` (with and without the package directory) and then `base_dir`;
/// relative paths are tried against `base_dir` then `mesh_root`. The first
/// existing candidate wins; otherwise the first candidate is returned.
pub fn resolve_mesh_path(reference: &str, base_dir: Option<&Path>, mesh_root: Option<&Path>) -> PathBuf {
    let mut candidates: Vec<PathBuf> = Vec::new();
    if let Some(rest) = reference.strip_prefix("file://") {
        candidates.push(PathBuf::from(rest));
    } else if let Some(rest) = reference
        .strip_prefix("package://")
        .or_else(|| reference.strip_prefix("model://"))
    {
        let without_pkg = rest.split_once('/').map(|(_, r)| r).unwrap_or(rest);
        for root in mesh_root.into_iter().chain(base_dir) {
            candidates.push(root.join(rest));
            candidates.push(root.join(without_pkg));
        }
        if candidates.is_empty() {
            candidates.push(PathBuf::from(without_pkg));
        }
    } else if Path::new(reference).is_absolute() {
        candidates.push(PathBuf::from(reference));
    } else {
        for root in base_dir.into_iter().chain(mesh_root) {
            candidates.push(root.join(reference));
        }
        if candidates.is_empty() {
            candidates.push(PathBuf::from(reference));
        }
    }
    candidates
        .iter()
        .find(|c| c.exists())
        .cloned()
        .unwrap_or_else(|| candidates.swap_remove(0))
}

fn edge_census(triangles: &[[u32; 3]]) -> (usize, usize) {
    let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
        }
    }
    let mut undirected: HashMap<(u32, u32), u32> = HashMap::new();
    let mut inconsistent = 0;
    for (&(a, b), &n) in &directed {
        *undirected.entry((a.min(b), a.max(b))).or_default() += n;
        if n > 1 {
            inconsistent += 1;
        }
    }
    let boundary = undirected.values().filter(|&&n| n != 2).count();
    (boundary, inconsistent)
}

fn signed_area(polygon: &[[f64; 2]]) -> f64 {
    let n = polygon.len();
    (0..n)
        .map(|i| {
            let (a, b) = (polygon[i], polygon[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Ear-clipping triangulation of a simple polygon; output is counter-clockwise.
pub fn triangulate_polygon(polygon: &[[f64; 2]]) -> Vec<[u32; 3]> {
    let n = polygon.len();
    if n < 3 {
        return Vec::new();
    }
    let area = signed_area(polygon);
    let mut idx: Vec<u32> = (0..n as u32).collect();
    if area < 0.0 {
        idx.reverse();
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut out = Vec::new();
    let mut guard = 0;
    while idx.len() > 3 && guard < n * n {
        guard += 1;
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let (ia, ib, ic) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            let (a, b, c) = (polygon[ia as usize], polygon[ib as usize], polygon[ic as usize]);
            if cross(a, b, c) <= 0.0 {
                continue;
            }
            let contains_other = idx.iter().any(|&j| {
                if j == ia || j == ib || j == ic {
                    return false;
                }
                let p = polygon[j as usize];
                cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
            });
            if contains_other {
                continue;
            }
            out.push([ia, ib, ic]);
            idx.remove(i);
            clipped = true;
            break;
        }
        if !clipped {
            break;
        }
    }
    if idx.len() == 3 {
        out.push([idx[0], idx[1], idx[2]]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_meshes_are_closed() {
        for mesh in [
            MeshData::cuboid(Vec3::new(0.5, 1.0, 2.0)),
            MeshData::icosphere(1.0, 2),
            MeshData::capsule(0.1, 0.3, 12, 4),
            MeshData::prism(
                &[[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]],
                0.0,
                0.1,
            ),
        ] {
            let mut m = mesh.clone();
            let check = m.validate().unwrap();
            assert!(check.is_closed_manifold(), "{check:?}");
            assert_eq!(check.removed_degenerate, 0);
        }
    }

    #[test]
    fn capsule_vertex_count_follows_tessellation() {
        let m = MeshData::capsule(0.05, 0.2, 16, 6);
        assert_eq!(m.vertices.len(), 2 * 6 * 16 + 2);
    }

    #[test]
    fn open_mesh_reports_boundary() {
        let mut m = MeshData::cuboid(Vec3::new(1.0, 1.0, 1.0));
        m.triangles.pop();
        let check = m.validate().unwrap();
        assert!(!check.is_closed_manifold());
        assert_eq!(check.boundary_edges, 3);
    }

    #[test]
    fn degenerate_triangles_dropped() {
        let mut m = MeshData::cuboid(Vec3::new(1.0, 1.0, 1.0));
        m.triangles.push([0, 0, 1]);
        assert_eq!(m.validate().unwrap().removed_degenerate, 1);
    }

    #[test]
    fn out_of_range_index_is_error() {
        let mut m = MeshData::new(vec![Vec3::zeros()], vec![[0, 1, 2]]);
        assert!(matches!(m.validate(), Err(MeshError::IndexOutOfRange { .. })));
    }

    #[test]
    fn obj_round_trip() {
        let m = MeshData::icosphere(0.5, 1);
        let back = MeshData::parse_obj(&m.to_obj(), "x.obj").unwrap();
        assert_eq!(back.vertices, m.vertices);
        assert_eq!(back.triangles, m.triangles);
    }

    #[test]
    fn convexity() {
        assert!(MeshData::cuboid(Vec3::new(1.0, 2.0, 3.0)).is_convex());
        let l_shape = MeshData::prism(
            &[[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]],
            0.0,
            1.0,
        );
        assert!(!l_shape.is_convex());
    }
}
