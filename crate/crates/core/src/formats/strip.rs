//! Removal of non-essential elements before export.

use std::collections::{BTreeSet, HashSet};

use crate::scene::{SceneBody, SceneGeometry, SceneWorld, Shape};

use super::common::{KIND, KIND_TEXTURE, TEXTURE};
use super::StripElement;

fn strip_textures(g: &mut SceneGeometry) {
    let textures: HashSet<String> = g
        .material
        .iter()
        .filter(|t| t.predicate == KIND && t.object == KIND_TEXTURE)
        .map(|t| t.subject.clone())
        .collect();
    g.material
        .retain(|t| t.predicate != TEXTURE && !textures.contains(&t.subject));
    if let Shape::Mesh(src) = &mut g.shape {
        if let Some(data) = &mut src.data {
            data.uvs.clear();
        }
    }
}

fn keep_geometry(g: &SceneGeometry, strip: &BTreeSet<StripElement>) -> bool {
    if strip.contains(&StripElement::NonCollidableGeometry) && !g.collidable {
        return false;
    }
    if strip.contains(&StripElement::VisualMeshes) && !g.collidable && matches!(g.shape, Shape::Mesh(_)) {
        return false;
    }
    true
}

fn strip_body(b: &mut SceneBody, strip: &BTreeSet<StripElement>) {
    b.geometries.retain(|g| keep_geometry(g, strip));
    for g in &mut b.geometries {
        if strip.contains(&StripElement::Textures) {
            strip_textures(g);
        }
        if strip.contains(&StripElement::Materials) {
            g.material.clear();
            g.rgba = None;
        }
    }
    if strip.contains(&StripElement::PhysicsProperties) {
        b.inertial = None;
        for j in &mut b.joints {
            j.properties.retain(|k, _| !k.starts_with("dynamics:"));
        }
    }
    for c in &mut b.children {
        strip_body(c, strip);
    }
}

/// Returns a copy of `world` without the selected element classes.
pub fn strip_elements(world: &SceneWorld, strip: &BTreeSet<StripElement>) -> SceneWorld {
    let mut out = world.clone();
    if strip.is_empty() {
        return out;
    }
    for b in out.bodies_mut() {
        strip_body(b, strip);
    }
    if strip.contains(&StripElement::PhysicsProperties) {
        for j in out.world_joints_mut() {
            j.properties.retain(|k, _| !k.starts_with("dynamics:"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::scene::{InertialProperties, MeshSource, PropertyTriple};

    fn body() -> SceneWorld {
        let mut b = SceneBody::new("b");
        b.inertial = Some(InertialProperties::diagonal(
            1.0,
            Vec3::zeros(),
            Vec3::new(1.0, 1.0, 1.0),
        ));
        let mut visual = SceneGeometry::new("v", Shape::Mesh(MeshSource::file("a.obj")));
        visual.collidable = false;
        visual.rgba = Some([1.0, 0.0, 0.0, 1.0]);
        visual.material = vec![
            PropertyTriple::new("wood", KIND, "material"),
            PropertyTriple::new("wood", TEXTURE, "grain"),
            PropertyTriple::new("grain", KIND, KIND_TEXTURE),
            PropertyTriple::new("grain", "file", "grain.png"),
        ];
        let collision = SceneGeometry::new("c", Shape::Sphere { radius: 1.0 });
        b.geometries = vec![visual, collision];
        SceneWorld::with_bodies("w", vec![b])
    }

    #[test]
    fn non_collidable_geometry_is_removed() {
        let set = BTreeSet::from([StripElement::NonCollidableGeometry]);
        let w = strip_elements(&body(), &set);
        let b = w.body("b").unwrap();
        assert_eq!(b.geometries.len(), 1);
        assert!(b.geometries[0].collidable);
    }

    #[test]
    fn textures_leave_material_core() {
        let w = strip_elements(&body(), &BTreeSet::from([StripElement::Textures]));
        let g = &w.body("b").unwrap().geometries[0];
        assert_eq!(g.material, vec![PropertyTriple::new("wood", KIND, "material")]);
        assert!(g.rgba.is_some());
    }

    #[test]
    fn stripping_is_idempotent() {
        let all = BTreeSet::from([
            StripElement::Materials,
            StripElement::Textures,
            StripElement::PhysicsProperties,
            StripElement::VisualMeshes,
        ]);
        let once = strip_elements(&body(), &all);
        assert_eq!(strip_elements(&once, &all), once);
        assert!(once.body("b").unwrap().inertial.is_none());
    }
}
