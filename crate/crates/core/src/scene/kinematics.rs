//! Tree/loop classification of the kinematic graph.
//!
//! Nodes are the bodies plus the world. Nesting contributes one edge per
//! parent/child pair. The first joint between a nested pair coincides with
//! that edge; any other joint adds its own edge. The world is a tree iff this multigraph
//! is acyclic.

use std::collections::{BTreeSet, HashMap};

use super::{SceneWorld, WORLD};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KinematicKind {
    Tree,
    Loop,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KinematicClass {
    pub kind: KinematicKind,
    /// Joints whose edge lies on at least one cycle, sorted by name.
    pub cycle_joints: Vec<String>,
    /// Joints that close a cycle given the nesting forest and earlier joints,
    /// in traversal order. Removing these leaves a forest.
    pub closing_joints: Vec<String>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

#[derive(Clone, Copy)]
struct Edge {
    a: usize,
    b: usize,
    /// Index into the joint list, `None` for a pure nesting edge.
    joint: Option<usize>,
}

pub fn kinematic_classification(world: &SceneWorld) -> KinematicClass {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    ids.insert(WORLD, 0);
    let mut nested: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (body, parent) in world.all_bodies() {
        let id = ids.len();
        ids.entry(body.name.as_str()).or_insert(id);
        if let Some(p) = parent {
            let (a, b) = (ids[p.name.as_str()], ids[body.name.as_str()]);
            nested.insert((a.min(b), a.max(b)));
        }
    }
    let joints = world.all_joints();

    let mut edges: Vec<Edge> = nested.iter().map(|&(a, b)| Edge { a, b, joint: None }).collect();
    let mut merged: Vec<(usize, (usize, usize))> = Vec::new();
    for (ji, j) in joints.iter().enumerate() {
        let (Some(&a), Some(&b)) = (ids.get(j.parent_body.as_str()), ids.get(j.child_body.as_str())) else {
            continue;
        };
        let key = (a.min(b), a.max(b));
        // Only the first joint on a nested pair coincides with the nesting edge.
        if nested.contains(&key) && !merged.iter().any(|(_, k)| *k == key) {
            merged.push((ji, key));
        } else {
            edges.push(Edge { a, b, joint: Some(ji) });
        }
    }

    let mut uf = UnionFind::new(ids.len());
    let mut closing = Vec::new();
    for e in &edges {
        if !uf.union(e.a, e.b) {
            if let Some(ji) = e.joint {
                closing.push(joints[ji].name.clone());
            }
        }
    }

    // An edge lies on a cycle iff its endpoints stay connected without it.
    let on_cycle = |skip: usize| {
        let mut uf = UnionFind::new(ids.len());
        for (i, e) in edges.iter().enumerate() {
            if i != skip {
                uf.union(e.a, e.b);
            }
        }
        uf.find(edges[skip].a) == uf.find(edges[skip].b)
    };
    let mut cycle: BTreeSet<String> = BTreeSet::new();
    if !closing.is_empty() {
        let mut nested_on_cycle = BTreeSet::new();
        for (i, e) in edges.iter().enumerate() {
            if on_cycle(i) {
                match e.joint {
                    Some(ji) => {
                        cycle.insert(joints[ji].name.clone());
                    }
                    None => {
                        nested_on_cycle.insert((e.a.min(e.b), e.a.max(e.b)));
                    }
                }
            }
        }
        for (ji, key) in merged {
            if nested_on_cycle.contains(&key) {
                cycle.insert(joints[ji].name.clone());
            }
        }
    }

    KinematicClass {
        kind: if closing.is_empty() {
            KinematicKind::Tree
        } else {
            KinematicKind::Loop
        },
        cycle_joints: cycle.into_iter().collect(),
        closing_joints: closing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{JointType, SceneBody, SceneJoint};

    fn chain(n: usize) -> SceneBody {
        let mut body = SceneBody::new(&format!("l{}", n - 1));
        for i in (0..n - 1).rev() {
            let mut parent = SceneBody::new(&format!("l{i}"));
            parent.joints.push(SceneJoint::new(
                &format!("j{i}"),
                JointType::Revolute,
                &format!("l{i}"),
                &format!("l{}", i + 1),
            ));
            parent.children.push(body);
            body = parent;
        }
        body
    }

    #[test]
    fn chain_is_tree() {
        let w = SceneWorld::with_bodies("w", vec![chain(5)]);
        let c = kinematic_classification(&w);
        assert_eq!(c.kind, KinematicKind::Tree);
        assert!(c.cycle_joints.is_empty());
    }

    #[test]
    fn closing_joint_detected() {
        let mut root = chain(4);
        root.joints
            .push(SceneJoint::new("close", JointType::Revolute, "l0", "l3"));
        let mut w = SceneWorld::with_bodies("w", vec![root]);
        w.world_joints_mut()
            .push(SceneJoint::new("anchor", JointType::Fixed, WORLD, "l0"));
        let c = kinematic_classification(&w);
        assert_eq!(c.kind, KinematicKind::Loop);
        assert_eq!(c.closing_joints, vec!["close".to_string()]);
        assert_eq!(c.cycle_joints, vec!["close", "j0", "j1", "j2"]);
    }
}
