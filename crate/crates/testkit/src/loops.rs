//! Kinematic loops by edge removal.
//!
//! Bodies are vertices (plus the world); joints and body nesting are edges,
//! except that a nesting edge is implied by any joint between the same two
//! bodies. A joint is on a cycle when its endpoints stay connected after
//! the joint alone is removed. The number of independent cycles is
//! `E - V + C`.

use std::collections::{BTreeMap, BTreeSet};

use scenegraph_core::scene::WORLD;
use scenegraph_core::SceneWorld;

#[derive(Debug, PartialEq, Eq)]
pub struct LoopOracle {
    /// Joints lying on at least one cycle, sorted.
    pub cycle_joints: Vec<String>,
    /// Independent cycles, `E - V + C`.
    pub cycle_rank: usize,
}

fn connected(n: usize, edges: &[(usize, usize)], skip: Option<usize>, a: usize, b: usize) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![a];
    seen[a] = true;
    while let Some(v) = stack.pop() {
        if v == b {
            return true;
        }
        for (i, &(x, y)) in edges.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let w = if x == v {
                y
            } else if y == v {
                x
            } else {
                continue;
            };
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    false
}

pub fn loop_oracle(world: &SceneWorld) -> LoopOracle {
    let mut ids: BTreeMap<String, usize> = BTreeMap::from([(WORLD.to_string(), 0)]);
    let mut nesting = Vec::new();
    for (body, parent) in world.all_bodies() {
        let next = ids.len();
        let id = *ids.entry(body.name.clone()).or_insert(next);
        if let Some(p) = parent {
            nesting.push((ids[&p.name], id));
        }
    }
    let joints = world.all_joints();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut joint_edge: Vec<(String, usize)> = Vec::new();
    for j in &joints {
        if let (Some(&a), Some(&b)) = (ids.get(&j.parent_body), ids.get(&j.child_body)) {
            joint_edge.push((j.name.clone(), edges.len()));
            edges.push((a, b));
        }
    }
    let jointed: BTreeSet<(usize, usize)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    for (a, b) in nesting {
        if !jointed.contains(&(a.min(b), a.max(b))) {
            edges.push((a, b));
        }
    }
    let n = ids.len();
    let mut components = 0;
    let mut seen = vec![false; n];
    for v in 0..n {
        if !seen[v] {
            components += 1;
            for (w, s) in seen.iter_mut().enumerate() {
                if !*s && connected(n, &edges, None, v, w) {
                    *s = true;
                }
            }
        }
    }
    let mut cycle_joints: Vec<String> = joint_edge
        .iter()
        .filter(|(_, i)| {
            let (a, b) = edges[*i];
            a == b || connected(n, &edges, Some(*i), a, b)
        })
        .map(|(name, _)| name.clone())
        .collect();
    cycle_joints.sort();
    LoopOracle {
        cycle_joints,
        cycle_rank: edges.len() + components - n,
    }
}
