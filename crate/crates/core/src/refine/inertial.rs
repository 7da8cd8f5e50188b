//! Physical plausibility checks for inertial properties, and a minimal repair.

use std::fmt;

use nalgebra::SymmetricEigen;

use crate::math::{Mat3, Vec3};
use crate::scene::InertialProperties;

use super::RefineError;

#[derive(Clone, Debug, PartialEq)]
pub enum InertialIssue {
    NonPositiveMass(f64),
    NonFinite,
    Asymmetric(f64),
    NotPositiveDefinite(f64),
    /// Largest principal moment exceeds the sum of the other two.
    TriangleInequality,
}

impl fmt::Display for InertialIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InertialIssue::NonPositiveMass(m) => write!(f, "mass {m} is not positive"),
            InertialIssue::NonFinite => f.write_str("non-finite inertial values"),
            InertialIssue::Asymmetric(d) => write!(f, "inertia tensor is asymmetric by {d:e}"),
            InertialIssue::NotPositiveDefinite(l) => {
                write!(f, "inertia tensor has principal moment {l:e}")
            }
            InertialIssue::TriangleInequality => f.write_str("principal moments violate the triangle inequality"),
        }
    }
}

fn sorted_eigenvalues(m: &Mat3) -> [f64; 3] {
    let mut e: Vec<f64> = SymmetricEigen::new(*m).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    [e[0], e[1], e[2]]
}

pub fn validate_inertial(i: &InertialProperties) -> Vec<InertialIssue> {
    let mut issues = Vec::new();
    if !i.mass.is_finite()
        || !i.inertia.iter().all(|v| v.is_finite())
        || !i.center_of_mass.iter().all(|v| v.is_finite())
    {
        return vec![InertialIssue::NonFinite];
    }
    if i.mass <= 0.0 {
        issues.push(InertialIssue::NonPositiveMass(i.mass));
    }
    let scale = i.inertia.abs().max().max(f64::MIN_POSITIVE);
    let asym = (i.inertia - i.inertia.transpose()).abs().max();
    if asym > 1e-9 * scale {
        issues.push(InertialIssue::Asymmetric(asym));
    }
    let sym = (i.inertia + i.inertia.transpose()) / 2.0;
    let [l1, l2, l3] = sorted_eigenvalues(&sym);
    if l1 <= 0.0 {
        issues.push(InertialIssue::NotPositiveDefinite(l1));
    } else if l1 + l2 < l3 - 1e-9 * l3 {
        issues.push(InertialIssue::TriangleInequality);
    }
    issues
}

/// Projects the tensor onto the nearest physically valid one in its own eigenbasis.
///
/// Symmetrizes, raises non-positive principal moments to a small floor and
/// clips the largest moment to the sum of the other two. Mass cannot be repaired.
pub fn repair_inertial(i: &InertialProperties) -> Result<(InertialProperties, Vec<InertialIssue>), RefineError> {
    let issues = validate_inertial(i);
    if issues.is_empty() {
        return Ok((*i, issues));
    }
    if issues
        .iter()
        .any(|x| matches!(x, InertialIssue::NonFinite | InertialIssue::NonPositiveMass(_)))
    {
        return Err(RefineError::UnrepairableInertial(
            issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        ));
    }
    let sym = (i.inertia + i.inertia.transpose()) / 2.0;
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.max();
    let floor = if max > 0.0 { 1e-9 * max } else { 1e-6 * i.mass };
    let mut l: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(floor)).collect();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| l[a].total_cmp(&l[b]));
    let (a, b, c) = (order[0], order[1], order[2]);
    if l[c] > l[a] + l[b] {
        l[c] = l[a] + l[b];
    }
    let d = Mat3::from_diagonal(&Vec3::new(l[0], l[1], l[2]));
    let v = eig.eigenvectors;
    let fixed = v * d * v.transpose();
    Ok((
        InertialProperties::new(i.mass, i.center_of_mass, (fixed + fixed.transpose()) / 2.0),
        issues,
    ))
}
