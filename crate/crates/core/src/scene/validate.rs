//! Structural checks on a [`SceneWorld`].

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::diag::{Diagnostic, Severity};

use super::{JointType, SceneWorld, Shape, WORLD};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleId {
    DuplicateName,
    ReservedName,
    DanglingJointReference,
    SelfJoint,
    MissingAxis,
    InvertedLimits,
    BadInertial,
    BadGeometry,
    BadMesh,
    WorldJoint,
}

impl RuleId {
    pub fn code(&self) -> &'static str {
        match self {
            RuleId::DuplicateName => "duplicate-name",
            RuleId::ReservedName => "reserved-name",
            RuleId::DanglingJointReference => "dangling-joint-reference",
            RuleId::SelfJoint => "self-joint",
            RuleId::MissingAxis => "missing-axis",
            RuleId::InvertedLimits => "inverted-limits",
            RuleId::BadInertial => "bad-inertial",
            RuleId::BadGeometry => "bad-geometry",
            RuleId::BadMesh => "bad-mesh",
            RuleId::WorldJoint => "world-joint",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationIssue {
    pub rule: RuleId,
    pub severity: Severity,
    pub element: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.iter().all(|i| i.severity != Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        self.issues
            .iter()
            .map(|i| Diagnostic::new(i.severity, i.rule.code(), i.message.clone()).with_subject(i.element.clone()))
            .collect()
    }

    fn push(&mut self, rule: RuleId, severity: Severity, element: &str, message: String) {
        self.issues.push(ValidationIssue {
            rule,
            severity,
            element: element.to_string(),
            message,
        });
    }
}

pub fn validate_world(world: &SceneWorld) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut seen: HashMap<&str, usize> = HashMap::new();
    for name in world.all_names() {
        *seen.entry(name).or_default() += 1;
    }
    let mut dups: Vec<_> = seen.iter().filter(|(_, &n)| n > 1).collect();
    dups.sort();
    for (name, n) in dups {
        report.push(
            RuleId::DuplicateName,
            Severity::Error,
            name,
            format!("name `{name}` is used by {n} elements"),
        );
    }
    if seen.contains_key(WORLD) {
        report.push(
            RuleId::ReservedName,
            Severity::Error,
            WORLD,
            "`world` is reserved for the world frame".into(),
        );
    }

    let bodies: HashSet<&str> = world.all_bodies().iter().map(|(b, _)| b.name.as_str()).collect();
    for joint in world.all_joints() {
        let name = joint.name.as_str();
        for end in [&joint.parent_body, &joint.child_body] {
            if end != WORLD && !bodies.contains(end.as_str()) {
                report.push(
                    RuleId::DanglingJointReference,
                    Severity::Error,
                    name,
                    format!("joint `{name}` references unknown body `{end}`"),
                );
            }
        }
        if joint.child_body == WORLD {
            report.push(
                RuleId::DanglingJointReference,
                Severity::Error,
                name,
                format!("joint `{name}` has the world as its child"),
            );
        }
        if joint.parent_body == joint.child_body {
            report.push(
                RuleId::SelfJoint,
                Severity::Error,
                name,
                format!("joint `{name}` connects `{}` to itself", joint.parent_body),
            );
        }
        if joint.parent_body == WORLD {
            report.push(
                RuleId::WorldJoint,
                Severity::Info,
                name,
                format!("joint `{name}` attaches `{}` to the world", joint.child_body),
            );
        }
        match (joint.joint_type, joint.axis) {
            (JointType::Revolute | JointType::Prismatic, None) => report.push(
                RuleId::MissingAxis,
                Severity::Error,
                name,
                format!("{} joint `{name}` has no axis", joint.joint_type.as_str()),
            ),
            (JointType::Revolute | JointType::Prismatic, Some(a))
                if !(a.norm() > 0.0) || !a.iter().all(|c| c.is_finite()) =>
            {
                report.push(
                    RuleId::MissingAxis,
                    Severity::Error,
                    name,
                    format!("joint `{name}` has a degenerate axis"),
                )
            }
            _ => {}
        }
        if let Some(l) = joint.limits {
            if l.lower > l.upper {
                report.push(
                    RuleId::InvertedLimits,
                    Severity::Error,
                    name,
                    format!("joint `{name}` has lower limit {} above upper {}", l.lower, l.upper),
                );
            }
        }
    }

    for (body, _) in world.all_bodies() {
        if let Some(i) = &body.inertial {
            if !(i.mass > 0.0) || !i.mass.is_finite() {
                report.push(
                    RuleId::BadInertial,
                    Severity::Error,
                    &body.name,
                    format!("body `{}` has non-positive mass {}", body.name, i.mass),
                );
            }
            if !i.inertia.iter().all(|v| v.is_finite()) || !i.center_of_mass.iter().all(|v| v.is_finite()) {
                report.push(
                    RuleId::BadInertial,
                    Severity::Error,
                    &body.name,
                    format!("body `{}` has non-finite inertial values", body.name),
                );
            }
        }
        for g in &body.geometries {
            let ok = match &g.shape {
                Shape::Cube { half_extents } => half_extents.iter().all(|v| *v > 0.0),
                Shape::Sphere { radius } => *radius > 0.0,
                Shape::Cylinder { radius, half_length } => *radius > 0.0 && *half_length > 0.0,
                Shape::Mesh(src) => {
                    if src.file.is_none() && src.data.is_none() {
                        false
                    } else {
                        if let Some(Err(e)) = src.data.as_ref().map(|m| m.check_indices()) {
                            report.push(
                                RuleId::BadMesh,
                                Severity::Error,
                                &g.name,
                                format!("geometry `{}`: {e}", g.name),
                            );
                        }
                        true
                    }
                }
            };
            if !ok || g.scale.iter().any(|s| *s == 0.0 || !s.is_finite()) {
                report.push(
                    RuleId::BadGeometry,
                    Severity::Error,
                    &g.name,
                    format!("geometry `{}` has degenerate dimensions", g.name),
                );
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{JointLimits, SceneBody, SceneGeometry, SceneJoint};

    #[test]
    fn detects_dangling_and_inverted() {
        let mut a = SceneBody::new("a");
        let mut j = SceneJoint::new("j", JointType::Revolute, "a", "ghost");
        j.limits = Some(JointLimits {
            lower: 1.0,
            upper: -1.0,
        });
        a.joints.push(j);
        a.geometries
            .push(SceneGeometry::new("g", Shape::Sphere { radius: 0.0 }));
        let w = SceneWorld::with_bodies("w", vec![a]);
        let rules: Vec<_> = validate_world(&w).issues.iter().map(|i| i.rule).collect();
        assert!(rules.contains(&RuleId::DanglingJointReference));
        assert!(rules.contains(&RuleId::InvertedLimits));
        assert!(rules.contains(&RuleId::BadGeometry));
    }

    #[test]
    fn world_joints_are_informational() {
        let mut w = SceneWorld::with_bodies("w", vec![SceneBody::new("base")]);
        w.world_joints_mut()
            .push(SceneJoint::new("fix", JointType::Fixed, WORLD, "base"));
        let report = validate_world(&w);
        assert!(report.is_valid());
        assert_eq!(report.issues[0].rule, RuleId::WorldJoint);
    }

    #[test]
    fn duplicates_are_errors() {
        let mut a = SceneBody::new("a");
        a.children.push(SceneBody::new("a"));
        let w = SceneWorld::with_bodies("w", vec![a]);
        assert!(!validate_world(&w).is_valid());
    }
}
