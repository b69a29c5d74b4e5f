//! Robot and scene descriptions: links joined by typed joints into a tree,
//! primitive collision geometry, and the composition rules that bolt
//! separately authored units (base, arm, gripper) into one model.

use crate::geometry::Pose3D;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet, VecDeque};
use thiserror::Error;

/// Convex collision primitives. Cylinders and capsules extend along local z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKind {
    Sphere { radius: f64 },
    /// Full edge lengths along local x, y, z.
    Box { size: [f64; 3] },
    Cylinder { radius: f64, length: f64 },
    /// Cylinder of `length` between two hemispherical caps of `radius`.
    Capsule { radius: f64, length: f64 },
}

/// A primitive shape posed relative to its owning link or object frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionShape {
    #[serde(default = "identity_pose")]
    pub origin: Pose3D,
    #[serde(flatten)]
    pub kind: ShapeKind,
}

fn identity_pose() -> Pose3D {
    Pose3D::IDENTITY
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn center(&self) -> [f64; 3] {
        [
            (self.min[0] + self.max[0]) / 2.0,
            (self.min[1] + self.max[1]) / 2.0,
            (self.min[2] + self.max[2]) / 2.0,
        ]
    }

    /// Full extents along x, y, z.
    pub fn extents(&self) -> [f64; 3] {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }
}

impl CollisionShape {
    /// Tight axis-aligned bounds of the shape placed at `frame ∘ origin`.
    pub fn aabb(&self, frame: &Pose3D) -> Aabb {
        let pose = frame.compose(&self.origin);
        let c = pose.translation;
        let half = match self.kind {
            ShapeKind::Sphere { radius } => [radius; 3],
            ShapeKind::Box { size } => {
                // Projection of an oriented box: |R| times the half extents.
                let ex = pose.rotation.rotate([size[0] / 2.0, 0.0, 0.0]);
                let ey = pose.rotation.rotate([0.0, size[1] / 2.0, 0.0]);
                let ez = pose.rotation.rotate([0.0, 0.0, size[2] / 2.0]);
                [
                    ex[0].abs() + ey[0].abs() + ez[0].abs(),
                    ex[1].abs() + ey[1].abs() + ez[1].abs(),
                    ex[2].abs() + ey[2].abs() + ez[2].abs(),
                ]
            }
            ShapeKind::Cylinder { radius, length } => {
                let a = pose.rotation.rotate([0.0, 0.0, 1.0]);
                let mut h = [0.0; 3];
                for i in 0..3 {
                    let rim = (1.0 - a[i] * a[i]).max(0.0).sqrt();
                    h[i] = a[i].abs() * length / 2.0 + radius * rim;
                }
                h
            }
            ShapeKind::Capsule { radius, length } => {
                let a = pose.rotation.rotate([0.0, 0.0, 1.0]);
                [
                    a[0].abs() * length / 2.0 + radius,
                    a[1].abs() * length / 2.0 + radius,
                    a[2].abs() * length / 2.0 + radius,
                ]
            }
        };
        Aabb {
            min: [c[0] - half[0], c[1] - half[1], c[2] - half[2]],
            max: [c[0] + half[0], c[1] + half[1], c[2] + half[2]],
        }
    }
}

/// Rigid body in the kinematic tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision: Option<CollisionShape>,
    /// Opaque rendering hint carried through parsing untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visual_tag: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    /// Revolute without travel limits.
    Continuous,
    Prismatic,
    Fixed,
}

/// Connection from a parent link to a child link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    /// Child frame relative to parent frame at zero joint value.
    pub origin: Pose3D,
    /// Motion axis in the child frame; ignored for fixed joints.
    pub axis: [f64; 3],
    /// `(lower, upper)` travel; required for revolute and prismatic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<(f64, f64)>,
    /// Speed cap used when tracking targets (rad/s or m/s).
    pub max_velocity: f64,
}

impl JointSpec {
    pub fn is_actuated(&self) -> bool {
        self.kind != JointKind::Fixed
    }
}

/// What a unit is for; composition produces `Composite`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Base,
    LeggedBase,
    Arm,
    Gripper,
    Hand,
    Generic,
    Composite,
}

/// A kinematic tree of links and joints rooted at `root_link`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub name: String,
    pub unit_kind: UnitKind,
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
    pub root_link: String,
}

/// Movable or static body in the world, posed in the world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub shape: CollisionShape,
    pub pose: Pose3D,
    pub movable: bool,
}

impl SceneObject {
    pub fn aabb(&self) -> Aabb {
        self.shape.aabb(&self.pose)
    }
}

/// A structural defect found by [`RobotModel::validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelViolation {
    #[error("duplicate link name {0:?}")]
    DuplicateLinkName(String),
    #[error("duplicate joint name {0:?}")]
    DuplicateJointName(String),
    #[error("joint {joint:?} references unknown link {link:?}")]
    DanglingReference { joint: String, link: String },
    #[error("root link {0:?} is not declared")]
    RootNotFound(String),
    #[error("root link {0:?} is the child of a joint")]
    RootHasParent(String),
    #[error("link {0:?} is the child of more than one joint")]
    MultipleParents(String),
    #[error("joint {0:?} closes a cycle")]
    CycleDetected(String),
    #[error("link {0:?} is not reachable from the root")]
    UnreachableLink(String),
    #[error("joint {0:?} has a zero motion axis")]
    BadAxis(String),
    #[error("joint {0:?} has invalid limits")]
    BadLimits(String),
    #[error("joint {0:?} has a non-positive max velocity")]
    BadVelocity(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComposeError {
    #[error("mount link {0:?} does not exist in the base model")]
    UnknownMountLink(String),
    #[error("name {0:?} exists in both models")]
    NameCollision(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NamespaceError {
    #[error("prefix {0:?} must match [a-z0-9_]+")]
    BadPrefix(String),
}

impl RobotModel {
    pub fn link(&self, name: &str) -> Option<&LinkSpec> {
        self.links.iter().find(|l| l.name == name)
    }

    pub fn joint(&self, name: &str) -> Option<&JointSpec> {
        self.joints.iter().find(|j| j.name == name)
    }

    /// Non-fixed joints in declaration order.
    pub fn actuated_joints(&self) -> Vec<&JointSpec> {
        self.joints.iter().filter(|j| j.is_actuated()).collect()
    }

    /// Joint indices ordered parent-before-child by breadth-first walk from
    /// the root. Stable across calls for a given model.
    pub fn ordered_joint_indices(&self) -> Vec<usize> {
        let mut by_parent: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, j) in self.joints.iter().enumerate() {
            by_parent.entry(j.parent.as_str()).or_default().push(i);
        }
        let mut order = Vec::with_capacity(self.joints.len());
        let mut queue = VecDeque::new();
        queue.push_back(self.root_link.as_str());
        let mut seen_links = HashSet::new();
        seen_links.insert(self.root_link.as_str());
        while let Some(link) = queue.pop_front() {
            if let Some(children) = by_parent.get(link) {
                for &ji in children {
                    order.push(ji);
                    let child = self.joints[ji].child.as_str();
                    if seen_links.insert(child) {
                        queue.push_back(child);
                    }
                }
            }
        }
        order
    }

    /// Structural check; an empty list means the model is a well-formed tree.
    pub fn validate(&self) -> Vec<ModelViolation> {
        let mut out = Vec::new();

        let mut link_names = HashSet::new();
        for l in &self.links {
            if !link_names.insert(l.name.as_str()) {
                out.push(ModelViolation::DuplicateLinkName(l.name.clone()));
            }
        }
        let mut joint_names = HashSet::new();
        for j in &self.joints {
            if !joint_names.insert(j.name.as_str()) {
                out.push(ModelViolation::DuplicateJointName(j.name.clone()));
            }
        }

        for j in &self.joints {
            for link in [&j.parent, &j.child] {
                if !link_names.contains(link.as_str()) {
                    out.push(ModelViolation::DanglingReference {
                        joint: j.name.clone(),
                        link: link.clone(),
                    });
                }
            }
            if j.is_actuated() {
                let n2 = j.axis[0] * j.axis[0] + j.axis[1] * j.axis[1] + j.axis[2] * j.axis[2];
                if n2 < 1e-12 {
                    out.push(ModelViolation::BadAxis(j.name.clone()));
                }
                if j.max_velocity <= 0.0 {
                    out.push(ModelViolation::BadVelocity(j.name.clone()));
                }
            }
            match (j.kind, j.limits) {
                (JointKind::Revolute | JointKind::Prismatic, None) => {
                    out.push(ModelViolation::BadLimits(j.name.clone()));
                }
                (_, Some((lo, hi))) if lo > hi => {
                    out.push(ModelViolation::BadLimits(j.name.clone()));
                }
                _ => {}
            }
        }

        if !link_names.contains(self.root_link.as_str()) {
            out.push(ModelViolation::RootNotFound(self.root_link.clone()));
            return out;
        }

        let mut parent_of: HashMap<&str, &JointSpec> = HashMap::new();
        for j in &self.joints {
            if j.child == self.root_link {
                out.push(ModelViolation::RootHasParent(self.root_link.clone()));
            }
            if parent_of.insert(j.child.as_str(), j).is_some() {
                out.push(ModelViolation::MultipleParents(j.child.clone()));
            }
        }

        // Walk child edges from the root; a joint whose child was already
        // visited closes a cycle, and links never visited are disconnected.
        let mut reachable = HashSet::new();
        reachable.insert(self.root_link.as_str());
        let mut queue = VecDeque::new();
        queue.push_back(self.root_link.as_str());
        while let Some(link) = queue.pop_front() {
            for j in self.joints.iter().filter(|j| j.parent == link) {
                if !reachable.insert(j.child.as_str()) {
                    out.push(ModelViolation::CycleDetected(j.name.clone()));
                } else {
                    queue.push_back(j.child.as_str());
                }
            }
        }
        for l in &self.links {
            if !reachable.contains(l.name.as_str()) {
                out.push(ModelViolation::UnreachableLink(l.name.clone()));
            }
        }

        out
    }
}

/// Prepends `prefix + "/"` to every link and joint name (including parent,
/// child, and root references). The prefix must match `[a-z0-9_]+`.
pub fn namespace(model: &RobotModel, prefix: &str) -> Result<RobotModel, NamespaceError> {
    if prefix.is_empty() || !prefix.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_') {
        return Err(NamespaceError::BadPrefix(prefix.to_string()));
    }
    let tag = |n: &str| format!("{prefix}/{n}");
    let mut m = model.clone();
    for l in &mut m.links {
        l.name = tag(&l.name);
    }
    for j in &mut m.joints {
        j.name = tag(&j.name);
        j.parent = tag(&j.parent);
        j.child = tag(&j.child);
    }
    m.root_link = tag(&m.root_link);
    Ok(m)
}

/// Welds `attachment` onto `base` with a new fixed joint from `mount_link`
/// (a base link) to the attachment's root, offset by `mount_offset`.
///
/// Link and joint names must be disjoint between the two models; namespace
/// the units first if they are not.
pub fn compose(
    base: &RobotModel,
    attachment: &RobotModel,
    mount_link: &str,
    mount_offset: &Pose3D,
) -> Result<RobotModel, ComposeError> {
    if base.link(mount_link).is_none() {
        return Err(ComposeError::UnknownMountLink(mount_link.to_string()));
    }
    let base_links: HashSet<&str> = base.links.iter().map(|l| l.name.as_str()).collect();
    let base_joints: HashSet<&str> = base.joints.iter().map(|j| j.name.as_str()).collect();
    for l in &attachment.links {
        if base_links.contains(l.name.as_str()) {
            return Err(ComposeError::NameCollision(l.name.clone()));
        }
    }
    for j in &attachment.joints {
        if base_joints.contains(j.name.as_str()) {
            return Err(ComposeError::NameCollision(j.name.clone()));
        }
    }
    let mount_joint = format!("mount_{}", attachment.root_link.replace('/', "_"));
    if base_joints.contains(mount_joint.as_str())
        || attachment.joint(&mount_joint).is_some()
    {
        return Err(ComposeError::NameCollision(mount_joint));
    }

    let mut m = RobotModel {
        name: format!("{}+{}", base.name, attachment.name),
        unit_kind: UnitKind::Composite,
        links: base.links.clone(),
        joints: base.joints.clone(),
        root_link: base.root_link.clone(),
    };
    m.links.extend(attachment.links.iter().cloned());
    m.joints.push(JointSpec {
        name: mount_joint,
        kind: JointKind::Fixed,
        parent: mount_link.to_string(),
        child: attachment.root_link.clone(),
        origin: *mount_offset,
        axis: [0.0, 0.0, 1.0],
        limits: None,
        max_velocity: 1.0,
    });
    m.joints.extend(attachment.joints.iter().cloned());
    Ok(m)
}
