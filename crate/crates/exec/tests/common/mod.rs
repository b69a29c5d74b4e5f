//! Fixture for executor integration tests: a mobile manipulator (diff
//! base + 6R arm + parallel gripper) in a room with two low tables and a
//! cup, plus the canonical fetch task over it.

#![allow(dead_code)]

use std::collections::HashMap;

use mobiman_core::geometry::{Pose2D, Pose3D};
use mobiman_core::model::{
    compose, namespace, CollisionShape, JointKind, JointSpec, LinkSpec, RobotModel, SceneObject,
    ShapeKind, UnitKind,
};
use mobiman_core::world::{GripperParams, RobotSpawn, SimConfig, World};
use mobiman_exec::{ExecConfig, MapExtent, NamedLocation, WorldKnowledge};

pub const ROBOT: &str = "fetcher";
pub const TIP: &str = "arm/tool";

/// Table geometry shared by the scene and the reachability notes below:
/// 0.5 m square slabs, 0.3 m tall, front faces at x = 0.75.
const TABLE_SIZE: [f64; 3] = [0.5, 0.5, 0.3];
const TABLE_X: f64 = 1.0;
const CUP_Z: f64 = 0.35; // table top 0.30 + half height 0.04 + 0.01 hover

/// A 6R arm: yaw column, two 0.4 m segments with capsule collision, and
/// a spherical wrist, reaching about 1.2 m.
pub fn six_r_arm() -> RobotModel {
    let link = |name: &str, collision: Option<CollisionShape>| LinkSpec {
        name: name.into(),
        collision,
        visual_tag: None,
    };
    let seg_capsule = CollisionShape {
        origin: Pose3D::from_xyz(0.0, 0.0, 0.2),
        kind: ShapeKind::Capsule { radius: 0.04, length: 0.4 },
    };
    let joint = |name: &str, parent: &str, child: &str, z: f64, axis: [f64; 3], lim: (f64, f64)| {
        JointSpec {
            name: name.into(),
            kind: JointKind::Revolute,
            parent: parent.into(),
            child: child.into(),
            origin: Pose3D::from_xyz(0.0, 0.0, z),
            axis,
            limits: Some(lim),
            max_velocity: 1.5,
        }
    };
    let pi = std::f64::consts::PI;
    RobotModel {
        name: "arm6".into(),
        unit_kind: UnitKind::Arm,
        links: vec![
            link("base", None),
            link("l1", None),
            link("l2", Some(seg_capsule)),
            link("l3", Some(seg_capsule)),
            link("l4", None),
            link("l5", None),
            link("l6", None),
            link(
                "tool",
                Some(CollisionShape {
                    origin: Pose3D::IDENTITY,
                    kind: ShapeKind::Sphere { radius: 0.03 },
                }),
            ),
        ],
        joints: vec![
            joint("j1", "base", "l1", 0.15, [0.0, 0.0, 1.0], (-pi, pi)),
            joint("j2", "l1", "l2", 0.10, [0.0, 1.0, 0.0], (-2.0, 2.0)),
            joint("j3", "l2", "l3", 0.40, [0.0, 1.0, 0.0], (-2.5, 2.5)),
            joint("j4", "l3", "l4", 0.40, [0.0, 0.0, 1.0], (-pi, pi)),
            joint("j5", "l4", "l5", 0.10, [0.0, 1.0, 0.0], (-2.0, 2.0)),
            JointSpec {
                name: "j6".into(),
                kind: JointKind::Continuous,
                parent: "l5".into(),
                child: "l6".into(),
                origin: Pose3D::from_xyz(0.0, 0.0, 0.10),
                axis: [0.0, 0.0, 1.0],
                limits: None,
                max_velocity: 1.5,
            },
            JointSpec {
                name: "tool_fix".into(),
                kind: JointKind::Fixed,
                parent: "l6".into(),
                child: "tool".into(),
                origin: Pose3D::from_xyz(0.0, 0.0, 0.08),
                axis: [0.0, 0.0, 1.0],
                limits: None,
                max_velocity: 0.0,
            },
        ],
        root_link: "base".into(),
    }
}

/// Differential base: one chassis box, 0.40 × 0.36 × 0.30, sitting on the
/// ground (corner sweep radius ≈ 0.27 m, safely inside the 0.30 m gap the
/// reference poses keep to the tables).
pub fn diff_base() -> RobotModel {
    RobotModel {
        name: "cart".into(),
        unit_kind: UnitKind::Base,
        links: vec![LinkSpec {
            name: "chassis".into(),
            collision: Some(CollisionShape {
                kind: ShapeKind::Box { size: [0.40, 0.36, 0.30] },
                origin: Pose3D::from_xyz(0.0, 0.0, 0.15),
            }),
            visual_tag: None,
        }],
        joints: vec![],
        root_link: "chassis".into(),
    }
}

/// Base with the arm welded onto the chassis top, all names namespaced.
pub fn mobile_manipulator() -> RobotModel {
    let base = namespace(&diff_base(), "base").unwrap();
    let arm = namespace(&six_r_arm(), "arm").unwrap();
    compose(&base, &arm, "base/chassis", &Pose3D::from_xyz(0.0, 0.0, 0.30)).unwrap()
}

fn table(id: &str, x: f64, y: f64) -> SceneObject {
    SceneObject {
        id: id.into(),
        shape: CollisionShape {
            kind: ShapeKind::Box { size: TABLE_SIZE },
            origin: Pose3D::IDENTITY,
        },
        pose: Pose3D::from_xyz(x, y, TABLE_SIZE[2] / 2.0),
        movable: false,
    }
}

pub fn cup(x: f64, y: f64) -> SceneObject {
    SceneObject {
        id: "cup".into(),
        shape: CollisionShape {
            kind: ShapeKind::Cylinder { radius: 0.03, length: 0.08 },
            origin: Pose3D::IDENTITY,
        },
        pose: Pose3D::from_xyz(x, y, CUP_Z),
        movable: true,
    }
}

/// Two tables 1.2 m apart with the cup on the first; the robot spawns at
/// location `a`, already within arm's reach of the cup.
pub fn build_fetch_world() -> World {
    let mut world = World::new(SimConfig::default());
    world.add_object(table("table_a", TABLE_X, 0.0));
    world.add_object(table("table_b", TABLE_X, 1.2));
    world.add_object(cup(TABLE_X, 0.0));
    world
        .add_robot(RobotSpawn {
            id: ROBOT.into(),
            model: mobile_manipulator(),
            pose: location_a().pose,
            tool_link: Some(TIP.into()),
            gripper: Some(GripperParams::default()),
        })
        .unwrap();
    world
}

pub fn location_a() -> NamedLocation {
    NamedLocation { pose: Pose2D::new(0.45, 0.0, 0.0), point: Some([TABLE_X, 0.0, CUP_Z]) }
}

pub fn location_b() -> NamedLocation {
    NamedLocation { pose: Pose2D::new(0.45, 1.2, 0.0), point: Some([TABLE_X, 1.2, CUP_Z]) }
}

pub fn knowledge() -> WorldKnowledge {
    let mut locations = HashMap::new();
    locations.insert("a".to_string(), location_a());
    locations.insert("b".to_string(), location_b());
    WorldKnowledge { locations }
}

pub fn exec_config() -> ExecConfig {
    let mut cfg = ExecConfig::new(mobile_manipulator(), TIP);
    cfg.params.map = MapExtent {
        width_m: 4.0,
        height_m: 3.2,
        resolution: 0.05,
        origin: (-1.0, -1.0),
    };
    cfg
}

pub const FETCH_DOMAIN: &str = r#"
(define (domain fetch)
  (:types item agent - thing
          location)
  (:constants robot - agent)
  (:predicates
    (at ?x - thing ?l - location)
    (holding ?i - item)
    (handempty))
  (:action move
    :kind navigation
    :parameters (?from - location ?to - location)
    :precondition (and (at robot ?from))
    :effect (and (at robot ?to) (not (at robot ?from))))
  (:action pick
    :kind manipulation
    :parameters (?i - item ?l - location)
    :precondition (and (at robot ?l) (at ?i ?l) (handempty))
    :effect (and (holding ?i) (not (at ?i ?l)) (not (handempty))))
  (:action place
    :kind manipulation
    :parameters (?i - item ?l - location)
    :precondition (and (at robot ?l) (holding ?i))
    :effect (and (at ?i ?l) (handempty) (not (holding ?i)))))
"#;

pub const FETCH_PROBLEM: &str = r#"
(define (problem fetch-cup)
  (:domain fetch)
  (:objects cup - item
            a b - location)
  (:init (at robot a) (at cup a) (handempty))
  (:goal (and (at cup b))))
"#;
