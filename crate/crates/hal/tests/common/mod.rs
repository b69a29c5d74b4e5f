//! Shared fixture: a small world holding one mobile manipulator and a
//! couple of scene objects, built identically on every call.

use mobiman_core::geometry::{Pose2D, Pose3D};
use mobiman_core::model::{
    CollisionShape, JointKind, JointSpec, LinkSpec, RobotModel, SceneObject, ShapeKind, UnitKind,
};
use mobiman_core::world::{GripperParams, RobotSpawn, SimConfig, World};

pub fn link(name: &str, shape: Option<ShapeKind>) -> LinkSpec {
    LinkSpec {
        name: name.into(),
        collision: shape.map(|kind| CollisionShape { kind, origin: Pose3D::IDENTITY }),
        visual_tag: None,
    }
}

fn joint(
    name: &str,
    kind: JointKind,
    parent: &str,
    child: &str,
    z: f64,
    axis: [f64; 3],
    limits: Option<(f64, f64)>,
) -> JointSpec {
    JointSpec {
        name: name.into(),
        kind,
        parent: parent.into(),
        child: child.into(),
        origin: Pose3D::from_xyz(0.0, 0.0, z),
        axis,
        limits,
        max_velocity: 1.0,
    }
}

/// Differential base with a two-joint arm and a tool link for the gripper.
pub fn robot_model() -> RobotModel {
    RobotModel {
        name: "rover".into(),
        unit_kind: UnitKind::Composite,
        links: vec![
            link("chassis", Some(ShapeKind::Box { size: [0.4, 0.3, 0.2] })),
            link("shoulder", None),
            link("forearm", Some(ShapeKind::Capsule { radius: 0.03, length: 0.25 })),
            link("tool", None),
        ],
        joints: vec![
            joint("lift", JointKind::Prismatic, "chassis", "shoulder", 0.25, [0.0, 0.0, 1.0], Some((0.0, 0.4))),
            joint("swing", JointKind::Revolute, "shoulder", "forearm", 0.05, [0.0, 0.0, 1.0], Some((-2.0, 2.0))),
            joint("wrist_fix", JointKind::Fixed, "forearm", "tool", 0.20, [0.0, 0.0, 1.0], None),
        ],
        root_link: "chassis".into(),
    }
}

pub fn build_world() -> World {
    let mut world = World::new(SimConfig::default());
    world.add_object(SceneObject {
        id: "pillar".into(),
        shape: CollisionShape {
            kind: ShapeKind::Cylinder { radius: 0.15, length: 1.0 },
            origin: Pose3D::IDENTITY,
        },
        pose: Pose3D::from_xyz(2.5, 0.6, 0.5),
        movable: false,
    });
    world.add_object(SceneObject {
        id: "marble".into(),
        shape: CollisionShape {
            kind: ShapeKind::Sphere { radius: 0.03 },
            origin: Pose3D::IDENTITY,
        },
        pose: Pose3D::from_xyz(0.6, -0.4, 0.03),
        movable: true,
    });
    world
        .add_robot(RobotSpawn {
            id: "rover".into(),
            model: robot_model(),
            pose: Pose2D::IDENTITY,
            tool_link: Some("tool".into()),
            gripper: Some(GripperParams::default()),
        })
        .unwrap();
    world
}
