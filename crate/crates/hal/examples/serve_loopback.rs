//! Serve a small demo world over TCP so external clients can talk to it.
//!
//! ```sh
//! cargo run -p mobiman-hal --example serve_loopback [port]
//! ```
//!
//! Prints the bound address, then serves in live mode (a 50 Hz wall-clock
//! ticker advances the simulation) until the process is killed.

use mobiman_core::geometry::{Pose2D, Pose3D};
use mobiman_core::model::{
    CollisionShape, JointKind, JointSpec, LinkSpec, RobotModel, SceneObject, ShapeKind, UnitKind,
};
use mobiman_core::world::{GripperParams, RobotSpawn, SimConfig, World};
use mobiman_hal::{HalServer, TimeMode};

fn demo_world() -> World {
    let model = RobotModel {
        name: "demo".into(),
        unit_kind: UnitKind::Composite,
        links: vec![
            LinkSpec {
                name: "chassis".into(),
                collision: Some(CollisionShape {
                    kind: ShapeKind::Box { size: [0.6, 0.5, 0.3] },
                    origin: Pose3D::IDENTITY,
                }),
                visual_tag: None,
            },
            LinkSpec { name: "tool".into(), collision: None, visual_tag: None },
        ],
        joints: vec![JointSpec {
            name: "swivel".into(),
            kind: JointKind::Revolute,
            parent: "chassis".into(),
            child: "tool".into(),
            origin: Pose3D::from_xyz(0.0, 0.0, 0.3),
            axis: [0.0, 0.0, 1.0],
            limits: Some((-2.0, 2.0)),
            max_velocity: 1.0,
        }],
        root_link: "chassis".into(),
    };

    let mut world = World::new(SimConfig::default());
    world.add_object(SceneObject {
        id: "crate".into(),
        shape: CollisionShape {
            kind: ShapeKind::Box { size: [0.4, 0.4, 0.4] },
            origin: Pose3D::IDENTITY,
        },
        pose: Pose3D::from_xyz(1.5, 0.0, 0.2),
        movable: true,
    });
    world
        .add_robot(RobotSpawn {
            id: "demo".into(),
            model,
            pose: Pose2D::IDENTITY,
            tool_link: Some("tool".into()),
            gripper: Some(GripperParams::default()),
        })
        .expect("demo world is well-formed");
    world
}

fn main() {
    let port: u16 = std::env::args().nth(1).and_then(|p| p.parse().ok()).unwrap_or(0);
    let server = HalServer::serve(demo_world(), &format!("127.0.0.1:{port}"), TimeMode::Live)
        .expect("failed to bind");
    println!("listening on {}", server.addr());
    println!("robot: demo   protocol: newline-delimited JSON");
    loop {
        std::thread::sleep(std::time::Duration::from_secs(3600));
    }
}
