//! Runs the canonical fetch scenario (pick a cup from one table, carry it
//! to another, set it down) against the in-process simulator and prints
//! the execution report as JSON lines.
//!
//! Pass `--remote` to run the same plan over a loopback TCP server
//! instead, proving the executor never notices which backend it drives.

use mobiman_core::geometry::{Pose2D, Pose3D, Quat};
use mobiman_core::hal::RobotHandle;
use mobiman_core::model::{
    compose, namespace, CollisionShape, JointKind, JointSpec, LinkSpec, RobotModel, SceneObject,
    ShapeKind, UnitKind,
};
use mobiman_core::task::{parse_domain, parse_problem, plan, PlanMode};
use mobiman_core::world::{GripperParams, RobotSpawn, SimConfig, World};
use mobiman_exec::{execute_plan, ExecConfig, MapExtent, NamedLocation, SkillBinding, WorldKnowledge};
use mobiman_hal::{HalServer, RemoteHandle, SimBackend, TimeMode};

const DOMAIN: &str = "\
domain fetch
  action move ?from ?to : nav
  action pick ?obj ?loc : manip
  action place ?obj ?loc : manip
";

const PROBLEM: &str = "\
problem deliver-cup domain fetch
  objects cup a b
  init (robot-at a) (at cup a) (free gripper)
  goal (at cup b)
";

fn arm() -> RobotModel {
    let caps = |x: f64| CollisionShape {
        origin: Pose3D::new([0.0, 0.0, x / 2.0], Quat::IDENTITY),
        kind: ShapeKind::Capsule { radius: 0.04, length: 0.4 },
    };
    RobotModel {
        name: "arm6".into(),
        root_link: "mount".into(),
        unit_kind: UnitKind::Arm,
        links: vec![
            LinkSpec { name: "mount".into(), collision: None, visual_tag: "arm-mount".into() },
            LinkSpec { name: "l1".into(), collision: None, visual_tag: "arm-shoulder".into() },
            LinkSpec { name: "l2".into(), collision: Some(caps(0.4)), visual_tag: "arm-upper".into() },
            LinkSpec { name: "l3".into(), collision: Some(caps(0.4)), visual_tag: "arm-fore".into() },
            LinkSpec { name: "l4".into(), collision: None, visual_tag: "arm-wrist-a".into() },
            LinkSpec { name: "l5".into(), collision: None, visual_tag: "arm-wrist-b".into() },
            LinkSpec { name: "l6".into(), collision: None, visual_tag: "arm-flange".into() },
            LinkSpec {
                name: "tool".into(),
                collision: Some(CollisionShape {
                    origin: Pose3D::IDENTITY,
                    kind: ShapeKind::Sphere { radius: 0.03 },
                }),
                visual_tag: "arm-tool".into(),
            },
        ],
        joints: vec![
            JointSpec {
                name: "j1".into(),
                parent: "mount".into(),
                child: "l1".into(),
                origin: Pose3D::from_xyz(0.0, 0.0, 0.15),
                kind: JointKind::Revolute { axis: [0.0, 0.0, 1.0] },
                limits: Some((-std::f64::consts::PI, std::f64::consts::PI)),
                max_velocity: 1.5,
            },
            JointSpec {
                name: "j2".into(),
                parent: "l1".into(),
                child: "l2".into(),
                origin: Pose3D::from_xyz(0.0, 0.0, 0.10),
                kind: JointKind::Revolute { axis: [0.0, 1.0, 0.0] },
                limits: Some((-2.0, 2.0)),
                max_velocity: 1.5,
            },
            JointSpec {
                name: "j3".into(),
                parent: "l2".into(),
                child: "l3".into(),
                origin: Pose3D::from_xyz(0.0, 0.0, 0.40),
                kind: JointKind::Revolute { axis: [0.0, 1.0, 0.0] },
                limits: Some((-2.5, 2.5)),
                max_velocity: 1.5,
            },
            JointSpec {
                name: "j4".into(),
                parent: "l3".into(),
                child: "l4".into(),
                origin: Pose3D::from_xyz(0.0, 0.0, 0.40),
                kind: JointKind::Revolute { axis: [0.0, 0.0, 1.0] },
                limits: Some((-std::f64::consts::PI, std::f64::consts::PI)),
                max_velocity: 1.5,
            },
            JointSpec {
                name: "j5".into(),
                parent: "l4".into(),
                child: "l5".into(),
                origin: Pose3D::from_xyz(0.0, 0.0, 0.10),
                kind: JointKind::Revolute { axis: [0.0, 1.0, 0.0] },
                limits: Some((-2.0, 2.0)),
                max_velocity: 1.5,
            },
            JointSpec {
                name: "j6".into(),
                parent: "l5".into(),
                child: "l6".into(),
                origin: Pose3D::from_xyz(0.0, 0.0, 0.10),
                kind: JointKind::Continuous { axis: [0.0, 0.0, 1.0] },
                limits: None,
                max_velocity: 1.5,
            },
            JointSpec {
                name: "tool_fix".into(),
                parent: "l6".into(),
                child: "tool".into(),
                origin: Pose3D::from_xyz(0.0, 0.0, 0.08),
                kind: JointKind::Fixed,
                limits: None,
                max_velocity: 0.0,
            },
        ],
    }
}

fn base() -> RobotModel {
    RobotModel {
        name: "diffbase".into(),
        root_link: "chassis".into(),
        unit_kind: UnitKind::Base,
        links: vec![LinkSpec {
            name: "chassis".into(),
            collision: Some(CollisionShape {
                origin: Pose3D::from_xyz(0.0, 0.0, 0.15),
                kind: ShapeKind::Box { size: [0.40, 0.36, 0.30] },
            }),
            visual_tag: "base-chassis".into(),
        }],
        joints: vec![],
    }
}

fn table(id: &str, x: f64, y: f64) -> SceneObject {
    SceneObject {
        id: id.into(),
        shape: CollisionShape {
            origin: Pose3D::IDENTITY,
            kind: ShapeKind::Box { size: [0.5, 0.5, 0.3] },
        },
        pose: Pose3D::from_xyz(x, y, 0.15),
        movable: false,
    }
}

fn build_world() -> World {
    let robot = compose(
        &namespace(&base(), "base"),
        &namespace(&arm(), "arm"),
        "base/chassis",
        Pose3D::from_xyz(0.0, 0.0, 0.30),
    )
    .expect("composition");
    let mut world = World::new(SimConfig::default());
    world.add_object(table("table_a", 1.0, 0.0));
    world.add_object(table("table_b", 1.0, 1.2));
    world.add_object(SceneObject {
        id: "cup".into(),
        shape: CollisionShape {
            origin: Pose3D::IDENTITY,
            kind: ShapeKind::Cylinder { radius: 0.03, length: 0.08 },
        },
        pose: Pose3D::from_xyz(1.0, 0.0, 0.35),
        movable: true,
    });
    world
        .add_robot(RobotSpawn {
            id: "fetcher".into(),
            model: robot,
            base_pose: Pose2D::new(0.45, 0.0, 0.0),
            tool_link: Some("arm/tool".into()),
            gripper: Some(GripperParams::default()),
        })
        .expect("spawn");
    world
}

fn knowledge() -> WorldKnowledge {
    let mut k = WorldKnowledge::default();
    k.locations.insert(
        "a".into(),
        NamedLocation { pose: Pose2D::new(0.45, 0.0, 0.0), point: Some([1.0, 0.0, 0.35]) },
    );
    k.locations.insert(
        "b".into(),
        NamedLocation { pose: Pose2D::new(0.45, 1.2, 0.0), point: Some([1.0, 1.2, 0.35]) },
    );
    k
}

fn run(handle: &mut dyn RobotHandle) {
    let domain = parse_domain(DOMAIN).expect("domain");
    let problem = parse_problem(PROBLEM).expect("problem");
    let plan = plan(&domain, &problem, PlanMode::Optimal).expect("plan");
    eprintln!("plan:");
    for step in &plan.steps {
        eprintln!("  {step}");
    }

    let robot = compose(
        &namespace(&base(), "base"),
        &namespace(&arm(), "arm"),
        "base/chassis",
        Pose3D::from_xyz(0.0, 0.0, 0.30),
    )
    .expect("composition");
    let mut cfg = ExecConfig::new(robot, "arm/tool");
    cfg.params.map = MapExtent {
        width_m: 4.0,
        height_m: 3.2,
        resolution: 0.05,
        origin: (-1.0, -1.0),
    };

    let report = execute_plan(handle, &plan, &SkillBinding::fetch_default(), &knowledge(), &cfg)
        .expect("plan should bind");
    print!("{}", report.to_jsonl());

    let objects = handle.scene_objects().expect("scene");
    let cup = objects.iter().find(|o| o.id == "cup").expect("cup");
    let c = cup.aabb().center();
    eprintln!("cup ended at ({:.3}, {:.3}, {:.3})", c[0], c[1], c[2]);
    if !report.success() {
        std::process::exit(1);
    }
}

fn main() {
    let remote = std::env::args().any(|a| a == "--remote");
    if remote {
        let server = HalServer::serve(build_world(), "127.0.0.1:0", TimeMode::Lockstep)
            .expect("server");
        eprintln!("driving over tcp at {}", server.addr());
        let mut handle = RemoteHandle::connect(server.addr(), "fetcher").expect("connect");
        run(&mut handle);
    } else {
        let mut handle =
            SimBackend::with_inferred_capabilities(build_world(), "fetcher").expect("backend");
        run(&mut handle);
    }
}
