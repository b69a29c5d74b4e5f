//! The in-process backend and the remote handle must be interchangeable:
//! the same command script against identical worlds has to land both
//! robots in the same place.

mod common;

use mobiman_core::geometry::Twist2D;
use mobiman_core::hal::RobotHandle;
use mobiman_core::world::GripperCommand;
use mobiman_hal::{HalServer, RemoteHandle, SimBackend, TimeMode};

struct Trace {
    base: Vec<(f64, f64, f64)>,
    stamps: Vec<f64>,
    joints: Vec<Vec<f64>>,
    width: f64,
    ranges: Vec<f64>,
}

/// One fixed exercise touching every subsystem, recorded the same way on
/// any handle.
fn run_script(h: &mut dyn RobotHandle) -> Trace {
    let mut trace = Trace { base: vec![], stamps: vec![], joints: vec![], width: 0.0, ranges: vec![] };
    let mut snap = |h: &mut dyn RobotHandle, t: &mut Trace| {
        let (pose, stamp) = h.odometry().unwrap();
        t.base.push((pose.x, pose.y, pose.theta));
        t.stamps.push(stamp);
        t.joints.push(h.joint_state().unwrap().positions);
    };

    h.set_velocity(Twist2D::new(0.3, 0.2)).unwrap();
    for _ in 0..25 {
        h.tick(0.02).unwrap();
    }
    snap(h, &mut trace);

    h.set_velocity(Twist2D::ZERO).unwrap();
    h.tick(0.02).unwrap();
    h.move_forward(0.5).unwrap();
    snap(h, &mut trace);

    h.set_joint_targets(&[0.3, -0.4]).unwrap();
    for _ in 0..40 {
        h.tick(0.02).unwrap();
    }
    snap(h, &mut trace);

    h.gripper_command(GripperCommand::Close).unwrap();
    for _ in 0..60 {
        h.tick(0.02).unwrap();
    }
    trace.width = h.gripper_width().unwrap();
    trace.ranges = h.lidar().unwrap().ranges;
    trace
}

#[test]
fn remote_and_in_process_backends_agree_on_the_same_script() {
    let mut local = SimBackend::with_inferred_capabilities(common::build_world(), "rover").unwrap();
    let local_trace = run_script(&mut local);

    let server = HalServer::serve(common::build_world(), "127.0.0.1:0", TimeMode::Lockstep).unwrap();
    let mut remote = RemoteHandle::connect(server.addr(), "rover").unwrap();
    let remote_trace = run_script(&mut remote);

    assert_eq!(local.capabilities(), remote.capabilities());

    for (i, (l, r)) in local_trace.base.iter().zip(&remote_trace.base).enumerate() {
        assert!((l.0 - r.0).abs() < 0.01, "x mismatch at snapshot {i}: {} vs {}", l.0, r.0);
        assert!((l.1 - r.1).abs() < 0.01, "y mismatch at snapshot {i}: {} vs {}", l.1, r.1);
        assert!((l.2 - r.2).abs() < 0.01, "theta mismatch at snapshot {i}: {} vs {}", l.2, r.2);
    }
    for (i, (l, r)) in local_trace.stamps.iter().zip(&remote_trace.stamps).enumerate() {
        assert!((l - r).abs() < 1e-9, "stamp mismatch at snapshot {i}: {l} vs {r}");
    }
    for (i, (lj, rj)) in local_trace.joints.iter().zip(&remote_trace.joints).enumerate() {
        assert_eq!(lj.len(), rj.len());
        for (l, r) in lj.iter().zip(rj) {
            assert!((l - r).abs() < 1e-3, "joint mismatch at snapshot {i}: {l} vs {r}");
        }
    }
    assert!((local_trace.width - remote_trace.width).abs() < 1e-6);
    assert_eq!(local_trace.ranges.len(), remote_trace.ranges.len());
    for (l, r) in local_trace.ranges.iter().zip(&remote_trace.ranges) {
        assert!((l - r).abs() < 1e-6, "lidar mismatch: {l} vs {r}");
    }
}
