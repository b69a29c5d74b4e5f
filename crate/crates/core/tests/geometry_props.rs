//! Property tests for the pose and rotation algebra.

use mobiman_core::geometry::{normalize_angle, Pose2D, Pose3D, Quat};
use proptest::prelude::*;
use std::f64::consts::PI;

fn arb_quat() -> impl Strategy<Value = Quat> {
    (-PI..PI, -1.4f64..1.4, -PI..PI).prop_map(|(r, p, y)| Quat::from_rpy(r, p, y))
}

fn arb_pose3d() -> impl Strategy<Value = Pose3D> {
    (arb_quat(), prop::array::uniform3(-10.0f64..10.0))
        .prop_map(|(q, t)| Pose3D { translation: t, rotation: q })
}

fn close3(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
}

proptest! {
    #[test]
    fn composing_a_pose_with_its_inverse_is_the_identity(
        pose in arb_pose3d(),
        p in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let left = pose.invert().compose(&pose);
        let right = pose.compose(&pose.invert());
        prop_assert!(close3(left.transform_point(p), p, 1e-9));
        prop_assert!(close3(right.transform_point(p), p, 1e-9));
    }

    #[test]
    fn pose_composition_matches_chained_point_transforms(
        a in arb_pose3d(),
        b in arb_pose3d(),
        p in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let composed = a.compose(&b).transform_point(p);
        let chained = a.transform_point(b.transform_point(p));
        prop_assert!(close3(composed, chained, 1e-9));
    }

    #[test]
    fn normalized_angles_stay_in_range_and_keep_their_direction(raw in -100.0f64..100.0) {
        let n = normalize_angle(raw);
        prop_assert!(n > -PI && n <= PI, "{n} out of range");
        // The result differs from the input by an exact multiple of 2 pi.
        let k = (raw - n) / (2.0 * PI);
        prop_assert!((k - k.round()).abs() < 1e-9, "shifted by {k} turns");
    }

    #[test]
    fn roll_pitch_yaw_survives_a_quaternion_round_trip(
        roll in -3.0f64..3.0,
        pitch in -1.4f64..1.4,
        yaw in -3.0f64..3.0,
    ) {
        let (r, p, y) = Quat::from_rpy(roll, pitch, yaw).to_rpy();
        prop_assert!((r - roll).abs() < 1e-9, "roll {roll} became {r}");
        prop_assert!((p - pitch).abs() < 1e-9, "pitch {pitch} became {p}");
        prop_assert!((y - yaw).abs() < 1e-9, "yaw {yaw} became {y}");
    }

    #[test]
    fn quaternion_product_rotates_like_sequential_rotations(
        a in arb_quat(),
        b in arb_quat(),
        v in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let combined = a.mul(&b).rotate(v);
        let sequential = a.rotate(b.rotate(v));
        prop_assert!(close3(combined, sequential, 1e-9));
        // Rotations never change a vector's length.
        let n0 = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let n1 = (combined[0] * combined[0] + combined[1] * combined[1] + combined[2] * combined[2]).sqrt();
        prop_assert!((n0 - n1).abs() < 1e-9);
    }

    #[test]
    fn planar_pose_algebra_agrees_with_its_3d_lift(
        ax in -5.0f64..5.0, ay in -5.0f64..5.0, at in -PI..PI,
        bx in -5.0f64..5.0, by in -5.0f64..5.0, bt in -PI..PI,
        px in -3.0f64..3.0, py in -3.0f64..3.0,
    ) {
        let a = Pose2D::new(ax, ay, at);
        let b = Pose2D::new(bx, by, bt);
        let flat = a.compose(&b).transform_point([px, py]);
        let lifted = a.to_pose3d().compose(&b.to_pose3d()).transform_point([px, py, 0.0]);
        prop_assert!((flat[0] - lifted[0]).abs() < 1e-9);
        prop_assert!((flat[1] - lifted[1]).abs() < 1e-9);
        prop_assert!(lifted[2].abs() < 1e-9);
    }
}
