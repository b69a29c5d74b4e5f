//! Forward kinematics over the joint tree and a damped least-squares
//! inverse-kinematics solver with numerically differentiated Jacobians.

use crate::geometry::{JointState, Pose3D, Quat};
use crate::model::{JointKind, RobotModel};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("link {0:?} is not part of the model")]
    UnknownLink(String),
    #[error("joint {0:?} is not part of the model")]
    UnknownJoint(String),
}

/// Poses of every link in the root-link frame. Joints absent from `q` sit at
/// zero. Identical inputs produce identical outputs bit for bit.
pub fn forward_kinematics(model: &RobotModel, q: &JointState) -> HashMap<String, Pose3D> {
    let mut poses = HashMap::with_capacity(model.links.len());
    poses.insert(model.root_link.clone(), Pose3D::IDENTITY);
    for ji in model.ordered_joint_indices() {
        let joint = &model.joints[ji];
        let parent = poses[&joint.parent];
        let value = q.position(&joint.name).unwrap_or(0.0);
        let motion = joint_motion(joint, value);
        poses.insert(joint.child.clone(), parent.compose(&joint.origin).compose(&motion));
    }
    poses
}

fn joint_motion(joint: &crate::model::JointSpec, value: f64) -> Pose3D {
    match joint.kind {
        JointKind::Fixed => Pose3D::IDENTITY,
        JointKind::Revolute | JointKind::Continuous => {
            Pose3D::new([0.0; 3], Quat::from_axis_angle(joint.axis, value))
        }
        JointKind::Prismatic => {
            let n = (joint.axis[0] * joint.axis[0]
                + joint.axis[1] * joint.axis[1]
                + joint.axis[2] * joint.axis[2])
                .sqrt();
            Pose3D::from_xyz(
                joint.axis[0] / n * value,
                joint.axis[1] / n * value,
                joint.axis[2] / n * value,
            )
        }
    }
}

/// Pose of one link in the root frame.
pub fn link_pose(
    model: &RobotModel,
    q: &JointState,
    link: &str,
) -> Result<Pose3D, KinematicsError> {
    forward_kinematics(model, q)
        .remove(link)
        .ok_or_else(|| KinematicsError::UnknownLink(link.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkOptions {
    /// Acceptable tip position error (m).
    pub pos_tol: f64,
    /// Acceptable tip orientation error (rad); only used when
    /// `constrain_orientation` is set.
    pub rot_tol: f64,
    pub max_iters: usize,
    pub constrain_orientation: bool,
    /// Least-squares damping factor.
    pub damping: f64,
    /// Per-joint update clamp per iteration (rad or m).
    pub step_clamp: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        IkOptions {
            pos_tol: 1e-4,
            rot_tol: 1e-3,
            max_iters: 200,
            constrain_orientation: false,
            damping: 0.05,
            step_clamp: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IkError {
    #[error("no convergence after the iteration budget (position error {best_pos_err:.6})")]
    NoConvergence { best_pos_err: f64, best_rot_err: f64 },
    #[error("target appears unreachable (position error stalled at {best_pos_err:.6})")]
    UnreachableTarget { best_pos_err: f64 },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Central-difference task-space Jacobian at `q`: three position rows, plus
/// three world-frame rotation rows when `orientation` is set. Column order
/// follows `q.names`. This is the exact Jacobian the IK solver iterates with.
pub fn jacobian(
    model: &RobotModel,
    tip_link: &str,
    q: &JointState,
    orientation: bool,
) -> Result<Vec<Vec<f64>>, KinematicsError> {
    for name in &q.names {
        if model.joint(name).is_none() {
            return Err(KinematicsError::UnknownJoint(name.clone()));
        }
    }
    let h = 1e-6;
    let rows = if orientation { 6 } else { 3 };
    let n = q.len();
    let mut jac = vec![vec![0.0; n]; rows];
    let mut probe = q.clone();
    for col in 0..n {
        let saved = probe.positions[col];
        probe.positions[col] = saved + h;
        let plus = link_pose(model, &probe, tip_link)?;
        probe.positions[col] = saved - h;
        let minus = link_pose(model, &probe, tip_link)?;
        probe.positions[col] = saved;
        for r in 0..3 {
            jac[r][col] = (plus.translation[r] - minus.translation[r]) / (2.0 * h);
        }
        if orientation {
            let dr = plus.rotation.mul(&minus.rotation.conjugate()).to_rotvec();
            for r in 0..3 {
                jac[3 + r][col] = dr[r] / (2.0 * h);
            }
        }
    }
    Ok(jac)
}

/// Iterates damped least-squares updates from `seed` until the tip reaches
/// `target` within tolerance. Only the joints named in `seed` move; each is
/// kept inside its travel limits. A stalled residual well above tolerance is
/// reported as an unreachable target.
pub fn ik_solve(
    model: &RobotModel,
    tip_link: &str,
    target: &Pose3D,
    seed: &JointState,
    opts: &IkOptions,
) -> Result<JointState, IkError> {
    let mut q = seed.clone();
    let limits: Vec<Option<(f64, f64)>> = q
        .names
        .iter()
        .map(|n| {
            model
                .joint(n)
                .map(|j| j.limits)
                .ok_or_else(|| KinematicsError::UnknownJoint(n.clone()))
        })
        .collect::<Result<_, _>>()?;
    clamp_limits(&mut q, &limits);

    let m = if opts.constrain_orientation { 6 } else { 3 };
    let mut best_pos = f64::INFINITY;
    let mut best_rot = f64::INFINITY;
    let mut stall = 0usize;

    for _ in 0..opts.max_iters {
        let tip = link_pose(model, &q, tip_link)?;
        let mut e = [0.0; 6];
        for i in 0..3 {
            e[i] = target.translation[i] - tip.translation[i];
        }
        let pos_err = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
        let mut rot_err = 0.0;
        if opts.constrain_orientation {
            let dr = target.rotation.mul(&tip.rotation.conjugate()).to_rotvec();
            e[3] = dr[0];
            e[4] = dr[1];
            e[5] = dr[2];
            rot_err = (dr[0] * dr[0] + dr[1] * dr[1] + dr[2] * dr[2]).sqrt();
        }
        if pos_err <= opts.pos_tol && (!opts.constrain_orientation || rot_err <= opts.rot_tol) {
            return Ok(q);
        }

        if pos_err + rot_err < best_pos + best_rot - 1e-12 {
            stall = 0;
        } else {
            stall += 1;
            // A residual frozen far from tolerance means the target sits
            // outside the reachable workspace; a near-tolerance plateau is
            // left to run out the iteration budget instead.
            if stall >= 10 && best_pos.min(pos_err) > 10.0 * opts.pos_tol {
                return Err(IkError::UnreachableTarget { best_pos_err: best_pos.min(pos_err) });
            }
        }
        best_pos = best_pos.min(pos_err);
        best_rot = best_rot.min(rot_err);

        let jac = jacobian(model, tip_link, &q, opts.constrain_orientation)?;
        // dq = J^T (J J^T + damping^2 I)^-1 e
        let mut a = [[0.0; 6]; 6];
        for r in 0..m {
            for c in 0..m {
                let mut s = 0.0;
                for k in 0..q.len() {
                    s += jac[r][k] * jac[c][k];
                }
                a[r][c] = s;
            }
            a[r][r] += opts.damping * opts.damping;
        }
        let y = match cholesky_solve(&mut a, &e, m) {
            Some(y) => y,
            None => return Err(IkError::UnreachableTarget { best_pos_err: best_pos }),
        };
        for col in 0..q.len() {
            let mut dq = 0.0;
            for r in 0..m {
                dq += jac[r][col] * y[r];
            }
            q.positions[col] += dq.clamp(-opts.step_clamp, opts.step_clamp);
        }
        clamp_limits(&mut q, &limits);
    }
    Err(IkError::NoConvergence { best_pos_err: best_pos, best_rot_err: best_rot })
}

fn clamp_limits(q: &mut JointState, limits: &[Option<(f64, f64)>]) {
    for (pos, lim) in q.positions.iter_mut().zip(limits) {
        if let Some((lo, hi)) = lim {
            *pos = pos.clamp(*lo, *hi);
        }
    }
}

/// Solves `A y = b` for symmetric positive definite `A` (top-left `m`-by-`m`
/// block) by Cholesky factorization. Returns `None` if factorization fails.
fn cholesky_solve(a: &mut [[f64; 6]; 6], b: &[f64; 6], m: usize) -> Option<[f64; 6]> {
    // In-place lower factor.
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                a[i][i] = s.sqrt();
            } else {
                a[i][j] = s / a[j][j];
            }
        }
    }
    let mut y = [0.0; 6];
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i][k] * y[k];
        }
        y[i] = s / a[i][i];
    }
    for i in (0..m).rev() {
        let mut s = y[i];
        for k in i + 1..m {
            s -= a[k][i] * y[k];
        }
        y[i] = s / a[i][i];
    }
    Some(y)
}
