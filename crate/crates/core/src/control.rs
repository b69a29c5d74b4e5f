//! Feedback controllers: a clamped PID primitive, the closed-loop
//! drive-straight state machine shared by every backend, a time-interpolating
//! joint-trajectory follower, and a pure-pursuit path tracker.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_angle, Pose2D, Twist2D};
use crate::hal::{HalError, RobotHandle};
use crate::manip::JointTrajectory;
use crate::nav::Path2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Absolute bound on the accumulated integral term.
    pub i_clamp: f64,
    /// Absolute bound on the controller output.
    pub out_clamp: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        PidGains { kp: 1.5, ki: 0.0, kd: 0.1, i_clamp: 1.0, out_clamp: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
    pub initialized: bool,
}

/// One PID transition: integrates first, suppresses the derivative on the
/// first call, and clamps both the integral and the output.
pub fn pid_step(gains: &PidGains, state: &PidState, error: f64, dt: f64) -> (f64, PidState) {
    assert!(dt > 0.0, "dt must be positive");
    let integral = (state.integral + error * dt).clamp(-gains.i_clamp, gains.i_clamp);
    let derivative = if state.initialized { (error - state.prev_error) / dt } else { 0.0 };
    let raw = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    let output = raw.clamp(-gains.out_clamp, gains.out_clamp);
    (output, PidState { integral, prev_error: error, initialized: true })
}

/// Controller families by robot category. The legged family is declared
/// but has no implementation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Wheeled,
    Arm,
    Legged,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error(transparent)]
    Hal(#[from] HalError),
    #[error("tracking error {0:.3} rad exceeds the divergence bound")]
    TrackingDiverged(f64),
    #[error("did not reach the goal within {0} s")]
    Timeout(f64),
    #[error("no controller implemented for the {0:?} category")]
    UnsupportedCategory(ControllerKind),
}

/// Validates that a controller category is implemented.
pub fn controller_for(kind: ControllerKind) -> Result<ControllerKind, ControlError> {
    match kind {
        ControllerKind::Wheeled | ControllerKind::Arm => Ok(kind),
        ControllerKind::Legged => Err(ControlError::UnsupportedCategory(kind)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MoveForwardParams {
    pub gains: PidGains,
    /// Remaining-distance magnitude below which the move is done, meters.
    pub tolerance: f64,
    /// Give-up budget in (simulated) seconds.
    pub timeout: f64,
}

impl Default for MoveForwardParams {
    fn default() -> Self {
        MoveForwardParams { gains: PidGains::default(), tolerance: 0.01, timeout: 30.0 }
    }
}

/// What the drive-straight controller wants next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MoveStep {
    /// Command this forward velocity and tick once.
    Drive(f64),
    /// Arrived: command zero velocity and stop iterating.
    Done,
    /// Budget exhausted: command zero velocity and report Timeout.
    TimedOut,
}

/// Closed-loop straight-line drive on odometric progress. The controller is
/// a pure state machine over sensed poses, so the in-process backend and the
/// server-side op handler share it verbatim: feed the latest odometry pose,
/// apply the returned command, advance time, repeat.
#[derive(Debug, Clone)]
pub struct MoveForwardController {
    params: MoveForwardParams,
    distance: f64,
    origin: Option<Pose2D>,
    pid: PidState,
    elapsed: f64,
}

impl MoveForwardController {
    pub fn new(distance: f64, params: MoveForwardParams) -> MoveForwardController {
        MoveForwardController {
            params,
            distance,
            origin: None,
            pid: PidState::default(),
            elapsed: 0.0,
        }
    }

    /// Progress is the displacement from the starting pose projected onto
    /// the starting heading, so lateral drift never counts as distance.
    fn progress(&self, pose: &Pose2D) -> f64 {
        let o = self.origin.expect("origin captured on first step");
        (pose.x - o.x) * o.theta.cos() + (pose.y - o.y) * o.theta.sin()
    }

    pub fn step(&mut self, pose: &Pose2D, dt: f64) -> MoveStep {
        if self.origin.is_none() {
            self.origin = Some(*pose);
        }
        let error = self.distance - self.progress(pose);
        if error.abs() < self.params.tolerance {
            return MoveStep::Done;
        }
        if self.elapsed >= self.params.timeout {
            return MoveStep::TimedOut;
        }
        self.elapsed += dt;
        let (v, pid) = pid_step(&self.params.gains, &self.pid, error, dt);
        self.pid = pid;
        MoveStep::Drive(v)
    }
}

/// Outcome of a completed trajectory follow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowReport {
    /// Largest joint-space tracking error seen at any tick, radians.
    pub max_error: f64,
    /// Final joint-space error after settling, radians.
    pub final_error: f64,
    /// Simulated seconds spent.
    pub duration: f64,
}

/// Tracking error beyond which a follow aborts.
pub const DIVERGENCE_BOUND: f64 = 0.5;
/// Extra settle time appended after the last waypoint, seconds.
const SETTLE_TIME: f64 = 0.5;

fn interpolate(traj: &JointTrajectory, t: f64) -> Vec<f64> {
    let pts = &traj.points;
    if t <= pts[0].t {
        return pts[0].positions.clone();
    }
    for w in pts.windows(2) {
        if t <= w[1].t {
            let span = w[1].t - w[0].t;
            let a = if span <= 0.0 { 1.0 } else { (t - w[0].t) / span };
            return w[0]
                .positions
                .iter()
                .zip(&w[1].positions)
                .map(|(p, q)| p + (q - p) * a)
                .collect();
        }
    }
    pts.last().unwrap().positions.clone()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Streams time-interpolated waypoints to the arm each tick and measures
/// tracking error until the final time plus a settle window.
pub fn follow_trajectory(
    handle: &mut dyn RobotHandle,
    traj: &JointTrajectory,
    dt: f64,
) -> Result<FollowReport, ControlError> {
    assert!(dt > 0.0, "dt must be positive");
    if traj.points.is_empty() {
        return Ok(FollowReport { max_error: 0.0, final_error: 0.0, duration: 0.0 });
    }
    let t_end = traj.duration() + SETTLE_TIME;
    let mut t = 0.0;
    let mut max_error: f64 = 0.0;
    let mut target = interpolate(traj, 0.0);
    while t < t_end {
        target = interpolate(traj, t);
        handle.set_joint_targets(&target)?;
        handle.tick(dt)?;
        t += dt;
        let state = handle.joint_state()?;
        let err = max_abs_diff(&state.positions, &target);
        max_error = max_error.max(err);
        if err > DIVERGENCE_BOUND {
            return Err(ControlError::TrackingDiverged(err));
        }
    }
    let state = handle.joint_state()?;
    let final_error = max_abs_diff(&state.positions, &target);
    Ok(FollowReport { max_error, final_error, duration: t })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackParams {
    /// Pursuit target distance along the path, meters.
    pub lookahead: f64,
    /// Arrival radius around the final waypoint, meters.
    pub goal_tol: f64,
    pub v_max: f64,
    /// Forward speed per meter of remaining distance.
    pub k_v: f64,
    /// Turn rate per radian of heading error.
    pub k_w: f64,
    pub w_max: f64,
    /// Give-up budget in (simulated) seconds.
    pub timeout: f64,
    /// Control period, seconds.
    pub dt: f64,
}

impl Default for TrackParams {
    fn default() -> Self {
        TrackParams {
            lookahead: 0.3,
            goal_tol: 0.05,
            v_max: 0.5,
            k_v: 1.0,
            k_w: 2.0,
            w_max: 1.5,
            timeout: 60.0,
            dt: 0.02,
        }
    }
}

/// Outcome of a completed path track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    /// Distance from the final waypoint on arrival, meters.
    pub final_error: f64,
    /// Simulated seconds spent.
    pub duration: f64,
}

/// Pure-pursuit tracking: steer toward the first waypoint at least a
/// lookahead away, slow down with remaining distance, succeed inside the
/// goal tolerance. The commanded velocity is zero on every exit path.
pub fn track_path(
    handle: &mut dyn RobotHandle,
    path: &Path2D,
    params: &TrackParams,
) -> Result<TrackReport, ControlError> {
    assert!(!path.points.is_empty(), "path must be non-empty");
    let goal = *path.points.last().unwrap();
    let mut idx = 0;
    let mut elapsed = 0.0;
    loop {
        let (pose, _) = handle.odometry()?;
        let to_goal = (pose.x - goal.x).hypot(pose.y - goal.y);
        if to_goal < params.goal_tol {
            handle.set_velocity(Twist2D::ZERO)?;
            return Ok(TrackReport { final_error: to_goal, duration: elapsed });
        }
        if elapsed >= params.timeout {
            handle.set_velocity(Twist2D::ZERO)?;
            return Err(ControlError::Timeout(params.timeout));
        }
        // Advance the pursuit index past waypoints inside the lookahead.
        while idx + 1 < path.points.len() {
            let p = path.points[idx];
            if (pose.x - p.x).hypot(pose.y - p.y) < params.lookahead {
                idx += 1;
            } else {
                break;
            }
        }
        let target = path.points[idx];
        let bearing = (target.y - pose.y).atan2(target.x - pose.x);
        let heading_err = normalize_angle(bearing - pose.theta);
        let w = (params.k_w * heading_err).clamp(-params.w_max, params.w_max);
        // Slow while badly misaligned so the base pivots instead of arcing
        // away from the path.
        let align = (1.0 - heading_err.abs() / std::f64::consts::PI).max(0.0);
        let v = (params.k_v * to_goal).min(params.v_max) * align;
        handle.set_velocity(Twist2D::new(v, w))?;
        handle.tick(params.dt)?;
        elapsed += params.dt;
    }
}
