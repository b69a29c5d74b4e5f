//! The five executable skills and the plan executor that sequences them.
//!
//! Every skill works exclusively through the abstract robot handle, so
//! the same plan runs unchanged against the in-process simulator or a
//! remote server. Control loops advance time with explicit ticks, which
//! requires a backend that accepts them (the in-process backend or a
//! lockstep server).
//!
//! Skill failures — unreachable goals, missed grasps, transport errors —
//! are recorded in the execution report and stop the run; they are never
//! thrown. Only precondition violations (an unbound action schema, a
//! skill the handle lacks capabilities for) surface as hard errors
//! before anything moves.

use std::collections::HashMap;
use std::time::Instant;

use mobiman_core::control::{follow_trajectory, TrackParams};
use mobiman_core::geometry::{normalize_angle, Pose2D, Pose3D, Twist2D};
use mobiman_core::hal::{Capabilities, RobotHandle};
use mobiman_core::kinematics::link_pose;
use mobiman_core::manip::{
    plan_arm, propose_grasp, ArmGoal, MotionPlanRequest, RrtParams, PRE_GRASP_STANDOFF,
};
use mobiman_core::model::{RobotModel, SceneObject};
use mobiman_core::nav::{
    inflate, plan_global, plan_local, smooth_path, update_map, DwaParams, OccupancyGrid, L_CLAMP,
};
use mobiman_core::task::Plan;
use mobiman_core::world::GripperCommand;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{ExecutionReport, OverallStatus, SkillId, StepOutcome, StepReport};

/// A place the robot can be sent to by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedLocation {
    /// Base goal pose for navigation.
    pub pose: Pose2D,
    /// Optional placement point: where an object's center should end up
    /// when something is placed "at" this location.
    #[serde(default)]
    pub point: Option<[f64; 3]>,
}

/// Prior knowledge handed to the executor: named locations. Object ids
/// are resolved live against the handle's scene.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldKnowledge {
    pub locations: HashMap<String, NamedLocation>,
}

/// How symbolic plans map onto skills and world entities.
///
/// `schemas` routes each action schema name to a skill procedure;
/// `constants` renames symbolic constants to world entity ids or
/// location names (identity for constants not listed).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SkillBinding {
    pub schemas: HashMap<String, SkillId>,
    #[serde(default)]
    pub constants: HashMap<String, String>,
}

impl SkillBinding {
    /// Binding for the move/pick/place domain family.
    pub fn fetch_default() -> SkillBinding {
        let mut schemas = HashMap::new();
        schemas.insert("move".to_string(), SkillId::NavigateTo);
        schemas.insert("pick".to_string(), SkillId::PickObject);
        schemas.insert("place".to_string(), SkillId::PlaceObject);
        SkillBinding { schemas, constants: HashMap::new() }
    }

    pub fn resolve<'a>(&'a self, constant: &'a str) -> &'a str {
        self.constants.get(constant).map(String::as_str).unwrap_or(constant)
    }
}

/// Rectangular extent of the navigation grid, in world meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapExtent {
    pub width_m: f64,
    pub height_m: f64,
    pub resolution: f64,
    /// World coordinates of the grid's lower-left corner.
    pub origin: (f64, f64),
}

impl Default for MapExtent {
    fn default() -> Self {
        MapExtent { width_m: 10.0, height_m: 10.0, resolution: 0.05, origin: (-5.0, -5.0) }
    }
}

/// Tunable executor parameters, all with workable defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecParams {
    pub map: MapExtent,
    /// Obstacle inflation radius for base planning, meters.
    pub robot_radius: f64,
    /// Scene objects whose volume starts above this height don't block
    /// the base (e.g. a cup on a table).
    pub nav_height: f64,
    /// Final heading tolerance after navigation, radians.
    pub yaw_tolerance: f64,
    pub track: TrackParams,
    pub dwa: DwaParams,
    pub rrt: RrtParams,
    /// Control period for manipulation and gripper loops, seconds.
    pub dt: f64,
    /// Simulated seconds to wait for the gripper to stop moving.
    pub settle_budget: f64,
    /// Largest offset from the placement point that counts as placed.
    pub place_tolerance: f64,
}

impl Default for ExecParams {
    fn default() -> Self {
        ExecParams {
            map: MapExtent::default(),
            robot_radius: 0.25,
            nav_height: 0.35,
            yaw_tolerance: 0.03,
            track: TrackParams::default(),
            dwa: DwaParams::default(),
            rrt: RrtParams::default(),
            dt: 0.02,
            settle_budget: 3.0,
            place_tolerance: 0.05,
        }
    }
}

/// Everything the executor must know about the robot it drives.
#[derive(Debug, Clone)]
pub struct ExecConfig {
    /// Kinematic model used for arm planning (the handle itself exposes
    /// no model, by design).
    pub model: RobotModel,
    /// Link whose pose grasp and place targets refer to.
    pub tip_link: String,
    pub gripper_max_width: f64,
    pub params: ExecParams,
}

impl ExecConfig {
    pub fn new(model: RobotModel, tip_link: impl Into<String>) -> ExecConfig {
        ExecConfig {
            model,
            tip_link: tip_link.into(),
            gripper_max_width: 0.10,
            params: ExecParams::default(),
        }
    }
}

/// Precondition violations caught before any robot command is issued.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("plan step {step} uses schema {schema:?} which has no skill binding")]
    UnboundSchema { step: usize, schema: String },
    #[error("skill {skill} needs the {capability} capability, which this handle lacks")]
    MissingCapability { skill: SkillId, capability: &'static str },
}

/// Mutable execution context threaded through a plan.
#[derive(Debug, Clone, Default)]
pub struct ExecState {
    /// Id of the object currently held, if any.
    pub held: Option<String>,
}

/// Outcome of one skill invocation.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub outcome: StepOutcome,
    pub sim_seconds: f64,
    pub metrics: serde_json::Map<String, serde_json::Value>,
}

fn required_capabilities(skill: SkillId) -> &'static [(&'static str, fn(&Capabilities) -> bool)] {
    match skill {
        SkillId::NavigateTo => {
            &[("base", |c| c.base), ("lidar", |c| c.lidar), ("odom", |c| c.odom)]
        }
        SkillId::PickObject | SkillId::PlaceObject => {
            &[("arm", |c| c.arm), ("gripper", |c| c.gripper), ("odom", |c| c.odom)]
        }
        SkillId::OpenGripper | SkillId::CloseGripper => &[("gripper", |c| c.gripper)],
    }
}

/// Runs a plan step by step, halting at the first failure. Returns an
/// error only for precondition violations detected before execution;
/// every runtime problem lands in the report instead.
pub fn execute_plan(
    handle: &mut dyn RobotHandle,
    plan: &Plan,
    binding: &SkillBinding,
    knowledge: &WorldKnowledge,
    cfg: &ExecConfig,
) -> Result<ExecutionReport, ExecError> {
    let mut skills = Vec::with_capacity(plan.steps.len());
    for (step, action) in plan.steps.iter().enumerate() {
        let skill = binding
            .schemas
            .get(&action.name)
            .copied()
            .ok_or_else(|| ExecError::UnboundSchema { step, schema: action.name.clone() })?;
        skills.push(skill);
    }
    let caps = handle.capabilities();
    for &skill in &skills {
        for (name, have) in required_capabilities(skill) {
            if !have(&caps) {
                return Err(ExecError::MissingCapability { skill, capability: name });
            }
        }
    }

    let t0 = Instant::now();
    let mut state = ExecState::default();
    let mut steps = Vec::new();
    let mut status = OverallStatus::Success;
    for (i, (action, &skill)) in plan.steps.iter().zip(&skills).enumerate() {
        let args: Vec<String> =
            action.args.iter().map(|a| binding.resolve(a).to_string()).collect();
        let w0 = Instant::now();
        let result = run_skill(handle, skill, &args, knowledge, cfg, &mut state);
        let failed = !result.outcome.is_success();
        steps.push(StepReport {
            step: i,
            action: action.to_string(),
            skill,
            outcome: result.outcome,
            sim_seconds: result.sim_seconds,
            wall_seconds: w0.elapsed().as_secs_f64(),
            metrics: result.metrics,
        });
        if failed {
            status = OverallStatus::Failure;
            break;
        }
    }
    Ok(ExecutionReport { steps, status, wall_seconds: t0.elapsed().as_secs_f64() })
}

/// Runs one skill in isolation with the same semantics it has inside
/// [`execute_plan`] (starting with an empty gripper).
pub fn execute_skill(
    handle: &mut dyn RobotHandle,
    skill: SkillId,
    args: &[String],
    knowledge: &WorldKnowledge,
    cfg: &ExecConfig,
) -> StepResult {
    run_skill(handle, skill, args, knowledge, cfg, &mut ExecState::default())
}

fn run_skill(
    handle: &mut dyn RobotHandle,
    skill: SkillId,
    args: &[String],
    knowledge: &WorldKnowledge,
    cfg: &ExecConfig,
    state: &mut ExecState,
) -> StepResult {
    let mut tally = Tally::default();
    let outcome = match skill {
        SkillId::NavigateTo => navigate_skill(handle, args, knowledge, cfg, state, &mut tally),
        SkillId::PickObject => pick_skill(handle, args, cfg, state, &mut tally),
        SkillId::PlaceObject => place_skill(handle, args, knowledge, cfg, state, &mut tally),
        SkillId::OpenGripper => gripper_skill(handle, GripperCommand::Open, cfg, &mut tally),
        SkillId::CloseGripper => gripper_skill(handle, GripperCommand::Close, cfg, &mut tally),
    };
    let outcome = match outcome {
        Ok(()) => StepOutcome::Success,
        Err(reason) => StepOutcome::Failure { reason },
    };
    StepResult { outcome, sim_seconds: tally.sim, metrics: tally.metrics }
}

/// Accumulates simulated time and metrics across a skill's stages.
#[derive(Default)]
struct Tally {
    sim: f64,
    metrics: serde_json::Map<String, serde_json::Value>,
}

impl Tally {
    fn put(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), serde_json::Value::from(value));
    }
}

fn hal_err(e: mobiman_core::hal::HalError) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------
// navigate_to

/// Builds a grid from the live scene (held object excluded, overhead
/// objects ignored), refines it with one lidar scan, plans a global
/// path on the inflated map, then tracks it with a reactive local
/// planner per control cycle and a proportional docking law near the
/// goal, finishing with an in-place rotation to the goal heading.
fn navigate_skill(
    handle: &mut dyn RobotHandle,
    args: &[String],
    knowledge: &WorldKnowledge,
    cfg: &ExecConfig,
    state: &ExecState,
    tally: &mut Tally,
) -> Result<(), String> {
    let dest = args.last().ok_or("navigate_to needs a location argument")?;
    let loc = knowledge
        .locations
        .get(dest)
        .ok_or_else(|| format!("unknown location {dest:?}"))?;
    let goal = loc.pose;
    let p = cfg.params.track;
    let dt = p.dt;

    let (pose, _) = handle.odometry().map_err(hal_err)?;
    let already_there = pose.distance(&goal) < p.goal_tol
        && normalize_angle(goal.theta - pose.theta).abs() <= cfg.params.yaw_tolerance;
    if already_there {
        tally.put("path_cost", 0.0);
        tally.put("final_position_error", pose.distance(&goal));
        return Ok(());
    }

    let objects = handle.scene_objects().map_err(hal_err)?;
    let mut grid = rasterize_scene(&objects, state.held.as_deref(), &cfg.params);
    let scan = handle.lidar().map_err(hal_err)?;
    update_map(&mut grid, &scan, &pose);
    let grid = inflate(&grid, cfg.params.robot_radius);

    let path = plan_global(&grid, &pose, &goal)
        .map_err(|e| format!("global planning failed: {e}"))?;
    let path = smooth_path(&grid, &path);
    tally.put("path_cost", path.total_cost);
    tally.put("waypoints", path.points.len() as f64);

    // Track the path: a dynamic-window step toward the pursuit target
    // while en route, a proportional slowdown once the final waypoint is
    // inside the lookahead.
    let mut idx = 0;
    loop {
        let (pose, _) = handle.odometry().map_err(hal_err)?;
        let to_goal = pose.distance(&goal);
        if to_goal < p.goal_tol {
            handle.set_velocity(Twist2D::ZERO).map_err(hal_err)?;
            tally.put("final_position_error", to_goal);
            break;
        }
        if tally.sim >= p.timeout {
            handle.set_velocity(Twist2D::ZERO).map_err(hal_err)?;
            return Err(format!("tracking timed out after {:.1} simulated seconds", tally.sim));
        }
        while idx + 1 < path.points.len() {
            let wp = path.points[idx];
            if (pose.x - wp.x).hypot(pose.y - wp.y) < p.lookahead {
                idx += 1;
            } else {
                break;
            }
        }
        let target = path.points[idx];
        let docking = idx + 1 == path.points.len() && to_goal < p.lookahead;
        // With a gross heading error, arcing toward the target drifts the
        // base sideways — in a tight corridor that can pin it against the
        // inflated boundary. Turn in place first, and also fall back to
        // turning when the local planner is boxed in (its best admissible
        // command is to stand still).
        const TURN_IN_PLACE_GATE: f64 = 0.9;
        let bearing = (target.y - pose.y).atan2(target.x - pose.x);
        let heading_err = normalize_angle(bearing - pose.theta);
        let rotate_toward_target = |err: f64| {
            let scan = if err.abs() < 0.05 { 0.3 } else { p.k_w * err };
            Twist2D::new(0.0, scan.clamp(-p.w_max, p.w_max))
        };
        let twist = if docking {
            let bearing = (goal.y - pose.y).atan2(goal.x - pose.x);
            let heading_err = normalize_angle(bearing - pose.theta);
            let w = (p.k_w * heading_err).clamp(-p.w_max, p.w_max);
            let align = (1.0 - heading_err.abs() / std::f64::consts::PI).max(0.0);
            Twist2D::new((p.k_v * to_goal).min(p.v_max) * align, w)
        } else if heading_err.abs() > TURN_IN_PLACE_GATE {
            rotate_toward_target(heading_err)
        } else {
            let planned = plan_local(&grid, &pose, (target.x, target.y), &cfg.params.dwa)
                .map_err(|e| format!("local planning failed: {e}"))?;
            if planned.v.abs() < 1e-9 && planned.w.abs() < 1e-9 {
                rotate_toward_target(heading_err)
            } else {
                planned
            }
        };
        if std::env::var_os("MOBIMAN_NAV_TRACE").is_some()
            && (tally.sim / dt).round() as u64 % 25 == 0
        {
            eprintln!(
                "[nav t={:6.2}] pose=({:.3},{:.3},{:.3}) idx={idx} docking={docking} twist=({:.3},{:.3}) to_goal={to_goal:.3}",
                tally.sim, pose.x, pose.y, pose.theta, twist.v, twist.w
            );
        }
        handle.set_velocity(twist).map_err(hal_err)?;
        handle.tick(dt).map_err(hal_err)?;
        tally.sim += dt;
    }

    // Rotate in place onto the goal heading.
    loop {
        let (pose, _) = handle.odometry().map_err(hal_err)?;
        let err = normalize_angle(goal.theta - pose.theta);
        if err.abs() <= cfg.params.yaw_tolerance {
            handle.set_velocity(Twist2D::ZERO).map_err(hal_err)?;
            tally.put("final_heading_error", err.abs());
            return Ok(());
        }
        if tally.sim >= p.timeout {
            handle.set_velocity(Twist2D::ZERO).map_err(hal_err)?;
            return Err("final rotation timed out".to_string());
        }
        let w = (p.k_w * err).clamp(-p.w_max, p.w_max);
        handle.set_velocity(Twist2D::new(0.0, w)).map_err(hal_err)?;
        handle.tick(dt).map_err(hal_err)?;
        tally.sim += dt;
    }
}

/// Known-free grid with every scene object's footprint stamped occupied.
/// The held object travels with the robot and is skipped; so is anything
/// whose volume starts above the navigation height.
fn rasterize_scene(
    objects: &[SceneObject],
    held: Option<&str>,
    params: &ExecParams,
) -> OccupancyGrid {
    let e = params.map;
    let w = ((e.width_m / e.resolution).round() as usize).max(1);
    let h = ((e.height_m / e.resolution).round() as usize).max(1);
    let origin = Pose2D::new(e.origin.0, e.origin.1, 0.0);
    let mut grid = OccupancyGrid::filled(w, h, e.resolution, origin, -L_CLAMP);
    for obj in objects {
        if held == Some(obj.id.as_str()) {
            continue;
        }
        let bb = obj.aabb();
        if bb.min[2] > params.nav_height {
            continue;
        }
        let cell = |v: f64, o: f64| ((v - o) / e.resolution).floor() as i64;
        let x0 = cell(bb.min[0], origin.x).max(0);
        let y0 = cell(bb.min[1], origin.y).max(0);
        let x1 = cell(bb.max[0], origin.x).min(w as i64 - 1);
        let y1 = cell(bb.max[1], origin.y).min(h as i64 - 1);
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                grid.set_log_odds(cx as usize, cy as usize, L_CLAMP);
            }
        }
    }
    grid
}

// ---------------------------------------------------------------------
// manipulation skills

/// World pose of the tool link, from odometry and the joint state.
fn tool_world_pose(handle: &mut dyn RobotHandle, cfg: &ExecConfig) -> Result<Pose3D, String> {
    let q = handle.joint_state().map_err(hal_err)?;
    let tip = link_pose(&cfg.model, &q, &cfg.tip_link).map_err(|e| e.to_string())?;
    let (base, _) = handle.odometry().map_err(hal_err)?;
    Ok(base.to_pose3d().compose(&tip))
}

/// Plans the arm to a tool pose and tracks the trajectory, charging the
/// consumed simulated time and path length to the tally.
fn reach_tool_pose(
    handle: &mut dyn RobotHandle,
    cfg: &ExecConfig,
    target: Pose3D,
    obstacles: &[SceneObject],
    ignore: Vec<String>,
    stage: &str,
    tally: &mut Tally,
) -> Result<(), String> {
    let start = handle.joint_state().map_err(hal_err)?;
    let (base, _) = handle.odometry().map_err(hal_err)?;
    let req = MotionPlanRequest {
        model: &cfg.model,
        base_pose: base,
        start,
        goal: ArmGoal::Tip { pose: target, constrain_orientation: true },
        obstacles,
        ignore,
        tip_link: Some(cfg.tip_link.clone()),
        params: cfg.params.rrt.clone(),
    };
    let traj = plan_arm(&req).map_err(|e| format!("{stage}: {e}"))?;
    let prior = tally.metrics.get("joint_path_length").and_then(|v| v.as_f64()).unwrap_or(0.0);
    tally.put("joint_path_length", prior + traj.length());
    let rep = follow_trajectory(handle, &traj, cfg.params.dt).map_err(|e| format!("{stage}: {e}"))?;
    tally.sim += rep.duration;
    // Re-target the joints at wherever they actually settled. A descent
    // that ends in surface contact stalls short of its last waypoint; if
    // the stale targets kept pushing into the contact, every subsequent
    // simulation step (gripper motion included) would be cancelled as
    // colliding.
    let settled = handle.joint_state().map_err(hal_err)?;
    handle.set_joint_targets(&settled.positions).map_err(hal_err)?;
    Ok(())
}

/// Ticks until the gripper width stops changing (or the budget runs out)
/// and returns the settled width.
fn settle_gripper(
    handle: &mut dyn RobotHandle,
    cfg: &ExecConfig,
    tally: &mut Tally,
) -> Result<f64, String> {
    let dt = cfg.params.dt;
    let mut spent = 0.0;
    let mut prev = handle.gripper_width().map_err(hal_err)?;
    while spent < cfg.params.settle_budget {
        handle.tick(dt).map_err(hal_err)?;
        tally.sim += dt;
        spent += dt;
        let width = handle.gripper_width().map_err(hal_err)?;
        if (width - prev).abs() < 1e-12 {
            return Ok(width);
        }
        prev = width;
    }
    Ok(prev)
}

fn gripper_skill(
    handle: &mut dyn RobotHandle,
    command: GripperCommand,
    cfg: &ExecConfig,
    tally: &mut Tally,
) -> Result<(), String> {
    handle.gripper_command(command).map_err(hal_err)?;
    let width = settle_gripper(handle, cfg, tally)?;
    tally.put("width", width);
    Ok(())
}

fn find_object<'a>(objects: &'a [SceneObject], id: &str) -> Result<&'a SceneObject, String> {
    objects.iter().find(|o| o.id == id).ok_or_else(|| format!("object {id:?} not in the scene"))
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Top-down pick: open, approach a standoff above the object (object
/// counts as an obstacle), descend toward the grasp (object exempt for
/// the planner; the simulation stops the tool at surface contact), close,
/// lift, and verify the object actually came along.
fn pick_skill(
    handle: &mut dyn RobotHandle,
    args: &[String],
    cfg: &ExecConfig,
    state: &mut ExecState,
    tally: &mut Tally,
) -> Result<(), String> {
    let id = args.first().ok_or("pick_object needs an object argument")?.clone();
    if let Some(held) = &state.held {
        return Err(format!("gripper already holds {held:?}"));
    }
    let objects = handle.scene_objects().map_err(hal_err)?;
    let target = find_object(&objects, &id)?;
    let before_z = target.aabb().center()[2];
    let grasp = propose_grasp(target, cfg.gripper_max_width).map_err(|e| e.to_string())?;
    tally.put("grasp_width", grasp.required_width);

    handle.gripper_command(GripperCommand::Open).map_err(hal_err)?;
    settle_gripper(handle, cfg, tally)?;

    reach_tool_pose(handle, cfg, grasp.pre_grasp, &objects, vec![], "pre-grasp approach", tally)?;
    reach_tool_pose(handle, cfg, grasp.grasp, &objects, vec![id.clone()], "grasp descent", tally)?;

    handle.gripper_command(GripperCommand::Close).map_err(hal_err)?;
    let width = settle_gripper(handle, cfg, tally)?;
    tally.put("width_after_close", width);

    // Lift straight up from wherever the descent actually stopped, then
    // check the object rose with the tool — the one observation that
    // proves the fingers really coupled to it.
    let tool = tool_world_pose(handle, cfg)?;
    let up = Pose3D::new(
        [tool.translation[0], tool.translation[1], tool.translation[2] + PRE_GRASP_STANDOFF],
        tool.rotation,
    );
    reach_tool_pose(handle, cfg, up, &objects, vec![id.clone()], "lift", tally)?;

    let after = handle.scene_objects().map_err(hal_err)?;
    let seized = find_object(&after, &id)?;
    let rise = seized.aabb().center()[2] - before_z;
    tally.put("lift_rise", rise);
    if rise < 0.5 * PRE_GRASP_STANDOFF {
        return Err(format!("grasp missed: the object rose only {rise:.3} m during the lift"));
    }
    state.held = Some(id);
    Ok(())
}

/// Mirror of pick: approach a standoff above the placement point,
/// descend, release, verify the object stayed at the target, retreat.
fn place_skill(
    handle: &mut dyn RobotHandle,
    args: &[String],
    knowledge: &WorldKnowledge,
    cfg: &ExecConfig,
    state: &mut ExecState,
    tally: &mut Tally,
) -> Result<(), String> {
    let id = args.first().ok_or("place_object needs an object argument")?.clone();
    let dest = args.get(1).ok_or("place_object needs a location argument")?;
    if state.held.as_deref() != Some(id.as_str()) {
        return Err(format!("cannot place {id:?}: not currently held"));
    }
    let loc = knowledge
        .locations
        .get(dest)
        .ok_or_else(|| format!("unknown location {dest:?}"))?;
    let point = loc
        .point
        .ok_or_else(|| format!("location {dest:?} has no placement point"))?;

    // The object hangs from the tool at whatever offset the grasp ended
    // up with; solve for the tool pose that puts the object's center at
    // the placement point, keeping the object's current orientation.
    let objects = handle.scene_objects().map_err(hal_err)?;
    let held_obj = find_object(&objects, &id)?;
    let tool = tool_world_pose(handle, cfg)?;
    let rel = tool.invert().compose(&held_obj.pose);
    let center = held_obj.aabb().center();
    let origin_shift = [
        held_obj.pose.translation[0] - center[0],
        held_obj.pose.translation[1] - center[1],
        held_obj.pose.translation[2] - center[2],
    ];
    let goal_obj = Pose3D::new(
        [point[0] + origin_shift[0], point[1] + origin_shift[1], point[2] + origin_shift[2]],
        held_obj.pose.rotation,
    );
    let at = goal_obj.compose(&rel.invert());
    let over = Pose3D::new(
        [at.translation[0], at.translation[1], at.translation[2] + PRE_GRASP_STANDOFF],
        at.rotation,
    );

    reach_tool_pose(handle, cfg, over, &objects, vec![id.clone()], "pre-place approach", tally)?;
    reach_tool_pose(handle, cfg, at, &objects, vec![id.clone()], "place descent", tally)?;

    handle.gripper_command(GripperCommand::Open).map_err(hal_err)?;
    settle_gripper(handle, cfg, tally)?;

    let after = handle.scene_objects().map_err(hal_err)?;
    let released = find_object(&after, &id)?;
    let offset = dist3(released.aabb().center(), point);
    tally.put("placement_offset", offset);
    if offset > cfg.params.place_tolerance {
        return Err(format!("release left the object {offset:.3} m from the target"));
    }
    state.held = None;

    // Back straight out, exempting the object we just set down.
    let tool_now = tool_world_pose(handle, cfg)?;
    let retreat = Pose3D::new(
        [
            tool_now.translation[0],
            tool_now.translation[1],
            tool_now.translation[2] + PRE_GRASP_STANDOFF,
        ],
        tool_now.rotation,
    );
    reach_tool_pose(handle, cfg, retreat, &after, vec![id], "retreat", tally)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_resolve_through_the_binding_with_identity_fallback() {
        let mut binding = SkillBinding::fetch_default();
        binding.constants.insert("mug".into(), "cup_01".into());
        assert_eq!(binding.resolve("mug"), "cup_01");
        assert_eq!(binding.resolve("table"), "table");
    }

    #[test]
    fn rasterized_footprints_cover_partial_cells_and_skip_overhead_objects() {
        use mobiman_core::model::{CollisionShape, ShapeKind};
        let table = SceneObject {
            id: "table".into(),
            shape: CollisionShape {
                kind: ShapeKind::Box { size: [0.52, 0.52, 0.3] },
                origin: Pose3D::IDENTITY,
            },
            pose: Pose3D::from_xyz(1.0, 1.0, 0.15),
            movable: false,
        };
        let cup = SceneObject {
            id: "cup".into(),
            shape: CollisionShape {
                kind: ShapeKind::Cylinder { radius: 0.03, length: 0.12 },
                origin: Pose3D::IDENTITY,
            },
            pose: Pose3D::from_xyz(1.0, 1.0, 0.46),
            movable: true,
        };
        let params = ExecParams {
            map: MapExtent { width_m: 4.0, height_m: 4.0, resolution: 0.1, origin: (0.0, 0.0) },
            ..ExecParams::default()
        };
        let grid = rasterize_scene(&[table.clone(), cup], None, &params);
        // Table spans 0.74..1.26 on both axes: cells 7..=12 occupied.
        for c in 7..=12 {
            assert!(grid.is_occupied(c, 9), "cell ({c},9) should be blocked by the table");
        }
        assert!(grid.is_free(6, 9));
        assert!(grid.is_free(13, 9));
        // The same slab hoisted above nav height blocks nothing.
        let no_table = rasterize_scene(
            &[SceneObject { pose: Pose3D::from_xyz(1.0, 1.0, 0.60), ..table }],
            None,
            &params,
        );
        assert!(no_table.is_free(10, 10));
    }

    #[test]
    fn held_objects_leave_no_footprint() {
        use mobiman_core::model::{CollisionShape, ShapeKind};
        let carried = SceneObject {
            id: "box".into(),
            shape: CollisionShape {
                kind: ShapeKind::Box { size: [0.2, 0.2, 0.2] },
                origin: Pose3D::IDENTITY,
            },
            pose: Pose3D::from_xyz(0.5, 0.5, 0.1),
            movable: true,
        };
        let params = ExecParams {
            map: MapExtent { width_m: 2.0, height_m: 2.0, resolution: 0.1, origin: (0.0, 0.0) },
            ..ExecParams::default()
        };
        assert!(rasterize_scene(&[carried.clone()], None, &params).is_occupied(5, 5));
        assert!(rasterize_scene(&[carried], Some("box"), &params).is_free(5, 5));
    }

    #[test]
    fn capability_requirements_cover_each_skill() {
        let full = Capabilities::ALL;
        for skill in [
            SkillId::NavigateTo,
            SkillId::PickObject,
            SkillId::PlaceObject,
            SkillId::OpenGripper,
            SkillId::CloseGripper,
        ] {
            for (_, have) in required_capabilities(skill) {
                assert!(have(&full));
            }
        }
        let base_only = Capabilities { base: true, odom: true, lidar: true, arm: false, gripper: false };
        assert!(required_capabilities(SkillId::NavigateTo).iter().all(|(_, f)| f(&base_only)));
        assert!(!required_capabilities(SkillId::PickObject).iter().all(|(_, f)| f(&base_only)));
    }
}
