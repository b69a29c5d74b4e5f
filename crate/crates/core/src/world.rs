//! Kinematic world simulation: latched velocity and joint-target commands,
//! fixed-step integration with collision rejection, grasp attachment, and
//! synthesized lidar and odometry readings.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{self, WorldShape};
use crate::geometry::{integrate_unicycle, normalize_angle, JointState, Pose2D, Pose3D, Twist2D};
use crate::kinematics::forward_kinematics;
use crate::model::{JointSpec, RobotModel, SceneObject};

/// Beam layout and reach of the simulated range scanner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarConfig {
    pub n_beams: usize,
    /// Swept angle in radians, starting at the sensor heading, counterclockwise.
    pub fov: f64,
    pub max_range: f64,
    /// Height of the scan plane above the floor, in meters.
    pub height: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig { n_beams: 180, fov: std::f64::consts::TAU, max_range: 8.0, height: 0.2 }
    }
}

/// Simulation-wide parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Step length in seconds.
    pub dt: f64,
    /// Odometry noise as `(sigma_xy meters, sigma_theta radians)`.
    pub odom_noise_std: (f64, f64),
    pub lidar: LidarConfig,
    pub rng_seed: u64,
    /// Maximum tool-to-object distance at which a closing gripper grabs.
    pub grasp_reach: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.02,
            odom_noise_std: (0.0, 0.0),
            lidar: LidarConfig::default(),
            rng_seed: 0,
            grasp_reach: 0.05,
        }
    }
}

/// One sweep of simulated range readings. A value of `max_range + 1`
/// encodes "no hit".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarScan {
    /// First beam angle relative to the sensor heading.
    pub angle_min: f64,
    pub angle_increment: f64,
    /// Reach of the sensor; readings above it encode "no hit".
    pub max_range: f64,
    pub ranges: Vec<f64>,
    pub stamp: f64,
}

/// Finger travel bounds and closing speed of a simulated gripper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperParams {
    pub min_width: f64,
    pub max_width: f64,
    /// Width change rate in m/s.
    pub speed: f64,
}

impl Default for GripperParams {
    fn default() -> Self {
        GripperParams { min_width: 0.0, max_width: 0.10, speed: 0.1 }
    }
}

/// Command accepted by a gripper: named motions or an explicit width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperCommand {
    Open,
    Close,
    Width(f64),
}

#[derive(Debug, Clone, PartialEq)]
struct Attachment {
    object_id: String,
    /// Object pose expressed in the tool frame, captured at attach time.
    rel_pose: Pose3D,
}

/// A robot instanced into the world.
#[derive(Debug, Clone)]
pub struct RobotEntity {
    pub model: RobotModel,
    pub base_pose: Pose2D,
    pub joints: JointState,
    joint_targets: Vec<f64>,
    pub cmd_vel: Twist2D,
    /// Link whose frame the gripper grabs relative to; root link if absent.
    pub tool_link: Option<String>,
    pub gripper: Option<GripperParams>,
    gripper_width: f64,
    gripper_command: GripperCommand,
    attachment: Option<Attachment>,
    /// True when the robot's most recent step was cancelled by a collision.
    pub collision_flag: bool,
}

/// Everything needed to place a robot into a [`World`].
#[derive(Debug, Clone)]
pub struct RobotSpawn {
    pub id: String,
    pub model: RobotModel,
    pub pose: Pose2D,
    pub tool_link: Option<String>,
    pub gripper: Option<GripperParams>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("no robot named {0:?}")]
    UnknownRobot(String),
    #[error("no object named {0:?}")]
    UnknownObject(String),
    #[error("robot id {0:?} already present")]
    DuplicateRobot(String),
    #[error("robot model invalid: {0}")]
    InvalidModel(String),
    #[error("expected {expected} joint targets, got {got}")]
    WrongDofCount { expected: usize, got: usize },
    #[error("target {value} outside limits of joint {joint:?}")]
    LimitViolation { joint: String, value: f64 },
    #[error("robot has no gripper")]
    NoGripper,
    #[error("{0}")]
    TooFarToGrasp(String),
    #[error("nothing attached")]
    NothingAttached,
}

/// Width clearance added over an object's grip dimension so holding it does
/// not count as penetration.
const GRIP_CLEARANCE: f64 = 0.002;

/// The complete simulation state plus its clock and noise source.
#[derive(Debug, Clone)]
pub struct World {
    pub cfg: SimConfig,
    robots: BTreeMap<String, RobotEntity>,
    objects: Vec<SceneObject>,
    time: f64,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(cfg: SimConfig) -> World {
        assert!(cfg.dt > 0.0, "step length must be positive");
        assert!(
            cfg.odom_noise_std.0 >= 0.0 && cfg.odom_noise_std.1 >= 0.0,
            "noise sigma must be non-negative"
        );
        let rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        World { cfg, robots: BTreeMap::new(), objects: Vec::new(), time: 0.0, rng }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn add_object(&mut self, obj: SceneObject) {
        self.objects.push(obj);
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn add_robot(&mut self, spawn: RobotSpawn) -> Result<(), WorldError> {
        if self.robots.contains_key(&spawn.id) {
            return Err(WorldError::DuplicateRobot(spawn.id));
        }
        let violations = spawn.model.validate();
        if let Some(v) = violations.first() {
            return Err(WorldError::InvalidModel(v.to_string()));
        }
        let names: Vec<String> = ordered_actuated(&spawn.model)
            .into_iter()
            .map(|j| j.name.clone())
            .collect();
        let dof = names.len();
        let joints = JointState::from_positions(names, vec![0.0; dof]);
        let width = spawn.gripper.map_or(0.0, |g| g.max_width);
        self.robots.insert(
            spawn.id,
            RobotEntity {
                model: spawn.model,
                base_pose: spawn.pose,
                joint_targets: vec![0.0; dof],
                joints,
                cmd_vel: Twist2D::ZERO,
                tool_link: spawn.tool_link,
                gripper: spawn.gripper,
                gripper_width: width,
                // Neutral default: holding the spawn width has no
                // attach/release side effects, unlike a latched Open.
                gripper_command: GripperCommand::Width(width),
                attachment: None,
                collision_flag: false,
            },
        );
        Ok(())
    }

    pub fn robot(&self, id: &str) -> Result<&RobotEntity, WorldError> {
        self.robots.get(id).ok_or_else(|| WorldError::UnknownRobot(id.to_string()))
    }

    fn robot_mut(&mut self, id: &str) -> Result<&mut RobotEntity, WorldError> {
        self.robots.get_mut(id).ok_or_else(|| WorldError::UnknownRobot(id.to_string()))
    }

    pub fn robot_ids(&self) -> Vec<String> {
        self.robots.keys().cloned().collect()
    }

    pub fn set_command_velocity(&mut self, id: &str, t: Twist2D) -> Result<(), WorldError> {
        self.robot_mut(id)?.cmd_vel = t;
        Ok(())
    }

    pub fn set_joint_targets(&mut self, id: &str, targets: Vec<f64>) -> Result<(), WorldError> {
        let robot = self.robot_mut(id)?;
        if targets.len() != robot.joint_targets.len() {
            return Err(WorldError::WrongDofCount {
                expected: robot.joint_targets.len(),
                got: targets.len(),
            });
        }
        let model = robot.model.clone();
        for (spec, &t) in ordered_actuated(&model).iter().zip(&targets) {
            if let Some((lo, hi)) = spec.limits {
                if t < lo - 1e-12 || t > hi + 1e-12 {
                    return Err(WorldError::LimitViolation { joint: spec.name.clone(), value: t });
                }
            }
        }
        robot.joint_targets = targets;
        Ok(())
    }

    pub fn joint_targets(&self, id: &str) -> Result<&[f64], WorldError> {
        Ok(&self.robot(id)?.joint_targets)
    }

    pub fn command_gripper(&mut self, id: &str, cmd: GripperCommand) -> Result<(), WorldError> {
        let robot = self.robot_mut(id)?;
        if robot.gripper.is_none() {
            return Err(WorldError::NoGripper);
        }
        robot.gripper_command = cmd;
        Ok(())
    }

    pub fn gripper_width(&self, id: &str) -> Result<f64, WorldError> {
        let robot = self.robot(id)?;
        if robot.gripper.is_none() {
            return Err(WorldError::NoGripper);
        }
        Ok(robot.gripper_width)
    }

    pub fn attached_object(&self, id: &str) -> Result<Option<&str>, WorldError> {
        Ok(self.robot(id)?.attachment.as_ref().map(|a| a.object_id.as_str()))
    }

    /// World pose of the robot's tool frame at its current configuration.
    pub fn tool_pose(&self, id: &str) -> Result<Pose3D, WorldError> {
        let robot = self.robot(id)?;
        Ok(tool_pose_at(robot, &robot.base_pose, &robot.joints))
    }

    /// Ground-truth base pose, bypassing odometry noise.
    pub fn base_pose(&self, id: &str) -> Result<Pose2D, WorldError> {
        Ok(self.robot(id)?.base_pose)
    }

    pub fn joint_state(&self, id: &str) -> Result<JointState, WorldError> {
        Ok(self.robot(id)?.joints.clone())
    }

    /// Noisy base pose estimate with the current clock as its stamp.
    pub fn read_odometry(&mut self, id: &str) -> Result<(Pose2D, f64), WorldError> {
        let (sx, st) = self.cfg.odom_noise_std;
        let pose = self.robot(id)?.base_pose;
        let pose = if sx == 0.0 && st == 0.0 {
            pose
        } else {
            let nx = Normal::new(0.0, sx).expect("validated sigma");
            let nt = Normal::new(0.0, st).expect("validated sigma");
            Pose2D::new(
                pose.x + nx.sample(&mut self.rng),
                pose.y + nx.sample(&mut self.rng),
                normalize_angle(pose.theta + nt.sample(&mut self.rng)),
            )
        };
        Ok((pose, self.time))
    }

    /// Casts the configured beam fan from `sensor_pose` at the lidar height.
    /// Beams see world objects, not robot bodies.
    pub fn raycast_lidar(&self, sensor_pose: &Pose2D, exclude: Option<&str>) -> LidarScan {
        let cfg = &self.cfg.lidar;
        let sentinel = cfg.max_range + 1.0;
        let origin = [sensor_pose.x, sensor_pose.y, cfg.height];
        let increment = cfg.fov / cfg.n_beams as f64;
        let shapes: Vec<WorldShape> = self
            .objects
            .iter()
            .filter(|o| Some(o.id.as_str()) != exclude)
            .map(|o| collision::place(&o.shape, &o.pose))
            .collect();
        let ranges = (0..cfg.n_beams)
            .map(|i| {
                let angle = sensor_pose.theta + i as f64 * increment;
                let dir = [angle.cos(), angle.sin(), 0.0];
                shapes
                    .iter()
                    .filter_map(|s| collision::ray_hit(s, origin, dir, cfg.max_range))
                    .fold(sentinel, f64::min)
            })
            .collect();
        LidarScan {
            angle_min: 0.0,
            angle_increment: increment,
            max_range: cfg.max_range,
            ranges,
            stamp: self.time,
        }
    }

    /// Scan from a robot's base pose; an attached object never occludes its
    /// own carrier's sensor.
    pub fn lidar(&self, id: &str) -> Result<LidarScan, WorldError> {
        let robot = self.robot(id)?;
        let exclude = robot.attachment.as_ref().map(|a| a.object_id.as_str());
        Ok(self.raycast_lidar(&robot.base_pose, exclude))
    }

    fn object_index(&self, id: &str) -> Result<usize, WorldError> {
        self.objects
            .iter()
            .position(|o| o.id == id)
            .ok_or_else(|| WorldError::UnknownObject(id.to_string()))
    }

    /// Rigidly couples `object_id` to the robot's tool frame.
    pub fn attach(&mut self, robot_id: &str, object_id: &str) -> Result<(), WorldError> {
        let idx = self.object_index(object_id)?;
        let tool = self.tool_pose(robot_id)?;
        let obj = &self.objects[idx];
        let shape = collision::place(&obj.shape, &obj.pose);
        let dist = collision::distance_point(&shape, tool.translation);
        if dist > self.cfg.grasp_reach {
            return Err(WorldError::TooFarToGrasp(format!(
                "object {object_id:?} is {dist:.3} m from the tool, reach is {} m",
                self.cfg.grasp_reach
            )));
        }
        let needed = min_grip_width(&self.objects[idx]);
        let robot = self.robot(robot_id)?;
        if robot.gripper.is_some() && robot.gripper_width + 1e-12 < needed {
            return Err(WorldError::TooFarToGrasp(format!(
                "gripper width {:.3} m narrower than object {:?} ({needed:.3} m)",
                robot.gripper_width, object_id
            )));
        }
        let rel_pose = tool.invert().compose(&self.objects[idx].pose);
        self.robot_mut(robot_id)?.attachment =
            Some(Attachment { object_id: object_id.to_string(), rel_pose });
        Ok(())
    }

    /// Releases the held object, leaving it at its current pose.
    pub fn detach(&mut self, robot_id: &str) -> Result<(), WorldError> {
        let robot = self.robot_mut(robot_id)?;
        if robot.attachment.take().is_none() {
            return Err(WorldError::NothingAttached);
        }
        Ok(())
    }

    /// Advances every robot by `dt`, one collision-checked move each, then
    /// the clock. A colliding candidate cancels that robot's whole step.
    pub fn step(&mut self, dt: f64) {
        assert!(dt > 0.0, "step length must be positive");
        let ids: Vec<String> = self.robots.keys().cloned().collect();
        for id in ids {
            self.step_robot(&id, dt);
        }
        self.time += dt;
    }

    fn step_robot(&mut self, id: &str, dt: f64) {
        let robot = &self.robots[id];
        let candidate_base = integrate_unicycle(&robot.base_pose, &robot.cmd_vel, dt);

        let mut candidate_joints = robot.joints.clone();
        let specs = ordered_actuated(&robot.model);
        for (i, spec) in specs.iter().enumerate() {
            let q = candidate_joints.positions[i];
            let delta = robot.joint_targets[i] - q;
            let max_step = spec.max_velocity * dt;
            let applied = delta.clamp(-max_step, max_step);
            candidate_joints.positions[i] = q + applied;
            candidate_joints.velocities[i] = applied / dt;
        }

        // Gripper width tracks its commanded target; a close command stops
        // at grip width once something is in reach so fingers never crush
        // what they are about to hold.
        let (candidate_width, grasp_candidate) = self.gripper_candidate(id, dt);

        let held = self.robots[id].attachment.clone();
        let candidate_tool = tool_pose_at(&self.robots[id], &candidate_base, &candidate_joints);
        let held_pose = held.as_ref().map(|a| candidate_tool.compose(&a.rel_pose));

        if self.candidate_collides(id, &candidate_base, &candidate_joints, held.as_ref(), held_pose.as_ref()) {
            self.robots.get_mut(id).unwrap().collision_flag = true;
            return;
        }

        let robot = self.robots.get_mut(id).unwrap();
        robot.collision_flag = false;
        robot.base_pose = candidate_base;
        robot.joints = candidate_joints;
        robot.gripper_width = candidate_width;

        // Commit attachment changes after the motion is accepted.
        match robot.gripper_command {
            GripperCommand::Open => {
                // Opening releases the grasp; the object stays where it is.
                robot.attachment = None;
            }
            GripperCommand::Close => {
                if robot.attachment.is_none() {
                    if let Some((object_id, floor)) = grasp_candidate {
                        if candidate_width <= floor + 1e-9 {
                            let _ = self.attach(id, &object_id);
                        }
                    }
                }
            }
            GripperCommand::Width(_) => {}
        }

        // A held object rides the tool frame.
        let robot = &self.robots[id];
        if let (Some(att), Some(pose)) = (&robot.attachment, held_pose) {
            let idx = self.objects.iter().position(|o| o.id == att.object_id);
            if let Some(idx) = idx {
                self.objects[idx].pose = pose;
            }
        }
    }

    /// Next gripper width under rate limiting, plus the object a close
    /// command would grab (with its width floor) if one is in reach.
    fn gripper_candidate(&self, id: &str, dt: f64) -> (f64, Option<(String, f64)>) {
        let robot = &self.robots[id];
        let Some(params) = robot.gripper else {
            return (robot.gripper_width, None);
        };
        let mut grasp = None;
        let target = match robot.gripper_command {
            GripperCommand::Open => params.max_width,
            GripperCommand::Width(w) => w.clamp(params.min_width, params.max_width),
            GripperCommand::Close => {
                let tool = tool_pose_at(robot, &robot.base_pose, &robot.joints);
                let reachable = self
                    .objects
                    .iter()
                    .filter(|o| o.movable)
                    .filter(|o| {
                        Some(o.id.as_str())
                            != robot.attachment.as_ref().map(|a| a.object_id.as_str())
                    })
                    .map(|o| {
                        let s = collision::place(&o.shape, &o.pose);
                        (o, collision::distance_point(&s, tool.translation))
                    })
                    .filter(|(_, d)| *d <= self.cfg.grasp_reach)
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
                match reachable {
                    Some((o, _)) if robot.attachment.is_none() => {
                        let floor = min_grip_width(o).min(params.max_width);
                        grasp = Some((o.id.clone(), floor));
                        floor.max(params.min_width)
                    }
                    _ => match &robot.attachment {
                        // Keep holding: never squeeze below the held object.
                        Some(att) => self
                            .objects
                            .iter()
                            .find(|o| o.id == att.object_id)
                            .map_or(params.min_width, |o| min_grip_width(o).max(params.min_width)),
                        None => params.min_width,
                    },
                }
            }
        };
        let delta = (target - robot.gripper_width).clamp(-params.speed * dt, params.speed * dt);
        (robot.gripper_width + delta, grasp)
    }

    fn candidate_collides(
        &self,
        id: &str,
        base: &Pose2D,
        joints: &JointState,
        held: Option<&Attachment>,
        held_pose: Option<&Pose3D>,
    ) -> bool {
        let robot = &self.robots[id];
        let held_id = held.map(|a| a.object_id.as_str());
        let ignore: Vec<&str> = held_id.into_iter().collect();
        if check_collision(&robot.model, base, joints, &self.objects, &ignore) {
            return true;
        }
        if let (Some(att), Some(pose)) = (held, held_pose) {
            if let Some(obj) = self.objects.iter().find(|o| o.id == att.object_id) {
                let held_shape = collision::place(&obj.shape, pose);
                for other in &self.objects {
                    if other.id == att.object_id {
                        continue;
                    }
                    let s = collision::place(&other.shape, &other.pose);
                    if collision::intersects(&held_shape, &s) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// Actuated joints in deterministic tree order.
fn ordered_actuated(model: &RobotModel) -> Vec<&JointSpec> {
    model
        .ordered_joint_indices()
        .into_iter()
        .map(|i| &model.joints[i])
        .filter(|j| j.is_actuated())
        .collect()
}

fn tool_pose_at(robot: &RobotEntity, base: &Pose2D, joints: &JointState) -> Pose3D {
    let fk = forward_kinematics(&robot.model, joints);
    let link = robot.tool_link.as_deref().unwrap_or(&robot.model.root_link);
    let local = fk.get(link).copied().unwrap_or(Pose3D::IDENTITY);
    base.to_pose3d().compose(&local)
}

/// Width a gripper needs to span an object: its smallest horizontal extent
/// plus a small clearance.
pub fn min_grip_width(obj: &SceneObject) -> f64 {
    let e = obj.aabb().extents();
    e[0].min(e[1]) + GRIP_CLEARANCE
}

/// True if any link collision shape of `model`, posed at `base` with joint
/// values `q`, intersects any object not listed in `ignore`.
pub fn check_collision(
    model: &RobotModel,
    base: &Pose2D,
    q: &JointState,
    objects: &[SceneObject],
    ignore: &[&str],
) -> bool {
    let fk = forward_kinematics(model, q);
    let base3 = base.to_pose3d();
    let mut link_shapes = Vec::new();
    for link in &model.links {
        if let Some(shape) = &link.collision {
            if let Some(pose) = fk.get(&link.name) {
                link_shapes.push(collision::place(shape, &base3.compose(pose)));
            }
        }
    }
    for obj in objects {
        if ignore.contains(&obj.id.as_str()) {
            continue;
        }
        let os = collision::place(&obj.shape, &obj.pose);
        for ls in &link_shapes {
            if collision::intersects(ls, &os) {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quat;
    use crate::model::{
        CollisionShape, JointKind, LinkSpec, ShapeKind, UnitKind,
    };

    fn base_model() -> RobotModel {
        RobotModel {
            name: "puck".into(),
            unit_kind: UnitKind::Base,
            links: vec![LinkSpec {
                name: "chassis".into(),
                collision: Some(CollisionShape {
                    origin: Pose3D::from_xyz(0.0, 0.0, 0.15),
                    kind: ShapeKind::Cylinder { radius: 0.2, length: 0.3 },
                }),
                visual_tag: None,
            }],
            joints: vec![],
            root_link: "chassis".into(),
        }
    }

    /// One-joint lift: prismatic z axis raising a small "hand" link whose
    /// frame doubles as the tool.
    fn lift_model() -> RobotModel {
        RobotModel {
            name: "lift".into(),
            unit_kind: UnitKind::Generic,
            links: vec![
                LinkSpec { name: "root".into(), collision: None, visual_tag: None },
                LinkSpec { name: "hand".into(), collision: None, visual_tag: None },
            ],
            joints: vec![JointSpec {
                name: "slide".into(),
                kind: JointKind::Prismatic,
                parent: "root".into(),
                child: "hand".into(),
                origin: Pose3D::from_xyz(0.3, 0.0, 0.5),
                axis: [0.0, 0.0, 1.0],
                limits: Some((-0.4, 0.4)),
                max_velocity: 1.0,
            }],
            root_link: "root".into(),
        }
    }

    fn spawn_base(world: &mut World, id: &str, pose: Pose2D) {
        world
            .add_robot(RobotSpawn {
                id: id.into(),
                model: base_model(),
                pose,
                tool_link: None,
                gripper: None,
            })
            .unwrap();
    }

    fn wall(id: &str, x_center: f64) -> SceneObject {
        SceneObject {
            id: id.into(),
            shape: CollisionShape {
                origin: Pose3D::IDENTITY,
                kind: ShapeKind::Box { size: [1.0, 100.0, 2.0] },
            },
            pose: Pose3D::from_xyz(x_center, 0.0, 1.0),
            movable: false,
        }
    }

    #[test]
    fn zero_commands_only_advance_time() {
        let mut w = World::new(SimConfig::default());
        spawn_base(&mut w, "r", Pose2D::new(1.0, 2.0, 0.3));
        w.step(0.02);
        let r = w.robot("r").unwrap();
        assert_eq!(r.base_pose, Pose2D::new(1.0, 2.0, 0.3));
        assert_eq!(w.time(), 0.02);
    }

    #[test]
    fn straight_drive_advances_v_dt() {
        let mut w = World::new(SimConfig::default());
        spawn_base(&mut w, "r", Pose2D::IDENTITY);
        w.set_command_velocity("r", Twist2D::new(1.0, 0.0)).unwrap();
        w.step(0.02);
        let p = w.base_pose("r").unwrap();
        assert!((p.x - 0.02).abs() < 1e-12 && p.y == 0.0);
    }

    #[test]
    fn wall_one_cm_ahead_rejects_step() {
        let mut w = World::new(SimConfig::default());
        spawn_base(&mut w, "r", Pose2D::IDENTITY);
        // Chassis radius 0.2; wall face at x = 0.21 is 1 cm from the rim.
        w.add_object(wall("wall", 0.71));
        w.set_command_velocity("r", Twist2D::new(1.0, 0.0)).unwrap();
        w.step(0.02); // would put the rim at 0.22 > 0.21
        let r = w.robot("r").unwrap();
        assert_eq!(r.base_pose, Pose2D::IDENTITY);
        assert!(r.collision_flag);
        // A slower approach is accepted and clears the flag.
        w.set_command_velocity("r", Twist2D::new(0.1, 0.0)).unwrap();
        w.step(0.02);
        let r = w.robot("r").unwrap();
        assert!(!r.collision_flag);
        assert!((r.base_pose.x - 0.002).abs() < 1e-12);
    }

    #[test]
    fn joint_rate_limit_reaches_target_on_schedule() {
        let mut w = World::new(SimConfig::default());
        w.add_robot(RobotSpawn {
            id: "l".into(),
            model: lift_model(),
            pose: Pose2D::IDENTITY,
            tool_link: Some("hand".into()),
            gripper: None,
        })
        .unwrap();
        w.set_joint_targets("l", vec![0.3]).unwrap();
        // max velocity 1.0, dt 0.02: 15 steps to travel 0.3.
        for _ in 0..14 {
            w.step(0.02);
        }
        assert!(w.joint_state("l").unwrap().positions[0] < 0.3);
        w.step(0.02);
        assert!((w.joint_state("l").unwrap().positions[0] - 0.3).abs() < 1e-12);
        w.step(0.02); // settled: stays put, zero velocity
        let js = w.joint_state("l").unwrap();
        assert_eq!(js.positions[0], 0.3);
        assert_eq!(js.velocities[0], 0.0);
    }

    #[test]
    fn joint_target_validation() {
        let mut w = World::new(SimConfig::default());
        w.add_robot(RobotSpawn {
            id: "l".into(),
            model: lift_model(),
            pose: Pose2D::IDENTITY,
            tool_link: None,
            gripper: None,
        })
        .unwrap();
        assert!(matches!(
            w.set_joint_targets("l", vec![0.0, 0.0]),
            Err(WorldError::WrongDofCount { expected: 1, got: 2 })
        ));
        assert!(matches!(
            w.set_joint_targets("l", vec![0.5]),
            Err(WorldError::LimitViolation { .. })
        ));
        assert!(matches!(
            w.set_joint_targets("ghost", vec![0.0]),
            Err(WorldError::UnknownRobot(_))
        ));
    }

    #[test]
    fn odometry_noise_statistics() {
        let mut cfg = SimConfig::default();
        cfg.odom_noise_std = (0.01, 0.0);
        cfg.rng_seed = 42;
        let mut w = World::new(cfg);
        spawn_base(&mut w, "r", Pose2D::new(3.0, -1.0, 0.7));
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| w.read_odometry("r").unwrap().0.x - 3.0).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        assert!((std - 0.01).abs() < 0.001, "sample std {std}");
        // Zero sigma reads exactly.
        let mut w0 = World::new(SimConfig::default());
        spawn_base(&mut w0, "r", Pose2D::new(3.0, -1.0, 0.7));
        let (p, stamp) = w0.read_odometry("r").unwrap();
        assert_eq!(p, Pose2D::new(3.0, -1.0, 0.7));
        assert_eq!(stamp, 0.0);
    }

    #[test]
    fn lidar_sees_wall_straight_and_diagonal() {
        let mut cfg = SimConfig::default();
        cfg.lidar.n_beams = 8; // beams every 45 degrees
        let mut w = World::new(cfg);
        spawn_base(&mut w, "r", Pose2D::IDENTITY);
        w.add_object(wall("wall", 2.5)); // front face at x = 2
        let scan = w.lidar("r").unwrap();
        assert_eq!(scan.ranges.len(), 8);
        assert!((scan.ranges[0] - 2.0).abs() < 1e-9, "beam 0: {}", scan.ranges[0]);
        let diag = 2.0 / std::f64::consts::FRAC_PI_4.cos();
        assert!((scan.ranges[1] - diag).abs() < 1e-9, "beam 1: {}", scan.ranges[1]);
        // Beams pointing away report the no-hit sentinel.
        assert_eq!(scan.ranges[4], 9.0);
    }

    #[test]
    fn lidar_empty_world_is_all_sentinel() {
        let mut w = World::new(SimConfig::default());
        spawn_base(&mut w, "r", Pose2D::IDENTITY);
        let scan = w.lidar("r").unwrap();
        assert!(scan.ranges.iter().all(|&r| r == 9.0));
    }

    fn graspable_cup(x: f64) -> SceneObject {
        SceneObject {
            id: "cup".into(),
            shape: CollisionShape {
                origin: Pose3D::IDENTITY,
                kind: ShapeKind::Cylinder { radius: 0.03, length: 0.12 },
            },
            pose: Pose3D::from_xyz(x, 0.0, 0.5),
            movable: true,
        }
    }

    fn spawn_lift_with_gripper(w: &mut World) {
        w.add_robot(RobotSpawn {
            id: "l".into(),
            model: lift_model(),
            pose: Pose2D::IDENTITY,
            tool_link: Some("hand".into()),
            gripper: Some(GripperParams::default()),
        })
        .unwrap();
    }

    #[test]
    fn attach_requires_reach() {
        let mut w = World::new(SimConfig::default());
        spawn_lift_with_gripper(&mut w);
        w.add_object(graspable_cup(2.0)); // tool at (0.3, 0, 0.5): far away
        assert!(matches!(w.attach("l", "cup"), Err(WorldError::TooFarToGrasp(_))));
        assert!(matches!(w.attach("l", "ghost"), Err(WorldError::UnknownObject(_))));
        assert!(matches!(w.detach("l"), Err(WorldError::NothingAttached)));
    }

    #[test]
    fn close_attaches_and_object_rides_tool() {
        let mut w = World::new(SimConfig::default());
        spawn_lift_with_gripper(&mut w);
        w.add_object(graspable_cup(0.3)); // centered on the tool point
        w.command_gripper("l", GripperCommand::Close).unwrap();
        // Cup grip width floor: 0.06 + 0.002 = 0.062. From 0.10 at 0.1 m/s
        // the gripper needs 0.38 s; run 25 steps of 0.02 s.
        for _ in 0..25 {
            w.step(0.02);
        }
        assert_eq!(w.attached_object("l").unwrap(), Some("cup"));
        assert!((w.gripper_width("l").unwrap() - 0.062).abs() < 1e-9);

        // Lift by 0.2: the cup must follow rigidly.
        let before = w.objects()[0].pose;
        w.set_joint_targets("l", vec![0.2]).unwrap();
        for _ in 0..30 {
            w.step(0.02);
        }
        let after = w.objects()[0].pose;
        assert!((after.translation[2] - before.translation[2] - 0.2).abs() < 1e-9);
        assert_eq!(after.translation[0], before.translation[0]);

        // Open: releases and re-grounds at the lifted pose.
        w.command_gripper("l", GripperCommand::Open).unwrap();
        w.step(0.02);
        assert_eq!(w.attached_object("l").unwrap(), None);
        let grounded = w.objects()[0].pose;
        assert!((grounded.translation[2] - after.translation[2]).abs() < 1e-12);
        w.set_joint_targets("l", vec![-0.2]).unwrap();
        for _ in 0..30 {
            w.step(0.02);
        }
        assert_eq!(w.objects()[0].pose, grounded);
    }

    #[test]
    fn attached_object_collision_cancels_carrier_motion() {
        let mut w = World::new(SimConfig::default());
        spawn_lift_with_gripper(&mut w);
        w.add_object(graspable_cup(0.3));
        // Ceiling box just above the cup's lifted sweep.
        w.add_object(SceneObject {
            id: "ceiling".into(),
            shape: CollisionShape {
                origin: Pose3D::IDENTITY,
                kind: ShapeKind::Box { size: [1.0, 1.0, 0.1] },
            },
            pose: Pose3D::from_xyz(0.3, 0.0, 0.70),
            movable: false,
        });
        w.attach("l", "cup").unwrap();
        w.set_joint_targets("l", vec![0.4]).unwrap();
        for _ in 0..60 {
            w.step(0.02);
        }
        let r = w.robot("l").unwrap();
        // Cup top would pass 0.65 (ceiling bottom) at slide ≈ 0.09.
        assert!(r.collision_flag);
        assert!(r.joints.positions[0] < 0.1, "stopped at {}", r.joints.positions[0]);
        let cup_top = w.objects()[0].pose.translation[2] + 0.06;
        assert!(cup_top <= 0.65 + 1e-9);
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let run = || {
            let mut cfg = SimConfig::default();
            cfg.odom_noise_std = (0.01, 0.005);
            cfg.rng_seed = 9;
            let mut w = World::new(cfg);
            spawn_base(&mut w, "r", Pose2D::IDENTITY);
            w.set_command_velocity("r", Twist2D::new(0.4, 0.3)).unwrap();
            let mut log = Vec::new();
            for _ in 0..50 {
                w.step(0.02);
                let (p, t) = w.read_odometry("r").unwrap();
                log.push((p.x.to_bits(), p.y.to_bits(), p.theta.to_bits(), t.to_bits()));
            }
            log
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rotated_wall_blocks_diagonal_approach() {
        let mut w = World::new(SimConfig::default());
        spawn_base(&mut w, "r", Pose2D::new(0.0, 0.0, std::f64::consts::FRAC_PI_4));
        let rot = Quat::from_rpy(0.0, 0.0, std::f64::consts::FRAC_PI_4);
        w.add_object(SceneObject {
            id: "angled".into(),
            shape: CollisionShape {
                origin: Pose3D::IDENTITY,
                kind: ShapeKind::Box { size: [0.2, 2.0, 1.0] },
            },
            pose: Pose3D::new([0.5, 0.5, 0.5], rot),
            movable: false,
        });
        w.set_command_velocity("r", Twist2D::new(1.0, 0.0)).unwrap();
        for _ in 0..200 {
            w.step(0.02);
        }
        let r = w.robot("r").unwrap();
        assert!(r.collision_flag);
        // Wall plane passes through (0.5, 0.5) with normal along the drive
        // direction: center-to-plane distance 0.5*sqrt(2); stop at
        // 0.7071 - 0.1 (half thickness) - 0.2 (radius) = 0.4071 traveled.
        let traveled = (r.base_pose.x.powi(2) + r.base_pose.y.powi(2)).sqrt();
        assert!(traveled <= 0.4072, "traveled {traveled}");
        assert!(traveled > 0.38, "traveled {traveled}");
    }
}
