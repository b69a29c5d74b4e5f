//! In-process backend: a robot handle that owns the simulated world and
//! applies every command directly to it.

use mobiman_core::control::{MoveForwardParams, MoveStep, MoveForwardController};
use mobiman_core::geometry::{JointState, Pose2D, Twist2D};
use mobiman_core::hal::{Capabilities, HalError, HalErrorCode, HalResult, RobotHandle};
use mobiman_core::model::SceneObject;
use mobiman_core::world::{GripperCommand, LidarScan, World, WorldError};

/// Longest straight drive a single `move_forward` call accepts, meters.
pub const MAX_MOVE_DISTANCE: f64 = 100.0;

/// Translates world-level failures into the closed backend error set.
pub(crate) fn map_world(e: WorldError) -> HalError {
    let code = match &e {
        WorldError::WrongDofCount { .. }
        | WorldError::LimitViolation { .. }
        | WorldError::TooFarToGrasp(_)
        | WorldError::NothingAttached
        | WorldError::DuplicateRobot(_) => HalErrorCode::Refused,
        WorldError::NoGripper => HalErrorCode::Unsupported,
        WorldError::UnknownRobot(_)
        | WorldError::UnknownObject(_)
        | WorldError::InvalidModel(_) => HalErrorCode::HardwareFault,
    };
    HalError::new(code, e.to_string())
}

/// Robot handle backed by an owned [`World`]. Every command is applied
/// synchronously; `tick` advances the simulation clock.
#[derive(Debug, Clone)]
pub struct SimBackend {
    world: World,
    robot: String,
    caps: Capabilities,
    move_params: MoveForwardParams,
}

impl SimBackend {
    /// Wraps a world around a handle for one of its robots, stating the
    /// capabilities explicitly.
    pub fn new(world: World, robot: &str, caps: Capabilities) -> HalResult<SimBackend> {
        world.robot(robot).map_err(map_world)?;
        Ok(SimBackend {
            world,
            robot: robot.to_string(),
            caps,
            move_params: MoveForwardParams::default(),
        })
    }

    /// Like [`SimBackend::new`], but derives capabilities from the robot:
    /// arm iff it has actuated joints, gripper iff one was spawned; base,
    /// lidar, and odometry are always offered by the simulator.
    pub fn with_inferred_capabilities(world: World, robot: &str) -> HalResult<SimBackend> {
        let entity = world.robot(robot).map_err(map_world)?;
        let caps = Capabilities {
            base: true,
            arm: !entity.model.actuated_joints().is_empty(),
            gripper: entity.gripper.is_some(),
            lidar: true,
            odom: true,
        };
        Self::new(world, robot, caps)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    /// Direct world access for scenario setup and assertions.
    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    pub fn move_params(&self) -> &MoveForwardParams {
        &self.move_params
    }

    pub fn set_move_params(&mut self, params: MoveForwardParams) {
        self.move_params = params;
    }

    fn need(&self, have: bool, what: &str) -> HalResult<()> {
        if have {
            Ok(())
        } else {
            Err(HalError::unsupported(what))
        }
    }
}

impl RobotHandle for SimBackend {
    fn id(&self) -> &str {
        &self.robot
    }

    fn capabilities(&self) -> Capabilities {
        self.caps
    }

    fn set_velocity(&mut self, t: Twist2D) -> HalResult<()> {
        self.need(self.caps.base, "base")?;
        self.world.set_command_velocity(&self.robot, t).map_err(map_world)
    }

    fn move_forward(&mut self, distance: f64) -> HalResult<()> {
        self.need(self.caps.base, "base")?;
        if !distance.is_finite() || distance.abs() > MAX_MOVE_DISTANCE {
            return Err(HalError::refused(format!(
                "drive distance {distance} outside ±{MAX_MOVE_DISTANCE} m"
            )));
        }
        let dt = self.world.cfg.dt;
        let mut ctl = MoveForwardController::new(distance, self.move_params.clone());
        loop {
            let (pose, _) = self.world.read_odometry(&self.robot).map_err(map_world)?;
            match ctl.step(&pose, dt) {
                MoveStep::Drive(v) => {
                    self.world
                        .set_command_velocity(&self.robot, Twist2D::new(v, 0.0))
                        .map_err(map_world)?;
                    self.world.step(dt);
                }
                MoveStep::Done => {
                    self.world
                        .set_command_velocity(&self.robot, Twist2D::ZERO)
                        .map_err(map_world)?;
                    return Ok(());
                }
                MoveStep::TimedOut => {
                    self.world
                        .set_command_velocity(&self.robot, Twist2D::ZERO)
                        .map_err(map_world)?;
                    return Err(HalError::new(
                        HalErrorCode::Timeout,
                        format!("drive of {distance} m did not settle"),
                    ));
                }
            }
        }
    }

    fn set_joint_targets(&mut self, positions: &[f64]) -> HalResult<()> {
        self.need(self.caps.arm, "arm")?;
        self.world.set_joint_targets(&self.robot, positions.to_vec()).map_err(map_world)
    }

    fn joint_state(&mut self) -> HalResult<JointState> {
        self.need(self.caps.arm, "arm")?;
        self.world.joint_state(&self.robot).map_err(map_world)
    }

    fn gripper_command(&mut self, cmd: GripperCommand) -> HalResult<()> {
        self.need(self.caps.gripper, "gripper")?;
        self.world.command_gripper(&self.robot, cmd).map_err(map_world)
    }

    fn gripper_width(&mut self) -> HalResult<f64> {
        self.need(self.caps.gripper, "gripper")?;
        self.world.gripper_width(&self.robot).map_err(map_world)
    }

    fn lidar(&mut self) -> HalResult<LidarScan> {
        self.need(self.caps.lidar, "lidar")?;
        self.world.lidar(&self.robot).map_err(map_world)
    }

    fn odometry(&mut self) -> HalResult<(Pose2D, f64)> {
        self.need(self.caps.odom, "odometry")?;
        self.world.read_odometry(&self.robot).map_err(map_world)
    }

    fn scene_objects(&mut self) -> HalResult<Vec<SceneObject>> {
        Ok(self.world.objects().to_vec())
    }

    fn tick(&mut self, dt: f64) -> HalResult<()> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(HalError::refused(format!("tick dt must be positive, got {dt}")));
        }
        self.world.step(dt);
        Ok(())
    }
}
