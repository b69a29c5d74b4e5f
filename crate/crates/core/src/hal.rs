//! The backend-independent robot handle: one control surface implemented by
//! the in-process simulator and by the remote TCP client, so code written
//! against it runs unchanged on either.

use serde::{Deserialize, Serialize};

use crate::geometry::{JointState, Pose2D, Twist2D};
use crate::model::SceneObject;
use crate::world::{GripperCommand, LidarScan};

/// Which subsystems a handle actually exposes; calls outside the set fail
/// with [`HalErrorCode::Unsupported`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Capabilities {
    pub base: bool,
    pub arm: bool,
    pub gripper: bool,
    pub lidar: bool,
    pub odom: bool,
}

impl Capabilities {
    pub const ALL: Capabilities =
        Capabilities { base: true, arm: true, gripper: true, lidar: true, odom: true };
}

/// Closed error-code set shared verbatim by every backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HalErrorCode {
    Unsupported,
    Timeout,
    Disconnected,
    Refused,
    ProtocolError,
    HardwareFault,
}

/// All error codes, in wire-name order, for conformance checks.
pub const ERROR_CODES: [HalErrorCode; 6] = [
    HalErrorCode::Unsupported,
    HalErrorCode::Timeout,
    HalErrorCode::Disconnected,
    HalErrorCode::Refused,
    HalErrorCode::ProtocolError,
    HalErrorCode::HardwareFault,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalError {
    pub code: HalErrorCode,
    pub message: String,
}

impl HalError {
    pub fn new(code: HalErrorCode, message: impl Into<String>) -> HalError {
        HalError { code, message: message.into() }
    }

    pub fn unsupported(what: &str) -> HalError {
        Self::new(HalErrorCode::Unsupported, format!("{what} is not available on this robot"))
    }

    pub fn refused(message: impl Into<String>) -> HalError {
        Self::new(HalErrorCode::Refused, message)
    }
}

impl std::fmt::Display for HalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

impl std::error::Error for HalError {}

pub type HalResult<T> = Result<T, HalError>;

/// The unified robot-control contract. Sensor getters take `&mut self`
/// because remote backends perform I/O and the simulator draws odometry
/// noise. `tick` advances simulated time; a live backend may treat it as a
/// real-time wait.
pub trait RobotHandle {
    fn id(&self) -> &str;
    fn capabilities(&self) -> Capabilities;

    /// Latches a base velocity command; it applies from the next tick on.
    fn set_velocity(&mut self, t: Twist2D) -> HalResult<()>;
    /// Drives straight for a signed distance under closed-loop control and
    /// blocks until settled; the final commanded velocity is zero.
    fn move_forward(&mut self, distance: f64) -> HalResult<()>;

    fn set_joint_targets(&mut self, positions: &[f64]) -> HalResult<()>;
    fn joint_state(&mut self) -> HalResult<JointState>;

    fn gripper_command(&mut self, cmd: GripperCommand) -> HalResult<()>;
    fn gripper_width(&mut self) -> HalResult<f64>;

    fn lidar(&mut self) -> HalResult<LidarScan>;
    /// Base pose estimate plus its timestamp in seconds.
    fn odometry(&mut self) -> HalResult<(Pose2D, f64)>;

    /// Ground-truth scene snapshot (the simulator's stand-in for a
    /// perception pipeline).
    fn scene_objects(&mut self) -> HalResult<Vec<SceneObject>>;

    /// Advances time by `dt` seconds.
    fn tick(&mut self, dt: f64) -> HalResult<()>;
}

/// One operation in the wire protocol: its name and argument field names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpSpec {
    pub name: &'static str,
    pub args: &'static [&'static str],
}

/// The complete operation registry. Both backends expose exactly these;
/// the server answers `sys.ops` with this table so conformance tests can
/// diff the two surfaces.
pub const OP_REGISTRY: &[OpSpec] = &[
    OpSpec { name: "sys.hello", args: &["version", "robot"] },
    OpSpec { name: "sys.ops", args: &[] },
    OpSpec { name: "sys.tick", args: &["dt"] },
    OpSpec { name: "base.set_velocity", args: &["v", "w"] },
    OpSpec { name: "base.move_forward", args: &["distance"] },
    OpSpec { name: "base.get_odometry", args: &[] },
    OpSpec { name: "arm.set_joint_targets", args: &["positions"] },
    OpSpec { name: "arm.get_joint_state", args: &[] },
    OpSpec { name: "gripper.command", args: &["action", "width"] },
    OpSpec { name: "gripper.get_width", args: &[] },
    OpSpec { name: "sensor.lidar", args: &[] },
    OpSpec { name: "world.get_objects", args: &[] },
];

/// Wire protocol version exchanged in `sys.hello`.
pub const PROTOCOL_VERSION: &str = "1";

/// TCP port the emulator server binds when none is configured.
pub const DEFAULT_PORT: u16 = 7447;

/// Environment variable overriding the default port.
pub const PORT_ENV: &str = "MOBIMAN_HAL_PORT";
