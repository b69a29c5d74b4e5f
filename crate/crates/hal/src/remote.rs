//! Remote backend: a robot handle that marshals every call onto the line
//! protocol and blocks for the matching response.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};

use mobiman_core::geometry::{JointState, Pose2D, Twist2D};
use mobiman_core::hal::{
    Capabilities, HalError, HalErrorCode, HalResult, RobotHandle, PROTOCOL_VERSION,
};
use mobiman_core::model::SceneObject;
use mobiman_core::world::{GripperCommand, LidarScan};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::wire::{
    decode_response, encode, protocol_error, GripperArgs, HelloArgs, HelloResult,
    JointStateResult, ObjectsResult, OdometryResult, OpsResult, Request, WidthResult,
};

fn disconnected(e: std::io::Error) -> HalError {
    HalError::new(HalErrorCode::Disconnected, format!("connection lost: {e}"))
}

/// Robot handle speaking to an emulator (or any conformant server) over
/// TCP. Calls block until the server responds; a dropped connection turns
/// every subsequent call into `Disconnected`.
pub struct RemoteHandle {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_id: u64,
    robot: String,
    caps: Capabilities,
}

impl RemoteHandle {
    /// Connects, performs the version handshake, and binds `robot`.
    pub fn connect(addr: impl ToSocketAddrs, robot: &str) -> HalResult<RemoteHandle> {
        let stream = TcpStream::connect(addr).map_err(disconnected)?;
        let _ = stream.set_nodelay(true);
        let reader = BufReader::new(stream.try_clone().map_err(disconnected)?);
        let mut handle = RemoteHandle {
            reader,
            writer: stream,
            next_id: 1,
            robot: robot.to_string(),
            caps: Capabilities::default(),
        };
        let hello: HelloResult = handle.call_typed(
            "sys.hello",
            json!(HelloArgs { version: PROTOCOL_VERSION.to_string(), robot: robot.to_string() }),
        )?;
        if hello.version != PROTOCOL_VERSION {
            return Err(protocol_error(format!(
                "server speaks protocol {:?}, client speaks {:?}",
                hello.version, PROTOCOL_VERSION
            )));
        }
        handle.caps = hello.capabilities;
        Ok(handle)
    }

    /// One request/response round trip; checks the id echo.
    fn call(&mut self, op: &str, args: Value) -> HalResult<Value> {
        let id = self.next_id;
        self.next_id += 1;
        let mut line = encode(&Request { id, op: op.to_string(), args });
        line.push('\n');
        self.writer.write_all(line.as_bytes()).map_err(disconnected)?;
        let mut buf = String::new();
        let n = self.reader.read_line(&mut buf).map_err(disconnected)?;
        if n == 0 {
            return Err(HalError::new(HalErrorCode::Disconnected, "server closed the connection"));
        }
        let resp = decode_response(buf.trim())?;
        if resp.id != id {
            return Err(protocol_error(format!(
                "response id {} does not echo request id {id}",
                resp.id
            )));
        }
        resp.into_result()
    }

    fn call_typed<T: DeserializeOwned>(&mut self, op: &str, args: Value) -> HalResult<T> {
        let v = self.call(op, args)?;
        serde_json::from_value(v).map_err(|e| protocol_error(format!("bad result payload: {e}")))
    }

    /// The server's operation registry, for conformance checks.
    pub fn ops(&mut self) -> HalResult<OpsResult> {
        self.call_typed("sys.ops", json!({}))
    }
}

impl RobotHandle for RemoteHandle {
    fn id(&self) -> &str {
        &self.robot
    }

    fn capabilities(&self) -> Capabilities {
        self.caps
    }

    fn set_velocity(&mut self, t: Twist2D) -> HalResult<()> {
        self.call("base.set_velocity", json!({ "v": t.v, "w": t.w })).map(|_| ())
    }

    fn move_forward(&mut self, distance: f64) -> HalResult<()> {
        self.call("base.move_forward", json!({ "distance": distance })).map(|_| ())
    }

    fn set_joint_targets(&mut self, positions: &[f64]) -> HalResult<()> {
        self.call("arm.set_joint_targets", json!({ "positions": positions })).map(|_| ())
    }

    fn joint_state(&mut self) -> HalResult<JointState> {
        self.call_typed::<JointStateResult>("arm.get_joint_state", json!({})).map(Into::into)
    }

    fn gripper_command(&mut self, cmd: GripperCommand) -> HalResult<()> {
        self.call("gripper.command", json!(GripperArgs::from_command(cmd))).map(|_| ())
    }

    fn gripper_width(&mut self) -> HalResult<f64> {
        self.call_typed::<WidthResult>("gripper.get_width", json!({})).map(|r| r.width)
    }

    fn lidar(&mut self) -> HalResult<LidarScan> {
        self.call_typed("sensor.lidar", json!({}))
    }

    fn odometry(&mut self) -> HalResult<(Pose2D, f64)> {
        self.call_typed::<OdometryResult>("base.get_odometry", json!({}))
            .map(|r| (r.pose, r.stamp))
    }

    fn scene_objects(&mut self) -> HalResult<Vec<SceneObject>> {
        self.call_typed::<ObjectsResult>("world.get_objects", json!({})).map(|r| r.objects)
    }

    fn tick(&mut self, dt: f64) -> HalResult<()> {
        self.call("sys.tick", json!({ "dt": dt })).map(|_| ())
    }
}

/// Connects to `host:port` and binds `robot`.
pub fn connect_remote(host: &str, port: u16, robot: &str) -> HalResult<RemoteHandle> {
    RemoteHandle::connect((host, port), robot)
}
