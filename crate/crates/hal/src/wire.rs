//! Wire format shared by the remote client and the emulator server:
//! newline-delimited JSON, one request or response object per line.

use mobiman_core::geometry::{JointState, Pose2D};
use mobiman_core::hal::{Capabilities, HalError, HalErrorCode, HalResult};
use mobiman_core::model::SceneObject;
use mobiman_core::world::GripperCommand;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Id used on responses to lines that could not be parsed at all.
pub const UNPARSED_ID: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub op: String,
    #[serde(default)]
    pub args: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireError {
    pub code: HalErrorCode,
    pub message: String,
}

impl From<HalError> for WireError {
    fn from(e: HalError) -> WireError {
        WireError { code: e.code, message: e.message }
    }
}

impl From<WireError> for HalError {
    fn from(e: WireError) -> HalError {
        HalError::new(e.code, e.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<WireError>,
}

impl Response {
    pub fn success(id: u64, result: Value) -> Response {
        Response { id, ok: true, result: Some(result), error: None }
    }

    pub fn failure(id: u64, error: HalError) -> Response {
        Response { id, ok: false, result: None, error: Some(error.into()) }
    }

    /// Unwraps a response into the result payload or the carried error.
    pub fn into_result(self) -> HalResult<Value> {
        if self.ok {
            Ok(self.result.unwrap_or(Value::Null))
        } else {
            Err(self
                .error
                .map(HalError::from)
                .unwrap_or_else(|| protocol_error("failure response without an error object")))
        }
    }
}

pub fn protocol_error(message: impl Into<String>) -> HalError {
    HalError::new(HalErrorCode::ProtocolError, message)
}

/// Serializes any wire object onto a single line (without the newline).
pub fn encode<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("wire types always serialize")
}

pub fn decode_request(line: &str) -> HalResult<Request> {
    serde_json::from_str(line).map_err(|e| protocol_error(format!("bad request line: {e}")))
}

pub fn decode_response(line: &str) -> HalResult<Response> {
    serde_json::from_str(line).map_err(|e| protocol_error(format!("bad response line: {e}")))
}

/// Extracts a typed argument struct from a request's `args` object.
pub fn parse_args<T: for<'de> Deserialize<'de>>(args: &Value) -> HalResult<T> {
    serde_json::from_value(args.clone())
        .map_err(|e| protocol_error(format!("bad arguments: {e}")))
}

// ---- Per-operation payloads -------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloArgs {
    pub version: String,
    pub robot: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloResult {
    pub version: String,
    pub robot: String,
    pub capabilities: Capabilities,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpEntry {
    pub name: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpsResult {
    pub ops: Vec<OpEntry>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickArgs {
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickResult {
    /// Simulation clock after the step, seconds.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetVelocityArgs {
    pub v: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveForwardArgs {
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTargetsArgs {
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdometryResult {
    pub pose: Pose2D,
    pub stamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointStateResult {
    pub names: Vec<String>,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl From<JointState> for JointStateResult {
    fn from(js: JointState) -> JointStateResult {
        JointStateResult { names: js.names, positions: js.positions, velocities: js.velocities }
    }
}

impl From<JointStateResult> for JointState {
    fn from(r: JointStateResult) -> JointState {
        JointState { names: r.names, positions: r.positions, velocities: r.velocities }
    }
}

/// Flat gripper arguments: `action` is `open`, `close`, or `width`; the
/// `width` field is read only for the `width` action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperArgs {
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

impl GripperArgs {
    pub fn from_command(cmd: GripperCommand) -> GripperArgs {
        match cmd {
            GripperCommand::Open => GripperArgs { action: "open".into(), width: None },
            GripperCommand::Close => GripperArgs { action: "close".into(), width: None },
            GripperCommand::Width(w) => GripperArgs { action: "width".into(), width: Some(w) },
        }
    }

    pub fn to_command(&self) -> HalResult<GripperCommand> {
        match self.action.as_str() {
            "open" => Ok(GripperCommand::Open),
            "close" => Ok(GripperCommand::Close),
            "width" => {
                let w = self
                    .width
                    .ok_or_else(|| protocol_error("width action requires a width field"))?;
                Ok(GripperCommand::Width(w))
            }
            other => Err(protocol_error(format!("unknown gripper action {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthResult {
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectsResult {
    pub objects: Vec<SceneObject>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requests_round_trip_one_per_line() {
        let req = Request {
            id: 7,
            op: "base.get_odometry".into(),
            args: serde_json::json!({}),
        };
        let line = encode(&req);
        assert!(!line.contains('\n'), "must fit one line");
        assert_eq!(decode_request(&line).unwrap(), req);
    }

    #[test]
    fn missing_args_field_defaults_to_null() {
        let req = decode_request(r#"{"id":3,"op":"sys.ops"}"#).unwrap();
        assert_eq!(req.args, Value::Null);
    }

    #[test]
    fn garbage_lines_decode_to_protocol_errors() {
        let err = decode_request("not json").unwrap_err();
        assert_eq!(err.code, HalErrorCode::ProtocolError);
        let err = decode_request(r#"{"id":"x","op":5}"#).unwrap_err();
        assert_eq!(err.code, HalErrorCode::ProtocolError);
    }

    #[test]
    fn error_responses_round_trip_their_code() {
        let resp = Response::failure(9, HalError::refused("busy"));
        let line = encode(&resp);
        let back = decode_response(&line).unwrap();
        assert_eq!(back.id, 9);
        let err = back.into_result().unwrap_err();
        assert_eq!(err.code, HalErrorCode::Refused);
        assert_eq!(err.message, "busy");
    }

    #[test]
    fn success_response_lines_omit_the_error_field() {
        let line = encode(&Response::success(1, serde_json::json!({"width": 0.08})));
        assert!(!line.contains("error"));
        let v = decode_response(&line).unwrap().into_result().unwrap();
        assert_eq!(v["width"], 0.08);
    }

    #[test]
    fn gripper_arguments_cover_all_commands() {
        for cmd in [GripperCommand::Open, GripperCommand::Close, GripperCommand::Width(0.03)] {
            let args = GripperArgs::from_command(cmd);
            assert_eq!(args.to_command().unwrap(), cmd);
        }
        let bad = GripperArgs { action: "width".into(), width: None };
        assert_eq!(bad.to_command().unwrap_err().code, HalErrorCode::ProtocolError);
        let bad = GripperArgs { action: "crush".into(), width: None };
        assert_eq!(bad.to_command().unwrap_err().code, HalErrorCode::ProtocolError);
    }
}
