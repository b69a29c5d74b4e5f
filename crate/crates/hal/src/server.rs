//! Robot emulator server: owns a [`World`], advances its clock either on
//! explicit tick requests (lockstep) or on a wall-clock loop (live), and
//! serves any number of line-protocol connections over TCP.
//!
//! Exactly one connection at a time may control a given robot; control is
//! claimed implicitly by the first state-changing request and released on
//! disconnect. Read-only requests are always allowed, including while
//! another connection is blocked inside a long-running command.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use mobiman_core::control::{MoveForwardController, MoveForwardParams, MoveStep};
use mobiman_core::geometry::Twist2D;
use mobiman_core::hal::{
    Capabilities, HalError, HalErrorCode, HalResult, ERROR_CODES, OP_REGISTRY, PROTOCOL_VERSION,
};
use mobiman_core::world::World;
use serde_json::{json, Value};

use crate::sim::{map_world, MAX_MOVE_DISTANCE};
use crate::wire::{
    decode_request, encode, parse_args, protocol_error, GripperArgs, HelloArgs, HelloResult,
    JointTargetsArgs, MoveForwardArgs, OdometryResult, OpEntry, OpsResult, Request, Response,
    SetVelocityArgs, TickArgs, TickResult, UNPARSED_ID,
};

/// How simulated time advances while the server runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMode {
    /// Time moves only on `sys.tick` requests; fully deterministic.
    Lockstep,
    /// A background loop steps the world in real time at the configured
    /// step length (50 Hz by default); `sys.tick` is refused.
    Live,
}

struct Shared {
    world: Mutex<World>,
    /// Robot id -> connection id currently holding control.
    controllers: Mutex<HashMap<String, u64>>,
    shutdown: AtomicBool,
    next_conn: AtomicU64,
    mode: TimeMode,
    move_params: MoveForwardParams,
}

/// Robot binding established by `sys.hello` on one connection.
#[derive(Clone)]
struct Bound {
    id: String,
    caps: Capabilities,
}

/// A running emulator bound to a TCP port. Dropping it (or calling
/// [`HalServer::shutdown`]) stops the accept loop and the clock; open
/// connections notice within their next read timeout.
pub struct HalServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl HalServer {
    /// Binds `addr` (e.g. `"127.0.0.1:0"` for an ephemeral port) and starts
    /// serving the world with default drive-controller gains.
    pub fn serve(world: World, addr: &str, mode: TimeMode) -> std::io::Result<HalServer> {
        Self::serve_with(world, addr, mode, MoveForwardParams::default())
    }

    pub fn serve_with(
        world: World,
        addr: &str,
        mode: TimeMode,
        move_params: MoveForwardParams,
    ) -> std::io::Result<HalServer> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let local = listener.local_addr()?;
        let tick_dt = world.cfg.dt;
        let shared = Arc::new(Shared {
            world: Mutex::new(world),
            controllers: Mutex::new(HashMap::new()),
            shutdown: AtomicBool::new(false),
            next_conn: AtomicU64::new(1),
            mode,
            move_params,
        });

        let mut threads = Vec::new();
        let accept_shared = Arc::clone(&shared);
        threads.push(thread::spawn(move || accept_loop(listener, accept_shared)));
        if mode == TimeMode::Live {
            let tick_shared = Arc::clone(&shared);
            threads.push(thread::spawn(move || live_clock(tick_shared, tick_dt)));
        }
        Ok(HalServer { addr: local, shared, threads })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    /// Stops accepting, halts the clock, and joins the service threads.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for HalServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    loop {
        if shared.shutdown.load(Ordering::SeqCst) {
            return;
        }
        match listener.accept() {
            Ok((stream, _)) => {
                let conn_id = shared.next_conn.fetch_add(1, Ordering::SeqCst);
                let conn_shared = Arc::clone(&shared);
                // Connection threads are not joined: they exit on their own
                // within one read timeout of shutdown.
                thread::spawn(move || serve_connection(conn_shared, stream, conn_id));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                thread::sleep(Duration::from_millis(5));
            }
            Err(_) => return,
        }
    }
}

fn live_clock(shared: Arc<Shared>, dt: f64) {
    let pause = Duration::from_secs_f64(dt);
    loop {
        if shared.shutdown.load(Ordering::SeqCst) {
            return;
        }
        shared.world.lock().unwrap().step(dt);
        thread::sleep(pause);
    }
}

fn serve_connection(shared: Arc<Shared>, stream: TcpStream, conn_id: u64) {
    let _ = stream.set_nodelay(true);
    let _ = stream.set_read_timeout(Some(Duration::from_millis(100)));
    let mut writer = match stream.try_clone() {
        Ok(s) => s,
        Err(_) => return,
    };
    let mut reader = BufReader::new(stream);
    let mut bound: Option<Bound> = None;
    let mut line = String::new();
    loop {
        if shared.shutdown.load(Ordering::SeqCst) {
            break;
        }
        // The line buffer is only cleared after a complete line: a read
        // timeout mid-line keeps the partial text and resumes appending.
        match reader.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {
                let text = line.trim();
                let resp = if text.is_empty() {
                    line.clear();
                    continue;
                } else {
                    match decode_request(text) {
                        Ok(req) => {
                            let id = req.id;
                            match run_op(&shared, conn_id, &mut bound, &req) {
                                Ok(v) => Response::success(id, v),
                                Err(e) => Response::failure(id, e),
                            }
                        }
                        Err(e) => Response::failure(UNPARSED_ID, e),
                    }
                };
                line.clear();
                let mut out = encode(&resp);
                out.push('\n');
                if writer.write_all(out.as_bytes()).is_err() {
                    break;
                }
            }
            Err(e)
                if matches!(
                    e.kind(),
                    ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted
                ) =>
            {
                continue;
            }
            Err(_) => break,
        }
    }
    shared.controllers.lock().unwrap().retain(|_, owner| *owner != conn_id);
}

fn need_bound(bound: &Option<Bound>) -> HalResult<Bound> {
    bound
        .clone()
        .ok_or_else(|| HalError::refused("no robot bound on this connection; send sys.hello"))
}

fn need_cap(have: bool, what: &str) -> HalResult<()> {
    if have {
        Ok(())
    } else {
        Err(HalError::unsupported(what))
    }
}

/// Grants (or re-confirms) control of `robot` to connection `conn`.
fn claim(shared: &Shared, robot: &str, conn: u64) -> HalResult<()> {
    let mut owners = shared.controllers.lock().unwrap();
    match owners.get(robot) {
        Some(&owner) if owner != conn => Err(HalError::refused(format!(
            "robot {robot:?} is already controlled by another connection"
        ))),
        _ => {
            owners.insert(robot.to_string(), conn);
            Ok(())
        }
    }
}

fn infer_caps(world: &World, robot: &str) -> HalResult<Capabilities> {
    let entity = world
        .robot(robot)
        .map_err(|e| HalError::refused(e.to_string()))?;
    Ok(Capabilities {
        base: true,
        arm: !entity.model.actuated_joints().is_empty(),
        gripper: entity.gripper.is_some(),
        lidar: true,
        odom: true,
    })
}

fn run_op(
    shared: &Shared,
    conn_id: u64,
    bound: &mut Option<Bound>,
    req: &Request,
) -> HalResult<Value> {
    match req.op.as_str() {
        "sys.hello" => {
            let args: HelloArgs = parse_args(&req.args)?;
            if args.version != PROTOCOL_VERSION {
                return Err(protocol_error(format!(
                    "protocol version {:?} not supported; this server speaks {:?}",
                    args.version, PROTOCOL_VERSION
                )));
            }
            let caps = infer_caps(&shared.world.lock().unwrap(), &args.robot)?;
            // Rebinding releases any control claims held under the old name.
            shared.controllers.lock().unwrap().retain(|_, owner| *owner != conn_id);
            *bound = Some(Bound { id: args.robot.clone(), caps });
            Ok(json!(HelloResult {
                version: PROTOCOL_VERSION.to_string(),
                robot: args.robot,
                capabilities: caps,
            }))
        }
        "sys.ops" => Ok(json!(OpsResult {
            ops: OP_REGISTRY
                .iter()
                .map(|o| OpEntry {
                    name: o.name.to_string(),
                    args: o.args.iter().map(|a| a.to_string()).collect(),
                })
                .collect(),
            errors: ERROR_CODES.iter().map(|c| format!("{c:?}")).collect(),
        })),
        "sys.tick" => {
            let b = need_bound(bound)?;
            claim(shared, &b.id, conn_id)?;
            let args: TickArgs = parse_args(&req.args)?;
            if !(args.dt > 0.0) || !args.dt.is_finite() {
                return Err(HalError::refused(format!(
                    "tick dt must be positive, got {}",
                    args.dt
                )));
            }
            match shared.mode {
                TimeMode::Lockstep => {
                    let mut world = shared.world.lock().unwrap();
                    world.step(args.dt);
                    Ok(json!(TickResult { time: world.time() }))
                }
                TimeMode::Live => Err(HalError::refused(
                    "server clock is free-running; sys.tick works in lockstep mode only",
                )),
            }
        }
        "base.set_velocity" => {
            let b = need_bound(bound)?;
            need_cap(b.caps.base, "base")?;
            claim(shared, &b.id, conn_id)?;
            let args: SetVelocityArgs = parse_args(&req.args)?;
            let mut world = shared.world.lock().unwrap();
            world
                .set_command_velocity(&b.id, Twist2D::new(args.v, args.w))
                .map_err(map_world)?;
            Ok(json!({}))
        }
        "base.move_forward" => run_move_forward(shared, conn_id, bound, &req.args),
        "base.get_odometry" => {
            let b = need_bound(bound)?;
            need_cap(b.caps.odom, "odometry")?;
            let mut world = shared.world.lock().unwrap();
            let (pose, stamp) = world.read_odometry(&b.id).map_err(map_world)?;
            Ok(json!(OdometryResult { pose, stamp }))
        }
        "arm.set_joint_targets" => {
            let b = need_bound(bound)?;
            need_cap(b.caps.arm, "arm")?;
            claim(shared, &b.id, conn_id)?;
            let args: JointTargetsArgs = parse_args(&req.args)?;
            let mut world = shared.world.lock().unwrap();
            world.set_joint_targets(&b.id, args.positions).map_err(map_world)?;
            Ok(json!({}))
        }
        "arm.get_joint_state" => {
            let b = need_bound(bound)?;
            need_cap(b.caps.arm, "arm")?;
            let world = shared.world.lock().unwrap();
            let js = world.joint_state(&b.id).map_err(map_world)?;
            Ok(json!(crate::wire::JointStateResult::from(js)))
        }
        "gripper.command" => {
            let b = need_bound(bound)?;
            need_cap(b.caps.gripper, "gripper")?;
            claim(shared, &b.id, conn_id)?;
            let args: GripperArgs = parse_args(&req.args)?;
            let cmd = args.to_command()?;
            let mut world = shared.world.lock().unwrap();
            world.command_gripper(&b.id, cmd).map_err(map_world)?;
            Ok(json!({}))
        }
        "gripper.get_width" => {
            let b = need_bound(bound)?;
            need_cap(b.caps.gripper, "gripper")?;
            let world = shared.world.lock().unwrap();
            let width = world.gripper_width(&b.id).map_err(map_world)?;
            Ok(json!(crate::wire::WidthResult { width }))
        }
        "sensor.lidar" => {
            let b = need_bound(bound)?;
            need_cap(b.caps.lidar, "lidar")?;
            let world = shared.world.lock().unwrap();
            let scan = world.lidar(&b.id).map_err(map_world)?;
            Ok(serde_json::to_value(scan).expect("scan serializes"))
        }
        "world.get_objects" => {
            let world = shared.world.lock().unwrap();
            Ok(json!(crate::wire::ObjectsResult { objects: world.objects().to_vec() }))
        }
        other => Err(protocol_error(format!("unknown op {other:?}"))),
    }
}

/// Runs the closed-loop straight drive on the server, releasing the world
/// lock between controller steps so observer connections keep reading.
fn run_move_forward(
    shared: &Shared,
    conn_id: u64,
    bound: &mut Option<Bound>,
    args: &Value,
) -> HalResult<Value> {
    let b = need_bound(bound)?;
    need_cap(b.caps.base, "base")?;
    claim(shared, &b.id, conn_id)?;
    let args: MoveForwardArgs = parse_args(args)?;
    let distance = args.distance;
    if !distance.is_finite() || distance.abs() > MAX_MOVE_DISTANCE {
        return Err(HalError::refused(format!(
            "drive distance {distance} outside ±{MAX_MOVE_DISTANCE} m"
        )));
    }
    let mut ctl = MoveForwardController::new(distance, shared.move_params.clone());
    loop {
        if shared.shutdown.load(Ordering::SeqCst) {
            return Err(HalError::new(
                HalErrorCode::Disconnected,
                "server shut down during the drive",
            ));
        }
        let wall_pause;
        {
            let mut world = shared.world.lock().unwrap();
            let dt = world.cfg.dt;
            let (pose, _) = world.read_odometry(&b.id).map_err(map_world)?;
            match ctl.step(&pose, dt) {
                MoveStep::Drive(v) => {
                    world
                        .set_command_velocity(&b.id, Twist2D::new(v, 0.0))
                        .map_err(map_world)?;
                    match shared.mode {
                        TimeMode::Lockstep => {
                            world.step(dt);
                            wall_pause = None;
                        }
                        TimeMode::Live => wall_pause = Some(Duration::from_secs_f64(dt)),
                    }
                }
                MoveStep::Done => {
                    world.set_command_velocity(&b.id, Twist2D::ZERO).map_err(map_world)?;
                    return Ok(json!({}));
                }
                MoveStep::TimedOut => {
                    world.set_command_velocity(&b.id, Twist2D::ZERO).map_err(map_world)?;
                    return Err(HalError::new(
                        HalErrorCode::Timeout,
                        format!("drive of {distance} m did not settle"),
                    ));
                }
            }
        }
        if let Some(pause) = wall_pause {
            thread::sleep(pause);
        }
    }
}
