//! Arm motion planning: bidirectional RRT in joint space with dense edge
//! validation, random-pair shortcutting, per-joint velocity re-timing, and
//! a top-down geometric grasp rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{JointState, Pose2D, Pose3D, Quat};
use crate::kinematics::{ik_solve, IkOptions};
use crate::model::{JointSpec, RobotModel, SceneObject, ShapeKind};
use crate::world::check_collision;

/// Sampling-planner knobs; `rng_seed` fixes the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrtParams {
    /// Maximum joint-space (L2) extension per tree step, radians.
    pub step_size: f64,
    /// Probability of sampling the opposite tree's root instead of uniform.
    pub goal_bias: f64,
    pub max_iters: usize,
    pub shortcut_passes: usize,
    pub rng_seed: u64,
}

impl Default for RrtParams {
    fn default() -> Self {
        RrtParams {
            step_size: 0.1,
            goal_bias: 0.1,
            max_iters: 5000,
            shortcut_passes: 50,
            rng_seed: 0,
        }
    }
}

/// Where the arm should end up: explicit joints or a tool pose to invert.
#[derive(Debug, Clone, PartialEq)]
pub enum ArmGoal {
    Joints(JointState),
    /// World-frame tool target; solved by damped-least-squares IK with
    /// resampled seeds before planning.
    Tip { pose: Pose3D, constrain_orientation: bool },
}

/// A complete arm planning problem against a static scene.
#[derive(Debug, Clone)]
pub struct MotionPlanRequest<'a> {
    pub model: &'a RobotModel,
    pub base_pose: Pose2D,
    pub start: JointState,
    pub goal: ArmGoal,
    pub obstacles: &'a [SceneObject],
    /// Object ids exempt from collision checking (e.g. the grasp target).
    pub ignore: Vec<String>,
    /// Link whose pose a tip goal refers to.
    pub tip_link: Option<String>,
    pub params: RrtParams,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManipError {
    #[error("start configuration rejected: {0}")]
    StartInCollision(String),
    #[error("goal configuration rejected: {0}")]
    GoalInCollision(String),
    #[error("inverse kinematics failed: {0}")]
    IkFailed(String),
    #[error("no plan within {0} iterations")]
    PlanningTimeout(usize),
    #[error("object requires {required:.3} m grip, gripper max is {max:.3} m")]
    ObjectTooWide { required: f64, max: f64 },
}

/// Timed joint-space waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub positions: Vec<f64>,
}

/// Joint trajectory with one shared name row and timed waypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTrajectory {
    pub names: Vec<String>,
    pub points: Vec<TrajectoryPoint>,
}

impl JointTrajectory {
    /// Summed joint-space L2 length over waypoints.
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| dist(&w[0].positions, &w[1].positions)).sum()
    }

    pub fn duration(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.t)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn lerp_vec(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + (y - x) * t).collect()
}

/// Actuated joints in deterministic tree order with their sampling ranges.
fn actuated_specs(model: &RobotModel) -> Vec<&JointSpec> {
    model
        .ordered_joint_indices()
        .into_iter()
        .map(|i| &model.joints[i])
        .filter(|j| j.is_actuated())
        .collect()
}

fn sample_range(spec: &JointSpec) -> (f64, f64) {
    match spec.limits {
        Some((lo, hi)) => (lo, hi),
        // Continuous joints sample one full turn.
        None => (-std::f64::consts::PI, std::f64::consts::PI),
    }
}

fn within_limits(specs: &[&JointSpec], q: &[f64]) -> bool {
    specs.iter().zip(q).all(|(s, &v)| match s.limits {
        Some((lo, hi)) => v >= lo - 1e-9 && v <= hi + 1e-9,
        None => true,
    })
}

/// Safety margin added to obstacles when validating configurations the
/// caller did not supply. Between two samples spaced `s` apart in joint
/// space, clearance can shrink by at most (arm reach) x s / 2; the padding
/// absorbs that dip so returned paths stay collision-free at any finer
/// re-interpolation, not just at the sampled configurations.
pub const VALIDATION_PADDING: f64 = 0.015;

/// Grows every obstacle outward by `pad` meters (conservatively for boxes).
fn pad_objects(objects: &[SceneObject], pad: f64) -> Vec<SceneObject> {
    objects
        .iter()
        .map(|o| {
            let mut o = o.clone();
            o.shape.kind = match o.shape.kind {
                ShapeKind::Sphere { radius } => ShapeKind::Sphere { radius: radius + pad },
                ShapeKind::Capsule { radius, length } => {
                    ShapeKind::Capsule { radius: radius + pad, length }
                }
                ShapeKind::Cylinder { radius, length } => {
                    ShapeKind::Cylinder { radius: radius + pad, length: length + 2.0 * pad }
                }
                ShapeKind::Box { size } => ShapeKind::Box {
                    size: [size[0] + 2.0 * pad, size[1] + 2.0 * pad, size[2] + 2.0 * pad],
                },
            };
            o
        })
        .collect()
}

struct Checker<'a> {
    model: &'a RobotModel,
    base: Pose2D,
    obstacles: &'a [SceneObject],
    /// The same obstacles grown by [`VALIDATION_PADDING`].
    padded: Vec<SceneObject>,
    ignore: Vec<&'a str>,
    state: JointState,
}

impl<'a> Checker<'a> {
    fn new(
        model: &'a RobotModel,
        base: Pose2D,
        obstacles: &'a [SceneObject],
        ignore: Vec<&'a str>,
        state: JointState,
    ) -> Checker<'a> {
        Checker {
            model,
            base,
            obstacles,
            padded: pad_objects(obstacles, VALIDATION_PADDING),
            ignore,
            state,
        }
    }

    fn is_free(&mut self, q: &[f64]) -> bool {
        self.state.positions.copy_from_slice(q);
        !check_collision(self.model, &self.base, &self.state, self.obstacles, &self.ignore)
    }

    fn is_free_padded(&mut self, q: &[f64]) -> bool {
        self.state.positions.copy_from_slice(q);
        !check_collision(self.model, &self.base, &self.state, &self.padded, &self.ignore)
    }

    /// Dense validation of the straight joint-space segment `a -> b`,
    /// sampling at spacing ≤ `spacing`, excluding endpoint `a`. Interior
    /// samples are held to the padded margin; the terminal sample is only
    /// held to the true obstacles when `exempt_end` marks it as a
    /// caller-supplied endpoint (start or goal).
    fn edge_free(&mut self, a: &[f64], b: &[f64], spacing: f64, exempt_end: bool) -> bool {
        let n = (dist(a, b) / spacing).ceil().max(1.0) as usize;
        for k in 1..=n {
            let q = lerp_vec(a, b, k as f64 / n as f64);
            let ok = if k == n && exempt_end { self.is_free(&q) } else { self.is_free_padded(&q) };
            if !ok {
                return false;
            }
        }
        true
    }
}

struct Node {
    q: Vec<f64>,
    parent: usize,
}

fn nearest(tree: &[Node], q: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, n) in tree.iter().enumerate() {
        let d = dist(&n.q, q);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Moves from `from` toward `to` by at most `step`; lands exactly on `to`
/// when it is within reach, which is what lets connect attempts terminate.
fn steer(from: &[f64], to: &[f64], step: f64) -> Vec<f64> {
    let d = dist(from, to);
    if d <= step {
        to.to_vec()
    } else {
        lerp_vec(from, to, step / d)
    }
}

fn chain(tree: &[Node], mut at: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    loop {
        out.push(tree[at].q.clone());
        if tree[at].parent == usize::MAX {
            break;
        }
        at = tree[at].parent;
    }
    out
}

/// Plans a collision-free joint trajectory for the request.
///
/// Edges are validated more strictly than the half-step contract requires:
/// interior samples are taken at an eighth of the step size against
/// obstacles grown by a small padding, which certifies positive clearance
/// for every configuration between samples, not just at them. The caller's
/// start and goal are exempt from the padding (they only have to be truly
/// collision-free), so plans to tight pre-grasp poses still succeed.
pub fn plan_arm(req: &MotionPlanRequest) -> Result<JointTrajectory, ManipError> {
    let specs = actuated_specs(req.model);
    let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
    let n = names.len();
    let ignore: Vec<&str> = req.ignore.iter().map(|s| s.as_str()).collect();
    let mut checker = Checker::new(
        req.model,
        req.base_pose,
        req.obstacles,
        ignore,
        JointState::from_positions(names.clone(), vec![0.0; n]),
    );

    let start = reorder(&req.start, &names)
        .map_err(|m| ManipError::StartInCollision(m))?;
    if !within_limits(&specs, &start) {
        return Err(ManipError::StartInCollision("outside joint limits".into()));
    }
    if !checker.is_free(&start) {
        return Err(ManipError::StartInCollision("collides with an obstacle".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(req.params.rng_seed);
    let goal = resolve_goal(req, &names, &mut checker, &mut rng)?;
    if !within_limits(&specs, &goal) {
        return Err(ManipError::GoalInCollision("outside joint limits".into()));
    }
    if !checker.is_free(&goal) {
        return Err(ManipError::GoalInCollision("collides with an obstacle".into()));
    }

    if dist(&start, &goal) < 1e-12 {
        return Ok(retime(names, vec![start], &specs));
    }

    // Interior samples at an eighth of the tree step keep the inter-sample
    // clearance dip well inside the validation padding.
    let spacing = req.params.step_size / 8.0;
    let path = rrt_connect(&mut checker, &specs, &start, &goal, &req.params, &mut rng)?;
    let path =
        shortcut_positions(path, &mut checker, spacing, req.params.shortcut_passes, &mut rng);
    Ok(retime(names, path, &specs))
}

fn reorder(state: &JointState, names: &[String]) -> Result<Vec<f64>, String> {
    if state.len() != names.len() {
        return Err(format!("expected {} joint values, got {}", names.len(), state.len()));
    }
    names
        .iter()
        .map(|n| state.position(n).ok_or_else(|| format!("missing joint {n:?}")))
        .collect()
}

fn resolve_goal(
    req: &MotionPlanRequest,
    names: &[String],
    checker: &mut Checker,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, ManipError> {
    match &req.goal {
        ArmGoal::Joints(js) => reorder(js, names).map_err(ManipError::GoalInCollision),
        ArmGoal::Tip { pose, constrain_orientation } => {
            let tip = req
                .tip_link
                .clone()
                .ok_or_else(|| ManipError::IkFailed("no tip link named in the request".into()))?;
            // Tip targets arrive in the world frame; kinematics works in
            // the robot's base frame.
            let local = req.base_pose.to_pose3d().invert().compose(pose);
            let opts = IkOptions { constrain_orientation: *constrain_orientation, ..IkOptions::default() };
            let specs = actuated_specs(req.model);
            let start = reorder(&req.start, names).map_err(ManipError::IkFailed)?;
            // Retry from the current configuration first, then random seeds.
            let mut seeds = vec![start];
            for _ in 0..9 {
                seeds.push(
                    specs
                        .iter()
                        .map(|s| {
                            let (lo, hi) = sample_range(s);
                            rng.random_range(lo..=hi)
                        })
                        .collect(),
                );
            }
            let mut last_err = String::new();
            for seed in seeds {
                let seed_state = JointState::from_positions(names.to_vec(), seed);
                match ik_solve(req.model, &tip, &local, &seed_state, &opts) {
                    Ok(sol) => {
                        let q = reorder(&sol, names).map_err(ManipError::IkFailed)?;
                        if checker.is_free(&q) {
                            return Ok(q);
                        }
                        last_err = "all IK solutions collide".into();
                    }
                    Err(e) => last_err = e.to_string(),
                }
            }
            Err(ManipError::IkFailed(last_err))
        }
    }
}

fn rrt_connect(
    checker: &mut Checker,
    specs: &[&JointSpec],
    start: &[f64],
    goal: &[f64],
    params: &RrtParams,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>, ManipError> {
    let step = params.step_size;
    let spacing = step / 8.0;
    let mut tree_a = vec![Node { q: start.to_vec(), parent: usize::MAX }];
    let mut tree_b = vec![Node { q: goal.to_vec(), parent: usize::MAX }];
    let mut a_is_start = true;
    // Start and goal are only guaranteed free of the true obstacles, so a
    // sample landing exactly on either is exempt from the padded margin.
    let is_root = |q: &[f64], ta: &[Node], tb: &[Node]| q == ta[0].q || q == tb[0].q;

    for _ in 0..params.max_iters {
        let q_rand: Vec<f64> = if rng.random::<f64>() < params.goal_bias {
            tree_b[0].q.clone()
        } else {
            specs
                .iter()
                .map(|s| {
                    let (lo, hi) = sample_range(s);
                    rng.random_range(lo..=hi)
                })
                .collect()
        };

        // Extend tree A one step toward the sample.
        let i_near = nearest(&tree_a, &q_rand);
        let q_new = steer(&tree_a[i_near].q, &q_rand, step);
        let exempt = is_root(&q_new, &tree_a, &tree_b);
        if dist(&q_new, &tree_a[i_near].q) < 1e-15
            || !checker.edge_free(&tree_a[i_near].q, &q_new, spacing, exempt)
        {
            std::mem::swap(&mut tree_a, &mut tree_b);
            a_is_start = !a_is_start;
            continue;
        }
        tree_a.push(Node { q: q_new.clone(), parent: i_near });

        // Greedily connect tree B toward the new node.
        let mut j = nearest(&tree_b, &q_new);
        loop {
            let q_next = steer(&tree_b[j].q, &q_new, step);
            let exempt = is_root(&q_next, &tree_a, &tree_b);
            if !checker.edge_free(&tree_b[j].q, &q_next, spacing, exempt) {
                break;
            }
            tree_b.push(Node { q: q_next.clone(), parent: j });
            j = tree_b.len() - 1;
            if dist(&q_next, &q_new) < 1e-15 {
                // Trees met: stitch root-to-meeting chains together.
                let mut a_part = chain(&tree_a, tree_a.len() - 1);
                a_part.reverse(); // now start-root ... meeting point
                let b_part = chain(&tree_b, j); // meeting point ... goal-root
                let mut path = a_part;
                path.extend(b_part.into_iter().skip(1));
                if !a_is_start {
                    path.reverse();
                }
                return Ok(path);
            }
        }

        std::mem::swap(&mut tree_a, &mut tree_b);
        a_is_start = !a_is_start;
    }
    Err(ManipError::PlanningTimeout(params.max_iters))
}

/// Random-pair shortcutting: proposes `passes` straight replacements and
/// keeps those that stay free and strictly reduce length. Endpoints are
/// never touched.
fn shortcut_positions(
    mut path: Vec<Vec<f64>>,
    checker: &mut Checker,
    spacing: f64,
    passes: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    for _ in 0..passes {
        if path.len() < 3 {
            break;
        }
        let i = rng.random_range(0..path.len() - 1);
        let j = rng.random_range(0..path.len() - 1);
        let (i, j) = if i <= j { (i, j + 1) } else { (j, i + 1) };
        if j - i < 2 {
            continue;
        }
        let via: f64 = path[i..=j].windows(2).map(|w| dist(&w[0], &w[1])).sum();
        let direct = dist(&path[i], &path[j]);
        if direct >= via - 1e-12 {
            continue;
        }
        // The last waypoint is the caller's goal and is only required to be
        // collision-free, not padded-free; interior waypoints were produced
        // by the planner and already satisfy the padded check.
        if checker.edge_free(&path[i], &path[j], spacing, j == path.len() - 1) {
            path.drain(i + 1..j);
        }
    }
    path
}

/// Assigns waypoint times from per-joint velocity caps: each segment takes
/// as long as its slowest joint needs.
fn retime(names: Vec<String>, path: Vec<Vec<f64>>, specs: &[&JointSpec]) -> JointTrajectory {
    let mut t = 0.0;
    let mut points = Vec::with_capacity(path.len());
    for (k, q) in path.iter().enumerate() {
        if k > 0 {
            let seg: f64 = specs
                .iter()
                .zip(q.iter().zip(&path[k - 1]))
                .map(|(s, (a, b))| (a - b).abs() / s.max_velocity.max(1e-9))
                .fold(0.0, f64::max);
            t += seg;
        }
        points.push(TrajectoryPoint { t, positions: q.clone() });
    }
    JointTrajectory { names, points }
}

/// Re-shortcuts an existing trajectory against a caller-supplied freedom
/// test; lengths never increase and endpoints are preserved.
pub fn shortcut(
    traj: &JointTrajectory,
    mut is_free: impl FnMut(&[f64]) -> bool,
    passes: usize,
    step_size: f64,
    rng_seed: u64,
    max_velocities: &[f64],
) -> JointTrajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut path: Vec<Vec<f64>> = traj.points.iter().map(|p| p.positions.clone()).collect();
    let half = step_size / 2.0;
    for _ in 0..passes {
        if path.len() < 3 {
            break;
        }
        let i = rng.random_range(0..path.len() - 1);
        let j = rng.random_range(0..path.len() - 1);
        let (i, j) = if i <= j { (i, j + 1) } else { (j, i + 1) };
        if j - i < 2 {
            continue;
        }
        let via: f64 = path[i..=j].windows(2).map(|w| dist(&w[0], &w[1])).sum();
        if dist(&path[i], &path[j]) >= via - 1e-12 {
            continue;
        }
        let n = (dist(&path[i], &path[j]) / half).ceil().max(1.0) as usize;
        let free = (1..=n).all(|k| is_free(&lerp_vec(&path[i], &path[j], k as f64 / n as f64)));
        if free {
            path.drain(i + 1..j);
        }
    }
    let mut t = 0.0;
    let mut points = Vec::with_capacity(path.len());
    for (k, q) in path.iter().enumerate() {
        if k > 0 {
            let seg = q
                .iter()
                .zip(&path[k - 1])
                .zip(max_velocities)
                .map(|((a, b), v)| (a - b).abs() / v.max(1e-9))
                .fold(0.0, f64::max);
            t += seg;
        }
        points.push(TrajectoryPoint { t, positions: q.clone() });
    }
    JointTrajectory { names: traj.names.clone(), points }
}

/// A proposed grasp: where to hover, where to grab, and how wide to open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub pre_grasp: Pose3D,
    pub grasp: Pose3D,
    /// Direction the tool travels from pre-grasp to grasp (unit, world).
    pub approach_axis: [f64; 3],
    pub required_width: f64,
}

/// Stand-off between pre-grasp hover and grasp, meters.
pub const PRE_GRASP_STANDOFF: f64 = 0.10;
/// Finger opening margin over the object's grip dimension, meters.
pub const GRASP_WIDTH_MARGIN: f64 = 0.01;

/// Top-down grasp rule: grab at the AABB center, approach straight down,
/// fingers spanning the smaller horizontal extent.
pub fn propose_grasp(object: &SceneObject, gripper_max_width: f64) -> Result<GraspPose, ManipError> {
    let aabb = object.aabb();
    let center = aabb.center();
    let ext = aabb.extents();
    let required_width = ext[0].min(ext[1]) + GRASP_WIDTH_MARGIN;
    if required_width > gripper_max_width {
        return Err(ManipError::ObjectTooWide { required: required_width, max: gripper_max_width });
    }
    // Tool z points down (approach is -z world); tool x is the finger
    // travel axis, laid across the smaller horizontal extent.
    let yaw = if ext[0] <= ext[1] { 0.0 } else { std::f64::consts::FRAC_PI_2 };
    let rotation = Quat::from_rpy(std::f64::consts::PI, 0.0, yaw);
    let grasp = Pose3D::new(center, rotation);
    let pre_grasp =
        Pose3D::new([center[0], center[1], center[2] + PRE_GRASP_STANDOFF], rotation);
    Ok(GraspPose { pre_grasp, grasp, approach_axis: [0.0, 0.0, -1.0], required_width })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose3D;
    use crate::kinematics::tests::two_link_arm;
    use crate::model::{CollisionShape, ShapeKind};

    fn js(names: &[&str], q: &[f64]) -> JointState {
        JointState::from_positions(
            names.iter().map(|s| s.to_string()).collect(),
            q.to_vec(),
        )
    }

    /// The planar two-link arm dressed with capsule collision geometry
    /// along each 1 m link.
    fn collision_arm() -> RobotModel {
        let mut m = two_link_arm();
        let capsule = || CollisionShape {
            // Local z of the capsule laid along the link's +x.
            origin: Pose3D::new(
                [0.5, 0.0, 0.0],
                Quat::from_rpy(0.0, std::f64::consts::FRAC_PI_2, 0.0),
            ),
            kind: ShapeKind::Capsule { radius: 0.05, length: 1.0 },
        };
        m.links[1].collision = Some(capsule()); // l1
        m.links[2].collision = Some(capsule()); // l2
        m
    }

    fn box_at(id: &str, x: f64, y: f64, size: [f64; 3]) -> SceneObject {
        SceneObject {
            id: id.into(),
            shape: CollisionShape { origin: Pose3D::IDENTITY, kind: ShapeKind::Box { size } },
            pose: Pose3D::from_xyz(x, y, 0.0),
            movable: false,
        }
    }

    fn req<'a>(
        model: &'a RobotModel,
        start: &JointState,
        goal: ArmGoal,
        obstacles: &'a [SceneObject],
    ) -> MotionPlanRequest<'a> {
        MotionPlanRequest {
            model,
            base_pose: Pose2D::IDENTITY,
            start: start.clone(),
            goal,
            obstacles,
            ignore: vec![],
            tip_link: Some("tip".into()),
            params: RrtParams::default(),
        }
    }

    #[test]
    fn start_equals_goal_gives_single_waypoint() {
        let model = two_link_arm();
        let start = js(&["j1", "j2"], &[0.2, 0.3]);
        let traj =
            plan_arm(&req(&model, &start, ArmGoal::Joints(start.clone()), &[])).unwrap();
        assert_eq!(traj.points.len(), 1);
        assert_eq!(traj.points[0].t, 0.0);
        assert_eq!(traj.points[0].positions, vec![0.2, 0.3]);
    }

    #[test]
    fn free_space_plan_connects_exactly() {
        let model = two_link_arm();
        let start = js(&["j1", "j2"], &[0.0, 0.0]);
        let goal = js(&["j1", "j2"], &[1.0, -0.8]);
        let traj = plan_arm(&req(&model, &start, ArmGoal::Joints(goal), &[])).unwrap();
        assert_eq!(traj.points.first().unwrap().positions, vec![0.0, 0.0]);
        assert_eq!(traj.points.last().unwrap().positions, vec![1.0, -0.8]);
        // Times strictly increase.
        for w in traj.points.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }

    #[test]
    fn goal_in_collision_detected() {
        let model = collision_arm();
        // Arm stretched along +x reaches (2, 0); a box there blocks it.
        let obstacles = vec![box_at("blocker", 2.0, 0.0, [0.4, 0.4, 0.4])];
        let start = js(&["j1", "j2"], &[1.5, 0.0]);
        let goal = js(&["j1", "j2"], &[0.0, 0.0]);
        let err =
            plan_arm(&req(&model, &start, ArmGoal::Joints(goal), &obstacles)).unwrap_err();
        assert!(matches!(err, ManipError::GoalInCollision(_)), "{err}");
        // Swapping start and goal flags the start instead.
        let err = plan_arm(&req(
            &model,
            &js(&["j1", "j2"], &[0.0, 0.0]),
            ArmGoal::Joints(js(&["j1", "j2"], &[1.5, 0.0])),
            &obstacles,
        ))
        .unwrap_err();
        assert!(matches!(err, ManipError::StartInCollision(_)), "{err}");
    }

    #[test]
    fn out_of_limit_requests_rejected() {
        let model = two_link_arm();
        let start = js(&["j1", "j2"], &[4.0, 0.0]); // limit is ±π
        let goal = js(&["j1", "j2"], &[0.0, 0.0]);
        let err = plan_arm(&req(&model, &start, ArmGoal::Joints(goal), &[])).unwrap_err();
        assert!(matches!(err, ManipError::StartInCollision(_)));
    }

    #[test]
    fn plans_around_obstacle_and_dense_check_holds() {
        let model = collision_arm();
        // Block the straight-line sweep: box near the tip's mid-sweep arc.
        let obstacles = vec![box_at("mid", 0.0, 1.9, [0.3, 0.3, 0.3])];
        let start = js(&["j1", "j2"], &[0.3, 0.1]);
        let goal = js(&["j1", "j2"], &[2.6, 0.1]);
        let traj =
            plan_arm(&req(&model, &start, ArmGoal::Joints(goal.clone()), &obstacles)).unwrap();
        // Independent dense re-check at quarter-step spacing.
        let names = traj.names.clone();
        let mut state = js(
            &names.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
            &vec![0.0; names.len()],
        );
        for w in traj.points.windows(2) {
            let n = (dist(&w[0].positions, &w[1].positions) / 0.025).ceil() as usize + 1;
            for k in 0..=n {
                let q = lerp_vec(&w[0].positions, &w[1].positions, k as f64 / n as f64);
                state.positions.copy_from_slice(&q);
                assert!(
                    !check_collision(&model, &Pose2D::IDENTITY, &state, &obstacles, &[]),
                    "collision at interpolated configuration {q:?}"
                );
            }
        }
    }

    #[test]
    fn identical_seeds_give_identical_trajectories() {
        let model = collision_arm();
        let obstacles = vec![box_at("mid", 0.0, 1.9, [0.3, 0.3, 0.3])];
        let start = js(&["j1", "j2"], &[0.3, 0.1]);
        let goal = js(&["j1", "j2"], &[2.6, 0.1]);
        let run = || {
            plan_arm(&req(&model, &start, ArmGoal::Joints(goal.clone()), &obstacles)).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn tip_goal_resolved_by_ik() {
        let model = two_link_arm();
        let start = js(&["j1", "j2"], &[0.1, 1.2]);
        // Reachable point for the 1+1 planar arm.
        let goal = ArmGoal::Tip {
            pose: Pose3D::from_xyz(1.0, 1.0, 0.0),
            constrain_orientation: false,
        };
        let traj = plan_arm(&req(&model, &start, goal, &[])).unwrap();
        let last = traj.points.last().unwrap();
        // FK of the solution lands on the target.
        let q = js(&["j1", "j2"], &last.positions);
        let fk = crate::kinematics::forward_kinematics(&model, &q);
        let tip = fk["tip"].translation;
        assert!((tip[0] - 1.0).abs() < 1e-3 && (tip[1] - 1.0).abs() < 1e-3, "tip {tip:?}");
        // Unreachable target fails with IkFailed.
        let err = plan_arm(&req(
            &model,
            &start,
            ArmGoal::Tip { pose: Pose3D::from_xyz(5.0, 0.0, 0.0), constrain_orientation: false },
            &[],
        ))
        .unwrap_err();
        assert!(matches!(err, ManipError::IkFailed(_)), "{err}");
    }

    #[test]
    fn shortcut_shrinks_zigzag_and_keeps_endpoints() {
        let zig = JointTrajectory {
            names: vec!["a".into(), "b".into()],
            points: vec![
                TrajectoryPoint { t: 0.0, positions: vec![0.0, 0.0] },
                TrajectoryPoint { t: 1.0, positions: vec![0.5, 0.9] },
                TrajectoryPoint { t: 2.0, positions: vec![1.0, -0.7] },
                TrajectoryPoint { t: 3.0, positions: vec![1.5, 0.8] },
                TrajectoryPoint { t: 4.0, positions: vec![2.0, 0.0] },
            ],
        };
        let out = shortcut(&zig, |_| true, 50, 0.1, 7, &[1.0, 1.0]);
        assert!(out.length() < zig.length());
        assert_eq!(out.points.first().unwrap().positions, vec![0.0, 0.0]);
        assert_eq!(out.points.last().unwrap().positions, vec![2.0, 0.0]);
        // Two-point trajectories are untouched.
        let two = JointTrajectory {
            names: zig.names.clone(),
            points: vec![
                TrajectoryPoint { t: 0.0, positions: vec![0.0, 0.0] },
                TrajectoryPoint { t: 1.0, positions: vec![1.0, 1.0] },
            ],
        };
        let kept = shortcut(&two, |_| true, 50, 0.1, 7, &[1.0, 1.0]);
        assert_eq!(kept.points.len(), 2);
    }

    #[test]
    fn retiming_uses_slowest_joint() {
        // two_link_arm joints move at 2 rad/s; a move of (0.5, -1.0) needs
        // at least 0.5 s: the second joint is the bottleneck.
        let model = two_link_arm();
        let start = js(&["j1", "j2"], &[0.0, 0.5]);
        let goal = js(&["j1", "j2"], &[0.5, -0.5]);
        let traj = plan_arm(&req(&model, &start, ArmGoal::Joints(goal), &[])).unwrap();
        let total: f64 = traj
            .points
            .windows(2)
            .map(|w| {
                w[0].positions
                    .iter()
                    .zip(&w[1].positions)
                    .map(|(a, b)| (a - b).abs() / 2.0)
                    .fold(0.0, f64::max)
            })
            .sum();
        assert!((traj.duration() - total).abs() < 1e-9);
        assert!(traj.duration() >= 0.5 - 1e-9);
    }

    #[test]
    fn grasp_rule_worked_example() {
        let cup = SceneObject {
            id: "cup".into(),
            shape: CollisionShape {
                origin: Pose3D::IDENTITY,
                kind: ShapeKind::Cylinder { radius: 0.03, length: 0.12 },
            },
            pose: Pose3D::from_xyz(1.0, 0.0, 0.80),
            movable: true,
        };
        let g = propose_grasp(&cup, 0.10).unwrap();
        for (got, want) in g.grasp.translation.iter().zip([1.0, 0.0, 0.80]) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in g.pre_grasp.translation.iter().zip([1.0, 0.0, 0.90]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((g.required_width - 0.07).abs() < 1e-12);
        assert_eq!(g.approach_axis, [0.0, 0.0, -1.0]);
        // Pre-grasp sits along -approach from grasp at the standoff.
        for i in 0..3 {
            let d = g.pre_grasp.translation[i] - g.grasp.translation[i];
            let want = if i == 2 { PRE_GRASP_STANDOFF } else { 0.0 };
            assert!((d - want).abs() < 1e-12);
        }
        // The tool z axis points along the approach.
        let tool_z = g.grasp.rotation.rotate([0.0, 0.0, 1.0]);
        assert!((tool_z[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn grasp_too_wide_rejected() {
        let crate_box = SceneObject {
            id: "crate".into(),
            shape: CollisionShape {
                origin: Pose3D::IDENTITY,
                kind: ShapeKind::Box { size: [0.30, 0.50, 0.30] },
            },
            pose: Pose3D::from_xyz(0.0, 0.0, 0.0),
            movable: true,
        };
        let err = propose_grasp(&crate_box, 0.10).unwrap_err();
        assert!(matches!(err, ManipError::ObjectTooWide { .. }));
        // Fingers lie across the narrower horizontal extent.
        let g = propose_grasp(&crate_box, 0.5).unwrap();
        assert!((g.required_width - 0.31).abs() < 1e-12);
        let finger_axis = g.grasp.rotation.rotate([1.0, 0.0, 0.0]);
        assert!(finger_axis[0].abs() > 0.99, "fingers across x: {finger_axis:?}");
    }
}
