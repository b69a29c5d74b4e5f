//! Navigation: log-odds occupancy mapping from range scans at known poses,
//! obstacle inflation, optimal 8-connected grid search, line-of-sight path
//! smoothing, and dynamic-window velocity selection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{integrate_unicycle, normalize_angle, Pose2D, Twist2D};
use crate::world::LidarScan;

/// Log-odds added to a cell a beam terminates in.
pub const L_OCC: f64 = 0.85;
/// Log-odds added to a cell a beam passes through.
pub const L_FREE: f64 = -0.4;
/// Log-odds magnitude cap.
pub const L_CLAMP: f64 = 4.0;
/// Probability above which a cell counts as occupied.
pub const P_OCCUPIED: f64 = 0.65;
/// Probability below which a cell counts as free.
pub const P_FREE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Occupied,
    Free,
    Unknown,
}

/// Axis-aligned occupancy grid over log-odds values. `origin` is the world
/// pose of the outer corner of cell (0, 0); its rotation must be zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub resolution: f64,
    pub origin: Pose2D,
    pub width: usize,
    pub height: usize,
    cells: Vec<f64>,
}

impl OccupancyGrid {
    /// All-unknown grid (log-odds zero everywhere).
    pub fn new(width: usize, height: usize, resolution: f64, origin: Pose2D) -> OccupancyGrid {
        Self::filled(width, height, resolution, origin, 0.0)
    }

    /// Grid with every cell at the given log-odds value.
    pub fn filled(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2D,
        log_odds: f64,
    ) -> OccupancyGrid {
        assert!(resolution > 0.0, "resolution must be positive");
        assert!(origin.theta == 0.0, "grids are axis-aligned");
        OccupancyGrid {
            resolution,
            origin,
            width,
            height,
            cells: vec![log_odds.clamp(-L_CLAMP, L_CLAMP); width * height],
        }
    }

    pub fn log_odds(&self, x: usize, y: usize) -> f64 {
        self.cells[y * self.width + x]
    }

    pub fn set_log_odds(&mut self, x: usize, y: usize, l: f64) {
        self.cells[y * self.width + x] = l.clamp(-L_CLAMP, L_CLAMP);
    }

    pub fn add_log_odds(&mut self, x: usize, y: usize, dl: f64) {
        let cur = self.log_odds(x, y);
        self.set_log_odds(x, y, cur + dl);
    }

    /// Occupancy probability of a cell, `1 / (1 + e^-l)`.
    pub fn probability(&self, x: usize, y: usize) -> f64 {
        1.0 / (1.0 + (-self.log_odds(x, y)).exp())
    }

    pub fn state(&self, x: usize, y: usize) -> CellState {
        let p = self.probability(x, y);
        if p > P_OCCUPIED {
            CellState::Occupied
        } else if p < P_FREE {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }

    pub fn is_occupied(&self, x: usize, y: usize) -> bool {
        self.state(x, y) == CellState::Occupied
    }

    pub fn is_free(&self, x: usize, y: usize) -> bool {
        self.state(x, y) == CellState::Free
    }

    /// Cell containing a world point, if in bounds.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let cx = ((x - self.origin.x) / self.resolution).floor();
        let cy = ((y - self.origin.y) / self.resolution).floor();
        if cx >= 0.0 && cy >= 0.0 && (cx as usize) < self.width && (cy as usize) < self.height {
            Some((cx as usize, cy as usize))
        } else {
            None
        }
    }

    /// World coordinates of a cell's center.
    pub fn cell_center(&self, x: usize, y: usize) -> (f64, f64) {
        (
            self.origin.x + (x as f64 + 0.5) * self.resolution,
            self.origin.y + (y as f64 + 0.5) * self.resolution,
        )
    }
}

/// Cells crossed by the segment from `from` to `to` (world coordinates), in
/// traversal order, restricted to grid bounds. Grid-aligned steps that pass
/// exactly through cell corners take one consistent side, so the result is
/// a supercover of the segment.
fn traverse_cells(grid: &OccupancyGrid, from: (f64, f64), to: (f64, f64)) -> Vec<(usize, usize)> {
    let res = grid.resolution;
    let sx = (from.0 - grid.origin.x) / res;
    let sy = (from.1 - grid.origin.y) / res;
    let ex = (to.0 - grid.origin.x) / res;
    let ey = (to.1 - grid.origin.y) / res;
    let dx = ex - sx;
    let dy = ey - sy;
    let len = (dx * dx + dy * dy).sqrt();
    let mut out = Vec::new();
    let mut push = |cx: i64, cy: i64| {
        if cx >= 0 && cy >= 0 && (cx as usize) < grid.width && (cy as usize) < grid.height {
            out.push((cx as usize, cy as usize));
        }
    };
    let mut cx = sx.floor() as i64;
    let mut cy = sy.floor() as i64;
    if len < 1e-12 {
        push(cx, cy);
        return out;
    }
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    // Parameter t along the segment at which the ray crosses the next cell
    // boundary in each axis, and the per-cell increment.
    let (mut t_max_x, t_delta_x) = if dx.abs() < 1e-12 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let next = if dx > 0.0 { cx as f64 + 1.0 - sx } else { sx - cx as f64 };
        (next / dx.abs(), 1.0 / dx.abs())
    };
    let (mut t_max_y, t_delta_y) = if dy.abs() < 1e-12 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        let next = if dy > 0.0 { cy as f64 + 1.0 - sy } else { sy - cy as f64 };
        (next / dy.abs(), 1.0 / dy.abs())
    };
    push(cx, cy);
    let end_cx = ex.floor() as i64;
    let end_cy = ey.floor() as i64;
    // Cap iterations defensively: a segment can cross at most dx+dy+1 cells.
    let cap = (dx.abs() + dy.abs()) as usize + 2;
    for _ in 0..cap {
        if cx == end_cx && cy == end_cy {
            break;
        }
        if t_max_x < t_max_y {
            if t_max_x > 1.0 {
                break;
            }
            cx += step_x;
            t_max_x += t_delta_x;
        } else {
            if t_max_y > 1.0 {
                break;
            }
            cy += step_y;
            t_max_y += t_delta_y;
        }
        push(cx, cy);
    }
    out
}

/// Folds one scan into the grid with the inverse sensor model: traversed
/// cells get [`L_FREE`], the terminal cell of a hit gets [`L_OCC`].
pub fn update_map(grid: &mut OccupancyGrid, scan: &LidarScan, sensor_pose: &Pose2D) {
    let ox = sensor_pose.x;
    let oy = sensor_pose.y;
    for (i, &r) in scan.ranges.iter().enumerate() {
        let hit = r <= scan.max_range;
        let reach = if hit { r } else { scan.max_range };
        let angle = sensor_pose.theta + scan.angle_min + i as f64 * scan.angle_increment;
        let end = (ox + reach * angle.cos(), oy + reach * angle.sin());
        let cells = traverse_cells(grid, (ox, oy), end);
        let n = cells.len();
        for (k, (cx, cy)) in cells.into_iter().enumerate() {
            if hit && k == n - 1 {
                grid.add_log_odds(cx, cy, L_OCC);
            } else {
                grid.add_log_odds(cx, cy, L_FREE);
            }
        }
    }
}

/// Marks every cell whose center lies within `radius` of an occupied cell's
/// center as occupied. Radius zero is the identity.
pub fn inflate(grid: &OccupancyGrid, radius: f64) -> OccupancyGrid {
    assert!(radius >= 0.0, "inflation radius must be non-negative");
    let r_cells = (radius / grid.resolution).floor() as i64;
    let r2 = (radius / grid.resolution) * (radius / grid.resolution);
    let mut offsets = Vec::new();
    for dy in -r_cells..=r_cells {
        for dx in -r_cells..=r_cells {
            if (dx * dx + dy * dy) as f64 <= r2 + 1e-9 {
                offsets.push((dx, dy));
            }
        }
    }
    let mut out = grid.clone();
    for y in 0..grid.height {
        for x in 0..grid.width {
            if grid.is_occupied(x, y) {
                for &(dx, dy) in &offsets {
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    if nx >= 0 && ny >= 0 && (nx as usize) < grid.width && (ny as usize) < grid.height
                    {
                        out.set_log_odds(nx as usize, ny as usize, L_CLAMP);
                    }
                }
            }
        }
    }
    out
}

/// Exact 8-connected path cost: `straight + diag * sqrt(2)` cell steps kept
/// as separate integers so comparisons never suffer float drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GridCost {
    pub straight: u64,
    pub diag: u64,
}

impl GridCost {
    pub fn value(&self) -> f64 {
        self.straight as f64 + self.diag as f64 * std::f64::consts::SQRT_2
    }

    fn plus_straight(&self) -> GridCost {
        GridCost { straight: self.straight + 1, diag: self.diag }
    }

    fn plus_diag(&self) -> GridCost {
        GridCost { straight: self.straight, diag: self.diag + 1 }
    }

    fn add(&self, o: &GridCost) -> GridCost {
        GridCost { straight: self.straight + o.straight, diag: self.diag + o.diag }
    }
}

impl PartialOrd for GridCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GridCost {
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        // Distinct integer combinations of 1 and sqrt(2) below ~10^7 steps
        // differ by far more than f64 rounding error, so the float compare
        // is exact in practice; the lexicographic fallback keeps the order
        // total regardless.
        self.value()
            .partial_cmp(&other.value())
            .unwrap()
            .then_with(|| (self.straight, self.diag).cmp(&(other.straight, other.diag)))
    }
}

/// Sequence of waypoints with its total metric length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path2D {
    pub points: Vec<Pose2D>,
    pub total_cost: f64,
}

impl Path2D {
    fn from_points(mut points: Vec<Pose2D>, final_theta: Option<f64>) -> Path2D {
        // Headings face the next waypoint; the last keeps the goal heading.
        let n = points.len();
        for i in 0..n.saturating_sub(1) {
            let dx = points[i + 1].x - points[i].x;
            let dy = points[i + 1].y - points[i].y;
            points[i].theta = dy.atan2(dx);
        }
        if n >= 1 {
            if let Some(t) = final_theta {
                points[n - 1].theta = t;
            } else if n >= 2 {
                points[n - 1].theta = points[n - 2].theta;
            }
        }
        let total_cost = points.windows(2).map(|w| w[0].distance(&w[1])).sum();
        Path2D { points, total_cost }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NavError {
    #[error("start cell is not free")]
    StartOccupied,
    #[error("goal cell is not free")]
    GoalOccupied,
    #[error("start or goal outside the grid")]
    OutOfBounds,
    #[error("no path between start and goal")]
    NoPath,
    #[error("every sampled trajectory collides")]
    AllTrajectoriesCollide,
}

/// Octile-distance heuristic as an exact step-count pair.
fn octile(a: (usize, usize), b: (usize, usize)) -> GridCost {
    let dx = a.0.abs_diff(b.0) as u64;
    let dy = a.1.abs_diff(b.1) as u64;
    let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
    GridCost { straight: hi - lo, diag: lo }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct AStarEntry {
    f: GridCost,
    h: GridCost,
    idx: usize,
}

impl Ord for AStarEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap pops the maximum; invert so the best entry (lowest f,
        // then lowest h, then lowest row-major index) comes out first.
        other
            .f
            .cmp(&self.f)
            .then_with(|| other.h.cmp(&self.h))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for AStarEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const DIRS: [(i64, i64); 8] = [
    (1, 0), (-1, 0), (0, 1), (0, -1),
    (1, 1), (1, -1), (-1, 1), (-1, -1),
];

/// Optimal A* over free cells, 8-connected, no corner cutting. Waypoints
/// are cell centers; the final waypoint takes the goal heading.
pub fn plan_global(
    grid: &OccupancyGrid,
    start: &Pose2D,
    goal: &Pose2D,
) -> Result<Path2D, NavError> {
    let s = grid.world_to_cell(start.x, start.y).ok_or(NavError::OutOfBounds)?;
    let g = grid.world_to_cell(goal.x, goal.y).ok_or(NavError::OutOfBounds)?;
    if !grid.is_free(s.0, s.1) {
        return Err(NavError::StartOccupied);
    }
    if !grid.is_free(g.0, g.1) {
        return Err(NavError::GoalOccupied);
    }
    let w = grid.width;
    let idx = |c: (usize, usize)| c.1 * w + c.0;
    let mut best: Vec<Option<GridCost>> = vec![None; w * grid.height];
    let mut parent: Vec<usize> = vec![usize::MAX; w * grid.height];
    let mut heap = BinaryHeap::new();
    best[idx(s)] = Some(GridCost::default());
    heap.push(AStarEntry { f: octile(s, g), h: octile(s, g), idx: idx(s) });
    while let Some(entry) = heap.pop() {
        let cur = entry.idx;
        let c = (cur % w, cur / w);
        let g_cur = best[cur].unwrap();
        // Skip stale queue entries superseded by a better g.
        if entry.f != g_cur.add(&octile(c, g)) {
            continue;
        }
        if c == g {
            let mut cells = vec![cur];
            let mut at = cur;
            while parent[at] != usize::MAX {
                at = parent[at];
                cells.push(at);
            }
            cells.reverse();
            let points: Vec<Pose2D> = cells
                .iter()
                .map(|&i| {
                    let (x, y) = grid.cell_center(i % w, i / w);
                    Pose2D::new(x, y, 0.0)
                })
                .collect();
            return Ok(Path2D::from_points(points, Some(goal.theta)));
        }
        for (dx, dy) in DIRS {
            let nx = c.0 as i64 + dx;
            let ny = c.1 as i64 + dy;
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= grid.height {
                continue;
            }
            let n = (nx as usize, ny as usize);
            if !grid.is_free(n.0, n.1) {
                continue;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal {
                // No corner cutting: both adjacent cardinals must be free.
                let c1 = ((c.0 as i64 + dx) as usize, c.1);
                let c2 = (c.0, (c.1 as i64 + dy) as usize);
                if !grid.is_free(c1.0, c1.1) || !grid.is_free(c2.0, c2.1) {
                    continue;
                }
            }
            let g_next = if diagonal { g_cur.plus_diag() } else { g_cur.plus_straight() };
            let ni = idx(n);
            if best[ni].is_none_or(|b| g_next < b) {
                best[ni] = Some(g_next);
                parent[ni] = cur;
                let h = octile(n, g);
                heap.push(AStarEntry { f: g_next.add(&h), h, idx: ni });
            }
        }
    }
    Err(NavError::NoPath)
}

/// True if every cell the segment between the two poses crosses is free.
pub fn line_of_sight(grid: &OccupancyGrid, a: &Pose2D, b: &Pose2D) -> bool {
    traverse_cells(grid, (a.x, a.y), (b.x, b.y))
        .into_iter()
        .all(|(x, y)| grid.is_free(x, y))
}

/// Greedy shortcutting: from each kept waypoint, jump to the farthest later
/// waypoint still in free line of sight. Endpoints are preserved and the
/// result is never longer than the input.
pub fn smooth_path(grid: &OccupancyGrid, path: &Path2D) -> Path2D {
    if path.points.len() <= 2 {
        return path.clone();
    }
    let pts = &path.points;
    let mut kept = vec![pts[0]];
    let mut i = 0;
    while i + 1 < pts.len() {
        let mut j = pts.len() - 1;
        while j > i + 1 && !line_of_sight(grid, &pts[i], &pts[j]) {
            j -= 1;
        }
        kept.push(pts[j]);
        i = j;
    }
    let final_theta = pts.last().map(|p| p.theta);
    Path2D::from_points(kept, final_theta)
}

/// Dynamic-window sampling parameters and score weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwaParams {
    pub v_min: f64,
    pub v_max: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub v_samples: usize,
    pub w_samples: usize,
    /// Rollout length in seconds.
    pub horizon: f64,
    /// Integration step within a rollout.
    pub rollout_dt: f64,
    pub weight_goal: f64,
    pub weight_clearance: f64,
    pub weight_heading: f64,
}

impl Default for DwaParams {
    fn default() -> Self {
        DwaParams {
            v_min: 0.0,
            v_max: 0.5,
            w_min: -1.5,
            w_max: 1.5,
            v_samples: 6,
            w_samples: 11,
            horizon: 1.5,
            rollout_dt: 0.1,
            weight_goal: 1.0,
            weight_clearance: 0.3,
            weight_heading: 0.4,
        }
    }
}

fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1, "sample counts must be at least 1");
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// How far from the nearest occupied cell each free cell sits, in meters,
/// by breadth-first sweep (chebyshev-ish but using true cell offsets).
fn clearance_field(grid: &OccupancyGrid) -> Vec<f64> {
    // Two-pass chamfer transform with 1 / sqrt(2) cell steps: cheap and
    // accurate enough for a smooth clearance reward.
    let w = grid.width as i64;
    let h = grid.height as i64;
    let big = 1e18;
    let mut d: Vec<f64> = (0..grid.width * grid.height)
        .map(|i| {
            if grid.is_occupied(i % grid.width, i / grid.width) {
                0.0
            } else {
                big
            }
        })
        .collect();
    let at = |x: i64, y: i64| (y * w + x) as usize;
    let sqrt2 = std::f64::consts::SQRT_2;
    for y in 0..h {
        for x in 0..w {
            let mut v = d[at(x, y)];
            if x > 0 {
                v = v.min(d[at(x - 1, y)] + 1.0);
            }
            if y > 0 {
                v = v.min(d[at(x, y - 1)] + 1.0);
                if x > 0 {
                    v = v.min(d[at(x - 1, y - 1)] + sqrt2);
                }
                if x + 1 < w {
                    v = v.min(d[at(x + 1, y - 1)] + sqrt2);
                }
            }
            d[at(x, y)] = v;
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let mut v = d[at(x, y)];
            if x + 1 < w {
                v = v.min(d[at(x + 1, y)] + 1.0);
            }
            if y + 1 < h {
                v = v.min(d[at(x, y + 1)] + 1.0);
                if x + 1 < w {
                    v = v.min(d[at(x + 1, y + 1)] + sqrt2);
                }
                if x > 0 {
                    v = v.min(d[at(x - 1, y + 1)] + sqrt2);
                }
            }
            d[at(x, y)] = v;
        }
    }
    d.iter().map(|&v| (v * grid.resolution).min(1e9)).collect()
}

/// Picks the best admissible velocity from a fixed sample lattice. Rollouts
/// that enter an occupied or out-of-bounds cell are discarded; the rest are
/// scored on goal progress, clearance, and final heading alignment. Ties go
/// to the smallest |w|, then the smallest v.
pub fn plan_local(
    grid: &OccupancyGrid,
    pose: &Pose2D,
    goal_point: (f64, f64),
    params: &DwaParams,
) -> Result<Twist2D, NavError> {
    assert!(params.horizon > 0.0 && params.rollout_dt > 0.0, "horizon must be positive");
    let clearance = clearance_field(grid);
    let steps = (params.horizon / params.rollout_dt).ceil() as usize;
    let dist_to_goal = |p: &Pose2D| (p.x - goal_point.0).hypot(p.y - goal_point.1);
    let start_dist = dist_to_goal(pose);
    let mut best: Option<(f64, Twist2D)> = None;
    for &v in &lattice(params.v_min, params.v_max, params.v_samples) {
        for &w in &lattice(params.w_min, params.w_max, params.w_samples) {
            let twist = Twist2D::new(v, w);
            let mut p = *pose;
            let mut min_clear = f64::INFINITY;
            let mut ok = true;
            for _ in 0..steps {
                p = integrate_unicycle(&p, &twist, params.rollout_dt);
                match grid.world_to_cell(p.x, p.y) {
                    Some((cx, cy)) if !grid.is_occupied(cx, cy) => {
                        min_clear = min_clear.min(clearance[cy * grid.width + cx]);
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let progress = start_dist - dist_to_goal(&p);
            let bearing = (goal_point.1 - p.y).atan2(goal_point.0 - p.x);
            let heading_err = normalize_angle(bearing - p.theta).abs();
            let score = params.weight_goal * progress
                + params.weight_clearance * min_clear.min(1.0)
                + params.weight_heading * (std::f64::consts::PI - heading_err)
                    / std::f64::consts::PI;
            let better = match &best {
                None => true,
                Some((bs, bt)) => {
                    score > *bs
                        || (score == *bs
                            && (w.abs() < bt.w.abs() || (w.abs() == bt.w.abs() && v < bt.v)))
                }
            };
            if better {
                best = Some((score, twist));
            }
        }
    }
    best.map(|(_, t)| t).ok_or(NavError::AllTrajectoriesCollide)
}

/// Serialized alongside a PGM map so consumers can geo-reference it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub image: String,
    pub resolution: f64,
    /// `[x, y, theta]` of the grid origin (corner of cell (0,0)).
    pub origin: [f64; 3],
    pub width: usize,
    pub height: usize,
}

/// Binary PGM (P5) image of the grid: 0 = occupied, 254 = free,
/// 205 = unknown. Image row 0 is the top of the map (maximum y).
pub fn pgm_bytes(grid: &OccupancyGrid) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width, grid.height).into_bytes();
    for y in (0..grid.height).rev() {
        for x in 0..grid.width {
            out.push(match grid.state(x, y) {
                CellState::Occupied => 0,
                CellState::Free => 254,
                CellState::Unknown => 205,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_grid(w: usize, h: usize, res: f64) -> OccupancyGrid {
        OccupancyGrid::filled(w, h, res, Pose2D::IDENTITY, -L_CLAMP)
    }

    fn occupy(grid: &mut OccupancyGrid, x: usize, y: usize) {
        grid.set_log_odds(x, y, L_CLAMP);
    }

    #[test]
    fn single_hit_gives_expected_log_odds() {
        let mut g = OccupancyGrid::new(40, 40, 0.1, Pose2D::IDENTITY);
        let scan = LidarScan {
            angle_min: 0.0,
            angle_increment: 0.0,
            max_range: 8.0,
            ranges: vec![2.0],
            stamp: 0.0,
        };
        update_map(&mut g, &scan, &Pose2D::new(0.05, 0.05, 0.0));
        // Hit point (2.05, 0.05) falls in cell (20, 0).
        assert_eq!(g.log_odds(20, 0), 0.85);
        let p = g.probability(20, 0);
        assert!((p - 0.7005671).abs() < 1e-6, "p = {p}");
        // Cells along the beam are free, e.g. (10, 0).
        assert_eq!(g.log_odds(10, 0), -0.4);
        assert_eq!(g.state(10, 0), CellState::Unknown); // one pass is not enough
        // Repeated hits clamp at +4.
        for _ in 0..10 {
            update_map(&mut g, &scan, &Pose2D::new(0.05, 0.05, 0.0));
        }
        assert_eq!(g.log_odds(20, 0), 4.0);
        assert!(g.is_occupied(20, 0));
    }

    #[test]
    fn no_hit_beam_clears_to_max_range() {
        let mut g = OccupancyGrid::new(40, 40, 0.1, Pose2D::IDENTITY);
        let scan = LidarScan {
            angle_min: 0.0,
            angle_increment: 0.0,
            max_range: 3.0,
            ranges: vec![4.0], // sentinel: no hit
            stamp: 0.0,
        };
        for _ in 0..5 {
            update_map(&mut g, &scan, &Pose2D::new(0.05, 0.05, 0.0));
        }
        assert!(g.is_free(29, 0)); // within max range: freed
        assert_eq!(g.log_odds(31, 0), 0.0); // beyond max range: untouched
    }

    #[test]
    fn inflation_radius_one_cell_is_cardinal_only() {
        let mut g = free_grid(7, 7, 1.0);
        occupy(&mut g, 3, 3);
        let inflated = inflate(&g, 1.0);
        assert!(inflated.is_occupied(3, 3));
        assert!(inflated.is_occupied(2, 3));
        assert!(inflated.is_occupied(4, 3));
        assert!(inflated.is_occupied(3, 2));
        assert!(inflated.is_occupied(3, 4));
        // Diagonal centers are sqrt(2) > 1 away: not inflated.
        assert!(!inflated.is_occupied(2, 2));
        // Radius 0 is the identity.
        assert_eq!(inflate(&g, 0.0), g);
    }

    #[test]
    fn astar_empty_grid_diagonal_cost() {
        let g = free_grid(5, 5, 1.0);
        let path =
            plan_global(&g, &Pose2D::new(0.5, 0.5, 0.0), &Pose2D::new(4.5, 4.5, 0.0)).unwrap();
        assert!((path.total_cost - 4.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
        assert_eq!(path.points.len(), 5);
    }

    #[test]
    fn astar_start_goal_errors() {
        let mut g = free_grid(5, 5, 1.0);
        occupy(&mut g, 4, 4);
        let start = Pose2D::new(0.5, 0.5, 0.0);
        assert_eq!(
            plan_global(&g, &start, &Pose2D::new(4.5, 4.5, 0.0)),
            Err(NavError::GoalOccupied)
        );
        assert_eq!(
            plan_global(&g, &Pose2D::new(4.5, 4.5, 0.0), &start),
            Err(NavError::StartOccupied)
        );
        assert_eq!(
            plan_global(&g, &start, &Pose2D::new(99.0, 0.0, 0.0)),
            Err(NavError::OutOfBounds)
        );
    }

    #[test]
    fn astar_routes_around_wall_without_corner_cutting() {
        // Vertical wall with a one-cell doorway; the diagonal through the
        // doorway corner must not be taken when a cardinal neighbor is
        // blocked.
        let mut g = free_grid(7, 7, 1.0);
        for y in 0..7 {
            if y != 3 {
                occupy(&mut g, 3, y);
            }
        }
        let path =
            plan_global(&g, &Pose2D::new(0.5, 3.5, 0.0), &Pose2D::new(6.5, 3.5, 0.0)).unwrap();
        assert!((path.total_cost - 6.0).abs() < 1e-9);
        // Every path cell is free.
        for p in &path.points {
            let (cx, cy) = g.world_to_cell(p.x, p.y).unwrap();
            assert!(g.is_free(cx, cy));
        }
        // Now close the doorway: no path.
        occupy(&mut g, 3, 3);
        assert_eq!(
            plan_global(&g, &Pose2D::new(0.5, 3.5, 0.0), &Pose2D::new(6.5, 3.5, 0.0)),
            Err(NavError::NoPath)
        );
    }

    #[test]
    fn no_path_through_diagonal_gap() {
        // Two occupied cells touching at a corner: passing between them
        // diagonally would cut the corner, so the move is forbidden.
        let mut g = free_grid(4, 4, 1.0);
        occupy(&mut g, 1, 1);
        occupy(&mut g, 2, 2);
        occupy(&mut g, 0, 2);
        occupy(&mut g, 3, 1);
        occupy(&mut g, 1, 3);
        occupy(&mut g, 2, 0);
        // Start bottom-left region, goal top-right region: all crossings
        // are diagonal gaps.
        assert_eq!(
            plan_global(&g, &Pose2D::new(0.5, 0.5, 0.0), &Pose2D::new(3.5, 3.5, 0.0)),
            Err(NavError::NoPath)
        );
    }

    #[test]
    fn smoothing_straightens_l_path() {
        let g = free_grid(6, 6, 1.0);
        let path = Path2D::from_points(
            vec![
                Pose2D::new(0.5, 0.5, 0.0),
                Pose2D::new(0.5, 4.5, 0.0),
                Pose2D::new(4.5, 4.5, 0.0),
            ],
            None,
        );
        let smoothed = smooth_path(&g, &path);
        assert_eq!(smoothed.points.len(), 2);
        assert!((smoothed.total_cost - 32.0f64.sqrt()).abs() < 1e-9);
        assert_eq!(smoothed.points[0].x, 0.5);
        assert_eq!(smoothed.points.last().unwrap().x, 4.5);
        // Two-point paths are untouched.
        let two = Path2D::from_points(
            vec![Pose2D::new(0.5, 0.5, 0.0), Pose2D::new(1.5, 0.5, 0.0)],
            None,
        );
        assert_eq!(smooth_path(&g, &two), two);
    }

    #[test]
    fn smoothing_respects_obstacles() {
        let mut g = free_grid(6, 6, 1.0);
        occupy(&mut g, 2, 2);
        // Path skirting the obstacle; the straight diagonal would cross it.
        let path = Path2D::from_points(
            vec![
                Pose2D::new(0.5, 0.5, 0.0),
                Pose2D::new(0.5, 4.5, 0.0),
                Pose2D::new(4.5, 4.5, 0.0),
            ],
            None,
        );
        let smoothed = smooth_path(&g, &path);
        assert_eq!(smoothed.points.len(), 3, "no shortcut through the obstacle");
        assert!(smoothed.total_cost <= path.total_cost + 1e-12);
    }

    #[test]
    fn dwa_drives_at_goal_ahead() {
        let g = free_grid(40, 40, 0.25); // 10 x 10 m free room
        let pose = Pose2D::new(2.0, 5.0, 0.0);
        let params = DwaParams::default();
        let t = plan_local(&g, &pose, (8.0, 5.0), &params).unwrap();
        assert_eq!(t.w, 0.0);
        assert_eq!(t.v, params.v_max);
    }

    #[test]
    fn dwa_turns_toward_goal_behind() {
        let g = free_grid(40, 40, 0.25);
        let pose = Pose2D::new(5.0, 5.0, 0.0);
        let t = plan_local(&g, &pose, (1.0, 5.0), &DwaParams::default()).unwrap();
        assert!(t.w.abs() > 0.0, "must turn: {t:?}");
    }

    #[test]
    fn dwa_surrounded_reports_collision() {
        let mut g = free_grid(20, 20, 0.25);
        // Occupy everything outside a one-cell pocket.
        for y in 0..20 {
            for x in 0..20 {
                if !(x == 10 && y == 10) {
                    occupy(&mut g, x, y);
                }
            }
        }
        let pose = Pose2D::new(2.625, 2.625, 0.0);
        let mut params = DwaParams::default();
        params.v_min = 0.3; // force motion: staying put is not sampled
        let err = plan_local(&g, &pose, (4.0, 2.625), &params).unwrap_err();
        assert_eq!(err, NavError::AllTrajectoriesCollide);
    }

    #[test]
    fn dwa_rollouts_never_collide() {
        let mut g = free_grid(40, 40, 0.25);
        for y in 12..28 {
            occupy(&mut g, 20, y);
        }
        let pose = Pose2D::new(3.0, 5.0, 0.0);
        let params = DwaParams::default();
        let t = plan_local(&g, &pose, (9.0, 5.0), &params).unwrap();
        // Re-roll the winner and assert every sample stays clear.
        let mut p = pose;
        let steps = (params.horizon / params.rollout_dt).ceil() as usize;
        for _ in 0..steps {
            p = integrate_unicycle(&p, &t, params.rollout_dt);
            let (cx, cy) = g.world_to_cell(p.x, p.y).unwrap();
            assert!(!g.is_occupied(cx, cy));
        }
    }

    #[test]
    fn pgm_export_layout() {
        let mut g = OccupancyGrid::new(3, 2, 0.5, Pose2D::IDENTITY);
        g.set_log_odds(0, 0, L_CLAMP); // bottom-left occupied
        g.set_log_odds(2, 1, -L_CLAMP); // top-right free
        let bytes = pgm_bytes(&g);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let px = &bytes[header.len()..];
        // Row 0 of the image is y = 1 (top): unknown, unknown, free.
        assert_eq!(px, &[205, 205, 254, 0, 205, 205]);
    }

    #[test]
    fn traversal_covers_diagonal_segment() {
        let g = free_grid(10, 10, 1.0);
        let cells = traverse_cells(&g, (0.5, 0.5), (3.5, 2.5));
        assert_eq!(cells.first(), Some(&(0, 0)));
        assert_eq!(cells.last(), Some(&(3, 2)));
        // Supercover property: consecutive cells share an edge.
        for w in cells.windows(2) {
            let d = (w[0].0 as i64 - w[1].0 as i64).abs() + (w[0].1 as i64 - w[1].1 as i64).abs();
            assert_eq!(d, 1, "non-adjacent step {w:?}");
        }
    }
}
