//! Narrow-phase collision queries between posed convex primitives, plus the
//! point and ray queries the simulator builds on. Every pair test is an
//! exact closed form except cylinder-cylinder with skew axes, which falls
//! back to an alternating-projection iteration converging well below the
//! 1e-9 tolerance the rest of the module guarantees.

use crate::geometry::Pose3D;
use crate::model::{CollisionShape, ShapeKind};

/// A primitive resolved into the world frame.
#[derive(Debug, Clone)]
pub enum WorldShape {
    Sphere { center: [f64; 3], radius: f64 },
    /// Segment from `a` to `b` swept by a ball.
    Capsule { a: [f64; 3], b: [f64; 3], radius: f64 },
    /// Flat-capped cylinder along local z of `pose`; `half` is half length.
    Cylinder { pose: Pose3D, radius: f64, half: f64 },
    Box { pose: Pose3D, half: [f64; 3] },
}

/// Resolves a shape attached to `frame` into the world.
pub fn place(shape: &CollisionShape, frame: &Pose3D) -> WorldShape {
    let pose = frame.compose(&shape.origin);
    match shape.kind {
        ShapeKind::Sphere { radius } => WorldShape::Sphere { center: pose.translation, radius },
        ShapeKind::Capsule { radius, length } => WorldShape::Capsule {
            a: pose.transform_point([0.0, 0.0, -length / 2.0]),
            b: pose.transform_point([0.0, 0.0, length / 2.0]),
            radius,
        },
        ShapeKind::Cylinder { radius, length } => {
            WorldShape::Cylinder { pose, radius, half: length / 2.0 }
        }
        ShapeKind::Box { size } => {
            WorldShape::Box { pose, half: [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0] }
        }
    }
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

fn dist_point_segment(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 < 1e-24 {
        return norm(sub(p, a));
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    norm(sub(p, lerp(a, b, t)))
}

/// Closest distance between segments `p1q1` and `p2q2` (Ericson's method).
fn dist_segment_segment(p1: [f64; 3], q1: [f64; 3], p2: [f64; 3], q2: [f64; 3]) -> f64 {
    let d1 = sub(q1, p1);
    let d2 = sub(q2, p2);
    let r = sub(p1, p2);
    let a = dot(d1, d1);
    let e = dot(d2, d2);
    let f = dot(d2, r);
    let (s, t);
    if a < 1e-24 && e < 1e-24 {
        return norm(r);
    }
    if a < 1e-24 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(d1, r);
        if e < 1e-24 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(d1, d2);
            let denom = a * e - b * b;
            let mut s_ = if denom > 1e-24 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t_ = (b * s_ + f) / e;
            if t_ < 0.0 {
                t_ = 0.0;
                s_ = (-c / a).clamp(0.0, 1.0);
            } else if t_ > 1.0 {
                t_ = 1.0;
                s_ = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s_;
            t = t_;
        }
    }
    norm(sub(lerp(p1, q1, s), lerp(p2, q2, t)))
}

fn to_local(pose: &Pose3D, p: [f64; 3]) -> [f64; 3] {
    pose.invert().transform_point(p)
}

/// Unsigned distance from a point to a solid shape; zero on or inside it.
pub fn distance_point(shape: &WorldShape, p: [f64; 3]) -> f64 {
    match shape {
        WorldShape::Sphere { center, radius } => (norm(sub(p, *center)) - radius).max(0.0),
        WorldShape::Capsule { a, b, radius } => (dist_point_segment(p, *a, *b) - radius).max(0.0),
        WorldShape::Cylinder { pose, radius, half } => {
            let l = to_local(pose, p);
            let dr = ((l[0] * l[0] + l[1] * l[1]).sqrt() - radius).max(0.0);
            let dz = (l[2].abs() - half).max(0.0);
            (dr * dr + dz * dz).sqrt()
        }
        WorldShape::Box { pose, half } => {
            let l = to_local(pose, p);
            let mut d2 = 0.0;
            for i in 0..3 {
                let d = (l[i].abs() - half[i]).max(0.0);
                d2 += d * d;
            }
            d2.sqrt()
        }
    }
}

/// True if `p` lies on or inside the shape.
pub fn point_inside(shape: &WorldShape, p: [f64; 3]) -> bool {
    match shape {
        WorldShape::Sphere { center, radius } => norm(sub(p, *center)) <= *radius,
        WorldShape::Capsule { a, b, radius } => dist_point_segment(p, *a, *b) <= *radius,
        WorldShape::Cylinder { pose, radius, half } => {
            let l = to_local(pose, p);
            l[2].abs() <= *half && (l[0] * l[0] + l[1] * l[1]).sqrt() <= *radius
        }
        WorldShape::Box { pose, half } => {
            let l = to_local(pose, p);
            (0..3).all(|i| l[i].abs() <= half[i])
        }
    }
}

/// How deep `p` sits inside the shape; zero when outside. Used by tests and
/// diagnostics to grade near-touching configurations.
pub fn penetration_depth(shape: &WorldShape, p: [f64; 3]) -> f64 {
    match shape {
        WorldShape::Sphere { center, radius } => (radius - norm(sub(p, *center))).max(0.0),
        WorldShape::Capsule { a, b, radius } => (radius - dist_point_segment(p, *a, *b)).max(0.0),
        WorldShape::Cylinder { pose, radius, half } => {
            let l = to_local(pose, p);
            let dr = radius - (l[0] * l[0] + l[1] * l[1]).sqrt();
            let dz = half - l[2].abs();
            dr.min(dz).max(0.0)
        }
        WorldShape::Box { pose, half } => {
            let l = to_local(pose, p);
            let mut depth = f64::INFINITY;
            for i in 0..3 {
                depth = depth.min(half[i] - l[i].abs());
            }
            depth.max(0.0)
        }
    }
}

/// Minimizes a convex function over `[0, 1]` by ternary search; accurate to
/// well under 1e-9 after 90 shrinks.
fn minimize_convex(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..90 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f((lo + hi) / 2.0)
}

fn box_axes(pose: &Pose3D) -> [[f64; 3]; 3] {
    [
        pose.rotation.rotate([1.0, 0.0, 0.0]),
        pose.rotation.rotate([0.0, 1.0, 0.0]),
        pose.rotation.rotate([0.0, 0.0, 1.0]),
    ]
}

/// Separating-axis test for two oriented boxes.
fn box_box_intersect(p1: &Pose3D, h1: &[f64; 3], p2: &Pose3D, h2: &[f64; 3]) -> bool {
    let a = box_axes(p1);
    let b = box_axes(p2);
    let d = sub(p2.translation, p1.translation);
    let mut axes: Vec<[f64; 3]> = Vec::with_capacity(15);
    axes.extend_from_slice(&a);
    axes.extend_from_slice(&b);
    for ai in &a {
        for bi in &b {
            axes.push(cross(*ai, *bi));
        }
    }
    for axis in axes {
        let len2 = dot(axis, axis);
        if len2 < 1e-12 {
            continue; // near-parallel edge pair, covered by other axes
        }
        let ra = h1[0] * dot(a[0], axis).abs()
            + h1[1] * dot(a[1], axis).abs()
            + h1[2] * dot(a[2], axis).abs();
        let rb = h2[0] * dot(b[0], axis).abs()
            + h2[1] * dot(b[1], axis).abs()
            + h2[2] * dot(b[2], axis).abs();
        if dot(d, axis).abs() > ra + rb {
            return false;
        }
    }
    true
}

/// Monotone-chain convex hull; input point count is small.
fn hull_2d(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let turn = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn dist_origin_segment_2d(a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 < 1e-24 {
        return (a[0]).hypot(a[1]);
    }
    let t = (-(a[0] * ab[0] + a[1] * ab[1]) / len2).clamp(0.0, 1.0);
    (a[0] + t * ab[0]).hypot(a[1] + t * ab[1])
}

/// Distance from the origin to a convex hull; zero if the origin is inside.
fn dist_origin_hull(hull: &[[f64; 2]]) -> f64 {
    match hull.len() {
        0 => f64::INFINITY,
        1 => hull[0][0].hypot(hull[0][1]),
        2 => dist_origin_segment_2d(hull[0], hull[1]),
        n => {
            let mut inside = true;
            let mut best = f64::INFINITY;
            for i in 0..n {
                let a = hull[i];
                let b = hull[(i + 1) % n];
                // Hull is counterclockwise: origin inside iff left of all edges.
                let side = (b[0] - a[0]) * (-a[1]) - (b[1] - a[1]) * (-a[0]);
                if side < 0.0 {
                    inside = false;
                }
                best = best.min(dist_origin_segment_2d(a, b));
            }
            if inside {
                0.0
            } else {
                best
            }
        }
    }
}

const BOX_EDGES: [(usize, usize); 12] = [
    (0, 1), (0, 2), (0, 4), (1, 3), (1, 5), (2, 3),
    (2, 6), (3, 7), (4, 5), (4, 6), (5, 7), (6, 7),
];

fn box_corners_local(half: &[f64; 3]) -> [[f64; 3]; 8] {
    let mut c = [[0.0; 3]; 8];
    for i in 0..8 {
        c[i] = [
            if i & 1 == 0 { -half[0] } else { half[0] },
            if i & 2 == 0 { -half[1] } else { half[1] },
            if i & 4 == 0 { -half[2] } else { half[2] },
        ];
    }
    c
}

/// Exact box/cylinder test: clip the box to the cylinder's axial slab (a
/// convex polytope), project it onto the cylinder's cross-section plane, and
/// compare the hull against the disc.
fn box_cylinder_intersect(
    box_pose: &Pose3D,
    half: &[f64; 3],
    cyl_pose: &Pose3D,
    radius: f64,
    ch: f64,
) -> bool {
    let rel = cyl_pose.invert().compose(box_pose);
    let corners: Vec<[f64; 3]> =
        box_corners_local(half).iter().map(|c| rel.transform_point(*c)).collect();
    let mut pts: Vec<[f64; 2]> = Vec::new();
    for c in &corners {
        if c[2].abs() <= ch {
            pts.push([c[0], c[1]]);
        }
    }
    for (i, j) in BOX_EDGES {
        let (a, b) = (corners[i], corners[j]);
        for plane in [ch, -ch] {
            let (za, zb) = (a[2] - plane, b[2] - plane);
            if (za < 0.0) != (zb < 0.0) {
                let t = za / (za - zb);
                let p = lerp(a, b, t);
                pts.push([p[0], p[1]]);
            }
        }
    }
    if pts.is_empty() {
        return false; // box entirely outside the slab
    }
    dist_origin_hull(&hull_2d(pts)) <= radius
}

fn cylinder_axis(pose: &Pose3D) -> [f64; 3] {
    pose.rotation.rotate([0.0, 0.0, 1.0])
}

/// Euclidean projection onto a solid cylinder (product of disc and interval).
fn project_cylinder(pose: &Pose3D, radius: f64, half: f64, p: [f64; 3]) -> [f64; 3] {
    let l = to_local(pose, p);
    let z = l[2].clamp(-half, half);
    let rad = (l[0] * l[0] + l[1] * l[1]).sqrt();
    let (x, y) = if rad <= radius || rad < 1e-24 {
        (l[0], l[1])
    } else {
        (l[0] * radius / rad, l[1] * radius / rad)
    };
    pose.transform_point([x, y, z])
}

fn cylinder_cylinder_intersect(
    p1: &Pose3D,
    r1: f64,
    h1: f64,
    p2: &Pose3D,
    r2: f64,
    h2: f64,
) -> bool {
    let a1 = cylinder_axis(p1);
    let a2 = cylinder_axis(p2);
    if norm(cross(a1, a2)) < 1e-9 {
        // Parallel axes: exact via axial interval plus radial offset.
        let l = to_local(p1, p2.translation);
        let z_gap = (l[2].abs() - (h1 + h2)).max(0.0);
        let radial = (l[0] * l[0] + l[1] * l[1]).sqrt();
        let r_gap = (radial - (r1 + r2)).max(0.0);
        return z_gap == 0.0 && r_gap == 0.0;
    }
    // Skew axes: alternate projections between the two convex solids.
    let mut x = project_cylinder(p1, r1, h1, p2.translation);
    let mut gap = f64::INFINITY;
    for _ in 0..500 {
        let y = project_cylinder(p2, r2, h2, x);
        let x2 = project_cylinder(p1, r1, h1, y);
        let d = norm(sub(x2, y));
        if (gap - d).abs() < 1e-13 {
            gap = d;
            break;
        }
        gap = d;
        x = x2;
    }
    gap <= 1e-9
}

fn capsule_cylinder_intersect(
    a: [f64; 3],
    b: [f64; 3],
    rc: f64,
    pose: &Pose3D,
    radius: f64,
    half: f64,
) -> bool {
    let cyl = WorldShape::Cylinder { pose: *pose, radius, half };
    let d = minimize_convex(|t| distance_point(&cyl, lerp(a, b, t)));
    d <= rc
}

fn capsule_box_intersect(
    a: [f64; 3],
    b: [f64; 3],
    rc: f64,
    pose: &Pose3D,
    half: [f64; 3],
) -> bool {
    let bx = WorldShape::Box { pose: *pose, half };
    let d = minimize_convex(|t| distance_point(&bx, lerp(a, b, t)));
    d <= rc
}

/// True when the two solids share at least one point (touching counts).
pub fn intersects(s1: &WorldShape, s2: &WorldShape) -> bool {
    use WorldShape::*;
    match (s1, s2) {
        (Sphere { center: c1, radius: r1 }, Sphere { center: c2, radius: r2 }) => {
            norm(sub(*c1, *c2)) <= r1 + r2
        }
        (Sphere { center, radius }, other) | (other, Sphere { center, radius }) => {
            distance_point(other, *center) <= *radius
        }
        (Capsule { a: a1, b: b1, radius: r1 }, Capsule { a: a2, b: b2, radius: r2 }) => {
            dist_segment_segment(*a1, *b1, *a2, *b2) <= r1 + r2
        }
        (Capsule { a, b, radius }, Cylinder { pose, radius: cr, half })
        | (Cylinder { pose, radius: cr, half }, Capsule { a, b, radius }) => {
            capsule_cylinder_intersect(*a, *b, *radius, pose, *cr, *half)
        }
        (Capsule { a, b, radius }, Box { pose, half })
        | (Box { pose, half }, Capsule { a, b, radius }) => {
            capsule_box_intersect(*a, *b, *radius, pose, *half)
        }
        (Cylinder { pose: p1, radius: r1, half: h1 }, Cylinder { pose: p2, radius: r2, half: h2 }) => {
            cylinder_cylinder_intersect(p1, *r1, *h1, p2, *r2, *h2)
        }
        (Box { pose: bp, half }, Cylinder { pose: cp, radius, half: ch })
        | (Cylinder { pose: cp, radius, half: ch }, Box { pose: bp, half }) => {
            box_cylinder_intersect(bp, half, cp, *radius, *ch)
        }
        (Box { pose: p1, half: h1 }, Box { pose: p2, half: h2 }) => {
            box_box_intersect(p1, h1, p2, h2)
        }
    }
}

/// First contact of the ray `origin + t * dir` with the solid shape, as the
/// distance `t >= 0`; `None` beyond `max_range` or on a miss. A ray starting
/// inside reports zero.
pub fn ray_hit(shape: &WorldShape, origin: [f64; 3], dir: [f64; 3], max_range: f64) -> Option<f64> {
    let n = norm(dir);
    if n < 1e-24 {
        return None;
    }
    let dir = [dir[0] / n, dir[1] / n, dir[2] / n];
    if point_inside(shape, origin) {
        return Some(0.0);
    }
    let t = match shape {
        WorldShape::Sphere { center, radius } => ray_sphere(origin, dir, *center, *radius),
        WorldShape::Capsule { a, b, radius } => ray_capsule(origin, dir, *a, *b, *radius),
        WorldShape::Cylinder { pose, radius, half } => {
            ray_cylinder(origin, dir, pose, *radius, *half)
        }
        WorldShape::Box { pose, half } => ray_box(origin, dir, pose, *half),
    }?;
    (t <= max_range).then_some(t)
}

fn ray_sphere(o: [f64; 3], d: [f64; 3], c: [f64; 3], r: f64) -> Option<f64> {
    let m = sub(o, c);
    let b = dot(m, d);
    let c2 = dot(m, m) - r * r;
    let disc = b * b - c2;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

fn ray_box(o: [f64; 3], d: [f64; 3], pose: &Pose3D, half: [f64; 3]) -> Option<f64> {
    let inv = pose.invert();
    let lo = inv.transform_point(o);
    let ld = inv.rotation.rotate(d);
    let mut tmin = 0.0f64;
    let mut tmax = f64::INFINITY;
    for i in 0..3 {
        if ld[i].abs() < 1e-15 {
            if lo[i].abs() > half[i] {
                return None;
            }
        } else {
            let t1 = (-half[i] - lo[i]) / ld[i];
            let t2 = (half[i] - lo[i]) / ld[i];
            tmin = tmin.max(t1.min(t2));
            tmax = tmax.min(t1.max(t2));
        }
    }
    (tmin <= tmax).then_some(tmin)
}

fn ray_cylinder(o: [f64; 3], d: [f64; 3], pose: &Pose3D, r: f64, h: f64) -> Option<f64> {
    let inv = pose.invert();
    let lo = inv.transform_point(o);
    let ld = inv.rotation.rotate(d);
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if t >= 0.0 {
            best = Some(best.map_or(t, |b: f64| b.min(t)));
        }
    };
    // Lateral surface.
    let a = ld[0] * ld[0] + ld[1] * ld[1];
    if a > 1e-24 {
        let b = lo[0] * ld[0] + lo[1] * ld[1];
        let c = lo[0] * lo[0] + lo[1] * lo[1] - r * r;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / a, (-b + sq) / a] {
                if (lo[2] + t * ld[2]).abs() <= h {
                    consider(t);
                }
            }
        }
    }
    // End caps.
    if ld[2].abs() > 1e-15 {
        for cap in [h, -h] {
            let t = (cap - lo[2]) / ld[2];
            let x = lo[0] + t * ld[0];
            let y = lo[1] + t * ld[1];
            if x * x + y * y <= r * r {
                consider(t);
            }
        }
    }
    best
}

fn ray_capsule(o: [f64; 3], d: [f64; 3], a: [f64; 3], b: [f64; 3], r: f64) -> Option<f64> {
    // Cylinder part in the capsule frame plus the two cap spheres.
    let axis = sub(b, a);
    let len = norm(axis);
    let mut best: Option<f64> = None;
    let mut consider = |t: Option<f64>| {
        if let Some(t) = t {
            if t >= 0.0 {
                best = Some(best.map_or(t, |x: f64| x.min(t)));
            }
        }
    };
    consider(ray_sphere(o, d, a, r));
    consider(ray_sphere(o, d, b, r));
    if len > 1e-12 {
        let z = [axis[0] / len, axis[1] / len, axis[2] / len];
        let any = if z[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let x = cross(z, any);
        let xn = norm(x);
        let x = [x[0] / xn, x[1] / xn, x[2] / xn];
        let y = cross(z, x);
        let mid = lerp(a, b, 0.5);
        let rel = sub(o, mid);
        let lo = [dot(rel, x), dot(rel, y), dot(rel, z)];
        let ld = [dot(d, x), dot(d, y), dot(d, z)];
        let qa = ld[0] * ld[0] + ld[1] * ld[1];
        if qa > 1e-24 {
            let qb = lo[0] * ld[0] + lo[1] * ld[1];
            let qc = lo[0] * lo[0] + lo[1] * lo[1] - r * r;
            let disc = qb * qb - qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                for t in [(-qb - sq) / qa, (-qb + sq) / qa] {
                    if (lo[2] + t * ld[2]).abs() <= len / 2.0 {
                        consider(Some(t));
                    }
                }
            }
        }
    }
    best
}
