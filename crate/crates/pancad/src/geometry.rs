//! Geometric entity primitives and the distance/sampling kernel.
//!
//! All coordinates are millimeters in drawing space. Angles are radians,
//! normalized to `[0, 2*pi)`, and arcs sweep counter-clockwise from
//! `start_angle` to `end_angle`; an arc whose angles coincide is a full turn.

use std::f64::consts::TAU;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    /// `parallel_distance` called on entities that are not parallel segments.
    #[error("entities are not parallel segments")]
    NotParallel,
    #[error("invalid entity: {0}")]
    InvalidEntity(String),
}

/// A point in drawing space (mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }
}

/// Axis-aligned box, `min` corner to `max` corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        BoundingBox { min_x, min_y, max_x, max_y }
    }

    /// Smallest box containing every point; panics on an empty iterator.
    pub fn of_points<I: IntoIterator<Item = Point2>>(points: I) -> Self {
        let mut it = points.into_iter();
        let first = it.next().expect("bounding box of no points");
        let mut b = BoundingBox::new(first.x, first.y, first.x, first.y);
        for p in it {
            b.expand(p);
        }
        b
    }

    pub fn expand(&mut self, p: Point2) {
        self.min_x = self.min_x.min(p.x);
        self.min_y = self.min_y.min(p.y);
        self.max_x = self.max_x.max(p.x);
        self.max_y = self.max_y.max(p.y);
    }

    pub fn union(self, other: BoundingBox) -> BoundingBox {
        BoundingBox::new(
            self.min_x.min(other.min_x),
            self.min_y.min(other.min_y),
            self.max_x.max(other.max_x),
            self.max_y.max(other.max_y),
        )
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    /// Closed containment test: boundary points count as inside.
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        other.min_x >= self.min_x
            && other.min_y >= self.min_y
            && other.max_x <= self.max_x
            && other.max_y <= self.max_y
    }

    pub fn inflate(self, margin: f64) -> BoundingBox {
        BoundingBox::new(
            self.min_x - margin,
            self.min_y - margin,
            self.max_x + margin,
            self.max_y + margin,
        )
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.max_x.min(other.max_x) - self.min_x.max(other.min_x);
        let h = self.max_y.min(other.max_y) - self.min_y.max(other.min_y);
        w.max(0.0) * h.max(0.0)
    }
}

/// Coarse shape taxonomy used by the node features: arcs and polylines both
/// read as "curve".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityKind {
    Segment,
    Circle,
    Curve,
}

/// A drawing primitive. Invariants (checked by [`Entity::validate`]):
/// segments have distinct endpoints, radii are positive, polylines have at
/// least two vertices and no zero-length step.
#[derive(Debug, Clone, PartialEq)]
pub enum Entity {
    Segment { start: Point2, end: Point2 },
    Arc { center: Point2, radius: f64, start_angle: f64, end_angle: f64 },
    Circle { center: Point2, radius: f64 },
    Polyline { vertices: Vec<Point2> },
}

/// Map an angle into `[0, 2*pi)`. Values a rounding error below zero would
/// otherwise land exactly on 2*pi.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl Entity {
    pub fn segment(start: Point2, end: Point2) -> Self {
        Entity::Segment { start, end }
    }

    /// Arc through CCW sweep from `start_angle` to `end_angle`; angles are
    /// normalized at construction so stored drawings are canonical.
    pub fn arc(center: Point2, radius: f64, start_angle: f64, end_angle: f64) -> Self {
        Entity::Arc {
            center,
            radius,
            start_angle: normalize_angle(start_angle),
            end_angle: normalize_angle(end_angle),
        }
    }

    pub fn circle(center: Point2, radius: f64) -> Self {
        Entity::Circle { center, radius }
    }

    pub fn polyline(vertices: Vec<Point2>) -> Self {
        Entity::Polyline { vertices }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = |p: &Point2| p.x.is_finite() && p.y.is_finite();
        match self {
            Entity::Segment { start, end } => {
                if !finite(start) || !finite(end) {
                    return Err(GeometryError::InvalidEntity("non-finite coordinate".into()));
                }
                if start == end {
                    return Err(GeometryError::InvalidEntity("zero-length segment".into()));
                }
            }
            Entity::Arc { center, radius, start_angle, end_angle } => {
                if !finite(center) || !radius.is_finite() || !start_angle.is_finite() || !end_angle.is_finite() {
                    return Err(GeometryError::InvalidEntity("non-finite arc field".into()));
                }
                if *radius <= 0.0 {
                    return Err(GeometryError::InvalidEntity("non-positive arc radius".into()));
                }
            }
            Entity::Circle { center, radius } => {
                if !finite(center) || !radius.is_finite() {
                    return Err(GeometryError::InvalidEntity("non-finite circle field".into()));
                }
                if *radius <= 0.0 {
                    return Err(GeometryError::InvalidEntity("non-positive circle radius".into()));
                }
            }
            Entity::Polyline { vertices } => {
                if vertices.len() < 2 {
                    return Err(GeometryError::InvalidEntity("polyline needs >= 2 vertices".into()));
                }
                if vertices.iter().any(|p| !finite(p)) {
                    return Err(GeometryError::InvalidEntity("non-finite coordinate".into()));
                }
                if vertices.windows(2).any(|w| w[0] == w[1]) {
                    return Err(GeometryError::InvalidEntity("zero-length polyline step".into()));
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> EntityKind {
        match self {
            Entity::Segment { .. } => EntityKind::Segment,
            Entity::Circle { .. } => EntityKind::Circle,
            Entity::Arc { .. } | Entity::Polyline { .. } => EntityKind::Curve,
        }
    }

    /// CCW sweep of an arc in `(0, 2*pi]`; coincident angles mean a full turn.
    pub fn arc_sweep(start_angle: f64, end_angle: f64) -> f64 {
        let d = (end_angle - start_angle).rem_euclid(TAU);
        if d == 0.0 {
            TAU
        } else {
            d
        }
    }

    /// Endpoints of an open entity; `None` for circles.
    pub fn endpoints(&self) -> Option<(Point2, Point2)> {
        match self {
            Entity::Segment { start, end } => Some((*start, *end)),
            Entity::Arc { center, radius, start_angle, end_angle } => {
                let at = |a: f64| Point2::new(center.x + radius * a.cos(), center.y + radius * a.sin());
                Some((at(*start_angle), at(*end_angle)))
            }
            Entity::Circle { .. } => None,
            Entity::Polyline { vertices } => Some((vertices[0], *vertices.last().unwrap())),
        }
    }
}

/// Total arc length of an entity in mm.
pub fn arc_length(e: &Entity) -> f64 {
    match e {
        Entity::Segment { start, end } => start.distance(*end),
        Entity::Arc { radius, start_angle, end_angle, .. } => {
            radius * Entity::arc_sweep(*start_angle, *end_angle)
        }
        Entity::Circle { radius, .. } => TAU * radius,
        Entity::Polyline { vertices } => {
            vertices.windows(2).map(|w| w[0].distance(w[1])).sum()
        }
    }
}

/// Point at arc-length fraction `t` in `[0, 1]` along the entity. For circles
/// the parameterization starts at angle 0 and runs CCW.
pub fn point_at(e: &Entity, t: f64) -> Point2 {
    match e {
        Entity::Segment { start, end } => start.lerp(*end, t),
        Entity::Arc { center, radius, start_angle, end_angle } => {
            let a = start_angle + t * Entity::arc_sweep(*start_angle, *end_angle);
            Point2::new(center.x + radius * a.cos(), center.y + radius * a.sin())
        }
        Entity::Circle { center, radius } => {
            let a = t * TAU;
            Point2::new(center.x + radius * a.cos(), center.y + radius * a.sin())
        }
        Entity::Polyline { vertices } => {
            let total: f64 = vertices.windows(2).map(|w| w[0].distance(w[1])).sum();
            let mut target = t.clamp(0.0, 1.0) * total;
            for w in vertices.windows(2) {
                let step = w[0].distance(w[1]);
                if target <= step || step == 0.0 {
                    let f = if step > 0.0 { target / step } else { 0.0 };
                    return w[0].lerp(w[1], f.clamp(0.0, 1.0));
                }
                target -= step;
            }
            *vertices.last().unwrap()
        }
    }
}

/// `n` points along the entity. Open entities are sampled at arc-length
/// fractions `k/(n-1)` including both endpoints; circles get `n` points at
/// angular spacing `2*pi/n` starting from angle 0, with no duplicate closure
/// point. `n` must be at least 2.
pub fn sample_points(e: &Entity, n: usize) -> Vec<Point2> {
    assert!(n >= 2, "need at least two sample points");
    match e {
        Entity::Circle { center, radius } => (0..n)
            .map(|k| {
                let a = TAU * k as f64 / n as f64;
                Point2::new(center.x + radius * a.cos(), center.y + radius * a.sin())
            })
            .collect(),
        _ => (0..n)
            .map(|k| point_at(e, k as f64 / (n - 1) as f64))
            .collect(),
    }
}

const CIRCLE_FALLBACK_SAMPLES: usize = 32;

/// Distance between two entities: minimum over their endpoint pairs. Circles
/// have no endpoints, so they fall back to a 32-point sample of their rim.
pub fn entity_distance(a: &Entity, b: &Entity) -> f64 {
    let pts = |e: &Entity| -> Vec<Point2> {
        match e.endpoints() {
            Some((p, q)) => vec![p, q],
            None => sample_points(e, CIRCLE_FALLBACK_SAMPLES),
        }
    };
    let pa = pts(a);
    let pb = pts(b);
    let mut best = f64::INFINITY;
    for p in &pa {
        for q in &pb {
            best = best.min(p.distance(*q));
        }
    }
    best
}

/// Default angular tolerance (radians) under which two segments count as
/// parallel.
pub const PARALLEL_ANGLE_TOL: f64 = 0.01;

/// Acute angle between the undirected carrier lines of two segments.
pub fn segment_angle_between(a: &Entity, b: &Entity) -> Option<f64> {
    let dir = |e: &Entity| match e {
        Entity::Segment { start, end } => Some(Point2::new(end.x - start.x, end.y - start.y)),
        _ => None,
    };
    let da = dir(a)?;
    let db = dir(b)?;
    let cross = (da.x * db.y - da.y * db.x).abs();
    let dot = (da.x * db.x + da.y * db.y).abs();
    Some(cross.atan2(dot))
}

/// True when both entities are segments whose carrier lines differ by less
/// than `angle_tol` radians.
pub fn is_parallel(a: &Entity, b: &Entity, angle_tol: f64) -> bool {
    matches!(segment_angle_between(a, b), Some(angle) if angle < angle_tol)
}

/// Scaled distance for near-parallel segments: `eta` times the exact minimum
/// distance between the two segments as continuous point sets. Errors with
/// [`GeometryError::NotParallel`] unless [`is_parallel`] holds at the default
/// tolerance.
pub fn parallel_distance(a: &Entity, b: &Entity, eta: f64) -> Result<f64, GeometryError> {
    parallel_distance_with_tol(a, b, eta, PARALLEL_ANGLE_TOL)
}

pub fn parallel_distance_with_tol(
    a: &Entity,
    b: &Entity,
    eta: f64,
    angle_tol: f64,
) -> Result<f64, GeometryError> {
    if !is_parallel(a, b, angle_tol) {
        return Err(GeometryError::NotParallel);
    }
    let (a1, a2) = a.endpoints().unwrap();
    let (b1, b2) = b.endpoints().unwrap();
    Ok(eta * segment_min_distance(a1, a2, b1, b2))
}

/// Distance from a point to a segment as a continuous point set.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(Point2::new(a.x + t * dx, a.y + t * dy))
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_properly_cross(a1: Point2, a2: Point2, b1: Point2, b2: Point2) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Exact minimum distance between two segments as continuous point sets.
/// Zero when they intersect; otherwise the nearest pair involves an endpoint,
/// so four point-to-segment distances cover it.
pub fn segment_min_distance(a1: Point2, a2: Point2, b1: Point2, b2: Point2) -> f64 {
    if segments_properly_cross(a1, a2, b1, b2) {
        return 0.0;
    }
    point_segment_distance(a1, b1, b2)
        .min(point_segment_distance(a2, b1, b2))
        .min(point_segment_distance(b1, a1, a2))
        .min(point_segment_distance(b2, a1, a2))
}

const BBOX_SAMPLES: usize = 64;

/// Axis-aligned bounding box. Exact for segments and polylines (vertex hull);
/// arcs and circles use a 64-point sample of the curve, which lands within
/// about `r * (pi/64)^2 / 2` of the true box.
pub fn entity_bbox(e: &Entity) -> BoundingBox {
    match e {
        Entity::Segment { start, end } => BoundingBox::of_points([*start, *end]),
        Entity::Polyline { vertices } => BoundingBox::of_points(vertices.iter().copied()),
        Entity::Arc { .. } | Entity::Circle { .. } => {
            BoundingBox::of_points(sample_points(e, BBOX_SAMPLES))
        }
    }
}
