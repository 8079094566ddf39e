//! Planar geometry used by the alert algorithms, the beacon channel and the
//! danger oracle.
//!
//! Coordinates are meters in a projected planar frame. Angles are degrees,
//! counterclockwise from the +x axis.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(self.x + (other.x - self.x) * t, self.y + (other.y - self.y) * t)
    }

    fn sub(self, other: Point) -> (f64, f64) {
        (self.x - other.x, self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub const fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        distance(self.a, self.b)
    }

    pub fn is_degenerate(&self) -> bool {
        self.a == self.b
    }

    /// Point of the segment closest to `p`.
    pub fn closest_point(&self, p: Point) -> Point {
        let (dx, dy) = self.b.sub(self.a);
        let len2 = dx * dx + dy * dy;
        if len2 == 0.0 {
            return self.a;
        }
        let (px, py) = p.sub(self.a);
        let t = ((px * dx + py * dy) / len2).clamp(0.0, 1.0);
        self.a.lerp(self.b, t)
    }

    pub fn midpoint(&self) -> Point {
        self.a.lerp(self.b, 0.5)
    }
}

/// Simple polygon, closed implicitly from the last vertex back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Builds a polygon, rejecting fewer than three vertices, non-finite
    /// coordinates, and self-intersecting boundaries.
    pub fn new(vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let poly = Self { vertices };
        if !poly.is_simple() {
            return Err(GeometryError::SelfIntersecting);
        }
        Ok(poly)
    }

    /// Axis-aligned rectangle from two opposite corners.
    pub fn rect(min: Point, max: Point) -> Result<Self, GeometryError> {
        Self::new(vec![
            min,
            Point::new(max.x, min.y),
            max,
            Point::new(min.x, max.y),
        ])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// (min, max) corners of the bounding box.
    pub fn bbox(&self) -> (Point, Point) {
        let mut min = self.vertices[0];
        let mut max = self.vertices[0];
        for v in &self.vertices[1..] {
            min.x = min.x.min(v.x);
            min.y = min.y.min(v.y);
            max.x = max.x.max(v.x);
            max.y = max.y.max(v.y);
        }
        (min, max)
    }

    fn is_simple(&self) -> bool {
        let edges: Vec<Segment> = self.edges().collect();
        let n = edges.len();
        for i in 0..n {
            if edges[i].is_degenerate() {
                return false;
            }
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    // Adjacent edges share exactly one vertex; they may not fold back.
                    let (shared, ea, eb) = if j == i + 1 {
                        (edges[i].b, edges[i].a, edges[j].b)
                    } else {
                        (edges[i].a, edges[i].b, edges[j].a)
                    };
                    if cross(shared, ea, eb) == 0.0 && dot(shared, ea, eb) > 0.0 {
                        return false;
                    }
                    continue;
                }
                if segments_touch(&edges[i], &edges[j]) {
                    return false;
                }
            }
        }
        true
    }

    /// True iff `p` lies strictly inside; boundary points are outside.
    pub fn contains_strict(&self, p: Point) -> bool {
        let mut inside = false;
        for e in self.edges() {
            if on_segment(&e, p) {
                return false;
            }
            let (a, b) = (e.a, e.b);
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

/// Direction of travel, degrees counterclockwise from +x, kept in `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Heading(f64);

impl Heading {
    pub fn from_degrees(deg: f64) -> Self {
        let mut a = deg.rem_euclid(360.0);
        // rem_euclid can round up to exactly 360 for tiny negative inputs
        if a >= 360.0 {
            a = 0.0;
        }
        Heading(a)
    }

    /// Heading of the vector `from -> to`, or `None` if the points coincide.
    pub fn between(from: Point, to: Point) -> Option<Self> {
        if from == to {
            return None;
        }
        Some(Self::from_degrees((to.y - from.y).atan2(to.x - from.x).to_degrees()))
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn opposite(self) -> Self {
        Self::from_degrees(self.0 + 180.0)
    }
}

pub fn distance(p: Point, q: Point) -> f64 {
    (p.x - q.x).hypot(p.y - q.y)
}

pub fn distance_to_segment(p: Point, s: &Segment) -> f64 {
    distance(p, s.closest_point(p))
}

/// Signed angle in `(-180, 180]` from the heading direction to the ray
/// `origin -> target`. Positive is to the left.
pub fn relative_bearing(origin: Point, heading: Heading, target: Point) -> Result<f64, GeometryError> {
    let ray = Heading::between(origin, target).ok_or(GeometryError::CoincidentPoints)?;
    let mut d = ray.degrees() - heading.degrees();
    if d <= -180.0 {
        d += 360.0;
    } else if d > 180.0 {
        d -= 360.0;
    }
    Ok(d)
}

/// Inclusive ±90° front half-plane test. A target on top of the origin
/// counts as in front.
pub fn is_in_front(origin: Point, heading: Heading, target: Point) -> bool {
    match relative_bearing(origin, heading, target) {
        Ok(b) => b.abs() <= 90.0,
        Err(_) => true,
    }
}

/// Direct line of sight between `p` and `q`.
///
/// The sight line is blocked only when some part of the open segment passes
/// strictly through a polygon's interior. Touching or running along a
/// boundary does not block.
pub fn line_of_sight<'a, I>(p: Point, q: Point, obstacles: I) -> bool
where
    I: IntoIterator<Item = &'a Polygon>,
{
    // Canonical endpoint order makes the result exactly symmetric.
    let (p, q) = if (p.x, p.y) <= (q.x, q.y) { (p, q) } else { (q, p) };
    obstacles.into_iter().all(|poly| !segment_enters_interior(p, q, poly))
}

fn segment_enters_interior(p: Point, q: Point, poly: &Polygon) -> bool {
    let (min, max) = poly.bbox();
    if p.x.max(q.x) < min.x || p.x.min(q.x) > max.x || p.y.max(q.y) < min.y || p.y.min(q.y) > max.y {
        return false;
    }
    if p == q {
        return poly.contains_strict(p);
    }
    let sight = Segment::new(p, q);
    let mut ts = vec![0.0, 1.0];
    for edge in poly.edges() {
        segment_params(&sight, &edge, &mut ts);
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts.windows(2)
        .any(|w| w[1] > w[0] && poly.contains_strict(p.lerp(q, 0.5 * (w[0] + w[1]))))
}

/// Pushes the parameters along `s` at which it meets `e` (touching included).
fn segment_params(s: &Segment, e: &Segment, out: &mut Vec<f64>) {
    let (rx, ry) = s.b.sub(s.a);
    let (ex, ey) = e.b.sub(e.a);
    let denom = rx * ey - ry * ex;
    let (wx, wy) = e.a.sub(s.a);
    let rr = rx * rx + ry * ry;
    if denom == 0.0 {
        if wx * ry - wy * rx != 0.0 {
            return;
        }
        // Collinear: keep the overlap bounds.
        let t0 = (wx * rx + wy * ry) / rr;
        let (w2x, w2y) = e.b.sub(s.a);
        let t1 = (w2x * rx + w2y * ry) / rr;
        let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
        if hi >= 0.0 && lo <= 1.0 {
            out.push(lo.max(0.0));
            out.push(hi.min(1.0));
        }
        return;
    }
    let t = (wx * ey - wy * ex) / denom;
    let u = (wx * ry - wy * rx) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        out.push(t);
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn dot(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.x - o.x) + (a.y - o.y) * (b.y - o.y)
}

fn on_segment(s: &Segment, p: Point) -> bool {
    cross(s.a, s.b, p) == 0.0
        && p.x >= s.a.x.min(s.b.x)
        && p.x <= s.a.x.max(s.b.x)
        && p.y >= s.a.y.min(s.b.y)
        && p.y <= s.a.y.max(s.b.y)
}

/// Closed-segment intersection test (shared points count).
fn segments_touch(s: &Segment, e: &Segment) -> bool {
    let d1 = cross(e.a, e.b, s.a);
    let d2 = cross(e.a, e.b, s.b);
    let d3 = cross(s.a, s.b, e.a);
    let d4 = cross(s.a, s.b, e.b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    on_segment(e, s.a) || on_segment(e, s.b) || on_segment(s, e.a) || on_segment(s, e.b)
}
