//! Seeded kinematic generator for a Manhattan-grid city.
//!
//! The map is a grid of streets with a building filling every block and a
//! crossing on every approach of every intersection. Vehicles drive
//! shortest grid routes between boundary stubs with simple speed control
//! (turn slowdown, time headway) and never yield to pedestrians.
//! Pedestrians walk between points on the sidewalks, use crossings
//! only, and judge gaps in traffic with a noisy arrival-time estimate.

use std::collections::BTreeMap;

use petgraph::algo::astar;
use petgraph::graph::{NodeIndex, UnGraph};
use petgraph::visit::EdgeRef;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EntityKind, EntityState, Frame, TraceSequence};
use crate::error::ConfigError;
use crate::geometry::{distance, Heading, Point, Polygon, Segment};
use crate::rng::SeedStream;
use crate::scenario::{Bounds, Building, Crossing, ScenarioMap};

/// Generator inputs. Every field has a default, so a parameter file only
/// needs to name what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub blocks_x: u32,
    pub blocks_y: u32,
    /// Street spacing, meters.
    pub block_size: f64,
    /// Arrival window, seconds. The trace ends at the same time.
    pub duration: f64,
    pub vehicle_interarrival: f64,
    pub pedestrian_interarrival: f64,
    /// m/s (13.89 = 50 km/h).
    pub speed_limit: f64,
    pub ped_target_speed: f64,
    pub seed: u64,
    /// Relative error, uniform in `[-noise, +noise]`, on a pedestrian's
    /// estimate of when the nearest vehicle reaches the crossing.
    pub crossing_noise: f64,
    pub turn_speed: f64,
    /// Minimum time gap to the vehicle ahead, seconds.
    pub headway: f64,
    pub step: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            blocks_x: 4,
            blocks_y: 4,
            block_size: 150.0,
            duration: 3600.0,
            vehicle_interarrival: 7.2,
            pedestrian_interarrival: 12.0,
            speed_limit: 13.89,
            ped_target_speed: 1.6,
            seed: 1,
            crossing_noise: 0.2,
            turn_speed: 5.0,
            headway: 2.0,
            step: super::DEFAULT_STEP,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("block_size", self.block_size),
            ("duration", self.duration),
            ("vehicle_interarrival", self.vehicle_interarrival),
            ("pedestrian_interarrival", self.pedestrian_interarrival),
            ("speed_limit", self.speed_limit),
            ("ped_target_speed", self.ped_target_speed),
            ("turn_speed", self.turn_speed),
            ("headway", self.headway),
            ("step", self.step),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::invalid(field, format!("must be positive, got {v}")));
            }
        }
        if self.blocks_x == 0 || self.blocks_y == 0 {
            return Err(ConfigError::invalid("blocks_x/blocks_y", "grid needs at least one block"));
        }
        if self.vehicle_interarrival < 1.0 || self.pedestrian_interarrival < 1.0 {
            return Err(ConfigError::invalid("interarrival", "per-second Bernoulli arrivals need interarrival >= 1 s"));
        }
        if !(0.0..1.0).contains(&self.crossing_noise) {
            return Err(ConfigError::invalid("crossing_noise", "must be in [0, 1)"));
        }
        let per_second = 1.0 / self.step;
        if (per_second - per_second.round()).abs() > 1e-9 {
            return Err(ConfigError::invalid("step", "must divide one second"));
        }
        let layout = GridLayout::default();
        if self.block_size <= 2.0 * layout.crossing_offset.max(layout.building_setback) + 1.0 {
            return Err(ConfigError::invalid("block_size", "too small for the crossing layout"));
        }
        Ok(())
    }
}

/// Fixed cross-section of the generated streets, meters from a centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLayout {
    /// Vehicles drive this far right of the centerline.
    pub lane_offset: f64,
    /// Pedestrians walk this far from the centerline; crossings span
    /// from one sidewalk line to the other.
    pub sidewalk_offset: f64,
    /// Distance from an intersection center to each crossing.
    pub crossing_offset: f64,
    /// Building faces stand this far from the centerline.
    pub building_setback: f64,
    /// Length of the road stubs beyond the outer intersections, where
    /// vehicles enter and leave.
    pub entry_stub: f64,
}

impl Default for GridLayout {
    fn default() -> Self {
        Self { lane_offset: 1.5, sidewalk_offset: 3.0, crossing_offset: 8.0, building_setback: 12.0, entry_stub: 120.0 }
    }
}

const VEHICLE_LENGTH: f64 = 5.0;
const VEHICLE_ACCEL: f64 = 2.6;
const COMFORT_DECEL: f64 = 3.0;
const LEADER_LOOKAHEAD: f64 = 80.0;
const MAX_PED_TRIP: f64 = 1000.0;

/// Factor applied to the speed limit to get a vehicle's maximum speed:
/// Normal(1, 0.1) clamped to [0.2, 2.0].
pub fn sample_max_speed_factor<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let normal: Normal<f64> = Normal::new(1.0, 0.1).expect("valid normal");
    normal.sample(rng).clamp(0.2, 2.0)
}

/// Generates the grid map and a trace of every vehicle and pedestrian.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<(ScenarioMap, TraceSequence), ConfigError> {
    params.validate()?;
    let grid = Grid::new(params, GridLayout::default());
    let map = grid.build_map();
    let walk = WalkGraph::new(&grid);
    let trace = World::new(params, &grid, &walk).run();
    Ok((map, trace))
}

struct Grid {
    nx: usize,
    ny: usize,
    block: f64,
    stub: f64,
    layout: GridLayout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Approach {
    East,
    North,
    West,
    South,
}

impl Approach {
    const ALL: [Approach; 4] = [Approach::East, Approach::North, Approach::West, Approach::South];

    fn unit(self) -> (f64, f64) {
        match self {
            Approach::East => (1.0, 0.0),
            Approach::North => (0.0, 1.0),
            Approach::West => (-1.0, 0.0),
            Approach::South => (0.0, -1.0),
        }
    }

    fn tag(self) -> char {
        match self {
            Approach::East => 'E',
            Approach::North => 'N',
            Approach::West => 'W',
            Approach::South => 'S',
        }
    }
}

impl Grid {
    fn new(params: &SyntheticParams, layout: GridLayout) -> Self {
        Self {
            nx: params.blocks_x as usize + 1,
            ny: params.blocks_y as usize + 1,
            block: params.block_size,
            stub: layout.entry_stub,
            layout,
        }
    }

    fn node(&self, i: usize, j: usize) -> Point {
        Point::new(i as f64 * self.block, j as f64 * self.block)
    }

    fn width(&self) -> f64 {
        (self.nx - 1) as f64 * self.block
    }

    fn height(&self) -> f64 {
        (self.ny - 1) as f64 * self.block
    }

    fn crossing_id(i: usize, j: usize, a: Approach) -> String {
        format!("x{i:02}_{j:02}{}", a.tag())
    }

    fn crossing_span(&self, i: usize, j: usize, a: Approach) -> Segment {
        let c = self.node(i, j);
        let (ux, uy) = a.unit();
        let (d, w) = (self.layout.crossing_offset, self.layout.sidewalk_offset);
        let mid = Point::new(c.x + ux * d, c.y + uy * d);
        // Span runs perpendicular to the approach road, from its right
        // sidewalk line to its left one (counterclockwise).
        let (nx, ny) = (-uy, ux);
        Segment::new(Point::new(mid.x - nx * w, mid.y - ny * w), Point::new(mid.x + nx * w, mid.y + ny * w))
    }

    fn build_map(&self) -> ScenarioMap {
        let (w, h, stub) = (self.width(), self.height(), self.stub);
        let bounds = Bounds { min_x: -stub, min_y: -stub, max_x: w + stub, max_y: h + stub };
        let mut crossings = Vec::new();
        for j in 0..self.ny {
            for i in 0..self.nx {
                for a in Approach::ALL {
                    crossings.push(Crossing { id: Self::crossing_id(i, j, a), span: self.crossing_span(i, j, a) });
                }
            }
        }
        let sb = self.layout.building_setback;
        let edge = |k: isize, n: usize, total: f64| -> (f64, f64) {
            let lo = if k < 0 { -stub } else { k as f64 * self.block + sb };
            let hi = if k >= 0 && k as usize + 1 >= n { total + stub } else { (k + 1) as f64 * self.block - sb };
            (lo, hi)
        };
        let mut buildings = Vec::new();
        for j in -1..(self.ny as isize) {
            for i in -1..(self.nx as isize) {
                let (x0, x1) = edge(i, self.nx, w);
                let (y0, y1) = edge(j, self.ny, h);
                if x1 - x0 <= 0.0 || y1 - y0 <= 0.0 {
                    continue;
                }
                let footprint = Polygon::rect(Point::new(x0, y0), Point::new(x1, y1)).expect("rectangle is simple");
                buildings.push(Building { id: format!("b{}_{}", i + 1, j + 1), footprint });
            }
        }
        ScenarioMap::new(bounds, crossings, buildings).expect("generated map is valid")
    }

    /// Stub ends where vehicles enter and leave, with the boundary
    /// intersection each one attaches to.
    fn stubs(&self) -> Vec<(Point, (usize, usize))> {
        let (w, h, s) = (self.width(), self.height(), self.stub);
        let mut out = Vec::new();
        for j in 0..self.ny {
            let y = j as f64 * self.block;
            out.push((Point::new(-s, y), (0, j)));
            out.push((Point::new(w + s, y), (self.nx - 1, j)));
        }
        for i in 0..self.nx {
            let x = i as f64 * self.block;
            out.push((Point::new(x, -s), (i, 0)));
            out.push((Point::new(x, h + s), (i, self.ny - 1)));
        }
        out
    }
}

/// Arc-length parameterized polyline.
#[derive(Debug, Clone)]
struct Polyline {
    points: Vec<Point>,
    cum: Vec<f64>,
}

impl Polyline {
    fn new(mut points: Vec<Point>) -> Self {
        points.dedup();
        let mut cum = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (k, p) in points.iter().enumerate() {
            if k > 0 {
                acc += distance(points[k - 1], *p);
            }
            cum.push(acc);
        }
        Self { points, cum }
    }

    fn length(&self) -> f64 {
        *self.cum.last().unwrap_or(&0.0)
    }

    fn segment_at(&self, s: f64) -> usize {
        let n = self.points.len();
        if n < 2 {
            return 0;
        }
        match self.cum.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(k) => k.min(n - 2),
            Err(k) => k.saturating_sub(1).min(n - 2),
        }
    }

    fn point_at(&self, s: f64) -> Point {
        if self.points.len() < 2 {
            return self.points[0];
        }
        let s = s.clamp(0.0, self.length());
        let k = self.segment_at(s);
        let seg_len = self.cum[k + 1] - self.cum[k];
        if seg_len == 0.0 {
            return self.points[k];
        }
        self.points[k].lerp(self.points[k + 1], (s - self.cum[k]) / seg_len)
    }

    fn direction_at(&self, s: f64) -> Heading {
        let k = self.segment_at(s);
        Heading::between(self.points[k], self.points[k + 1]).unwrap_or(Heading::from_degrees(0.0))
    }
}

fn offset_right(centerline: &[Point], offset: f64) -> Vec<Point> {
    let n = centerline.len();
    let normal = |a: Point, b: Point| {
        let len = distance(a, b);
        ((b.y - a.y) / len, -(b.x - a.x) / len)
    };
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let p = centerline[k];
        let (ox, oy) = if k == 0 {
            let (x, y) = normal(p, centerline[1]);
            (x * offset, y * offset)
        } else if k == n - 1 {
            let (x, y) = normal(centerline[k - 1], p);
            (x * offset, y * offset)
        } else {
            // Axis-aligned corner: the offset lines meet at the sum of both normals.
            let (ax, ay) = normal(centerline[k - 1], p);
            let (bx, by) = normal(p, centerline[k + 1]);
            ((ax + bx) * offset, (ay + by) * offset)
        };
        out.push(Point::new(p.x + ox, p.y + oy));
    }
    out
}

fn drop_collinear(points: Vec<Point>) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(points.len());
    for p in points {
        if out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
            if cross == 0.0 {
                out.pop();
            }
        }
        out.push(p);
    }
    out
}

/// Sidewalk network: four corners per intersection, joined by sidewalk
/// edges along block faces and by crossing edges across each approach.
struct WalkGraph {
    graph: UnGraph<Point, WalkEdge>,
    corners: Vec<NodeIndex>,
    /// Corner index pairs joined by a sidewalk edge.
    sidewalks: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
struct WalkEdge {
    /// Waypoints from the lower-index node to the higher-index node.
    points: Vec<Point>,
    crossing: Option<Segment>,
    length: f64,
}

// Corner order within an intersection.
const NE: usize = 0;
const NW: usize = 1;
const SW: usize = 2;
const SE: usize = 3;

impl WalkGraph {
    fn new(grid: &Grid) -> Self {
        let so = grid.layout.sidewalk_offset;
        let mut graph = UnGraph::new_undirected();
        let mut corners = Vec::with_capacity(grid.nx * grid.ny * 4);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let c = grid.node(i, j);
                for (dx, dy) in [(so, so), (-so, so), (-so, -so), (so, -so)] {
                    corners.push(graph.add_node(Point::new(c.x + dx, c.y + dy)));
                }
            }
        }
        let mut wg = Self { graph, corners, sidewalks: Vec::new() };
        let corner = |i: usize, j: usize, q: usize| (j * grid.nx + i) * 4 + q;
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if i + 1 < grid.nx {
                    wg.sidewalk(corner(i, j, NE), corner(i + 1, j, NW));
                    wg.sidewalk(corner(i, j, SE), corner(i + 1, j, SW));
                }
                if j + 1 < grid.ny {
                    wg.sidewalk(corner(i, j, NE), corner(i, j + 1, SE));
                    wg.sidewalk(corner(i, j, NW), corner(i, j + 1, SW));
                }
                for (a, from, to) in [
                    (Approach::East, SE, NE),
                    (Approach::North, NE, NW),
                    (Approach::West, NW, SW),
                    (Approach::South, SW, SE),
                ] {
                    let span = grid.crossing_span(i, j, a);
                    wg.crossing(corner(i, j, from), corner(i, j, to), span);
                }
            }
        }
        wg
    }

    fn sidewalk(&mut self, a: usize, b: usize) {
        self.sidewalks.push((a, b));
        let (na, nb) = (self.corners[a], self.corners[b]);
        let points = vec![self.graph[na], self.graph[nb]];
        let length = distance(points[0], points[1]);
        self.add(na, nb, WalkEdge { points, crossing: None, length });
    }

    /// `span.a` lies on the sidewalk line of `from`, `span.b` on that of `to`.
    fn crossing(&mut self, from: usize, to: usize, span: Segment) {
        let (na, nb) = (self.corners[from], self.corners[to]);
        let points = vec![self.graph[na], span.a, span.b, self.graph[nb]];
        let length = distance(points[0], points[1]) + span.length() + distance(points[2], points[3]);
        self.add(na, nb, WalkEdge { points, crossing: Some(span), length });
    }

    fn add(&mut self, a: NodeIndex, b: NodeIndex, mut e: WalkEdge) {
        if a > b {
            e.points.reverse();
            if let Some(s) = e.crossing.as_mut() {
                *s = Segment::new(s.b, s.a);
            }
            self.graph.add_edge(b, a, e);
        } else {
            self.graph.add_edge(a, b, e);
        }
    }

    /// Jittered shortest walk between two corners.
    fn route(&self, from: usize, to: usize, rng: &mut ChaCha8Rng) -> PedRoute {
        let jitter: Vec<f64> = (0..self.graph.edge_count()).map(|_| rng.random_range(0.9..1.1)).collect();
        let (start, goal) = (self.corners[from], self.corners[to]);
        let (_, nodes) = astar(
            &self.graph,
            start,
            |n| n == goal,
            |e| e.weight().length * jitter[e.id().index()],
            |_| 0.0,
        )
        .expect("walk graph is connected");
        let mut points = vec![self.graph[start]];
        let mut crossings = Vec::new();
        for w in nodes.windows(2) {
            let edge = self.graph.find_edge(w[0], w[1]).expect("consecutive path nodes share an edge");
            let data = &self.graph[edge];
            let forward = w[0] < w[1];
            let mut pts = data.points.clone();
            let mut span = data.crossing;
            if !forward {
                pts.reverse();
                span = span.map(|s| Segment::new(s.b, s.a));
            }
            let base = points.len() - 1;
            points.extend_from_slice(&pts[1..]);
            if let Some(span) = span {
                // The curb is the second waypoint of a crossing edge.
                crossings.push((base + 1, span));
            }
        }
        PedRoute { points, crossings }
    }
}

struct PedRoute {
    points: Vec<Point>,
    /// (index of the curb waypoint in `points`, crossing span)
    crossings: Vec<(usize, Segment)>,
}

#[derive(Debug, Clone)]
struct Vehicle {
    id: String,
    path: Polyline,
    /// Arc lengths of interior vertices (turns).
    turns: Vec<f64>,
    max_speed: f64,
    s: f64,
    speed: f64,
    pos: Point,
    heading: Heading,
}

#[derive(Debug, Clone)]
struct CurbStop {
    s: f64,
    span: Segment,
}

struct Pedestrian {
    id: String,
    path: Polyline,
    curbs: Vec<CurbStop>,
    next_curb: usize,
    rng: ChaCha8Rng,
    s: f64,
    speed: f64,
    pos: Point,
    heading: Heading,
}

struct World<'a> {
    params: &'a SyntheticParams,
    grid: &'a Grid,
    walk: &'a WalkGraph,
    seeds: SeedStream,
    vehicles: Vec<Vehicle>,
    pedestrians: Vec<Pedestrian>,
}

impl<'a> World<'a> {
    fn new(params: &'a SyntheticParams, grid: &'a Grid, walk: &'a WalkGraph) -> Self {
        Self { params, grid, walk, seeds: SeedStream::new(params.seed), vehicles: Vec::new(), pedestrians: Vec::new() }
    }

    fn run(mut self) -> TraceSequence {
        let step = self.params.step;
        let ticks_per_second = (1.0 / step).round() as u64;
        let total_ticks = (self.params.duration / step).round() as u64;
        let mut veh_arrivals = self.seeds.substream("arrivals", "vehicle");
        let mut ped_arrivals = self.seeds.substream("arrivals", "pedestrian");
        let (p_veh, p_ped) = (1.0 / self.params.vehicle_interarrival, 1.0 / self.params.pedestrian_interarrival);
        let (mut n_veh, mut n_ped) = (0u32, 0u32);
        let mut frames = Vec::with_capacity(total_ticks as usize);
        for tick in 0..total_ticks {
            if tick > 0 {
                self.advance(step);
            }
            if tick % ticks_per_second == 0 {
                if veh_arrivals.random_bool(p_veh) {
                    n_veh += 1;
                    self.spawn_vehicle(format!("v{n_veh:05}"));
                }
                if ped_arrivals.random_bool(p_ped) {
                    n_ped += 1;
                    self.spawn_pedestrian(format!("p{n_ped:05}"));
                }
            }
            frames.push(self.snapshot(tick, step));
        }
        let first = frames.iter().position(|f| !f.is_empty()).unwrap_or(frames.len());
        let last = frames.iter().rposition(|f| !f.is_empty()).map_or(first, |k| k + 1);
        let frames = frames.drain(first..last).collect();
        TraceSequence::new(step, frames).expect("generated trace is valid")
    }

    fn snapshot(&self, tick: u64, step: f64) -> Frame {
        let mut states = BTreeMap::new();
        for v in &self.vehicles {
            states.insert(
                v.id.clone(),
                EntityState { id: v.id.clone(), kind: EntityKind::Vehicle, pos: v.pos, heading: v.heading, speed: v.speed },
            );
        }
        for p in &self.pedestrians {
            states.insert(
                p.id.clone(),
                EntityState { id: p.id.clone(), kind: EntityKind::Pedestrian, pos: p.pos, heading: p.heading, speed: p.speed },
            );
        }
        Frame { tick, t: super::tick_to_seconds(tick, step), states }
    }

    fn spawn_vehicle(&mut self, id: String) {
        let mut rng = self.seeds.substream("vehicle", &id);
        let stubs = self.grid.stubs();
        let entry = rng.random_range(0..stubs.len());
        let mut exit = rng.random_range(0..stubs.len() - 1);
        if exit >= entry {
            exit += 1;
        }
        let x_first = rng.random_bool(0.5);
        let max_speed = sample_max_speed_factor(&mut rng) * self.params.speed_limit;

        let (entry_pt, (si, sj)) = stubs[entry];
        let (exit_pt, (ei, ej)) = stubs[exit];
        let mut centerline = vec![entry_pt, self.grid.node(si, sj)];
        let corner = if x_first { (ei, sj) } else { (si, ej) };
        centerline.push(self.grid.node(corner.0, corner.1));
        centerline.push(self.grid.node(ei, ej));
        centerline.push(exit_pt);
        centerline.dedup();
        let centerline = drop_collinear(centerline);
        let path = Polyline::new(offset_right(&centerline, self.grid.layout.lane_offset));
        let turns = path.cum[1..path.cum.len() - 1].to_vec();
        let pos = path.point_at(0.0);
        let heading = path.direction_at(0.0);
        let mut v = Vehicle { id, path, turns, max_speed, s: 0.0, speed: 0.0, pos, heading };
        let gap = leader_gap(&v, &self.vehicles);
        v.speed = max_speed.min(gap.map_or(f64::INFINITY, |g| g.max(0.0) / self.params.headway));
        self.vehicles.push(v);
    }

    fn spawn_pedestrian(&mut self, id: String) {
        let mut rng = self.seeds.substream("pedestrian", &id);
        let walk = self.walk;
        let corner_pt = |c: usize| walk.graph[walk.corners[c]];
        let sidewalks = &walk.sidewalks;
        // Trips start and end partway along a block face.
        let (a0, b0) = sidewalks[rng.random_range(0..sidewalks.len())];
        let start = corner_pt(a0).lerp(corner_pt(b0), rng.random_range(0.2..0.8));
        let mut dest = None;
        for _ in 0..16 {
            let cand = sidewalks[rng.random_range(0..sidewalks.len())];
            if cand != (a0, b0) && distance(start, corner_pt(cand.0)) <= MAX_PED_TRIP {
                dest = Some(cand);
                break;
            }
        }
        let (a1, b1) = dest.unwrap_or(sidewalks[(sidewalks.iter().position(|&e| e == (a0, b0)).unwrap_or(0) + 1) % sidewalks.len()]);
        let end = corner_pt(a1).lerp(corner_pt(b1), rng.random_range(0.2..0.8));

        let route = self.walk.route(a0, a1, &mut rng);
        let mut points = vec![start];
        let mut shift = 1;
        let mut inner = route.points;
        // Skip a corner the pedestrian would only touch to turn back.
        if inner.len() >= 2 && inner[1] == corner_pt(b0) {
            inner.remove(0);
            shift = 0;
        }
        let n = inner.len();
        if n >= 2 && inner[n - 2] == corner_pt(b1) {
            inner.pop();
        }
        points.extend(inner);
        points.push(end);
        let path = Polyline::new(points.clone());
        let curbs = route
            .crossings
            .iter()
            .map(|&(k, span)| CurbStop { s: arc_length_to(&points, k + shift), span })
            .collect();
        let pos = path.point_at(0.0);
        let heading = path.direction_at(0.0);
        self.pedestrians.push(Pedestrian { id, path, curbs, next_curb: 0, rng, s: 0.0, speed: 0.0, pos, heading });
    }

    /// Moves everything one step. All decisions read the previous state.
    fn advance(&mut self, dt: f64) {
        let before = self.vehicles.clone();
        let params = self.params;
        for v in &mut self.vehicles {
            let turn_cap = v
                .turns
                .iter()
                .find(|&&t| t > v.s)
                .map_or(f64::INFINITY, |&t| (params.turn_speed.powi(2) + 2.0 * COMFORT_DECEL * (t - v.s)).sqrt());
            let gap_cap = leader_gap(v, &before).map_or(f64::INFINITY, |g| g.max(0.0) / params.headway);
            let target = v.max_speed.min(turn_cap).min(gap_cap);
            let speed = (v.speed + VEHICLE_ACCEL * dt).min(target).max(0.0);
            let prev = v.pos;
            v.speed = speed;
            v.s += speed * dt;
            v.pos = v.path.point_at(v.s);
            if let Some(h) = Heading::between(prev, v.pos) {
                v.heading = h;
            }
        }
        self.vehicles.retain(|v| v.s < v.path.length());

        let target = params.ped_target_speed;
        let noise = params.crossing_noise;
        for p in &mut self.pedestrians {
            let speed = target - p.rng.random_range(0.0..=0.2) * target;
            if let Some(curb) = p.curbs.get(p.next_curb) {
                if p.s + speed * dt >= curb.s {
                    let clear_time = curb.span.length() / target;
                    let go = match nearest_arrival(&curb.span, &before) {
                        None => true,
                        Some(arrival) => {
                            let estimate = arrival * (1.0 + p.rng.random_range(-noise..=noise));
                            estimate > clear_time
                        }
                    };
                    if !go {
                        p.speed = 0.0;
                        continue;
                    }
                    p.next_curb += 1;
                }
            }
            let prev = p.pos;
            p.speed = speed;
            p.s += speed * dt;
            p.pos = p.path.point_at(p.s);
            if let Some(h) = Heading::between(prev, p.pos) {
                p.heading = h;
            }
        }
        self.pedestrians.retain(|p| p.s < p.path.length());
    }
}

fn arc_length_to(points: &[Point], k: usize) -> f64 {
    points.windows(2).take(k).map(|w| distance(w[0], w[1])).sum()
}

/// Bumper-to-bumper gap to the nearest vehicle ahead in the same lane.
fn leader_gap(v: &Vehicle, others: &[Vehicle]) -> Option<f64> {
    let path = &v.path;
    let start = path.segment_at(v.s);
    let mut best: Option<f64> = None;
    for o in others {
        if o.id == v.id {
            continue;
        }
        if distance(o.pos, v.pos) > LEADER_LOOKAHEAD + VEHICLE_LENGTH {
            continue;
        }
        for k in start..path.points.len() - 1 {
            if path.cum[k] - v.s > LEADER_LOOKAHEAD {
                break;
            }
            let seg = Segment::new(path.points[k], path.points[k + 1]);
            let foot = seg.closest_point(o.pos);
            if distance(foot, o.pos) > 0.75 {
                continue;
            }
            let seg_dir = Heading::between(seg.a, seg.b).expect("path segments are non-degenerate");
            let diff = (o.heading.degrees() - seg_dir.degrees()).rem_euclid(360.0);
            if diff > 45.0 && diff < 315.0 {
                continue;
            }
            let s_o = path.cum[k] + distance(seg.a, foot);
            if s_o > v.s {
                let gap = s_o - v.s - VEHICLE_LENGTH;
                best = Some(best.map_or(gap, |b: f64| b.min(gap)));
                break;
            }
        }
    }
    best
}

/// Seconds until the nearest vehicle driving toward the crossing reaches
/// it, from vehicles on the crossed road.
fn nearest_arrival(span: &Segment, vehicles: &[Vehicle]) -> Option<f64> {
    let mid = span.midpoint();
    let half = span.length() / 2.0;
    let (sx, sy) = ((span.b.x - span.a.x) / (2.0 * half), (span.b.y - span.a.y) / (2.0 * half));
    // Road axis is perpendicular to the span.
    let (ux, uy) = (-sy, sx);
    vehicles
        .iter()
        .filter_map(|v| {
            let (rx, ry) = (mid.x - v.pos.x, mid.y - v.pos.y);
            let lateral = (rx * sx + ry * sy).abs();
            if lateral > half {
                return None;
            }
            let along = rx * ux + ry * uy;
            let rad = v.heading.degrees().to_radians();
            let (hx, hy) = (rad.cos(), rad.sin());
            let aligned = (hx * ux + hy * uy).abs() >= std::f64::consts::FRAC_1_SQRT_2;
            let toward = hx * rx + hy * ry > 0.0;
            if !(aligned && toward) || along.abs() > 150.0 {
                return None;
            }
            Some(along.abs() / v.speed.max(0.5))
        })
        .min_by(f64::total_cmp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SyntheticParams {
        SyntheticParams { blocks_x: 2, blocks_y: 2, duration: 120.0, vehicle_interarrival: 4.0, pedestrian_interarrival: 3.0, seed, ..Default::default() }
    }

    #[test]
    fn defaults_match_reference_values() {
        let p = SyntheticParams::default();
        assert_eq!(p.block_size, 150.0);
        assert_eq!(p.duration, 3600.0);
        assert_eq!(p.speed_limit, 13.89);
        assert_eq!(p.ped_target_speed, 1.6);
        assert_eq!(p.vehicle_interarrival, 7.2);
        assert_eq!(p.step, 0.1);
    }

    #[test]
    fn validation_rejects_bad_params() {
        assert!(SyntheticParams { block_size: -1.0, ..Default::default() }.validate().is_err());
        assert!(SyntheticParams { blocks_x: 0, ..Default::default() }.validate().is_err());
        assert!(SyntheticParams { step: 0.3, ..Default::default() }.validate().is_err());
        assert!(SyntheticParams { crossing_noise: 1.5, ..Default::default() }.validate().is_err());
        assert!(SyntheticParams::default().validate().is_ok());
    }

    #[test]
    fn map_layout() {
        let p = small(1);
        let (map, _) = generate_synthetic(&p).unwrap();
        // 3x3 intersections, 4 approaches each.
        assert_eq!(map.crossings().len(), 36);
        // (2 + 2)^2 blocks including the margin ring.
        assert_eq!(map.buildings().len(), 16);
        for c in map.crossings() {
            assert!((c.span.length() - 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let (_, a) = generate_synthetic(&small(9)).unwrap();
        let (_, b) = generate_synthetic(&small(9)).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ba).unwrap();
        b.write_csv(&mut bb).unwrap();
        assert_eq!(ba, bb);
        let (_, c) = generate_synthetic(&small(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn vehicles_respect_speed_caps_and_stay_in_bounds() {
        let p = small(3);
        let (map, trace) = generate_synthetic(&p).unwrap();
        for f in trace.frames() {
            for s in f.vehicles() {
                assert!(s.speed <= 2.0 * p.speed_limit);
                assert!(map.bounds().contains(s.pos));
            }
        }
    }

    #[test]
    fn offset_corner_for_right_turn() {
        // East then north: a left turn, lane corner sits outside the centerline corner.
        let pts = offset_right(&[Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(10.0, 10.0)], 1.5);
        assert_eq!(pts[0], Point::new(0.0, -1.5));
        assert_eq!(pts[1], Point::new(11.5, -1.5));
        assert_eq!(pts[2], Point::new(11.5, 10.0));
    }

    #[test]
    fn polyline_parameterization() {
        let pl = Polyline::new(vec![Point::new(0.0, 0.0), Point::new(3.0, 0.0), Point::new(3.0, 4.0)]);
        assert_eq!(pl.length(), 7.0);
        assert_eq!(pl.point_at(5.0), Point::new(3.0, 2.0));
        assert_eq!(pl.point_at(99.0), Point::new(3.0, 4.0));
        assert_eq!(pl.direction_at(4.0).degrees(), 90.0);
    }
}
