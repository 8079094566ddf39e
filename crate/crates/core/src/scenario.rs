//! Static world: pedestrian crossings, building footprints and bounds.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::geometry::{self, distance_to_segment, Point, Polygon, Segment};

const CELL_SIZE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    pub id: String,
    pub span: Segment,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Building {
    pub id: String,
    pub footprint: Polygon,
}

/// Validated, immutable world map with a uniform-grid spatial index.
#[derive(Debug, Clone)]
pub struct ScenarioMap {
    bounds: Bounds,
    crossings: Vec<Crossing>,
    buildings: Vec<Building>,
    index: GridIndex,
}

impl PartialEq for ScenarioMap {
    fn eq(&self, other: &Self) -> bool {
        self.bounds == other.bounds && self.crossings == other.crossings && self.buildings == other.buildings
    }
}

impl ScenarioMap {
    pub fn new(bounds: Bounds, crossings: Vec<Crossing>, buildings: Vec<Building>) -> Result<Self, ScenarioError> {
        if !(bounds.min_x < bounds.max_x && bounds.min_y < bounds.max_y) {
            return Err(ScenarioError::InvalidBounds);
        }
        let mut seen = HashSet::new();
        for c in &crossings {
            if !seen.insert(c.id.as_str()) {
                return Err(ScenarioError::DuplicateCrossing { id: c.id.clone() });
            }
            if c.span.is_degenerate() {
                return Err(ScenarioError::DegenerateCrossing { id: c.id.clone() });
            }
            if !bounds.contains(c.span.a) || !bounds.contains(c.span.b) {
                return Err(ScenarioError::CrossingOutOfBounds { id: c.id.clone() });
            }
        }
        for b in &buildings {
            if let Some(index) = b.footprint.vertices().iter().position(|v| !bounds.contains(*v)) {
                return Err(ScenarioError::BuildingOutOfBounds { id: b.id.clone(), index });
            }
        }
        let index = GridIndex::build(&bounds, &crossings, &buildings);
        Ok(Self { bounds, crossings, buildings, index })
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn crossings(&self) -> &[Crossing] {
        &self.crossings
    }

    pub fn buildings(&self) -> &[Building] {
        &self.buildings
    }

    pub fn crossing(&self, id: &str) -> Option<&Crossing> {
        self.crossings.iter().find(|c| c.id == id)
    }

    /// Crossing closest to `p`; ties go to the smallest id.
    pub fn nearest_crossing(&self, p: Point) -> Option<(&Crossing, f64)> {
        self.crossings
            .iter()
            .map(|c| (c, distance_to_segment(p, &c.span)))
            .min_by(by_distance_then_id)
    }

    /// All crossings within `r` of `p`, nearest first, ties by id.
    pub fn crossings_within(&self, p: Point, r: f64) -> Vec<(&Crossing, f64)> {
        let mut out: Vec<(&Crossing, f64)> = match self.index.cell_range(p, r) {
            Some(range) => self
                .index
                .crossing_candidates(range)
                .into_iter()
                .map(|i| &self.crossings[i])
                .map(|c| (c, distance_to_segment(p, &c.span)))
                .filter(|(_, d)| *d <= r)
                .collect(),
            None => self
                .crossings
                .iter()
                .map(|c| (c, distance_to_segment(p, &c.span)))
                .filter(|(_, d)| *d <= r)
                .collect(),
        };
        out.sort_by(by_distance_then_id);
        out
    }

    /// Direct line of sight between two points given the map's buildings.
    pub fn line_of_sight(&self, p: Point, q: Point) -> bool {
        let range = self.index.segment_cell_range(p, q);
        let candidates = self.index.building_candidates(range);
        geometry::line_of_sight(p, q, candidates.into_iter().map(|i| &self.buildings[i].footprint))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
        let file: ScenarioFile =
            serde_json::from_str(&text).map_err(|source| ScenarioError::Parse { path: path.into(), source })?;
        file.into_map()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from(self)).expect("scenario serializes")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| ScenarioError::Io { path: path.into(), source })
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioMap, ScenarioError> {
    ScenarioMap::load(path)
}

fn by_distance_then_id(a: &(&Crossing, f64), b: &(&Crossing, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then_with(|| a.0.id.cmp(&b.0.id))
}

/// On-disk JSON layout.
#[derive(Debug, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub bounds: Bounds,
    pub crossings: Vec<CrossingEntry>,
    #[serde(default)]
    pub buildings: Vec<BuildingEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CrossingEntry {
    pub id: String,
    pub ax: f64,
    pub ay: f64,
    pub bx: f64,
    pub by: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct BuildingEntry {
    pub id: String,
    pub vertices: Vec<[f64; 2]>,
}

impl ScenarioFile {
    pub fn into_map(self) -> Result<ScenarioMap, ScenarioError> {
        let crossings = self
            .crossings
            .into_iter()
            .map(|c| Crossing { id: c.id, span: Segment::new(Point::new(c.ax, c.ay), Point::new(c.bx, c.by)) })
            .collect();
        let buildings = self
            .buildings
            .into_iter()
            .map(|b| {
                let verts = b.vertices.iter().map(|[x, y]| Point::new(*x, *y)).collect();
                Polygon::new(verts)
                    .map(|footprint| Building { id: b.id.clone(), footprint })
                    .map_err(|source| ScenarioError::InvalidBuilding { id: b.id, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        ScenarioMap::new(self.bounds, crossings, buildings)
    }
}

impl From<&ScenarioMap> for ScenarioFile {
    fn from(map: &ScenarioMap) -> Self {
        ScenarioFile {
            bounds: map.bounds,
            crossings: map
                .crossings
                .iter()
                .map(|c| CrossingEntry { id: c.id.clone(), ax: c.span.a.x, ay: c.span.a.y, bx: c.span.b.x, by: c.span.b.y })
                .collect(),
            buildings: map
                .buildings
                .iter()
                .map(|b| BuildingEntry {
                    id: b.id.clone(),
                    vertices: b.footprint.vertices().iter().map(|v| [v.x, v.y]).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct CellRange {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

/// Uniform grid over the bounds; each cell lists the crossings and
/// buildings whose bounding boxes overlap it.
#[derive(Debug, Clone)]
struct GridIndex {
    origin: Point,
    nx: usize,
    ny: usize,
    crossings: Vec<Vec<usize>>,
    buildings: Vec<Vec<usize>>,
}

impl GridIndex {
    fn build(bounds: &Bounds, crossings: &[Crossing], buildings: &[Building]) -> Self {
        let nx = (((bounds.max_x - bounds.min_x) / CELL_SIZE).ceil() as usize).max(1);
        let ny = (((bounds.max_y - bounds.min_y) / CELL_SIZE).ceil() as usize).max(1);
        let mut index = GridIndex {
            origin: Point::new(bounds.min_x, bounds.min_y),
            nx,
            ny,
            crossings: vec![Vec::new(); nx * ny],
            buildings: vec![Vec::new(); nx * ny],
        };
        for (i, c) in crossings.iter().enumerate() {
            let r = index.box_range(c.span.a, c.span.b);
            index.for_each_cell(r, |cell, idx| idx.crossings[cell].push(i));
        }
        for (i, b) in buildings.iter().enumerate() {
            let (min, max) = b.footprint.bbox();
            let r = index.box_range(min, max);
            index.for_each_cell(r, |cell, idx| idx.buildings[cell].push(i));
        }
        index
    }

    fn clamp_cell(&self, v: f64, origin: f64, n: usize) -> usize {
        let c = ((v - origin) / CELL_SIZE).floor();
        if c < 0.0 {
            0
        } else {
            (c as usize).min(n - 1)
        }
    }

    fn box_range(&self, a: Point, b: Point) -> CellRange {
        CellRange {
            x0: self.clamp_cell(a.x.min(b.x), self.origin.x, self.nx),
            x1: self.clamp_cell(a.x.max(b.x), self.origin.x, self.nx),
            y0: self.clamp_cell(a.y.min(b.y), self.origin.y, self.ny),
            y1: self.clamp_cell(a.y.max(b.y), self.origin.y, self.ny),
        }
    }

    /// `None` when the query radius is unbounded and a scan is cheaper.
    fn cell_range(&self, p: Point, r: f64) -> Option<CellRange> {
        if !r.is_finite() || !p.is_finite() {
            return None;
        }
        Some(self.box_range(Point::new(p.x - r, p.y - r), Point::new(p.x + r, p.y + r)))
    }

    fn segment_cell_range(&self, p: Point, q: Point) -> CellRange {
        self.box_range(p, q)
    }

    fn for_each_cell(&mut self, r: CellRange, mut f: impl FnMut(usize, &mut Self)) {
        for y in r.y0..=r.y1 {
            for x in r.x0..=r.x1 {
                f(y * self.nx + x, self);
            }
        }
    }

    fn collect(&self, r: CellRange, lists: &[Vec<usize>]) -> Vec<usize> {
        let mut out = Vec::new();
        for y in r.y0..=r.y1 {
            for x in r.x0..=r.x1 {
                out.extend_from_slice(&lists[y * self.nx + x]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    fn crossing_candidates(&self, r: CellRange) -> Vec<usize> {
        self.collect(r, &self.crossings)
    }

    fn building_candidates(&self, r: CellRange) -> Vec<usize> {
        self.collect(r, &self.buildings)
    }
}
