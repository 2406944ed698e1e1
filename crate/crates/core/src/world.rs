//! Static map representation: an occupancy grid plus a table of named
//! landmarks.
//!
//! Grid rows are stored in document order. Row `r` spans world
//! `y ∈ [origin.y + r·res, origin.y + (r+1)·res)` and column `c` spans
//! `x ∈ [origin.x + c·res, origin.x + (c+1)·res)`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in the world frame, in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
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

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {:?})", self.x, self.y)
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [x, y] = <[f64; 2]>::deserialize(deserializer)?;
        Ok(Point { x, y })
    }
}

/// Grid cell index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub name: String,
    pub position: Point,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("malformed world document: {0}")]
    Malformed(String),
    #[error("resolution must be positive and finite, got {0}")]
    BadResolution(f64),
    #[error("grid row {row} has {len} cells, expected {expected}")]
    RaggedGrid { row: usize, len: usize, expected: usize },
    #[error("grid row {row} contains invalid character {ch:?}")]
    BadGridChar { row: usize, ch: char },
    #[error("grid has no free cells")]
    NoFreeCells,
    #[error("duplicate landmark name {0:?}")]
    DuplicateLandmark(String),
    #[error("landmark name must be non-empty")]
    EmptyLandmarkName,
    #[error("landmark {name:?} at {position} is out of bounds")]
    LandmarkOutOfBounds { name: String, position: Point },
    #[error("landmark {name:?} at {position} lies on an occupied cell")]
    LandmarkOnObstacle { name: String, position: Point },
    #[error("unknown landmark {0:?}")]
    UnknownLandmark(String),
    #[error("point {0} is outside the map bounds")]
    OutOfBounds(Point),
}

/// On-disk world document.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct WorldDocument {
    id: String,
    resolution_m: f64,
    origin: [f64; 2],
    grid: Vec<String>,
    #[serde(default)]
    landmarks: Vec<LandmarkDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LandmarkDocument {
    name: String,
    x: f64,
    y: f64,
    #[serde(default)]
    attributes: BTreeMap<String, String>,
}

/// Occupancy grid with landmarks. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    id: String,
    resolution: f64,
    origin: Point,
    rows: usize,
    cols: usize,
    occupied: Vec<bool>,
    landmarks: Vec<Landmark>,
}

impl WorldMap {
    /// Builds a map from its parts, enforcing every map invariant.
    pub fn new(
        id: impl Into<String>,
        resolution: f64,
        origin: Point,
        grid: Vec<Vec<bool>>,
        landmarks: Vec<Landmark>,
    ) -> Result<Self, WorldError> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(WorldError::BadResolution(resolution));
        }
        if !origin.is_finite() {
            return Err(WorldError::Malformed("origin must be finite".into()));
        }
        let rows = grid.len();
        let cols = grid.first().map_or(0, Vec::len);
        for (row, cells) in grid.iter().enumerate() {
            if cells.len() != cols {
                return Err(WorldError::RaggedGrid { row, len: cells.len(), expected: cols });
            }
        }
        let occupied: Vec<bool> = grid.into_iter().flatten().collect();
        if !occupied.iter().any(|o| !o) {
            return Err(WorldError::NoFreeCells);
        }
        let mut map = WorldMap {
            id: id.into(),
            resolution,
            origin,
            rows,
            cols,
            occupied,
            landmarks: Vec::new(),
        };
        let mut seen = HashSet::new();
        for lm in &landmarks {
            if lm.name.is_empty() {
                return Err(WorldError::EmptyLandmarkName);
            }
            if !seen.insert(lm.name.as_str()) {
                return Err(WorldError::DuplicateLandmark(lm.name.clone()));
            }
            let cell = map.world_to_cell(lm.position).map_err(|_| {
                WorldError::LandmarkOutOfBounds { name: lm.name.clone(), position: lm.position }
            })?;
            if map.is_occupied(cell) {
                return Err(WorldError::LandmarkOnObstacle {
                    name: lm.name.clone(),
                    position: lm.position,
                });
            }
        }
        map.landmarks = landmarks;
        Ok(map)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn landmarks(&self) -> &[Landmark] {
        &self.landmarks
    }

    /// Landmarks sorted by name.
    pub fn landmarks_sorted(&self) -> Vec<&Landmark> {
        let mut out: Vec<&Landmark> = self.landmarks.iter().collect();
        out.sort_by(|a, b| a.name.cmp(&b.name));
        out
    }

    pub fn free_cell_count(&self) -> usize {
        self.occupied.iter().filter(|o| !**o).count()
    }

    pub fn in_grid(&self, cell: Cell) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    /// Panics if `cell` is outside the grid.
    pub fn is_occupied(&self, cell: Cell) -> bool {
        assert!(self.in_grid(cell), "cell {cell:?} outside {}x{} grid", self.rows, self.cols);
        self.occupied[cell.row * self.cols + cell.col]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.in_grid(cell) && !self.is_occupied(cell)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.world_to_cell(p).is_ok()
    }

    /// Cell containing `p`, via `floor((p - origin) / resolution)`.
    pub fn world_to_cell(&self, p: Point) -> Result<Cell, WorldError> {
        if !p.is_finite() {
            return Err(WorldError::OutOfBounds(p));
        }
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        if fx < 0.0 || fy < 0.0 || fx >= self.cols as f64 || fy >= self.rows as f64 {
            return Err(WorldError::OutOfBounds(p));
        }
        Ok(Cell::new(fy as usize, fx as usize))
    }

    /// World coordinates of the cell's minimum corner.
    pub fn cell_corner(&self, cell: Cell) -> Point {
        Point::new(
            self.origin.x + cell.col as f64 * self.resolution,
            self.origin.y + cell.row as f64 * self.resolution,
        )
    }

    pub fn cell_center(&self, cell: Cell) -> Point {
        Point::new(
            self.origin.x + (cell.col as f64 + 0.5) * self.resolution,
            self.origin.y + (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    /// Exact, case-sensitive lookup.
    pub fn landmark_position(&self, name: &str) -> Result<Point, WorldError> {
        self.landmark(name)
            .map(|lm| lm.position)
            .ok_or_else(|| WorldError::UnknownLandmark(name.to_string()))
    }

    pub fn landmark(&self, name: &str) -> Option<&Landmark> {
        self.landmarks.iter().find(|lm| lm.name == name)
    }

    /// Landmark whose position lies within `eps` of `p`.
    pub fn landmark_at(&self, p: Point, eps: f64) -> Option<&Landmark> {
        self.landmarks.iter().find(|lm| lm.position.distance(&p) <= eps)
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.rows)
            .flat_map(move |r| (0..self.cols).map(move |c| Cell::new(r, c)))
            .filter(|c| !self.is_occupied(*c))
    }

    /// Grid rendered as ASCII rows ('.' free, '#' occupied).
    pub fn grid_rows(&self) -> Vec<String> {
        self.occupied
            .chunks(self.cols.max(1))
            .map(|row| row.iter().map(|&o| if o { '#' } else { '.' }).collect())
            .collect()
    }

    pub fn to_document(&self) -> String {
        let doc = WorldDocument {
            id: self.id.clone(),
            resolution_m: self.resolution,
            origin: [self.origin.x, self.origin.y],
            grid: self.grid_rows(),
            landmarks: self
                .landmarks
                .iter()
                .map(|lm| LandmarkDocument {
                    name: lm.name.clone(),
                    x: lm.position.x,
                    y: lm.position.y,
                    attributes: lm.attributes.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("world document serializes")
    }
}

/// Parses and validates a world document.
pub fn load_world(source: &[u8]) -> Result<WorldMap, WorldError> {
    let doc: WorldDocument =
        serde_json::from_slice(source).map_err(|e| WorldError::Malformed(e.to_string()))?;
    let mut grid = Vec::with_capacity(doc.grid.len());
    for (row, line) in doc.grid.iter().enumerate() {
        let cells = line
            .chars()
            .map(|ch| match ch {
                '.' => Ok(false),
                '#' => Ok(true),
                other => Err(WorldError::BadGridChar { row, ch: other }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        grid.push(cells);
    }
    let landmarks = doc
        .landmarks
        .into_iter()
        .map(|lm| Landmark { name: lm.name, position: Point::new(lm.x, lm.y), attributes: lm.attributes })
        .collect();
    WorldMap::new(doc.id, doc.resolution_m, Point::new(doc.origin[0], doc.origin[1]), grid, landmarks)
}

pub fn load_world_file(path: impl AsRef<std::path::Path>) -> Result<WorldMap, WorldError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)
        .map_err(|e| WorldError::Malformed(format!("{}: {e}", path.display())))?;
    load_world(&bytes)
}
