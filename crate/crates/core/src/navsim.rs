//! Deterministic point-robot navigation over the occupancy grid.
//!
//! Paths are 8-connected; a diagonal step is only allowed when both
//! orthogonal cells it passes between are free (no corner cutting).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{Cell, Point, WorldMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub cells: Vec<Cell>,
    /// Cell centers, one per entry of `cells`.
    pub waypoints: Vec<Point>,
    pub straight_steps: usize,
    pub diagonal_steps: usize,
    /// Meters.
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("start {0} is outside the map")]
    StartOutOfBounds(Point),
    #[error("goal {0} is outside the map")]
    GoalOutOfBounds(Point),
    #[error("start {0} is on an occupied cell")]
    StartOccupied(Point),
    #[error("goal {0} is on an occupied cell")]
    GoalOccupied(Point),
    #[error("no path from {0} to {1}")]
    NoPath(Point, Point),
}

/// Per-run planning adjustments; never written back to the map.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlannerOptions {
    /// Cells whose center lies within this distance of an occupied cell's
    /// center are treated as occupied. 0 disables inflation.
    #[serde(default)]
    pub inflation_radius_m: f64,
    /// Temporarily blocked cells (small dynamic obstacles).
    #[serde(default)]
    pub blocked: Vec<Cell>,
}

/// Passability view of a map under a set of planner options.
pub struct Occupancy<'a> {
    map: &'a WorldMap,
    blocked: Vec<bool>,
}

impl<'a> Occupancy<'a> {
    pub fn new(map: &'a WorldMap, opts: &PlannerOptions) -> Self {
        let (rows, cols) = (map.rows(), map.cols());
        let mut blocked = vec![false; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                blocked[r * cols + c] = map.is_occupied(Cell::new(r, c));
            }
        }
        if opts.inflation_radius_m > 0.0 {
            let reach = (opts.inflation_radius_m / map.resolution()).floor() as isize;
            let limit = opts.inflation_radius_m / map.resolution();
            let base = blocked.clone();
            for r in 0..rows as isize {
                for c in 0..cols as isize {
                    if !base[r as usize * cols + c as usize] {
                        continue;
                    }
                    for dr in -reach..=reach {
                        for dc in -reach..=reach {
                            let (nr, nc) = (r + dr, c + dc);
                            if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                                continue;
                            }
                            if ((dr * dr + dc * dc) as f64).sqrt() <= limit {
                                blocked[nr as usize * cols + nc as usize] = true;
                            }
                        }
                    }
                }
            }
        }
        for cell in &opts.blocked {
            if map.in_grid(*cell) {
                blocked[cell.row * cols + cell.col] = true;
            }
        }
        Self { map, blocked }
    }

    pub fn map(&self) -> &WorldMap {
        self.map
    }

    pub fn passable(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.map.rows()
            && (col as usize) < self.map.cols()
            && !self.blocked[row as usize * self.map.cols() + col as usize]
    }

    /// Legal moves from `cell`: (neighbor, is_diagonal).
    pub fn moves(&self, cell: Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
        const DIRS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        let (r, c) = (cell.row as isize, cell.col as isize);
        DIRS.iter().filter_map(move |&(dr, dc)| {
            let (nr, nc) = (r + dr, c + dc);
            if !self.passable(nr, nc) {
                return None;
            }
            let diagonal = dr != 0 && dc != 0;
            if diagonal && !(self.passable(r + dr, c) && self.passable(r, c + dc)) {
                return None;
            }
            Some((Cell::new(nr as usize, nc as usize), diagonal))
        })
    }
}

fn octile(a: Cell, b: Cell) -> f64 {
    let dr = a.row.abs_diff(b.row);
    let dc = a.col.abs_diff(b.col);
    let (lo, hi) = if dr < dc { (dr, dc) } else { (dc, dr) };
    (hi - lo) as f64 + lo as f64 * SQRT_2
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    g: f64,
    cell: Cell,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // BinaryHeap is a max-heap: invert so the smallest (f, h, row, col) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

pub fn plan_path(map: &WorldMap, start: Point, goal: Point) -> Result<Path, PlanError> {
    plan_path_with(&Occupancy::new(map, &PlannerOptions::default()), start, goal)
}

/// A* with the octile heuristic. Step costs are 1 (straight) and √2
/// (diagonal) in cell units; ties pop by smaller heuristic, then smaller
/// (row, col).
pub fn plan_path_with(occ: &Occupancy<'_>, start: Point, goal: Point) -> Result<Path, PlanError> {
    let map = occ.map();
    let s = map.world_to_cell(start).map_err(|_| PlanError::StartOutOfBounds(start))?;
    let g = map.world_to_cell(goal).map_err(|_| PlanError::GoalOutOfBounds(goal))?;
    if !occ.passable(s.row as isize, s.col as isize) {
        return Err(PlanError::StartOccupied(start));
    }
    if !occ.passable(g.row as isize, g.col as isize) {
        return Err(PlanError::GoalOccupied(goal));
    }

    let cols = map.cols();
    let idx = |c: Cell| c.row * cols + c.col;
    let n = map.rows() * cols;
    let mut best_g = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<(Cell, bool)>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    best_g[idx(s)] = 0.0;
    let h0 = octile(s, g);
    open.push(OpenEntry { f: h0, h: h0, g: 0.0, cell: s });

    while let Some(entry) = open.pop() {
        let cur = entry.cell;
        if closed[idx(cur)] {
            continue;
        }
        closed[idx(cur)] = true;
        if cur == g {
            return Ok(reconstruct(map, &parent, s, g));
        }
        for (next, diagonal) in occ.moves(cur) {
            if closed[idx(next)] {
                continue;
            }
            let tentative = entry.g + if diagonal { SQRT_2 } else { 1.0 };
            if tentative < best_g[idx(next)] {
                best_g[idx(next)] = tentative;
                parent[idx(next)] = Some((cur, diagonal));
                let h = octile(next, g);
                open.push(OpenEntry { f: tentative + h, h, g: tentative, cell: next });
            }
        }
    }
    Err(PlanError::NoPath(start, goal))
}

fn reconstruct(map: &WorldMap, parent: &[Option<(Cell, bool)>], start: Cell, goal: Cell) -> Path {
    let cols = map.cols();
    let mut cells = vec![goal];
    let (mut straight, mut diagonal) = (0, 0);
    let mut cur = goal;
    while cur != start {
        let (prev, diag) = parent[cur.row * cols + cur.col].expect("parent chain reaches start");
        if diag {
            diagonal += 1;
        } else {
            straight += 1;
        }
        cells.push(prev);
        cur = prev;
    }
    cells.reverse();
    Path {
        waypoints: cells.iter().map(|c| map.cell_center(*c)).collect(),
        cells,
        straight_steps: straight,
        diagonal_steps: diagonal,
        length: path_length(map.resolution(), straight, diagonal),
    }
}

/// Metric length of a path with the given step counts.
pub fn path_length(resolution: f64, straight: usize, diagonal: usize) -> f64 {
    resolution * (straight as f64 + diagonal as f64 * SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub goal: Point,
    pub reached: bool,
    pub path_length: f64,
    pub leg_time: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waypoints: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavigationOutcome {
    pub legs: Vec<Leg>,
    /// Seconds.
    pub motion_duration: f64,
    pub all_reached: bool,
}

/// Drives through `goals` in order. Navigation stops at the first
/// unreachable goal; that leg and all later ones are marked unreached with
/// zero time.
pub fn execute_goals(map: &WorldMap, start: Point, goals: &[Point], speed: f64) -> NavigationOutcome {
    execute_goals_with(&Occupancy::new(map, &PlannerOptions::default()), start, goals, speed)
}

pub fn execute_goals_with(occ: &Occupancy<'_>, start: Point, goals: &[Point], speed: f64) -> NavigationOutcome {
    assert!(speed > 0.0 && speed.is_finite(), "speed must be positive, got {speed}");
    let mut legs = Vec::with_capacity(goals.len());
    let mut here = start;
    let mut stopped = false;
    for &goal in goals {
        if stopped {
            legs.push(Leg { goal, reached: false, path_length: 0.0, leg_time: 0.0, waypoints: vec![], failure: None });
            continue;
        }
        match plan_path_with(occ, here, goal) {
            Ok(path) => {
                legs.push(Leg {
                    goal,
                    reached: true,
                    path_length: path.length,
                    leg_time: path.length / speed,
                    waypoints: path.waypoints,
                    failure: None,
                });
                here = goal;
            }
            Err(e) => {
                stopped = true;
                legs.push(Leg {
                    goal,
                    reached: false,
                    path_length: 0.0,
                    leg_time: 0.0,
                    waypoints: vec![],
                    failure: Some(e.to_string()),
                });
            }
        }
    }
    let motion_duration = legs.iter().filter(|l| l.reached).map(|l| l.leg_time).sum();
    NavigationOutcome { all_reached: !stopped, motion_duration, legs }
}

/// Writes one `{"leg", "goal", "reached", "waypoints"}` line per leg.
pub fn write_path_dump(mut out: impl Write, outcome: &NavigationOutcome) -> std::io::Result<()> {
    for (i, leg) in outcome.legs.iter().enumerate() {
        let line = serde_json::json!({
            "leg": i,
            "goal": leg.goal,
            "reached": leg.reached,
            "waypoints": leg.waypoints,
        });
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Goal list in the `[[x, y], ...]` form shared with model output.
pub fn export_goal_list(goals: &[Point]) -> String {
    serde_json::to_string(goals).expect("points serialize")
}
