//! Independent reference implementations used by integration tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::path::PathBuf;

/// Shared fixture directory; resolves from any crate in the workspace.
pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

/// Cost `straight + diagonal * sqrt(2)` as an exactly comparable pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Steps {
    pub straight: usize,
    pub diagonal: usize,
}

impl Steps {
    fn cost(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }
}

/// Dijkstra over an 8-connected grid (`true` = occupied). A diagonal step
/// needs both orthogonally adjacent cells free. Returns the step counts of a
/// shortest path.
pub fn dijkstra_steps(grid: &[Vec<bool>], start: (usize, usize), goal: (usize, usize)) -> Option<Steps> {
    let rows = grid.len();
    let cols = grid[0].len();
    let free = |r: i64, c: i64| r >= 0 && c >= 0 && (r as usize) < rows && (c as usize) < cols && !grid[r as usize][c as usize];
    if !free(start.0 as i64, start.1 as i64) || !free(goal.0 as i64, goal.1 as i64) {
        return None;
    }
    let mut best: Vec<Vec<Option<Steps>>> = vec![vec![None; cols]; rows];
    // Costs are scaled to integers for the heap key; ties are irrelevant
    // since only the optimal cost is read back.
    let key = |s: Steps| Reverse((s.cost() * 1e9) as u64);
    let mut heap = BinaryHeap::new();
    best[start.0][start.1] = Some(Steps { straight: 0, diagonal: 0 });
    heap.push((key(Steps { straight: 0, diagonal: 0 }), start.0, start.1, 0usize, 0usize));
    while let Some((_, r, c, s, d)) = heap.pop() {
        let here = Steps { straight: s, diagonal: d };
        if best[r][c].is_some_and(|b| b.cost() < here.cost()) {
            continue;
        }
        if (r, c) == goal {
            return Some(here);
        }
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if !free(nr, nc) {
                    continue;
                }
                let diagonal = dr != 0 && dc != 0;
                if diagonal && !(free(r as i64 + dr, c as i64) && free(r as i64, c as i64 + dc)) {
                    continue;
                }
                let next = if diagonal { Steps { straight: s, diagonal: d + 1 } } else { Steps { straight: s + 1, diagonal: d } };
                let (nr, nc) = (nr as usize, nc as usize);
                if best[nr][nc].is_none_or(|b| next.cost() < b.cost() - 1e-9) {
                    best[nr][nc] = Some(next);
                    heap.push((key(next), nr, nc, next.straight, next.diagonal));
                }
            }
        }
    }
    None
}

/// World document for a boolean grid with 1 m cells at the origin.
pub fn grid_document(id: &str, grid: &[Vec<bool>]) -> String {
    let rows: Vec<String> = grid.iter().map(|r| r.iter().map(|&o| if o { '#' } else { '.' }).collect()).collect();
    serde_json::json!({"id": id, "resolution_m": 1.0, "origin": [0.0, 0.0], "grid": rows}).to_string()
}

/// Straightforward left-to-right mean, summed in f64.
pub fn naive_mean(values: &[f64]) -> f64 {
    let mut total = 0.0;
    for v in values {
        total += v;
    }
    total / values.len() as f64
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
