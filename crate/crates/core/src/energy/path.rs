use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{EnergyField, FeasibilityMask, Grid};
use crate::error::{invalid, Error, Result};
use crate::geometry::Point;

/// Minimum-energy route through the feasible cell graph.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyPath {
    /// Visited cells from the cell of `a` to the cell of `b`.
    pub cells: Vec<usize>,
    /// Cell centers of `cells`.
    pub points: Vec<Point>,
    /// Discretized line integral of the field along the route.
    pub cost: f64,
}

const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Copy)]
struct Entry {
    priority: f64,
    cell: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed so the max-heap pops the smallest priority, then the smallest index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

/// Neighbor offsets of the (3^d - 1)-connected lattice with their Euclidean lengths.
fn neighbor_offsets(grid: &Grid) -> Vec<(Vec<isize>, f64)> {
    let d = grid.dim();
    let mut out = Vec::new();
    let total = 3usize.pow(d as u32);
    for code in 0..total {
        let mut c = code;
        let mut off = alloc::vec![0isize; d];
        for o in off.iter_mut().rev() {
            *o = (c % 3) as isize - 1;
            c /= 3;
        }
        if off.iter().all(|&o| o == 0) {
            continue;
        }
        let len = libm::sqrt(
            off.iter()
                .zip(grid.widths())
                .map(|(&o, w)| (o as f64 * w) * (o as f64 * w))
                .sum(),
        );
        out.push((off, len));
    }
    out
}

fn edge_weight(field: &EnergyField, a: usize, b: usize, len: f64) -> f64 {
    0.5 * (field.value(a) + field.value(b)) * len
}

/// Shortest path between the cells of `a` and `b` on the 8-connected (2-d),
/// 26-connected (3-d) or generally (3^d - 1)-connected feasible cell graph.
/// Edge weight is the mean of the two cell values times the edge length.
///
/// Search is A* with the admissible heuristic `min(field) * |x - b|`, which
/// returns the same optimal cost as plain Dijkstra. Among equal-cost routes
/// the one hugging the segment `a -> b` is returned.
pub fn min_energy_path(
    field: &EnergyField,
    mask: &FeasibilityMask,
    a: &[f64],
    b: &[f64],
) -> Result<EnergyPath> {
    let grid = field.grid();
    if grid != mask.grid() {
        return Err(invalid("field and mask must share one grid"));
    }
    let start = grid.index_of(a).ok_or(Error::OutsideGrid)?;
    let goal = grid.index_of(b).ok_or(Error::OutsideGrid)?;
    if !mask.is_cell_feasible(start) || !mask.is_cell_feasible(goal) {
        return Err(Error::InfeasibleEndpoint);
    }

    let offsets = neighbor_offsets(grid);
    let floor = field
        .values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let goal_center = grid.center(goal);
    let heuristic = |cell: usize| -> f64 {
        if floor == 0.0 {
            0.0
        } else {
            floor
                * libm::sqrt(crate::geometry::squared_euclidean(
                    &grid.center(cell),
                    &goal_center,
                ))
        }
    };

    let n = grid.len();
    let mut dist = alloc::vec![f64::INFINITY; n];
    let mut parent = alloc::vec![usize::MAX; n];
    let mut closed = alloc::vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(Entry {
        priority: heuristic(start),
        cell: start,
    });
    let dims = grid.cells().to_vec();
    let mut coords = alloc::vec![0usize; dims.len()];
    let mut next = alloc::vec![0usize; dims.len()];

    let mut settle = f64::INFINITY;
    while let Some(Entry { priority, cell }) = heap.pop() {
        if closed[cell] {
            continue;
        }
        if closed[goal] && priority > settle {
            break;
        }
        closed[cell] = true;
        if cell == goal {
            settle = dist[goal] * (1.0 + TIE_TOL) + TIE_TOL;
        }
        coords.copy_from_slice(&grid.unravel(cell));
        'offsets: for (off, len) in &offsets {
            for j in 0..dims.len() {
                let v = coords[j] as isize + off[j];
                if v < 0 || v >= dims[j] as isize {
                    continue 'offsets;
                }
                next[j] = v as usize;
            }
            let nb = grid.ravel(&next);
            if closed[nb] || !mask.is_cell_feasible(nb) {
                continue;
            }
            let cand = dist[cell] + edge_weight(field, cell, nb, *len);
            if cand < dist[nb] {
                dist[nb] = cand;
                parent[nb] = cell;
                heap.push(Entry {
                    priority: cand + heuristic(nb),
                    cell: nb,
                });
            }
        }
    }
    if !closed[goal] {
        return Err(Error::NoPath);
    }

    let cells = backtrack(
        grid, &offsets, field, &closed, &dist, &parent, start, goal, a, b,
    );
    let points = cells
        .iter()
        .map(|&c| Point::new(grid.center(c)).expect("finite cell center"))
        .collect();
    Ok(EnergyPath {
        cells,
        points,
        cost: dist[goal],
    })
}

/// Walks back from `goal` along optimal predecessors. Among equal-cost
/// predecessors the one whose center lies closest to the segment `a -> b`
/// wins, so flat fields give near-straight routes instead of lattice zigzags.
#[allow(clippy::too_many_arguments)]
fn backtrack(
    grid: &Grid,
    offsets: &[(Vec<isize>, f64)],
    field: &EnergyField,
    closed: &[bool],
    dist: &[f64],
    parent: &[usize],
    start: usize,
    goal: usize,
    a: &[f64],
    b: &[f64],
) -> Vec<usize> {
    let dims = grid.cells();
    let mut cells = alloc::vec![goal];
    let mut cur = goal;
    while cur != start && cells.len() <= grid.len() {
        let coords = grid.unravel(cur);
        let slack = dist[cur] * TIE_TOL + TIE_TOL;
        let mut best = parent[cur];
        let mut best_key = (segment_distance(&grid.center(best), a, b), best);
        'offsets: for (off, len) in offsets {
            let mut next = coords.clone();
            for j in 0..dims.len() {
                let v = coords[j] as isize + off[j];
                if v < 0 || v >= dims[j] as isize {
                    continue 'offsets;
                }
                next[j] = v as usize;
            }
            let q = grid.ravel(&next);
            if !closed[q] || dist[q] >= dist[cur] {
                continue;
            }
            if dist[q] + edge_weight(field, q, cur, *len) > dist[cur] + slack {
                continue;
            }
            let key = (segment_distance(&grid.center(q), a, b), q);
            if key.0 < best_key.0 || (key.0 == best_key.0 && key.1 < best_key.1) {
                best = q;
                best_key = key;
            }
        }
        cur = best;
        cells.push(cur);
    }
    cells.reverse();
    cells
}

fn segment_distance(x: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: f64 = a.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum();
    let t = if ab == 0.0 {
        0.0
    } else {
        let dot: f64 = x
            .iter()
            .zip(a)
            .zip(b)
            .map(|((x, p), q)| (x - p) * (q - p))
            .sum();
        (dot / ab).clamp(0.0, 1.0)
    };
    let sq: f64 = x
        .iter()
        .zip(a)
        .zip(b)
        .map(|((x, p), q)| {
            let f = p + t * (q - p);
            (x - f) * (x - f)
        })
        .sum();
    libm::sqrt(sq)
}

/// Cost of a cell sequence under the same discretization as [`min_energy_path`].
pub fn path_cost(field: &EnergyField, cells: &[usize]) -> f64 {
    let grid = field.grid();
    cells
        .windows(2)
        .map(|w| {
            let len = libm::sqrt(crate::geometry::squared_euclidean(
                &grid.center(w[0]),
                &grid.center(w[1]),
            ));
            edge_weight(field, w[0], w[1], len)
        })
        .sum()
}

/// Cells visited by the straight segment `a -> b`, as a connected lattice
/// walk (each step moves at most one cell per axis).
pub fn straight_cell_path(grid: &Grid, a: &[f64], b: &[f64]) -> Option<Vec<usize>> {
    let start = grid.locate(a)?;
    let goal = grid.locate(b)?;
    let steps = start
        .iter()
        .zip(&goal)
        .map(|(s, g)| s.abs_diff(*g))
        .max()
        .unwrap_or(0);
    let mut cells: Vec<usize> = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = if steps == 0 {
            0.0
        } else {
            k as f64 / steps as f64
        };
        let c: Vec<usize> = start
            .iter()
            .zip(&goal)
            .map(|(&s, &g)| libm::round(s as f64 + t * (g as f64 - s as f64)) as usize)
            .collect();
        let idx = grid.ravel(&c);
        if cells.last() != Some(&idx) {
            cells.push(idx);
        }
    }
    Some(cells)
}
