use alloc::vec::Vec;

use super::{min_energy_path, EnergyField, FeasibilityMask, Grid, Lagrangian};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Metric, Point, Trajectory};

/// Relative slack used when comparing elapsed times against multiples of `dt`.
pub const TIME_EPS: f64 = 1e-9;

/// Positions on the lattice `start_time + k * dt`, `k = 0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensePath {
    start_time: f64,
    dt: f64,
    points: Vec<Point>,
}

impl DensePath {
    pub fn new(start_time: f64, dt: f64, points: Vec<Point>) -> Self {
        Self {
            start_time,
            dt,
            points,
        }
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.dt
    }

    pub fn get(&self, k: usize) -> Option<&Point> {
        self.points.get(k)
    }

    pub fn to_trajectory(&self) -> Result<Trajectory> {
        Trajectory::new(
            (0..self.len()).map(|k| self.time(k)).collect(),
            self.points.clone(),
        )
    }
}

fn gap_exceeds(gap: f64, dt: f64) -> bool {
    gap > dt * (1.0 + TIME_EPS)
}

/// Whether any consecutive pair is farther apart in time than `dt`.
pub fn needs_pathfinding(subtraj: &Trajectory, dt: f64) -> bool {
    subtraj
        .times()
        .windows(2)
        .any(|w| gap_exceeds(w[1] - w[0], dt))
}

/// Resamples `subtraj` onto the lattice anchored at its first timestamp.
///
/// For every gap longer than `dt`, `gap_path(j)` supplies a polyline from
/// `x_j` to `x_{j+1}` and lattice points are placed along it at constant
/// speed. Shorter gaps are linearly interpolated. A trailing remainder
/// shorter than `dt` is not emitted.
pub fn densify_by<F>(subtraj: &Trajectory, dt: f64, mut gap_path: F) -> Result<DensePath>
where
    F: FnMut(usize) -> Result<Vec<Point>>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt must be positive"));
    }
    let times = subtraj.times();
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    let steps = libm::floor(span / dt + TIME_EPS) as usize;
    let mut points = Vec::with_capacity(steps + 1);
    let mut gap = 0usize;
    let mut polyline: Option<(usize, Vec<Point>, Vec<f64>)> = None;

    for k in 0..=steps {
        let t = (t0 + k as f64 * dt).min(times[times.len() - 1]);
        while gap + 2 < times.len() && times[gap + 1] <= t {
            gap += 1;
        }
        if times.len() == 1 {
            points.push(subtraj.point(0).clone());
            continue;
        }
        let (ta, tb) = (times[gap], times[gap + 1]);
        let frac = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        if !gap_exceeds(tb - ta, dt) {
            points.push(subtraj.point(gap).lerp(subtraj.point(gap + 1), frac));
            continue;
        }
        if polyline.as_ref().map(|(g, _, _)| *g) != Some(gap) {
            let line = gap_path(gap)?;
            let cum = cumulative_lengths(&line);
            polyline = Some((gap, line, cum));
        }
        let (_, line, cum) = polyline.as_ref().expect("polyline set above");
        points.push(along(line, cum, frac));
    }
    Ok(DensePath::new(t0, dt, points))
}

fn cumulative_lengths(line: &[Point]) -> Vec<f64> {
    let mut cum = alloc::vec![0.0; line.len()];
    for i in 1..line.len() {
        cum[i] =
            cum[i - 1] + libm::sqrt(crate::geometry::squared_euclidean(&line[i - 1], &line[i]));
    }
    cum
}

/// Point at arc-length fraction `frac` of the polyline.
fn along(line: &[Point], cum: &[f64], frac: f64) -> Point {
    let total = cum[cum.len() - 1];
    if total == 0.0 || line.len() == 1 {
        return line[0].clone();
    }
    let target = frac * total;
    let seg = cum
        .partition_point(|&c| c < target)
        .clamp(1, line.len() - 1);
    let (c0, c1) = (cum[seg - 1], cum[seg]);
    let local = if c1 > c0 {
        (target - c0) / (c1 - c0)
    } else {
        0.0
    };
    line[seg - 1].lerp(&line[seg], local.clamp(0.0, 1.0))
}

/// Polyline from `a` to `b` through the interior cell centers of the
/// minimum-energy cell path. The endpoint cells are represented by the exact
/// endpoints so the polyline never doubles back inside them.
fn gap_polyline(
    field: &EnergyField,
    mask: &FeasibilityMask,
    a: &Point,
    b: &Point,
) -> Result<Vec<Point>> {
    let path = min_energy_path(field, mask, a, b)?;
    let n = path.points.len();
    let mut line = Vec::with_capacity(n.max(2));
    line.push(a.clone());
    if n > 2 {
        line.extend_from_slice(&path.points[1..n - 1]);
    }
    line.push(b.clone());
    Ok(line)
}

/// Densifies a sparse sub-trajectory along minimum-energy paths through `field`.
pub fn densify(
    subtraj: &Trajectory,
    field: &EnergyField,
    mask: &FeasibilityMask,
    dt: f64,
) -> Result<DensePath> {
    densify_by(subtraj, dt, |j| {
        gap_polyline(field, mask, subtraj.point(j), subtraj.point(j + 1))
    })
}

/// Reconstructs one path from `n` time-aligned noisy copies of it.
///
/// The least-squares integrand at an observation instant is minimized by the
/// pointwise mean of the copies, so the sparse skeleton is that mean. Each
/// gap is then filled by a minimum-energy path through the least-squares
/// field of the copies' observations bounding that gap. As `n` grows with
/// unbiased noise, the result approaches the underlying path.
pub fn densify_consensus(
    copies: &[Trajectory],
    sigma: f64,
    grid: &Grid,
    mask: Option<&FeasibilityMask>,
    dt: f64,
) -> Result<DensePath> {
    let first = copies.first().ok_or(Error::EmptyPointSet)?;
    let times = first.times();
    let d = first.dim();
    for c in copies {
        if c.times() != times {
            return Err(invalid("consensus copies must share their timestamps"));
        }
        if c.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: c.dim(),
            });
        }
    }
    let n = copies.len() as f64;
    let means: Vec<Point> = (0..times.len())
        .map(|i| {
            let mut m = alloc::vec![0.0; d];
            for c in copies {
                for (acc, v) in m.iter_mut().zip(c.point(i).iter()) {
                    *acc += v / n;
                }
            }
            Point::new(m)
        })
        .collect::<Result<_>>()?;
    let skeleton = Trajectory::new(times.to_vec(), means)?;
    let open_mask;
    let mask = match mask {
        Some(m) => m,
        None => {
            open_mask = FeasibilityMask::all_feasible(grid.clone());
            &open_mask
        }
    };
    densify_by(&skeleton, dt, |j| {
        let window: Vec<Point> = copies
            .iter()
            .flat_map(|c| [c.point(j).clone(), c.point(j + 1).clone()])
            .filter(|p| grid.contains(p))
            .collect();
        if window.is_empty() {
            return Ok(alloc::vec![
                skeleton.point(j).clone(),
                skeleton.point(j + 1).clone()
            ]);
        }
        let sigmas = alloc::vec![sigma; window.len()];
        let field = EnergyField::build(
            &window,
            &sigmas,
            Lagrangian::LeastSquares,
            grid.clone(),
            Metric::Euclidean,
        )?;
        gap_polyline(&field, mask, skeleton.point(j), skeleton.point(j + 1))
    })
}
