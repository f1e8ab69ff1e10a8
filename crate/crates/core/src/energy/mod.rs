//! Estimated-Lagrangian cost fields, feasibility masks, minimum-energy paths
//! and uniform-in-time densification of sparse sub-trajectories.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::geometry::{Metric, Point, Trajectory};

mod densify;
mod grid;
mod path;

pub use densify::{densify, densify_by, densify_consensus, needs_pathfinding, DensePath, TIME_EPS};
pub use grid::Grid;
pub use path::{min_energy_path, path_cost, straight_cell_path, EnergyPath};

/// Default number of cells along the longest grid axis.
pub const DEFAULT_GRID_CELLS: usize = 200;

/// Gaussian well terms with `d^2 / (2 sigma^2)` above this are dropped; the
/// skipped contribution is below f64 resolution next to the unit terms.
const WELL_CUTOFF_EXPONENT: f64 = 40.0;

/// Which Lagrangian estimate the field is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Lagrangian {
    /// `sum_i (1 - exp(-d(x, x_i)^2 / (2 sigma_i^2)) / sqrt(2 pi sigma_i^2))`
    #[default]
    GaussianWells,
    /// `sum_i d(x, x_i)^2 / sigma_i`
    LeastSquares,
}

impl Lagrangian {
    pub fn name(self) -> &'static str {
        match self {
            Lagrangian::GaussianWells => "gaussian_wells",
            Lagrangian::LeastSquares => "least_squares",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "gaussian_wells" => Ok(Lagrangian::GaussianWells),
            "least_squares" => Ok(Lagrangian::LeastSquares),
            other => Err(invalid(format!("unknown lagrangian `{other}`"))),
        }
    }
}

/// Per-observation well widths.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaSchedule {
    Constant(f64),
    /// `sigma_i = base + rate * (t_i - t_first)`: widths grow with observation
    /// time, a continuous analogue of pheromone routing.
    Pheromone {
        base: f64,
        rate: f64,
    },
    PerObservation(Vec<f64>),
}

impl Default for SigmaSchedule {
    fn default() -> Self {
        SigmaSchedule::Constant(1.0)
    }
}

impl SigmaSchedule {
    pub fn resolve(&self, times: &[f64]) -> Result<Vec<f64>> {
        let sigmas: Vec<f64> = match self {
            SigmaSchedule::Constant(s) => alloc::vec![*s; times.len()],
            SigmaSchedule::Pheromone { base, rate } => {
                if *rate < 0.0 {
                    return Err(invalid("pheromone rate must be nonnegative"));
                }
                let t0 = times.first().copied().unwrap_or(0.0);
                times.iter().map(|t| base + rate * (t - t0)).collect()
            }
            SigmaSchedule::PerObservation(v) => {
                if v.len() != times.len() {
                    return Err(invalid("one sigma per history observation is required"));
                }
                v.clone()
            }
        };
        if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid("sigmas must be positive and finite"));
        }
        Ok(sigmas)
    }
}

/// Feasible region on a grid: a cell is either usable by paths or forbidden.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityMask {
    grid: Grid,
    feasible: Vec<bool>,
}

impl FeasibilityMask {
    pub fn new(grid: Grid, feasible: Vec<bool>) -> Result<Self> {
        if feasible.len() != grid.len() {
            return Err(invalid(format!(
                "mask has {} cells, grid has {}",
                feasible.len(),
                grid.len()
            )));
        }
        if !feasible.iter().any(|&f| f) {
            return Err(invalid("mask needs at least one feasible cell"));
        }
        Ok(Self { grid, feasible })
    }

    pub fn all_feasible(grid: Grid) -> Self {
        let n = grid.len();
        Self {
            grid,
            feasible: alloc::vec![true; n],
        }
    }

    /// Mask whose cells are feasible where `pred(cell_center)` holds.
    pub fn from_fn(grid: Grid, pred: impl Fn(&[f64]) -> bool) -> Result<Self> {
        let feasible = grid.centers().map(|c| pred(&c)).collect();
        Self::new(grid, feasible)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cells(&self) -> &[bool] {
        &self.feasible
    }

    pub fn is_cell_feasible(&self, index: usize) -> bool {
        self.feasible[index]
    }

    /// Whether `x` lies in a feasible cell; points outside the grid are infeasible.
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.grid
            .index_of(x)
            .map(|i| self.feasible[i])
            .unwrap_or(false)
    }
}

/// Gridded estimate of the Lagrangian, evaluated at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyField {
    kind: Lagrangian,
    grid: Grid,
    values: Vec<f64>,
    history: Vec<Point>,
    sigmas: Vec<f64>,
}

/// Builds a field from a history trajectory, resolving widths from `schedule`.
pub fn build_field(
    history: &Trajectory,
    kind: Lagrangian,
    schedule: &SigmaSchedule,
    grid: Grid,
    metric: Metric,
) -> Result<EnergyField> {
    let sigmas = schedule.resolve(history.times())?;
    EnergyField::build(history.points(), &sigmas, kind, grid, metric)
}

impl EnergyField {
    pub fn build(
        history: &[Point],
        sigmas: &[f64],
        kind: Lagrangian,
        grid: Grid,
        metric: Metric,
    ) -> Result<Self> {
        if history.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if sigmas.len() != history.len() {
            return Err(invalid("one sigma per history point is required"));
        }
        if sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid("sigmas must be positive and finite"));
        }
        metric.validate_dim(grid.dim())?;
        for p in history {
            if p.dim() != grid.dim() {
                return Err(Error::DimensionMismatch {
                    expected: grid.dim(),
                    found: p.dim(),
                });
            }
            if !grid.contains(p) {
                return Err(Error::OutsideGrid);
            }
        }
        if kind == Lagrangian::GaussianWells {
            // A well deeper than 1 would make the Lagrangian negative.
            let min_sigma = 1.0 / libm::sqrt(2.0 * PI);
            if let Some(s) = sigmas.iter().find(|s| **s < min_sigma) {
                return Err(invalid(format!(
                    "gaussian well sigma {s} is below 1/sqrt(2 pi); the field would go negative"
                )));
            }
        }
        let values = match (kind, metric) {
            (Lagrangian::GaussianWells, Metric::Euclidean) => {
                wells_euclidean(history, sigmas, &grid)
            }
            (Lagrangian::LeastSquares, Metric::Euclidean) => {
                least_squares_euclidean(history, sigmas, &grid)
            }
            _ => direct_values(history, sigmas, kind, metric, &grid),
        };
        Ok(Self {
            kind,
            grid,
            values,
            history: history.to_vec(),
            sigmas: sigmas.to_vec(),
        })
    }

    pub fn kind(&self) -> Lagrangian {
        self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn history(&self) -> &[Point] {
        &self.history
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// Field value of the cell containing `x`.
    pub fn value_at(&self, x: &[f64]) -> Option<f64> {
        self.grid.index_of(x).map(|i| self.values[i])
    }

    /// Field with the given values on `grid`. Values must be finite and nonnegative.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid("one value per grid cell is required"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("field values must be finite and nonnegative"));
        }
        Ok(Self {
            kind: Lagrangian::LeastSquares,
            grid,
            values,
            history: Vec::new(),
            sigmas: Vec::new(),
        })
    }
}

fn term(kind: Lagrangian, d2: f64, sigma: f64) -> f64 {
    match kind {
        Lagrangian::GaussianWells => {
            1.0 - libm::exp(-d2 / (2.0 * sigma * sigma)) / libm::sqrt(2.0 * PI * sigma * sigma)
        }
        Lagrangian::LeastSquares => d2 / sigma,
    }
}

fn direct_values(
    history: &[Point],
    sigmas: &[f64],
    kind: Lagrangian,
    metric: Metric,
    grid: &Grid,
) -> Vec<f64> {
    grid.centers()
        .map(|c| {
            history
                .iter()
                .zip(sigmas)
                .map(|(p, s)| {
                    let d = metric.distance_unchecked(&c, p);
                    term(kind, d * d, *s)
                })
                .sum()
        })
        .collect()
}

/// `N - sum_i w_i exp(...)`, visiting only cells within the cutoff radius of
/// each history point.
fn wells_euclidean(history: &[Point], sigmas: &[f64], grid: &Grid) -> Vec<f64> {
    let d = grid.dim();
    let mut depth = alloc::vec![0.0; grid.len()];
    let mut lo = alloc::vec![0usize; d];
    let mut hi = alloc::vec![0usize; d];
    let mut cur = alloc::vec![0usize; d];
    for (p, &s) in history.iter().zip(sigmas) {
        let radius = s * libm::sqrt(2.0 * WELL_CUTOFF_EXPONENT);
        let weight = 1.0 / libm::sqrt(2.0 * PI * s * s);
        for j in 0..d {
            let w = grid.widths()[j];
            let l = libm::floor((p[j] - radius - grid.lower()[j]) / w);
            let h = libm::floor((p[j] + radius - grid.lower()[j]) / w);
            lo[j] = l.max(0.0) as usize;
            hi[j] = (h.max(0.0) as usize).min(grid.cells()[j] - 1);
        }
        cur.copy_from_slice(&lo);
        loop {
            let center = grid.center_of(&cur);
            let d2 = crate::geometry::squared_euclidean(&center, p);
            let e = d2 / (2.0 * s * s);
            if e <= WELL_CUTOFF_EXPONENT {
                depth[grid.ravel(&cur)] += weight * libm::exp(-e);
            }
            if !advance(&mut cur, &lo, &hi) {
                break;
            }
        }
    }
    let n = history.len() as f64;
    depth.into_iter().map(|s| (n - s).max(0.0)).collect()
}

/// Odometer increment over the box `[lo, hi]`; false once exhausted.
fn advance(cur: &mut [usize], lo: &[usize], hi: &[usize]) -> bool {
    for j in (0..cur.len()).rev() {
        if cur[j] < hi[j] {
            cur[j] += 1;
            return true;
        }
        cur[j] = lo[j];
    }
    false
}

/// `sum_i w_i |x - x_i|^2` expanded into moments about the history mean.
fn least_squares_euclidean(history: &[Point], sigmas: &[f64], grid: &Grid) -> Vec<f64> {
    let d = grid.dim();
    let n = history.len() as f64;
    let mut mean = alloc::vec![0.0; d];
    for p in history {
        for j in 0..d {
            mean[j] += p[j] / n;
        }
    }
    let mut w_sum = 0.0;
    let mut first = alloc::vec![0.0; d];
    let mut second = 0.0;
    for (p, &s) in history.iter().zip(sigmas) {
        let w = 1.0 / s;
        w_sum += w;
        for j in 0..d {
            let c = p[j] - mean[j];
            first[j] += w * c;
            second += w * c * c;
        }
    }
    grid.centers()
        .map(|x| {
            let mut quad = 0.0;
            let mut lin = 0.0;
            for j in 0..d {
                let c = x[j] - mean[j];
                quad += c * c;
                lin += c * first[j];
            }
            (w_sum * quad - 2.0 * lin + second).max(0.0)
        })
        .collect()
}
