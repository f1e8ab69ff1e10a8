//! Analogue forecasting.
//!
//! Stage 1 finds past entries into the `epsilon` ball around the current
//! position whose heading agrees with the current heading. Stage 2 takes the
//! forward time restriction of each match. Stage 3 densifies those onto a
//! common `dt` lattice. Stage 4 builds, for every future lattice offset, a
//! kernel density estimate of where the analogues were, its mode and its
//! highest-density region.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::energy::{
    build_field, densify, densify_by, needs_pathfinding, DensePath, EnergyField, FeasibilityMask,
    Grid, Lagrangian, SigmaSchedule, DEFAULT_GRID_CELLS, TIME_EPS,
};
use crate::error::{invalid, Error, Result};
use crate::geometry::{angle_distance, finite_difference_velocity, Metric, Point, Trajectory};
use crate::hdr::{estimate_hdr, HdrRegion, DEFAULT_MC_SAMPLES, MIN_MC_SAMPLES};
use crate::kde::DensityEstimate;
use crate::kernel::{Bandwidth, Kernel};
use crate::rng::substream;

/// Default `alpha`: the 70% highest-density region.
pub const DEFAULT_ALPHA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastConfig {
    pub epsilon: f64,
    pub theta: f64,
    pub dt: f64,
    pub horizon: f64,
    pub alpha: f64,
    pub bandwidth: Bandwidth,
    pub kernel: Kernel,
    pub lagrangian: Lagrangian,
    pub sigmas: SigmaSchedule,
    pub metric: Metric,
    pub mask: Option<FeasibilityMask>,
    /// Cells on the longest axis of the automatically sized field grid.
    /// Ignored when a mask is given; the mask grid is used instead.
    pub grid_cells: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl ForecastConfig {
    pub fn new(epsilon: f64, theta: f64, dt: f64, horizon: f64, bandwidth: Bandwidth) -> Self {
        Self {
            epsilon,
            theta,
            dt,
            horizon,
            alpha: DEFAULT_ALPHA,
            bandwidth,
            kernel: Kernel::default(),
            lagrangian: Lagrangian::default(),
            sigmas: SigmaSchedule::default(),
            metric: Metric::Euclidean,
            mask: None,
            grid_cells: DEFAULT_GRID_CELLS,
            mc_samples: DEFAULT_MC_SAMPLES,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(0.0..=2.0).contains(&self.theta) {
            return Err(invalid(format!(
                "theta must lie in [0, 2], got {}",
                self.theta
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(invalid(format!(
                "horizon T must be at least dt, got T = {} and dt = {}",
                self.horizon, self.dt
            )));
        }
        if self.grid_cells < 2 {
            return Err(invalid("grid_cells must be at least 2"));
        }
        if self.mc_samples < MIN_MC_SAMPLES {
            return Err(invalid(format!(
                "mc_samples must be at least {MIN_MC_SAMPLES}, got {}",
                self.mc_samples
            )));
        }
        Ok(())
    }

    /// Number of forecast steps, `ceil(T / dt)`.
    pub fn steps(&self) -> usize {
        horizon_steps(self.horizon, self.dt)
    }
}

pub fn horizon_steps(horizon: f64, dt: f64) -> usize {
    (libm::ceil(horizon / dt - TIME_EPS) as usize).max(1)
}

/// Matched start indices (0-based into the history) in increasing order.
/// The position in the list is the match ordinal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchSet {
    indices: Vec<usize>,
}

impl MatchSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `(ordinal, index)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.indices.iter().copied().enumerate()
    }
}

/// Stage 1. Index `i` (0-based, `1 <= i <= N - 2`) matches when it is the
/// first sample inside the `epsilon` ball, its heading is within `theta` of
/// the current heading, and more than `T` of history follows it.
pub fn collect_start_points(history: &Trajectory, cfg: &ForecastConfig) -> Result<MatchSet> {
    let n = history.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "matching needs at least 3 observations, got {n}"
        )));
    }
    cfg.metric.validate_dim(history.dim())?;
    let last = n - 1;
    let x_n = history.point(last);
    let t_n = history.time(last);
    let v_n = finite_difference_velocity(history, last)?;
    if v_n.is_zero() {
        log::warn!("current velocity is zero; heading undefined, no analogues possible");
        return Ok(MatchSet::default());
    }
    let mut indices = Vec::new();
    for i in 1..last {
        let d = cfg.metric.distance_unchecked(history.point(i), x_n);
        if !(d < cfg.epsilon) {
            continue;
        }
        if !(t_n - history.time(i) > cfg.horizon) {
            continue;
        }
        if cfg.metric.distance_unchecked(history.point(i - 1), x_n) < cfg.epsilon {
            continue;
        }
        let v_i = finite_difference_velocity(history, i)?;
        match angle_distance(&v_i, &v_n) {
            Ok(a) if a < cfg.theta => indices.push(i),
            Ok(_) => {}
            Err(_) => log::warn!("zero velocity at index {i}; candidate skipped"),
        }
    }
    Ok(MatchSet { indices })
}

/// Stage 2. Forward time restriction of each match: `x_k` for `k >= i` with
/// `t_k - t_i <= T`.
pub fn extract_subtrajectories(
    history: &Trajectory,
    matches: &MatchSet,
    horizon: f64,
) -> Vec<Trajectory> {
    let times = history.times();
    let slack = horizon * TIME_EPS;
    matches
        .indices()
        .iter()
        .map(|&i| {
            let t_i = times[i];
            let end = i + times[i..].partition_point(|&t| t - t_i <= horizon + slack);
            history.slice(i, end)
        })
        .collect()
}

/// Stage 4 input: the `offset`-th lattice point of every densified path long
/// enough to have one.
pub fn assemble_kde_inputs(paths: &[DensePath], offset: usize) -> Vec<Point> {
    paths
        .iter()
        .filter_map(|p| p.get(offset).cloned())
        .collect()
}

/// Mode restricted to feasible cells of `mask`.
///
/// Seeds are the feasible centers plus the feasible cell centers inside the
/// support box; hill-climbing iterates must stay feasible.
pub fn point_estimate_constrained(
    density: &DensityEstimate,
    mask: &FeasibilityMask,
) -> Result<Point> {
    let grid = mask.grid();
    if grid.dim() != density.dim() {
        return Err(Error::DimensionMismatch {
            expected: density.dim(),
            found: grid.dim(),
        });
    }
    let (lo, hi) = density.support_box();
    let candidates: Vec<Point> = cells_in_box(grid, &lo, &hi)
        .into_iter()
        .filter(|&c| mask.is_cell_feasible(c))
        .map(|c| Point::new(grid.center(c)).expect("finite cell center"))
        .collect();
    let best = density
        .mode_where(Some(&candidates), |x| mask.is_feasible(x))
        .ok_or(Error::InfeasibleSupport)?;
    if density.eval_unchecked(&best) > 0.0 {
        Ok(best)
    } else {
        Err(Error::InfeasibleSupport)
    }
}

/// Indices of all cells whose index range intersects `[lo, hi]`.
fn cells_in_box(grid: &Grid, lo: &[f64], hi: &[f64]) -> Vec<usize> {
    let d = grid.dim();
    let mut first = Vec::with_capacity(d);
    let mut last = Vec::with_capacity(d);
    for j in 0..d {
        let to_index = |x: f64| {
            let u = libm::floor((x - grid.lower()[j]) / grid.widths()[j]);
            u.clamp(0.0, (grid.cells()[j] - 1) as f64) as usize
        };
        if hi[j] < grid.lower()[j] || lo[j] > grid.upper()[j] {
            return Vec::new();
        }
        first.push(to_index(lo[j]));
        last.push(to_index(hi[j]));
    }
    let mut out = Vec::new();
    let mut idx = first.clone();
    loop {
        out.push(grid.ravel(&idx));
        let mut j = d;
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            if idx[j] < last[j] {
                idx[j] += 1;
                break;
            }
            idx[j] = first[j];
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepEstimate {
    pub prediction: Point,
    pub region: HdrRegion,
    pub support_count: usize,
}

impl StepEstimate {
    pub fn density(&self) -> &Arc<DensityEstimate> {
        self.region.source()
    }
}

/// One lattice offset `k >= 1` at time `t_N + k dt`. `estimate` is `None`
/// when no densified path reached this offset.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastStep {
    pub offset: usize,
    pub time: f64,
    pub estimate: Option<StepEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub matches: MatchSet,
    pub steps: Vec<ForecastStep>,
    /// Matched paths discarded because densification failed.
    pub dropped_paths: usize,
}

impl Forecast {
    pub fn present(&self) -> impl Iterator<Item = (&ForecastStep, &StepEstimate)> {
        self.steps
            .iter()
            .filter_map(|s| s.estimate.as_ref().map(|e| (s, e)))
    }
}

/// Bounding box of the history, padded by 5% of the extent (at least `pad`)
/// on every side.
fn padded_grid(history: &Trajectory, longest: usize, pad: f64) -> Result<Grid> {
    let d = history.dim();
    let mut lo = alloc::vec![f64::INFINITY; d];
    let mut hi = alloc::vec![f64::NEG_INFINITY; d];
    for p in history.points() {
        for j in 0..d {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    for j in 0..d {
        let m = (0.05 * (hi[j] - lo[j])).max(pad);
        lo[j] -= m;
        hi[j] += m;
    }
    Grid::with_longest_axis(lo, hi, longest)
}

/// The full forecast from the end of `history`.
pub fn run_forecast(history: &Trajectory, cfg: &ForecastConfig) -> Result<Forecast> {
    cfg.validate()?;
    if cfg.bandwidth.dim() != history.dim() {
        return Err(Error::DimensionMismatch {
            expected: history.dim(),
            found: cfg.bandwidth.dim(),
        });
    }
    if let Some(mask) = &cfg.mask {
        if mask.grid().dim() != history.dim() {
            return Err(Error::DimensionMismatch {
                expected: history.dim(),
                found: mask.grid().dim(),
            });
        }
    }

    let matches = collect_start_points(history, cfg)?;
    if matches.is_empty() {
        return Err(Error::NoAnalogues {
            epsilon: cfg.epsilon,
            theta: cfg.theta,
            horizon: cfg.horizon,
        });
    }

    let subs = extract_subtrajectories(history, &matches, cfg.horizon);
    let paths = densify_all(history, &subs, cfg)?;
    let dropped_paths = subs.len() - paths.len();

    let t_n = history.time(history.len() - 1);
    let steps = (1..=cfg.steps())
        .map(|k| {
            Ok(ForecastStep {
                offset: k,
                time: t_n + k as f64 * cfg.dt,
                estimate: estimate_step(&paths, k, cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Forecast {
        matches,
        steps,
        dropped_paths,
    })
}

fn densify_all(
    history: &Trajectory,
    subs: &[Trajectory],
    cfg: &ForecastConfig,
) -> Result<Vec<DensePath>> {
    let mut field: Option<(EnergyField, FeasibilityMask)> = None;
    let mut out = Vec::with_capacity(subs.len());
    for sub in subs {
        if !needs_pathfinding(sub, cfg.dt) {
            out.push(densify_by(sub, cfg.dt, |_| {
                Err(invalid("no gap needs a path"))
            })?);
            continue;
        }
        if field.is_none() {
            let mask = match &cfg.mask {
                Some(m) => m.clone(),
                None => FeasibilityMask::all_feasible(padded_grid(
                    history,
                    cfg.grid_cells,
                    cfg.epsilon,
                )?),
            };
            let f = build_field(
                history,
                cfg.lagrangian,
                &cfg.sigmas,
                mask.grid().clone(),
                cfg.metric,
            )?;
            field = Some((f, mask));
        }
        let (f, mask) = field.as_ref().expect("field built above");
        match densify(sub, f, mask, cfg.dt) {
            Ok(p) => out.push(p),
            Err(e) => log::warn!("dropping matched path starting at t = {}: {e}", sub.time(0)),
        }
    }
    Ok(out)
}

fn estimate_step(
    paths: &[DensePath],
    k: usize,
    cfg: &ForecastConfig,
) -> Result<Option<StepEstimate>> {
    let support = assemble_kde_inputs(paths, k);
    if support.is_empty() {
        log::warn!("{}", Error::NoSupport(k));
        return Ok(None);
    }
    let support_count = support.len();
    let density = Arc::new(DensityEstimate::build(
        support,
        cfg.bandwidth.clone(),
        cfg.kernel,
    )?);
    let prediction = match &cfg.mask {
        None => density.mode(None),
        Some(mask) => match point_estimate_constrained(&density, mask) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("step {k}: {e}");
                return Ok(None);
            }
        },
    };
    let region = estimate_hdr(
        density,
        cfg.alpha,
        cfg.mc_samples,
        &mut substream(cfg.seed, k as u64),
    )?;
    Ok(Some(StepEstimate {
        prediction,
        region,
        support_count,
    }))
}
