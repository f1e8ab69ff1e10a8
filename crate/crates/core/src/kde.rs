//! Multivariate product-kernel density estimates.
//!
//! `f(x) = 1 / (N h_1 ... h_d) * sum_i prod_j K((x_j - c_ij) / h_j)`

use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::kernel::{Bandwidth, Kernel};

/// Number of best seeds refined by hill climbing in [`DensityEstimate::mode`].
pub const MODE_SEEDS: usize = 32;

/// Cap on pair-midpoint seeds, as a multiple of the number of centers.
const MIDPOINTS_PER_CENTER: usize = 16;

/// Hill climbing stops once the step falls below this fraction of `h_j`.
const MODE_STEP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    centers: Vec<Point>,
    bandwidth: Bandwidth,
    kernel: Kernel,
    norm: f64,
}

impl DensityEstimate {
    pub fn build(points: Vec<Point>, bandwidth: Bandwidth, kernel: Kernel) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let d = bandwidth.dim();
        if let Some(p) = points.iter().find(|p| p.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.dim(),
            });
        }
        let norm = 1.0 / (points.len() as f64 * bandwidth.product());
        Ok(Self {
            centers: points,
            bandwidth,
            kernel,
            norm,
        })
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn bandwidth(&self) -> &Bandwidth {
        &self.bandwidth
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn dim(&self) -> usize {
        self.bandwidth.dim()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let h = self.bandwidth.values();
        let mut sum = 0.0;
        for c in &self.centers {
            let mut prod = 1.0;
            for j in 0..h.len() {
                prod *= self.kernel.eval((x[j] - c[j]) / h[j]);
                if prod == 0.0 {
                    break;
                }
            }
            sum += prod;
        }
        sum * self.norm
    }

    /// `m` draws: a uniformly chosen center plus `h_j`-scaled kernel noise per axis.
    pub fn draw<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<Point> {
        (0..m).map(|_| self.draw_one(rng)).collect()
    }

    pub(crate) fn draw_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let c = &self.centers[rng.random_range(0..self.centers.len())];
        let coords = c
            .iter()
            .zip(self.bandwidth.values())
            .map(|(cj, hj)| cj + hj * self.kernel.sample(rng))
            .collect();
        // Finite centers and finite kernel draws give finite coordinates.
        Point::new(coords).expect("finite draw")
    }

    /// Axis-aligned box containing the support (or effective support for the
    /// Gaussian kernel).
    pub fn support_box(&self) -> (Vec<f64>, Vec<f64>) {
        let r = self.kernel.effective_radius();
        let h = self.bandwidth.values();
        let d = self.dim();
        let mut lo = alloc::vec![f64::INFINITY; d];
        let mut hi = alloc::vec![f64::NEG_INFINITY; d];
        for c in &self.centers {
            for j in 0..d {
                lo[j] = lo[j].min(c[j] - r * h[j]);
                hi[j] = hi[j].max(c[j] + r * h[j]);
            }
        }
        (lo, hi)
    }

    /// Unconstrained point estimator: the highest-density point found by
    /// hill climbing from the best seeds. Seeds are the centers, the midpoints
    /// of overlapping center pairs, and any extra `candidates`. Seeds are
    /// ranked by density, then lexicographically; a later climb must be
    /// strictly higher to replace an earlier one.
    pub fn mode(&self, candidates: Option<&[Point]>) -> Point {
        self.mode_where(candidates, |_| true)
            .expect("unconstrained mode search always has seeds")
    }

    /// Mode search restricted to points accepted by `feasible`; both seeds and
    /// hill-climbing iterates are filtered. `None` when no seed is feasible.
    pub fn mode_where<F>(&self, candidates: Option<&[Point]>, feasible: F) -> Option<Point>
    where
        F: Fn(&[f64]) -> bool,
    {
        let mut seeds: Vec<(f64, Vec<f64>)> = self
            .centers
            .iter()
            .chain(candidates.unwrap_or(&[]).iter())
            .filter(|p| p.dim() == self.dim())
            .map(|p| p.to_vec())
            .chain(self.pair_midpoints())
            .filter(|p| feasible(p))
            .map(|p| (self.eval_unchecked(&p), p))
            .collect();
        if seeds.is_empty() {
            return None;
        }
        seeds.sort_by(|a, b| rank(a.0, &a.1, b.0, &b.1));
        seeds.dedup_by(|a, b| a.1 == b.1);

        let mut best: Option<(f64, Vec<f64>)> = None;
        for (fx, seed) in seeds.into_iter().take(MODE_SEEDS) {
            let (fy, y) = self.hill_climb(seed, fx, &feasible);
            let better = match &best {
                None => true,
                Some((fb, _)) => fy > *fb,
            };
            if better {
                best = Some((fy, y));
            }
        }
        best.map(|(_, y)| Point::new(y).expect("finite iterate"))
    }

    /// Midpoints of center pairs whose kernel supports overlap, closest pairs
    /// first, at most `MIDPOINTS_PER_CENTER` per center on average.
    fn pair_midpoints(&self) -> Vec<Vec<f64>> {
        let h = self.bandwidth.values();
        let reach = 2.0 * self.kernel.effective_radius();
        let n = self.centers.len();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..n {
            for k in i + 1..n {
                let (a, b) = (&self.centers[i], &self.centers[k]);
                let mut d2 = 0.0;
                let mut overlap = true;
                for j in 0..h.len() {
                    let u = (a[j] - b[j]) / h[j];
                    if u.abs() >= reach {
                        overlap = false;
                        break;
                    }
                    d2 += u * u;
                }
                if overlap && d2 > 0.0 {
                    pairs.push((d2, i, k));
                }
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        pairs.truncate(MIDPOINTS_PER_CENTER * n);
        pairs
            .into_iter()
            .map(|(_, i, k)| {
                self.centers[i]
                    .iter()
                    .zip(self.centers[k].iter())
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect()
            })
            .collect()
    }

    /// Compass search over the axes and pairwise diagonals, scaled by `h`.
    /// A successful direction is repeated until it stops improving. The step
    /// starts at `h / 2` and is halved until below `h * MODE_STEP_TOL`.
    fn hill_climb<F>(&self, mut x: Vec<f64>, mut fx: f64, feasible: &F) -> (f64, Vec<f64>)
    where
        F: Fn(&[f64]) -> bool,
    {
        let h = self.bandwidth.values();
        let dirs = search_directions(x.len());
        let mut scale = 0.5;
        let mut trial = x.clone();
        while scale >= MODE_STEP_TOL {
            let mut improved = true;
            while improved {
                improved = false;
                for dir in &dirs {
                    loop {
                        for ((t, xi), (dj, hj)) in trial.iter_mut().zip(&x).zip(dir.iter().zip(h)) {
                            *t = xi + dj * scale * hj;
                        }
                        if !feasible(&trial) {
                            break;
                        }
                        let ft = self.eval_unchecked(&trial);
                        if ft <= fx {
                            break;
                        }
                        x.copy_from_slice(&trial);
                        fx = ft;
                        improved = true;
                    }
                }
            }
            scale *= 0.5;
        }
        (fx, x)
    }
}

/// Unit steps along every axis and every pairwise diagonal, both signs.
fn search_directions(d: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for j in 0..d {
        for s in [1.0, -1.0] {
            let mut v = alloc::vec![0.0; d];
            v[j] = s;
            dirs.push(v);
        }
    }
    for i in 0..d {
        for j in i + 1..d {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut v = alloc::vec![0.0; d];
                v[i] = si;
                v[j] = sj;
                dirs.push(v);
            }
        }
    }
    dirs
}

/// Higher density first, then lexicographically smaller coordinates.
fn rank(fa: f64, a: &[f64], fb: f64, b: &[f64]) -> Ordering {
    fb.total_cmp(&fa).then_with(|| lex_cmp(a, b))
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}
