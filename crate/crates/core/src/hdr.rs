//! Highest-density regions by Monte Carlo quantile estimation.
//!
//! Draw `m` points from the density, evaluate the density at each, and take
//! the `alpha` quantile of those values as the threshold `c_alpha`. The region
//! `{x : f(x) >= c_alpha}` then carries probability mass close to `1 - alpha`.
//! Regions are stored as a threshold plus the source density, never as a
//! geometric set, because they may be disconnected.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use crate::energy::Grid;
use crate::error::{invalid, Error, Result};
use crate::kde::DensityEstimate;

/// Default number of Monte Carlo draws.
pub const DEFAULT_MC_SAMPLES: usize = 10_000;

/// Smallest accepted number of Monte Carlo draws.
pub const MIN_MC_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct HdrRegion {
    threshold: f64,
    alpha: f64,
    mc_samples: usize,
    source: Arc<DensityEstimate>,
}

impl HdrRegion {
    /// Region with an explicitly chosen threshold.
    pub fn with_threshold(source: Arc<DensityEstimate>, alpha: f64, threshold: f64) -> Self {
        Self {
            threshold,
            alpha,
            mc_samples: 0,
            source,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mc_samples(&self) -> usize {
        self.mc_samples
    }

    pub fn source(&self) -> &Arc<DensityEstimate> {
        &self.source
    }

    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.source.evaluate(x)? >= self.threshold)
    }

    /// Membership of every cell center of `grid`, in cell-index order.
    pub fn membership(&self, grid: &Grid) -> Result<Vec<bool>> {
        check_grid(self, grid)?;
        Ok(grid
            .centers()
            .map(|c| self.source.eval_unchecked(&c) >= self.threshold)
            .collect())
    }
}

fn check_grid(region: &HdrRegion, grid: &Grid) -> Result<()> {
    if grid.dim() != region.source.dim() {
        return Err(Error::DimensionMismatch {
            expected: region.source.dim(),
            found: grid.dim(),
        });
    }
    if grid.cells().iter().any(|&c| c < 2) {
        return Err(invalid("grid extraction needs at least 2 cells per axis"));
    }
    Ok(())
}

pub fn estimate_hdr<R: Rng + ?Sized>(
    source: impl Into<Arc<DensityEstimate>>,
    alpha: f64,
    m: usize,
    rng: &mut R,
) -> Result<HdrRegion> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if m < MIN_MC_SAMPLES {
        return Err(invalid(format!(
            "HDR estimation needs at least {MIN_MC_SAMPLES} draws, got {m}"
        )));
    }
    let source = source.into();
    let mut values: Vec<f64> = (0..m)
        .map(|_| source.eval_unchecked(&source.draw_one(rng)))
        .collect();
    values.sort_by(f64::total_cmp);
    Ok(HdrRegion {
        threshold: quantile_sorted(&values, alpha),
        alpha,
        mc_samples: m,
        source,
    })
}

/// Type-7 quantile (linear interpolation between order statistics) of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = (n - 1) as f64 * q;
    let lo = libm::floor(pos) as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Indices of the grid cells whose centers lie inside the region.
pub fn grid_extract(region: &HdrRegion, grid: &Grid) -> Result<Vec<usize>> {
    Ok(region
        .membership(grid)?
        .into_iter()
        .enumerate()
        .filter_map(|(i, inside)| inside.then_some(i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::kernel::{Bandwidth, Kernel};
    use crate::rng::stream;
    use std::vec;

    fn single_1d() -> Arc<DensityEstimate> {
        Arc::new(
            DensityEstimate::build(
                vec![Point::from_slice(&[0.0]).unwrap()],
                Bandwidth::new(vec![1.0]).unwrap(),
                Kernel::Epanechnikov,
            )
            .unwrap(),
        )
    }

    /// Half-width `a` of the 50% HDR of the Epanechnikov density, found by
    /// bisection on the mass `(3a - a^3)/2 = 1/2`.
    fn half_mass_root() -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 3.0 * mid - mid * mid * mid < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn symmetric_half_region() {
        let a = half_mass_root();
        assert!((a - 0.34730).abs() < 1e-5);
        let r = estimate_hdr(single_1d(), 0.5, 10_000, &mut stream(3)).unwrap();
        // Threshold should sit near K(a).
        let expected = 0.75 * (1.0 - a * a);
        assert!((r.threshold() - expected).abs() < 0.01, "{}", r.threshold());
        assert!(r.contains(&[0.0]).unwrap());
        assert!(!r.contains(&[0.9]).unwrap());

        let grid = Grid::new(vec![-1.0], vec![1.0], vec![2001]).unwrap();
        let cells = grid_extract(&r, &grid).unwrap();
        let lo = grid.center(*cells.first().unwrap())[0];
        let hi = grid.center(*cells.last().unwrap())[0];
        assert!((lo + a).abs() < 0.01 && (hi - a).abs() < 0.01, "{lo} {hi}");
        // Contiguous for a unimodal density.
        assert_eq!(
            cells.len(),
            cells.last().unwrap() - cells.first().unwrap() + 1
        );
    }

    #[test]
    fn tiny_alpha_covers_almost_everything() {
        let f = single_1d();
        let r = estimate_hdr(f.clone(), 0.001, 100_000, &mut stream(4)).unwrap();
        let mut rng = stream(5);
        let fresh = f.draw(10_000, &mut rng);
        let inside = fresh.iter().filter(|x| r.contains(x).unwrap()).count();
        assert!(inside as f64 >= 0.99 * 10_000.0);
    }

    #[test]
    fn mode_is_inside() {
        let f = Arc::new(
            DensityEstimate::build(
                vec![
                    Point::from_slice(&[0.0, 0.0]).unwrap(),
                    Point::from_slice(&[0.7, 0.2]).unwrap(),
                    Point::from_slice(&[3.0, 1.0]).unwrap(),
                ],
                Bandwidth::new(vec![1.0, 0.8]).unwrap(),
                Kernel::Epanechnikov,
            )
            .unwrap(),
        );
        let m = f.mode(None);
        for alpha in [0.5, 0.7] {
            let r = estimate_hdr(f.clone(), alpha, 10_000, &mut stream(6)).unwrap();
            assert!(r.contains(&m).unwrap());
        }
        let r = estimate_hdr(f.clone(), 0.7, 10_000, &mut stream(6)).unwrap();
        assert!(!r.contains(&[20.0, 20.0]).unwrap());
    }

    #[test]
    fn threshold_above_max_gives_empty_grid() {
        let f = single_1d();
        let r = HdrRegion::with_threshold(f, 0.5, 10.0);
        let grid = Grid::new(vec![-1.0], vec![1.0], vec![100]).unwrap();
        assert!(grid_extract(&r, &grid).unwrap().is_empty());
        let too_coarse = Grid::new(vec![-1.0], vec![1.0], vec![1]).unwrap();
        assert!(grid_extract(&r, &too_coarse).is_err());
    }

    #[test]
    fn parameter_errors() {
        let f = single_1d();
        assert!(estimate_hdr(f.clone(), 0.0, 1000, &mut stream(1)).is_err());
        assert!(estimate_hdr(f.clone(), 1.0, 1000, &mut stream(1)).is_err());
        assert!(estimate_hdr(f, 0.5, 99, &mut stream(1)).is_err());
    }

    #[test]
    fn thresholds_monotone_and_deterministic() {
        let f = single_1d();
        let a = estimate_hdr(f.clone(), 0.3, 5_000, &mut stream(9)).unwrap();
        let b = estimate_hdr(f.clone(), 0.3, 5_000, &mut stream(9)).unwrap();
        assert_eq!(a.threshold().to_bits(), b.threshold().to_bits());
        let mut prev = 0.0;
        for alpha in [0.1, 0.3, 0.5, 0.7, 0.95] {
            let r = estimate_hdr(f.clone(), alpha, 5_000, &mut stream(9)).unwrap();
            assert!(r.threshold() >= prev);
            prev = r.threshold();
        }
    }

    #[test]
    fn quantile_type7() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert!((quantile_sorted(&v, 0.25) - 1.75).abs() < 1e-15);
    }
}
