//! One-dimensional kernels and per-axis bandwidths.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::geometry::Point;

/// A symmetric one-dimensional probability density used as a KDE building block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    /// `(3/4)(1 - u^2)` on `[-1, 1]`.
    #[default]
    Epanechnikov,
    /// Standard normal density.
    Gaussian,
}

impl Kernel {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if (-1.0..=1.0).contains(&u) {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => libm::exp(-0.5 * u * u) / libm::sqrt(2.0 * PI),
        }
    }

    /// Closed support interval, or `None` when the kernel is positive everywhere.
    pub fn support(self) -> Option<(f64, f64)> {
        match self {
            Kernel::Epanechnikov => Some((-1.0, 1.0)),
            Kernel::Gaussian => None,
        }
    }

    /// Half-width beyond which the kernel is treated as zero when bounding
    /// search regions. Exact for Epanechnikov.
    pub fn effective_radius(self) -> f64 {
        match self {
            Kernel::Epanechnikov => 1.0,
            Kernel::Gaussian => 8.0,
        }
    }

    /// One draw from the kernel density.
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                // Three-uniform selection: exact and rejection-free.
                let u1: f64 = rng.random_range(-1.0..=1.0);
                let u2: f64 = rng.random_range(-1.0..=1.0);
                let u3: f64 = rng.random_range(-1.0..=1.0);
                if u3.abs() >= u1.abs() && u3.abs() >= u2.abs() {
                    u2
                } else {
                    u3
                }
            }
            Kernel::Gaussian => StandardNormal.sample(rng),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Gaussian => "gaussian",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "gaussian" => Ok(Kernel::Gaussian),
            other => Err(invalid(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Per-coordinate smoothing scales `h = (h_1, ..., h_d)`, all positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Bandwidth(Vec<f64>);

impl Bandwidth {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(invalid("bandwidth needs at least one component"));
        }
        if h.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(invalid("bandwidth components must be positive and finite"));
        }
        Ok(Self(h))
    }

    /// The same bandwidth `h` on each of `dim` axes.
    pub fn isotropic(h: f64, dim: usize) -> Result<Self> {
        Self::new(alloc::vec![h; dim])
    }

    /// Scott's rule `h_j = sigma_j * N^(-1/(d+4))`.
    ///
    /// Rule-of-thumb bandwidths tend to oversmooth multimodal forecasts, so a
    /// warning is logged whenever this is used.
    pub fn scott(points: &[Point]) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!(
                "Scott's rule needs at least 2 points, got {n}"
            )));
        }
        let d = points[0].dim();
        let factor = libm::pow(n as f64, -1.0 / (d as f64 + 4.0));
        let mut h = Vec::with_capacity(d);
        for j in 0..d {
            let mean = points.iter().map(|p| p[j]).sum::<f64>() / n as f64;
            let var = points
                .iter()
                .map(|p| (p[j] - mean) * (p[j] - mean))
                .sum::<f64>()
                / (n as f64 - 1.0);
            h.push(libm::sqrt(var) * factor);
        }
        log::warn!("using Scott's rule bandwidth {h:?}; rule-of-thumb bandwidths can give high forecast error");
        Self::new(h)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Euclidean norm `|h|`.
    pub fn norm(&self) -> f64 {
        crate::geometry::norm(&self.0)
    }

    pub fn product(&self) -> f64 {
        self.0.iter().product()
    }
}
