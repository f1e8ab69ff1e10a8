//! Points, trajectories, metrics and heading comparison on ℝ^d.
//!
//! Geographic data is handled by [`Metric::Haversine`], which interprets
//! two-dimensional points as `(latitude, longitude)` in degrees.

use alloc::vec::Vec;
use core::ops::Deref;

use crate::error::{invalid, Error, Result};

/// A position in ℝ^d with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("a point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        Ok(Self(coords))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(coords.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Componentwise `self + (other - self) * frac`; exact at `frac` 0 and 1.
    pub fn lerp(&self, other: &Point, frac: f64) -> Point {
        if frac == 0.0 {
            return self.clone();
        }
        if frac == 1.0 {
            return other.clone();
        }
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + (b - a) * frac)
                .collect(),
        )
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A velocity vector in coordinate units per time unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity(Vec<f64>);

impl Velocity {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("velocity components"));
        }
        Ok(Self(components))
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }
}

/// Distance function on the observation space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Euclidean,
    /// Great-circle distance on a sphere of the given radius; points are
    /// `(lat, lon)` in degrees.
    Haversine {
        radius: f64,
    },
}

/// Mean earth radius in nautical miles.
pub const EARTH_RADIUS_NM: f64 = 3440.065;

/// Mean earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

impl Metric {
    pub fn haversine(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("haversine radius must be positive"));
        }
        Ok(Metric::Haversine { radius })
    }

    /// Checks that points of dimension `dim` can be measured by this metric.
    pub fn validate_dim(&self, dim: usize) -> Result<()> {
        match self {
            Metric::Euclidean => Ok(()),
            Metric::Haversine { .. } if dim == 2 => Ok(()),
            Metric::Haversine { .. } => Err(Error::HaversineDimension(dim)),
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        self.validate_dim(a.len())?;
        Ok(self.distance_unchecked(a, b))
    }

    /// Distance without dimension checks. Callers validate once per dataset.
    pub fn distance_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Metric::Euclidean => libm::sqrt(squared_euclidean(a, b)),
            Metric::Haversine { radius } => radius * central_angle(a[0], a[1], b[0], b[1]),
        }
    }
}

fn central_angle(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (phi1, phi2) = (lat1.to_radians(), lat2.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (lon2 - lon1).to_radians();
    let s1 = libm::sin(dphi / 2.0);
    let s2 = libm::sin(dlambda / 2.0);
    let h = (s1 * s1 + libm::cos(phi1) * libm::cos(phi2) * s2 * s2).clamp(0.0, 1.0);
    2.0 * libm::atan2(libm::sqrt(h), libm::sqrt(1.0 - h))
}

pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Cosine distance `1 - <u, v> / (|u| |v|)`, in `[0, 2]`.
pub fn angle_distance(u: &Velocity, v: &Velocity) -> Result<f64> {
    if u.0.len() != v.0.len() {
        return Err(Error::DimensionMismatch {
            expected: u.0.len(),
            found: v.0.len(),
        });
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVelocity);
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    Ok((1.0 - dot / (nu * nv)).clamp(0.0, 2.0))
}

/// Timestamped positions with strictly increasing times and a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    points: Vec<Point>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, points: Vec<Point>) -> Result<Self> {
        if times.len() != points.len() {
            return Err(invalid("times and points differ in length"));
        }
        if points.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let dim = points[0].dim();
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            if !times[i].is_finite() {
                return Err(Error::NonFinite("timestamps"));
            }
            if i > 0 && times[i] <= times[i - 1] {
                return Err(Error::NonIncreasingTime(i));
            }
        }
        Ok(Self { times, points })
    }

    /// Builds a trajectory from `(t, coords)` rows.
    pub fn from_rows<I, C>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, C)>,
        C: Into<Vec<f64>>,
    {
        let mut times = Vec::new();
        let mut points = Vec::new();
        for (t, c) in rows {
            times.push(t);
            points.push(Point::new(c.into())?);
        }
        Self::new(times, points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &Point)> + '_ {
        self.times.iter().copied().zip(self.points.iter())
    }

    /// Contiguous sub-trajectory `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Trajectory {
        Trajectory {
            times: self.times[start..end].to_vec(),
            points: self.points[start..end].to_vec(),
        }
    }

    /// Position at time `t` by piecewise-linear interpolation in space and
    /// time; `None` outside `[t_first, t_last]`.
    pub fn position_at(&self, t: f64) -> Option<Point> {
        let n = self.times.len();
        if !(t >= self.times[0] && t <= self.times[n - 1]) {
            return None;
        }
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return Some(self.points[0].clone());
        }
        if k >= n {
            return Some(self.points[n - 1].clone());
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let frac = (t - t0) / (t1 - t0);
        Some(self.points[k - 1].lerp(&self.points[k], frac))
    }
}

/// Backward difference quotient `(x_i - x_{i-1}) / (t_i - t_{i-1})`.
pub fn finite_difference_velocity(traj: &Trajectory, index: usize) -> Result<Velocity> {
    if index == 0 {
        return Err(Error::NoPredecessor(index));
    }
    if index >= traj.len() {
        return Err(invalid("velocity index out of range"));
    }
    let dt = traj.times[index] - traj.times[index - 1];
    if dt <= 0.0 {
        return Err(Error::NonIncreasingTime(index));
    }
    let (a, b) = (&traj.points[index - 1], &traj.points[index]);
    Velocity::new(
        a.iter()
            .zip(b.iter())
            .map(|(x0, x1)| (x1 - x0) / dt)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn p(c: &[f64]) -> Point {
        Point::from_slice(c).unwrap()
    }

    fn v(c: &[f64]) -> Velocity {
        Velocity::new(c.to_vec()).unwrap()
    }

    #[test]
    fn euclidean_pythagorean() {
        let d = Metric::Euclidean
            .distance(&p(&[0.0, 0.0]), &p(&[3.0, 4.0]))
            .unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn haversine_quarter_circle() {
        let m = Metric::haversine(1.0).unwrap();
        let d = m.distance(&p(&[0.0, 0.0]), &p(&[0.0, 90.0])).unwrap();
        assert!((d - PI / 2.0).abs() < 1e-12);
        let m = Metric::haversine(EARTH_RADIUS_NM).unwrap();
        let d = m.distance(&p(&[0.0, 0.0]), &p(&[0.0, 90.0])).unwrap();
        assert!((d - EARTH_RADIUS_NM * PI / 2.0).abs() < 1e-9);
        assert!((d - 5403.5).abs() < 0.5);
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(
            Metric::Euclidean.distance(&[0.0], &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let m = Metric::haversine(1.0).unwrap();
        assert_eq!(
            m.distance(&[0.0; 3], &[0.0; 3]),
            Err(Error::HaversineDimension(3))
        );
        assert!(Metric::haversine(0.0).is_err());
    }

    #[test]
    fn angle_distance_cases() {
        assert!(angle_distance(&v(&[1.0, 2.0]), &v(&[1.0, 2.0])).unwrap() < 1e-15);
        assert_eq!(
            angle_distance(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(),
            1.0
        );
        assert_eq!(
            angle_distance(&v(&[1.0, 0.0]), &v(&[-1.0, 0.0])).unwrap(),
            2.0
        );
        assert_eq!(
            angle_distance(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])),
            Err(Error::ZeroVelocity)
        );
    }

    #[test]
    fn backward_difference() {
        let t = Trajectory::from_rows([(0.0, vec![0.0, 0.0]), (2.0, vec![4.0, 0.0])]).unwrap();
        assert_eq!(
            finite_difference_velocity(&t, 1).unwrap().components(),
            &[2.0, 0.0]
        );
        let t = Trajectory::from_rows([(0.0, vec![1.0, 1.0]), (1.0, vec![1.0, 1.0])]).unwrap();
        assert!(finite_difference_velocity(&t, 1).unwrap().is_zero());
        let t = Trajectory::from_rows([(0.0, vec![0.0, 0.0]), (0.5, vec![1.0, -1.0])]).unwrap();
        assert_eq!(
            finite_difference_velocity(&t, 1).unwrap().components(),
            &[2.0, -2.0]
        );
        assert_eq!(
            finite_difference_velocity(&t, 0),
            Err(Error::NoPredecessor(0))
        );
    }

    #[test]
    fn trajectory_rejects_duplicate_times() {
        let r = Trajectory::from_rows([(0.0, vec![0.0]), (0.0, vec![1.0])]);
        assert_eq!(r, Err(Error::NonIncreasingTime(1)));
    }

    #[test]
    fn interpolated_position() {
        let t = Trajectory::from_rows([(0.0, vec![0.0, 0.0]), (2.0, vec![2.0, 2.0])]).unwrap();
        assert_eq!(t.position_at(1.0).unwrap().coords(), &[1.0, 1.0]);
        assert!(t.position_at(2.5).is_none());
    }

    fn latlon() -> impl Strategy<Value = Vec<f64>> {
        (-90.0..90.0f64, -180.0..180.0f64).prop_map(|(a, b)| vec![a, b])
    }

    proptest! {
        #[test]
        fn euclidean_triangle_inequality(
            a in prop::collection::vec(-100.0..100.0f64, 3),
            b in prop::collection::vec(-100.0..100.0f64, 3),
            c in prop::collection::vec(-100.0..100.0f64, 3),
        ) {
            let m = Metric::Euclidean;
            let ab = m.distance(&a, &b).unwrap();
            let bc = m.distance(&b, &c).unwrap();
            let ac = m.distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert_eq!(ab, m.distance(&b, &a).unwrap());
        }

        #[test]
        fn haversine_triangle_and_bound(a in latlon(), b in latlon(), c in latlon()) {
            let m = Metric::haversine(EARTH_RADIUS_KM).unwrap();
            let ab = m.distance(&a, &b).unwrap();
            let bc = m.distance(&b, &c).unwrap();
            let ac = m.distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!(ab <= EARTH_RADIUS_KM * core::f64::consts::PI + 1e-9);
        }

        #[test]
        fn angle_distance_scale_invariant(
            u in prop::collection::vec(-10.0..10.0f64, 2),
            w in prop::collection::vec(-10.0..10.0f64, 2),
            a in 0.01..100.0f64,
            b in 0.01..100.0f64,
        ) {
            prop_assume!(norm(&u) > 1e-3 && norm(&w) > 1e-3);
            let base = angle_distance(&v(&u), &v(&w)).unwrap();
            let su: Vec<f64> = u.iter().map(|x| x * a).collect();
            let sw: Vec<f64> = w.iter().map(|x| x * b).collect();
            let scaled = angle_distance(&v(&su), &v(&sw)).unwrap();
            prop_assert!((base - scaled).abs() < 1e-12);
        }
    }
}
