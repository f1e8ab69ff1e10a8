//! Synthetic recurrent trajectories: a particle hopping between loiter points
//! under a Markov chain, and the Lorenz system. Both come with a clean copy
//! and a copy with additive Gaussian observation noise.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::geometry::{squared_euclidean, Point, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct LoiterSpec {
    pub loiter_points: Vec<Point>,
    /// Row-stochastic transition matrix over loiter points.
    pub transition: Vec<Vec<f64>>,
    /// Extra samples spent at each loiter point after arriving.
    pub dwell_steps: Vec<usize>,
    pub speed: f64,
    pub step_dt: f64,
    pub noise_sigma: f64,
    /// Number of samples to emit.
    pub samples: usize,
}

impl Default for LoiterSpec {
    fn default() -> Self {
        Self::six_point()
    }
}

impl LoiterSpec {
    /// Six loiter points in `[0, 10]^2` with one even bifurcation at the first.
    pub fn six_point() -> Self {
        let pts = [
            [1.0, 8.0],
            [5.0, 5.0],
            [1.0, 2.0],
            [5.0, 1.5],
            [9.0, 4.0],
            [7.0, 8.5],
        ];
        let mut t = alloc::vec![alloc::vec![0.0; 6]; 6];
        t[0][1] = 0.5;
        t[0][2] = 0.5;
        t[1][4] = 1.0;
        t[2][3] = 1.0;
        t[3][4] = 1.0;
        t[4][5] = 1.0;
        t[5][0] = 1.0;
        Self::planar(&pts, t)
    }

    /// Five loiter points in `[0, 10]^2` with one even bifurcation.
    pub fn five_point() -> Self {
        let pts = [[2.0, 8.0], [8.0, 8.0], [8.0, 2.0], [5.0, 5.0], [2.0, 2.0]];
        let mut t = alloc::vec![alloc::vec![0.0; 5]; 5];
        t[0][1] = 1.0;
        t[1][2] = 0.5;
        t[1][3] = 0.5;
        t[2][4] = 1.0;
        t[3][4] = 1.0;
        t[4][0] = 1.0;
        Self::planar(&pts, t)
    }

    fn planar(pts: &[[f64; 2]], transition: Vec<Vec<f64>>) -> Self {
        Self {
            loiter_points: pts
                .iter()
                .map(|p| Point::from_slice(p).expect("finite constant"))
                .collect(),
            transition,
            dwell_steps: alloc::vec![4; pts.len()],
            speed: 1.0,
            step_dt: 0.5,
            noise_sigma: 0.05,
            samples: 10_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.loiter_points.len();
        if n < 2 {
            return Err(invalid("at least 2 loiter points are required"));
        }
        let d = self.loiter_points[0].dim();
        if self.loiter_points.iter().any(|p| p.dim() != d) {
            return Err(invalid("loiter points must share one dimension"));
        }
        if self.transition.len() != n || self.transition.iter().any(|r| r.len() != n) {
            return Err(invalid(format!("transition matrix must be {n} x {n}")));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
                return Err(invalid(format!(
                    "transition row {i} has a negative or non-finite entry"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("transition row {i} sums to {s}, not 1")));
            }
        }
        if !strongly_connected(&self.transition) {
            return Err(invalid("transition chain has transient states"));
        }
        if self.dwell_steps.len() != n {
            return Err(invalid(format!("dwell_steps needs {n} entries")));
        }
        if !(self.speed > 0.0 && self.speed.is_finite()) {
            return Err(invalid("speed must be positive"));
        }
        if !(self.step_dt > 0.0 && self.step_dt.is_finite()) {
            return Err(invalid("step_dt must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(invalid("noise_sigma must be nonnegative"));
        }
        if self.samples < 1 {
            return Err(invalid("samples must be at least 1"));
        }
        Ok(())
    }
}

fn strongly_connected(t: &[Vec<f64>]) -> bool {
    let n = t.len();
    let reach = |forward: bool| {
        let mut seen = alloc::vec![false; n];
        let mut stack = alloc::vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let p = if forward { t[i][j] } else { t[j][i] };
                if p > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub noisy: Trajectory,
    pub clean: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoiterRun {
    pub noisy: Trajectory,
    pub clean: Trajectory,
    /// Loiter indices in order of arrival, starting with the initial one.
    pub visits: Vec<usize>,
}

/// Starts dwelling at loiter point 0. Each sample advances `speed * step_dt`
/// toward the current target and snaps onto it when that would overshoot.
pub fn generate_loiter<R: Rng + ?Sized>(spec: &LoiterSpec, rng: &mut R) -> Result<LoiterRun> {
    spec.validate()?;
    let step = spec.speed * spec.step_dt;
    let mut pos = spec.loiter_points[0].to_vec();
    let mut at = 0usize;
    let mut dwell = spec.dwell_steps[0];
    let mut target: Option<usize> = None;
    let mut visits = alloc::vec![0usize];
    let mut clean = Vec::with_capacity(spec.samples);

    for _ in 0..spec.samples {
        clean.push(Point::new(pos.clone())?);
        if target.is_none() {
            if dwell > 0 {
                dwell -= 1;
                continue;
            }
            target = Some(choose(&spec.transition[at], rng));
        }
        let goal = &spec.loiter_points[target.expect("target chosen above")];
        let remaining = libm::sqrt(squared_euclidean(&pos, goal));
        if remaining <= step {
            pos.copy_from_slice(goal);
            at = target.take().expect("target chosen above");
            visits.push(at);
            dwell = spec.dwell_steps[at];
        } else {
            for (p, g) in pos.iter_mut().zip(goal.iter()) {
                *p += (g - *p) * step / remaining;
            }
        }
    }
    let times: Vec<f64> = (0..spec.samples).map(|k| k as f64 * spec.step_dt).collect();
    let noisy = add_noise(&clean, spec.noise_sigma, rng)?;
    Ok(LoiterRun {
        noisy: Trajectory::new(times.clone(), noisy)?,
        clean: Trajectory::new(times, clean)?,
        visits,
    })
}

fn choose<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = j;
            if u < acc {
                return j;
            }
        }
    }
    last
}

fn add_noise<R: Rng + ?Sized>(clean: &[Point], sigma: f64, rng: &mut R) -> Result<Vec<Point>> {
    if sigma == 0.0 {
        return Ok(clean.to_vec());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(format!("noise: {e}")))?;
    clean
        .iter()
        .map(|p| Point::new(p.iter().map(|x| x + normal.sample(rng)).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LorenzSpec {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub x0: [f64; 3],
    pub dt: f64,
    /// Number of samples, including `x0` at `t = 0`.
    pub steps: usize,
    pub noise_sigma: f64,
}

impl Default for LorenzSpec {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            x0: [1.0, 1.0, 1.0],
            dt: 0.01,
            steps: 30_000,
            noise_sigma: 1.0,
        }
    }
}

impl LorenzSpec {
    pub fn validate(&self) -> Result<()> {
        if [self.sigma, self.rho, self.beta]
            .iter()
            .chain(&self.x0)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("lorenz parameters"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("lorenz dt must be positive"));
        }
        if self.steps < 1 {
            return Err(invalid("lorenz steps must be at least 1"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(invalid("noise_sigma must be nonnegative"));
        }
        Ok(())
    }

    pub fn derivative(&self, v: [f64; 3]) -> [f64; 3] {
        let [x, y, z] = v;
        [
            self.sigma * (y - x),
            x * (self.rho - z) - y,
            x * y - self.beta * z,
        ]
    }

    /// One classical fourth-order Runge-Kutta step.
    pub fn rk4_step(&self, v: [f64; 3]) -> [f64; 3] {
        let h = self.dt;
        let add =
            |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
        let k1 = self.derivative(v);
        let k2 = self.derivative(add(v, k1, h / 2.0));
        let k3 = self.derivative(add(v, k2, h / 2.0));
        let k4 = self.derivative(add(v, k3, h));
        core::array::from_fn(|j| v[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
    }
}

pub fn generate_lorenz<R: Rng + ?Sized>(spec: &LorenzSpec, rng: &mut R) -> Result<Generated> {
    spec.validate()?;
    let mut v = spec.x0;
    let mut clean = Vec::with_capacity(spec.steps);
    for _ in 0..spec.steps {
        clean.push(Point::new(v.to_vec())?);
        v = spec.rk4_step(v);
    }
    let times: Vec<f64> = (0..spec.steps).map(|k| k as f64 * spec.dt).collect();
    let noisy = add_noise(&clean, spec.noise_sigma, rng)?;
    Ok(Generated {
        noisy: Trajectory::new(times.clone(), noisy)?,
        clean: Trajectory::new(times, clean)?,
    })
}

/// Positions at every multiple of `period` inside the time span, linearly
/// interpolated between the bracketing samples.
pub fn downsample_with_interpolation(traj: &Trajectory, period: f64) -> Result<Trajectory> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(invalid("period must be positive"));
    }
    let t0 = traj.time(0);
    let t1 = traj.time(traj.len() - 1);
    if period > t1 - t0 {
        return Err(invalid(format!(
            "period {period} exceeds the trajectory span {}",
            t1 - t0
        )));
    }
    let first = libm::ceil(t0 / period) as i64;
    let last = libm::floor(t1 / period) as i64;
    let mut times = Vec::new();
    let mut points = Vec::new();
    for m in first..=last {
        let t = m as f64 * period;
        if let Some(p) = traj.position_at(t) {
            times.push(t);
            points.push(p);
        }
    }
    Trajectory::new(times, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use std::vec;

    #[test]
    fn two_point_shuttle_is_collinear() {
        let spec = LoiterSpec {
            loiter_points: vec![
                Point::from_slice(&[0.0, 0.0]).unwrap(),
                Point::from_slice(&[3.0, 1.0]).unwrap(),
            ],
            transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            dwell_steps: vec![0, 0],
            speed: 1.0,
            step_dt: 0.7,
            noise_sigma: 0.0,
            samples: 200,
        };
        let run = generate_loiter(&spec, &mut stream(1)).unwrap();
        assert_eq!(run.noisy, run.clean);
        for p in run.clean.points() {
            // Cross product with the segment direction vanishes.
            assert!((p[0] * 1.0 - p[1] * 3.0).abs() < 1e-9);
            assert!((-1e-12..=3.0 + 1e-12).contains(&p[0]));
        }
        assert!(run.visits.len() > 10);
    }

    #[test]
    fn bifurcation_is_even() {
        let spec = LoiterSpec {
            samples: 200_000,
            ..LoiterSpec::default()
        };
        let run = generate_loiter(&spec, &mut stream(7)).unwrap();
        let after_zero: Vec<usize> = run
            .visits
            .windows(2)
            .filter(|w| w[0] == 0)
            .map(|w| w[1])
            .collect();
        let n = after_zero.len() as f64;
        let ones = after_zero.iter().filter(|&&j| j == 1).count() as f64;
        assert!(n > 1000.0);
        assert!((ones / n - 0.5).abs() < 0.03, "{}", ones / n);
    }

    #[test]
    fn default_specs_recur() {
        for spec in [LoiterSpec::six_point(), LoiterSpec::five_point()] {
            spec.validate().unwrap();
            let run = generate_loiter(&spec, &mut stream(3)).unwrap();
            assert_eq!(run.clean.len(), 10_000);
            let cycles = run.visits.iter().filter(|&&v| v == 0).count();
            assert!(cycles >= 20, "{cycles}");
            for j in 0..spec.loiter_points.len() {
                assert!(run.visits.contains(&j));
            }
            for p in run.clean.points() {
                assert!(p.iter().all(|x| (0.0..=10.0).contains(x)));
            }
        }
    }

    #[test]
    fn noise_is_unbiased() {
        let run = generate_loiter(&LoiterSpec::default(), &mut stream(11)).unwrap();
        let n = run.clean.len() as f64;
        for j in 0..2 {
            let mean: f64 = run
                .noisy
                .points()
                .iter()
                .zip(run.clean.points())
                .map(|(a, b)| a[j] - b[j])
                .sum::<f64>()
                / n;
            assert!(mean.abs() < 4.0 * 0.05 / n.sqrt(), "{mean}");
        }
    }

    #[test]
    fn spec_validation() {
        let mut s = LoiterSpec::default();
        s.transition[0][1] = 0.6;
        assert!(s.validate().is_err());
        let mut s = LoiterSpec::default();
        // Point 1 only feeds back to itself: 0 -> 1 is a one-way street.
        s.transition[1] = vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert!(s.validate().is_err());
        let s = LoiterSpec {
            speed: 0.0,
            ..LoiterSpec::default()
        };
        assert!(s.validate().is_err());
        let s = LorenzSpec {
            dt: 0.0,
            ..LorenzSpec::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn lorenz_equilibria() {
        let spec = LorenzSpec {
            x0: [0.0; 3],
            steps: 50,
            noise_sigma: 0.0,
            ..LorenzSpec::default()
        };
        let g = generate_lorenz(&spec, &mut stream(0)).unwrap();
        assert!(g.clean.points().iter().all(|p| p.iter().all(|&x| x == 0.0)));
        let s = 72f64.sqrt();
        for v in [[s, s, 27.0], [-s, -s, 27.0]] {
            let d = spec.derivative(v);
            assert!(d.iter().all(|x| x.abs() < 1e-12), "{d:?}");
        }
    }

    /// Independent RK4 written in terms of plain tuples.
    fn oracle(n: usize) -> Vec<(f64, f64, f64)> {
        let (s, r, b, h) = (10.0, 28.0, 8.0 / 3.0, 0.01);
        let f = |x: f64, y: f64, z: f64| (s * (y - x), x * (r - z) - y, x * y - b * z);
        let mut out = vec![(1.0, 1.0, 1.0)];
        for _ in 1..n {
            let (x, y, z) = *out.last().unwrap();
            let a = f(x, y, z);
            let bb = f(x + h * a.0 / 2.0, y + h * a.1 / 2.0, z + h * a.2 / 2.0);
            let c = f(x + h * bb.0 / 2.0, y + h * bb.1 / 2.0, z + h * bb.2 / 2.0);
            let d = f(x + h * c.0, y + h * c.1, z + h * c.2);
            out.push((
                x + h * (a.0 + 2.0 * bb.0 + 2.0 * c.0 + d.0) / 6.0,
                y + h * (a.1 + 2.0 * bb.1 + 2.0 * c.1 + d.1) / 6.0,
                z + h * (a.2 + 2.0 * bb.2 + 2.0 * c.2 + d.2) / 6.0,
            ));
        }
        out
    }

    #[test]
    fn lorenz_matches_oracle() {
        let spec = LorenzSpec {
            steps: 1000,
            noise_sigma: 0.0,
            ..LorenzSpec::default()
        };
        let g = generate_lorenz(&spec, &mut stream(0)).unwrap();
        for (p, o) in g.clean.points().iter().zip(oracle(1000)) {
            assert!(
                (p[0] - o.0).abs() < 1e-9 && (p[1] - o.1).abs() < 1e-9 && (p[2] - o.2).abs() < 1e-9
            );
        }
        assert_eq!(g.clean.time(999), 9.99);
    }

    #[test]
    fn lorenz_stays_trapped() {
        let spec = LorenzSpec::default();
        // Any sphere about (0, 0, sigma + rho) enclosing the ellipsoid where
        // the radius can grow is forward invariant.
        let (s, b, c) = (spec.sigma, spec.beta, (spec.sigma + spec.rho) / 2.0);
        let r = b.sqrt() * c;
        let mut bound: f64 = 0.0;
        for i in 0..=200 {
            for k in 0..=200 {
                let th = core::f64::consts::PI * i as f64 / 200.0;
                let ph = core::f64::consts::TAU * k as f64 / 200.0;
                let x = r / s.sqrt() * th.sin() * ph.cos();
                let y = r * th.sin() * ph.sin();
                let z = c + r / b.sqrt() * th.cos();
                bound = bound.max((x * x + y * y + (z - 2.0 * c).powi(2)).sqrt());
            }
        }
        let g = generate_lorenz(&spec, &mut stream(5)).unwrap();
        assert_eq!(g.noisy.len(), 30_000);
        for p in g.clean.points() {
            let rr = (p[0] * p[0] + p[1] * p[1] + (p[2] - 2.0 * c).powi(2)).sqrt();
            assert!(rr <= bound * 1.001, "{rr} > {bound}");
        }
    }

    #[test]
    fn downsample_examples() {
        let t = Trajectory::from_rows((0..=10).map(|k| (k as f64, vec![k as f64 * 2.0]))).unwrap();
        let d = downsample_with_interpolation(&t, 2.0).unwrap();
        assert_eq!(d.times(), &[0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(d.point(2).coords(), &[8.0]);

        let t = Trajectory::from_rows([(0.0, vec![0.0, 0.0]), (2.0, vec![2.0, 2.0])]).unwrap();
        let d = downsample_with_interpolation(&t, 1.0).unwrap();
        assert_eq!(d.point(1).coords(), &[1.0, 1.0]);
        assert!(downsample_with_interpolation(&t, 3.0).is_err());

        let circle = Trajectory::from_rows((0..=100).map(|k| {
            let th = core::f64::consts::TAU * k as f64 / 100.0;
            (k as f64, vec![th.cos(), th.sin()])
        }))
        .unwrap();
        let d = downsample_with_interpolation(&circle, 7.3).unwrap();
        for p in d.points() {
            assert!(p[0] * p[0] + p[1] * p[1] <= 1.0 + 1e-12);
        }
    }
}
