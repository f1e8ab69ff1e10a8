//! Forecast evaluation against a ground-truth trajectory.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::forecast::ForecastStep;
use crate::geometry::{Metric, Point, Trajectory};

/// Absolute pointwise error of every step that has an estimate and whose time
/// the truth covers: `(offset, time, error)`.
pub fn ape(
    truth: &Trajectory,
    steps: &[ForecastStep],
    metric: Metric,
) -> Result<Vec<(usize, f64, f64)>> {
    metric.validate_dim(truth.dim())?;
    let mut out = Vec::with_capacity(steps.len());
    for s in steps {
        let Some(e) = &s.estimate else { continue };
        match truth.position_at(s.time) {
            Some(x) => out.push((s.offset, s.time, metric.distance(&x, &e.prediction)?)),
            None => log::warn!(
                "truth does not cover t = {}; step {} skipped",
                s.time,
                s.offset
            ),
        }
    }
    Ok(out)
}

/// Fraction of steps whose true position lies inside the step's region,
/// over the steps where both exist. `None` when there are no such steps.
pub fn pct_hdr(truth: &Trajectory, steps: &[ForecastStep]) -> Result<Option<f64>> {
    let mut total = 0usize;
    let mut inside = 0usize;
    for s in steps {
        let Some(e) = &s.estimate else { continue };
        let Some(x) = truth.position_at(s.time) else {
            log::warn!(
                "truth does not cover t = {}; step {} skipped",
                s.time,
                s.offset
            );
            continue;
        };
        total += 1;
        if e.region.contains(&x)? {
            inside += 1;
        }
    }
    Ok((total > 0).then(|| inside as f64 / total as f64))
}

/// Distance from `p` to the truth polyline, ignoring time.
///
/// Euclidean distances use the exact point-to-segment foot. Under the
/// haversine metric the foot is found in coordinate space and the
/// great-circle distance to it is reported.
pub fn nearest_point_distance(truth: &Trajectory, p: &[f64], metric: Metric) -> Result<f64> {
    if p.len() != truth.dim() {
        return Err(Error::DimensionMismatch {
            expected: truth.dim(),
            found: p.len(),
        });
    }
    metric.validate_dim(p.len())?;
    let pts = truth.points();
    if pts.len() == 1 {
        return Ok(metric.distance_unchecked(&pts[0], p));
    }
    let mut best = f64::INFINITY;
    for w in pts.windows(2) {
        let foot = segment_foot(&w[0], &w[1], p);
        best = best.min(metric.distance_unchecked(&foot, p));
    }
    Ok(best)
}

fn segment_foot(a: &[f64], b: &[f64], p: &[f64]) -> Vec<f64> {
    let mut ab2 = 0.0;
    let mut dot = 0.0;
    for j in 0..a.len() {
        let ab = b[j] - a[j];
        ab2 += ab * ab;
        dot += (p[j] - a[j]) * ab;
    }
    let s = if ab2 > 0.0 {
        (dot / ab2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcfLag {
    pub lag: usize,
    pub value: f64,
    pub significant: bool,
}

/// Two-sided 95% band for white noise, `1.96 / sqrt(n)`.
pub fn acf_critical_value(n: usize) -> f64 {
    1.96 / libm::sqrt(n as f64)
}

/// Sample autocorrelation for lags `0..=max_lag` with the biased `1/n`
/// normalization.
pub fn error_acf(series: &[f64], max_lag: usize) -> Result<Vec<AcfLag>> {
    let n = series.len();
    if max_lag < 1 || n <= max_lag {
        return Err(invalid(format!(
            "autocorrelation needs 1 <= max_lag < n, got max_lag = {max_lag} and n = {n}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|e| e - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if !(denom > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let crit = acf_critical_value(n);
    Ok((0..=max_lag)
        .map(|k| {
            let value = if k == 0 {
                1.0
            } else {
                dev[..n - k]
                    .iter()
                    .zip(&dev[k..])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / denom
            };
            AcfLag {
                lag: k,
                value,
                significant: value.abs() > crit,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedFit {
    pub slope: f64,
    pub r2: f64,
    /// Cumulative integral at each input time.
    pub integral: Vec<f64>,
}

/// Through-origin least-squares fit of the cumulative error integral
/// `g(t) = int_0^t e`.
///
/// `g` is integrated with the trapezoidal rule; before the first sample the
/// error is held at its first value. The slope is `sum t g / sum t^2` and
/// `r2 = 1 - SS_res / sum g^2`, the uncentered coefficient appropriate for
/// a fit without intercept.
pub fn integrated_error_fit(series: &[(f64, f64)]) -> Result<IntegratedFit> {
    if series.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "integrated error fit needs at least 3 points, got {}",
            series.len()
        )));
    }
    if series[0].0 < 0.0 || series.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(invalid(
            "integrated error fit needs nonnegative, strictly increasing times",
        ));
    }
    let mut g = Vec::with_capacity(series.len());
    let mut acc = series[0].1 * series[0].0;
    g.push(acc);
    for w in series.windows(2) {
        acc += 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
        g.push(acc);
    }
    let stt: f64 = series.iter().map(|(t, _)| t * t).sum();
    let stg: f64 = series.iter().zip(&g).map(|((t, _), gi)| t * gi).sum();
    let sgg: f64 = g.iter().map(|x| x * x).sum();
    let slope = stg / stt;
    let ss_res: f64 = series
        .iter()
        .zip(&g)
        .map(|((t, _), gi)| (gi - slope * t).powi(2))
        .sum();
    let r2 = if sgg > 0.0 { 1.0 - ss_res / sgg } else { 1.0 };
    Ok(IntegratedFit {
        slope,
        r2,
        integral: g,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepEval {
    pub offset: usize,
    pub time: f64,
    pub ape: Option<f64>,
    pub in_hdr: Option<bool>,
    pub nearest_dist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub steps: Vec<StepEval>,
    pub mean_ape: Option<f64>,
    /// Sample standard deviation (`n - 1` denominator).
    pub std_ape: Option<f64>,
    pub pct_hdr: Option<f64>,
    pub acf: Vec<AcfLag>,
    pub integrated_error_slope: Option<f64>,
    pub slope_fit_r2: Option<f64>,
}

/// Full evaluation. `origin` is the forecast start time `t_N`, so the
/// integrated error runs over elapsed forecast time.
pub fn evaluate(
    truth: &Trajectory,
    steps: &[ForecastStep],
    metric: Metric,
    origin: f64,
    max_lag: usize,
) -> Result<EvalReport> {
    let mut evals = Vec::with_capacity(steps.len());
    let mut errors = Vec::new();
    for s in steps {
        let mut ev = StepEval {
            offset: s.offset,
            time: s.time,
            ape: None,
            in_hdr: None,
            nearest_dist: None,
        };
        if let Some(e) = &s.estimate {
            ev.nearest_dist = Some(nearest_point_distance(truth, &e.prediction, metric)?);
            if let Some(x) = truth.position_at(s.time) {
                let d = metric.distance(&x, &e.prediction)?;
                ev.ape = Some(d);
                ev.in_hdr = Some(e.region.contains(&x)?);
                errors.push((s.time - origin, d));
            }
        }
        evals.push(ev);
    }
    let n = errors.len();
    let mean_ape = (n > 0).then(|| errors.iter().map(|e| e.1).sum::<f64>() / n as f64);
    let std_ape = mean_ape.filter(|_| n > 1).map(|m| {
        libm::sqrt(errors.iter().map(|e| (e.1 - m).powi(2)).sum::<f64>() / (n - 1) as f64)
    });
    let judged: Vec<bool> = evals.iter().filter_map(|e| e.in_hdr).collect();
    let pct_hdr = (!judged.is_empty())
        .then(|| judged.iter().filter(|&&b| b).count() as f64 / judged.len() as f64);
    let series: Vec<f64> = errors.iter().map(|e| e.1).collect();
    let acf = match error_acf(&series, max_lag.min(n.saturating_sub(1))) {
        Ok(a) => a,
        Err(e) => {
            log::warn!("autocorrelation skipped: {e}");
            Vec::new()
        }
    };
    let fit = match integrated_error_fit(&errors) {
        Ok(f) => Some(f),
        Err(e) => {
            log::warn!("integrated error fit skipped: {e}");
            None
        }
    };
    Ok(EvalReport {
        steps: evals,
        mean_ape,
        std_ape,
        pct_hdr,
        acf,
        integrated_error_slope: fit.as_ref().map(|f| f.slope),
        slope_fit_r2: fit.as_ref().map(|f| f.r2),
    })
}

/// Truth positions at the step times, where covered.
pub fn truth_at_steps(truth: &Trajectory, steps: &[ForecastStep]) -> Vec<Option<Point>> {
    steps.iter().map(|s| truth.position_at(s.time)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::StepEstimate;
    use crate::hdr::{estimate_hdr, HdrRegion};
    use crate::kde::DensityEstimate;
    use crate::kernel::{Bandwidth, Kernel};
    use crate::rng::stream;
    use alloc::sync::Arc;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    use std::vec;

    fn line_truth() -> Trajectory {
        Trajectory::from_rows((0..=10).map(|k| (k as f64, vec![k as f64, 0.0]))).unwrap()
    }

    fn step_at(offset: usize, time: f64, pred: [f64; 2], threshold: f64) -> ForecastStep {
        let density = Arc::new(
            DensityEstimate::build(
                vec![Point::from_slice(&pred).unwrap()],
                Bandwidth::isotropic(1.0, 2).unwrap(),
                Kernel::Epanechnikov,
            )
            .unwrap(),
        );
        ForecastStep {
            offset,
            time,
            estimate: Some(StepEstimate {
                prediction: Point::from_slice(&pred).unwrap(),
                region: HdrRegion::with_threshold(density, 0.3, threshold),
                support_count: 1,
            }),
        }
    }

    #[test]
    fn ape_examples() {
        let truth = line_truth();
        let exact: Vec<_> = (1..=5)
            .map(|k| step_at(k, k as f64 + 0.5, [k as f64 + 0.5, 0.0], 0.0))
            .collect();
        assert!(ape(&truth, &exact, Metric::Euclidean)
            .unwrap()
            .iter()
            .all(|e| e.2.abs() < 1e-12));
        let origin =
            Trajectory::from_rows([(0.0, vec![0.0, 0.0]), (20.0, vec![0.0, 0.0])]).unwrap();
        let off: Vec<_> = (1..=5)
            .map(|k| step_at(k, k as f64, [0.0, 3.0], 0.0))
            .collect();
        assert!(ape(&origin, &off, Metric::Euclidean)
            .unwrap()
            .iter()
            .all(|e| e.2 == 3.0));
        let late = vec![step_at(1, 50.0, [0.0, 0.0], 0.0)];
        assert!(ape(&truth, &late, Metric::Euclidean).unwrap().is_empty());
    }

    #[test]
    fn pct_hdr_extremes() {
        let truth = line_truth();
        let everything: Vec<_> = (1..=5)
            .map(|k| step_at(k, k as f64, [k as f64, 0.5], 0.0))
            .collect();
        assert_eq!(pct_hdr(&truth, &everything).unwrap(), Some(1.0));
        let far: Vec<_> = (1..=5)
            .map(|k| step_at(k, k as f64, [k as f64, 50.0], 1e-9))
            .collect();
        assert_eq!(pct_hdr(&truth, &far).unwrap(), Some(0.0));
        assert_eq!(pct_hdr(&truth, &[]).unwrap(), None);
    }

    #[test]
    fn hdr_calibration_oracle() {
        let f = Arc::new(
            DensityEstimate::build(
                vec![
                    Point::from_slice(&[0.0, 0.0]).unwrap(),
                    Point::from_slice(&[1.0, 0.5]).unwrap(),
                    Point::from_slice(&[3.0, -1.0]).unwrap(),
                ],
                Bandwidth::new(vec![1.0, 0.7]).unwrap(),
                Kernel::Epanechnikov,
            )
            .unwrap(),
        );
        let region = estimate_hdr(f.clone(), 0.3, 10_000, &mut stream(1)).unwrap();
        let mut rng = stream(2);
        let mut steps = vec![];
        let mut rows = vec![];
        for k in 0..400 {
            let x = f.draw(1, &mut rng).pop().unwrap();
            steps.push(ForecastStep {
                offset: k + 1,
                time: k as f64,
                estimate: Some(StepEstimate {
                    prediction: f.mode(None),
                    region: region.clone(),
                    support_count: 3,
                }),
            });
            rows.push((k as f64, x.into_inner()));
        }
        let truth = Trajectory::from_rows(rows).unwrap();
        let p = pct_hdr(&truth, &steps).unwrap().unwrap();
        assert!((p - 0.7).abs() < 0.05, "{p}");
    }

    #[test]
    fn nearest_point_examples() {
        let seg = Trajectory::from_rows([(0.0, vec![0.0, 0.0]), (1.0, vec![10.0, 0.0])]).unwrap();
        let m = Metric::Euclidean;
        assert_eq!(nearest_point_distance(&seg, &[5.0, 2.0], m).unwrap(), 2.0);
        assert_eq!(nearest_point_distance(&seg, &[12.0, 0.0], m).unwrap(), 2.0);
        assert_eq!(nearest_point_distance(&seg, &[3.0, 0.0], m).unwrap(), 0.0);
        let single = Trajectory::from_rows([(0.0, vec![1.0, 1.0])]).unwrap();
        assert_eq!(
            nearest_point_distance(&single, &[4.0, 5.0], m).unwrap(),
            5.0
        );
    }

    #[test]
    fn acf_examples() {
        assert!((acf_critical_value(196) - 0.140).abs() < 1e-12);
        let sine: Vec<f64> = (0..2000)
            .map(|k| (core::f64::consts::TAU * k as f64 / 20.0).sin())
            .collect();
        let acf = error_acf(&sine, 40).unwrap();
        assert_eq!(acf[0].value, 1.0);
        assert!(acf[20].value > 0.98, "{}", acf[20].value);
        assert!(acf[10].value < -0.98);
        assert_eq!(error_acf(&[2.0; 50], 5), Err(Error::ZeroVariance));
        assert!(error_acf(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn acf_white_noise_mostly_insignificant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = Normal::new(0.0, 1.0).unwrap();
        let series: Vec<f64> = (0..10_000).map(|_| n.sample(&mut rng)).collect();
        let acf = error_acf(&series, 100).unwrap();
        let quiet = acf[1..].iter().filter(|a| !a.significant).count();
        assert!(quiet as f64 >= 0.94 * 100.0, "{quiet}");
    }

    #[test]
    fn integrated_fit_examples() {
        let constant: Vec<(f64, f64)> = (1..=50).map(|k| (0.5 * k as f64, 2.5)).collect();
        let fit = integrated_error_fit(&constant).unwrap();
        for ((t, _), g) in constant.iter().zip(&fit.integral) {
            assert!((g - 2.5 * t).abs() < 1e-12);
        }
        assert!((fit.slope - 2.5).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);

        let linear: Vec<(f64, f64)> = (0..=20).map(|k| (k as f64, k as f64)).collect();
        let fit = integrated_error_fit(&linear).unwrap();
        let stt: f64 = (0..=20).map(|k| (k * k) as f64).sum();
        let stg: f64 = (0..=20).map(|k| (k * k * k) as f64 / 2.0).sum();
        assert!((fit.slope - stg / stt).abs() < 1e-12);
        let sgg: f64 = (0..=20).map(|k| ((k * k) as f64 / 2.0).powi(2)).sum();
        let res: f64 = (0..=20)
            .map(|k| ((k * k) as f64 / 2.0 - fit.slope * k as f64).powi(2))
            .sum();
        assert!((fit.r2 - (1.0 - res / sgg)).abs() < 1e-12);
        assert!(fit.r2 < 1.0);

        assert!(integrated_error_fit(&linear[..2]).is_err());
        assert!(integrated_error_fit(&[(0.0, 1.0), (0.0, 1.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn evaluate_copied_and_shifted() {
        let truth = line_truth();
        let copied: Vec<_> = (1..=8)
            .map(|k| step_at(k, k as f64, [k as f64, 0.0], 0.1))
            .collect();
        let r = evaluate(&truth, &copied, Metric::Euclidean, 0.0, 3).unwrap();
        assert_eq!(r.mean_ape, Some(0.0));
        assert_eq!(r.pct_hdr, Some(1.0));
        assert!(r.steps.iter().all(|s| s.nearest_dist == Some(0.0)));
        let shifted: Vec<_> = (1..=8)
            .map(|k| step_at(k, k as f64, [k as f64, 1.5], 0.1))
            .collect();
        let r = evaluate(&truth, &shifted, Metric::Euclidean, 0.0, 3).unwrap();
        assert!((r.mean_ape.unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(
            r.integrated_error_slope.map(|s| (s - 1.5).abs() < 1e-12),
            Some(true)
        );
    }

    proptest! {
        #[test]
        fn integral_is_monotone(errs in prop::collection::vec(0.0..10.0f64, 3..60)) {
            let series: Vec<(f64, f64)> = errs.iter().enumerate().map(|(k, e)| (k as f64 + 1.0, *e)).collect();
            let fit = integrated_error_fit(&series).unwrap();
            for w in fit.integral.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
        }

        #[test]
        fn acf_bounded_and_unit_at_zero(xs in prop::collection::vec(-100.0..100.0f64, 10..200)) {
            prop_assume!(xs.iter().any(|x| (x - xs[0]).abs() > 1e-6));
            let acf = error_acf(&xs, 5).unwrap();
            prop_assert_eq!(acf[0].value, 1.0);
            for a in &acf {
                prop_assert!(a.value.abs() <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn pct_hdr_monotone_in_alpha(seed in any::<u64>()) {
            let f = Arc::new(DensityEstimate::build(
                vec![Point::from_slice(&[0.0, 0.0]).unwrap(), Point::from_slice(&[1.0, 1.0]).unwrap()],
                Bandwidth::isotropic(1.0, 2).unwrap(),
                Kernel::Epanechnikov,
            ).unwrap());
            let mut rng = stream(seed);
            let truth = Trajectory::from_rows(
                (0..30).map(|k| (k as f64, f.draw(1, &mut rng).pop().unwrap().into_inner())),
            ).unwrap();
            let mut prev = 1.0;
            for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let region = estimate_hdr(f.clone(), alpha, 2000, &mut stream(seed ^ 1)).unwrap();
                let steps: Vec<_> = (0..30).map(|k| ForecastStep {
                    offset: k + 1,
                    time: k as f64,
                    estimate: Some(StepEstimate { prediction: f.mode(None), region: region.clone(), support_count: 2 }),
                }).collect();
                let p = pct_hdr(&truth, &steps).unwrap().unwrap();
                prop_assert!(p <= prev && (0.0..=1.0).contains(&p));
                prev = p;
            }
        }
    }
}
