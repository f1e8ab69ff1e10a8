use std::sync::Arc;

use proptest::prelude::*;
use trajkde_core::energy::{FeasibilityMask, Grid};
use trajkde_core::forecast::{run_forecast, ForecastConfig};
use trajkde_core::geometry::EARTH_RADIUS_NM;
use trajkde_core::hdr::estimate_hdr;
use trajkde_core::kde::DensityEstimate;
use trajkde_core::rng::{stream, substream};
use trajkde_core::synthgen::{generate_loiter, LoiterSpec};
use trajkde_core::{Bandwidth, Kernel, Metric, Point, Trajectory};

fn loiter_history(samples: usize, seed: u64) -> Trajectory {
    let spec = LoiterSpec {
        samples,
        ..LoiterSpec::default()
    };
    generate_loiter(&spec, &mut stream(seed)).unwrap().noisy
}

#[test]
fn constrained_predictions_are_feasible() {
    let history = loiter_history(4000, 8);
    let grid = Grid::new(vec![-1.0, -1.0], vec![11.0, 11.0], vec![120, 120]).unwrap();
    // a band across the middle of the workspace
    let mask = FeasibilityMask::from_fn(grid, |x| !(4.0..=6.0).contains(&x[1])).unwrap();
    let mut cfg = ForecastConfig::new(0.3, 1.0, 0.5, 10.0, Bandwidth::isotropic(0.8, 2).unwrap());
    let free = run_forecast(&history, &cfg).unwrap();
    cfg.mask = Some(mask.clone());
    let constrained = run_forecast(&history, &cfg).unwrap();
    assert_eq!(free.matches, constrained.matches);
    let mut checked = 0;
    for (_, e) in constrained.present() {
        assert!(mask.is_feasible(&e.prediction), "{:?}", e.prediction);
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn geographic_loop_forecast() {
    let (lat0, lon0, r) = (25.0f64, -80.0f64, 0.2f64);
    let rows = (0..600).map(|k| {
        let a = k as f64 * std::f64::consts::TAU / 40.0;
        (
            k as f64 * 900.0,
            vec![lat0 + r * a.sin(), lon0 + r * a.cos()],
        )
    });
    let history = Trajectory::from_rows(rows).unwrap();
    let mut cfg = ForecastConfig::new(
        1.5,
        0.5,
        900.0,
        4.0 * 3600.0,
        Bandwidth::isotropic(0.02, 2).unwrap(),
    );
    cfg.metric = Metric::haversine(EARTH_RADIUS_NM).unwrap();
    let f = run_forecast(&history, &cfg).unwrap();
    assert_eq!(f.steps.len(), 16);
    assert!(f.matches.len() >= 10);
    for (s, e) in f.present() {
        let a = (599 + s.offset) as f64 * std::f64::consts::TAU / 40.0;
        let truth = [lat0 + r * a.sin(), lon0 + r * a.cos()];
        let err = cfg.metric.distance(&e.prediction, &truth).unwrap();
        assert!(err < 1.0, "step {} off by {err} NM", s.offset);
    }
}

fn centers() -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..30).prop_map(|v| {
        v.into_iter()
            .map(|(x, y)| Point::new(vec![x, y]).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn epanechnikov_draws_stay_near_centers(cs in centers(), h in 0.05f64..2.0, seed in any::<u64>()) {
        let bw = Bandwidth::isotropic(h, 2).unwrap();
        let kde = DensityEstimate::build(cs.clone(), bw.clone(), Kernel::Epanechnikov).unwrap();
        for p in kde.draw(200, &mut stream(seed)) {
            let near = cs.iter().map(|c| Metric::Euclidean.distance(c, &p).unwrap()).fold(f64::INFINITY, f64::min);
            prop_assert!(near <= bw.norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn regions_from_one_substream_nest(cs in centers(), seed in any::<u64>(), step in 0u64..50) {
        let kde = Arc::new(DensityEstimate::build(cs, Bandwidth::isotropic(0.7, 2).unwrap(), Kernel::Gaussian).unwrap());
        let thresholds: Vec<f64> = [0.05, 0.3, 0.7, 0.95]
            .iter()
            .map(|&a| estimate_hdr(kde.clone(), a, 2000, &mut substream(seed, step)).unwrap().threshold())
            .collect();
        for w in thresholds.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
    }
}
