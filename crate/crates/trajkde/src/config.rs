//! Flat `key = value` run configuration. Later sources override earlier
//! ones: defaults, then the config file, then command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use trajkde_core::energy::{Lagrangian, SigmaSchedule};
use trajkde_core::forecast::ForecastConfig;
use trajkde_core::geometry::EARTH_RADIUS_NM;
use trajkde_core::synthgen::{LoiterSpec, LorenzSpec};
use trajkde_core::{Bandwidth, Kernel, Metric, Trajectory};

use crate::error::{CliError, Result};

/// Every accepted key with its default (empty means unset).
const KEYS: &[(&str, &str)] = &[
    ("input", ""),
    ("mask", ""),
    ("out_dir", "out"),
    ("truth", ""),
    ("forecast_dir", ""),
    ("seed", "0"),
    ("epsilon", ""),
    ("theta", "1"),
    ("dt", ""),
    ("horizon", ""),
    ("alpha", "0.3"),
    ("bandwidth", ""),
    ("kernel", "epanechnikov"),
    ("lagrangian", "gaussian_wells"),
    ("sigma", "1"),
    ("sigma_mode", "constant"),
    ("sigma_rate", "0"),
    ("metric", "euclidean"),
    ("earth_radius", ""),
    ("grid_cells", "200"),
    ("mc_samples", "10000"),
    ("generator", "loiter"),
    ("samples", ""),
    ("holdout", "0"),
    ("noise_sigma", ""),
    ("lorenz_sigma", "10"),
    ("lorenz_rho", "28"),
    ("lorenz_beta", "2.6666666666666665"),
    ("lorenz_dt", "0.01"),
    ("lorenz_x0", "1,1,1"),
    ("loiter_speed", "1"),
    ("loiter_step_dt", "0.5"),
    ("loiter_dwell", "4"),
    ("export_density", "false"),
    ("density_cells", "100"),
    ("box_lower", ""),
    ("box_upper", ""),
    ("step", ""),
    ("alphas", ""),
    ("max_lag", "20"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn keys() -> impl Iterator<Item = &'static str> {
        KEYS.iter().map(|(k, _)| *k)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        match self.values.get_mut(&key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(cfg_err(format!("unknown config key {key:?}"))),
        }
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v).map_err(|e| match e {
                CliError::Config(m) => cfg_err(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.merge_text(&text)
    }

    /// Every key in sorted order, one `key = value` line each.
    pub fn canonical(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .filter(|v| !v.is_empty())
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| cfg_err(format!("{key} is required")))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| cfg_err(format!("{key} must be a finite number, got {v:?}")))
            })
            .transpose()
    }

    fn f64_req(&self, key: &str) -> Result<f64> {
        self.required(key)?;
        Ok(self.f64(key)?.expect("checked above"))
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.raw(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| cfg_err(format!("{key} must be a nonnegative integer, got {v:?}")))
            })
            .transpose()
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| {
                                cfg_err(format!("{key} must be a comma-separated list of numbers"))
                            })
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            None | Some("false") | Some("0") | Some("no") => Ok(false),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some(v) => Err(cfg_err(format!("{key} must be true or false, got {v:?}"))),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    pub fn path_req(&self, key: &str) -> Result<PathBuf> {
        self.required(key).map(PathBuf::from)
    }

    pub fn seed(&self) -> Result<u64> {
        let v = self.required("seed")?;
        v.parse().map_err(|_| {
            cfg_err(format!(
                "seed must be an unsigned 64-bit integer, got {v:?}"
            ))
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.path("out_dir").unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn metric(&self) -> Result<Metric> {
        match self.required("metric")? {
            "euclidean" => Ok(Metric::Euclidean),
            "haversine" => {
                let r = self.f64("earth_radius")?.unwrap_or(EARTH_RADIUS_NM);
                Metric::haversine(r).map_err(|e| cfg_err(e.to_string()))
            }
            other => Err(cfg_err(format!(
                "metric must be euclidean or haversine, got {other:?}"
            ))),
        }
    }

    pub fn alpha(&self) -> Result<f64> {
        let a = self.f64_req("alpha")?;
        if !(a > 0.0 && a < 1.0) {
            return Err(cfg_err(format!("alpha must lie in (0, 1), got {a}")));
        }
        Ok(a)
    }

    /// Forecast settings for a history of the given dimension. Without an
    /// explicit bandwidth, Scott's rule on the history is used.
    pub fn forecast_config(&self, history: &Trajectory) -> Result<ForecastConfig> {
        let epsilon = self.f64_req("epsilon")?;
        let theta = self.f64_req("theta")?;
        let dt = self.f64_req("dt")?;
        let horizon = self.f64_req("horizon")?;
        // Ordered checks give the most specific message first.
        if epsilon <= 0.0 {
            return Err(cfg_err(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(0.0..=2.0).contains(&theta) {
            return Err(cfg_err(format!("theta must lie in [0, 2], got {theta}")));
        }
        let alpha = self.alpha()?;
        if dt <= 0.0 {
            return Err(cfg_err(format!("dt must be positive, got {dt}")));
        }
        if horizon < dt {
            return Err(cfg_err(format!(
                "horizon T must be at least dt, got T = {horizon} and dt = {dt}"
            )));
        }
        let d = history.dim();
        let bandwidth = match self.list("bandwidth")? {
            None => Bandwidth::scott(history.points())?,
            Some(h) if h.len() == 1 => Bandwidth::isotropic(h[0], d)?,
            Some(h) if h.len() == d => Bandwidth::new(h)?,
            Some(h) => {
                return Err(cfg_err(format!(
                    "bandwidth needs 1 or {d} values, got {}",
                    h.len()
                )))
            }
        };
        let sigma = self.f64_req("sigma")?;
        let sigmas = match self.required("sigma_mode")? {
            "constant" => SigmaSchedule::Constant(sigma),
            "pheromone" => SigmaSchedule::Pheromone {
                base: sigma,
                rate: self.f64_req("sigma_rate")?,
            },
            other => {
                return Err(cfg_err(format!(
                    "sigma_mode must be constant or pheromone, got {other:?}"
                )))
            }
        };
        let mut cfg = ForecastConfig::new(epsilon, theta, dt, horizon, bandwidth);
        cfg.alpha = alpha;
        cfg.kernel =
            Kernel::from_name(self.required("kernel")?).map_err(|e| cfg_err(e.to_string()))?;
        cfg.lagrangian = Lagrangian::from_name(self.required("lagrangian")?)
            .map_err(|e| cfg_err(e.to_string()))?;
        cfg.sigmas = sigmas;
        cfg.metric = self.metric()?;
        cfg.grid_cells = self.usize("grid_cells")?.unwrap_or(200);
        cfg.mc_samples = self.usize("mc_samples")?.unwrap_or(10_000);
        cfg.seed = self.seed()?;
        cfg.validate().map_err(|e| cfg_err(e.to_string()))?;
        Ok(cfg)
    }

    pub fn lorenz_spec(&self) -> Result<LorenzSpec> {
        let x0 = self
            .list("lorenz_x0")?
            .ok_or_else(|| cfg_err("lorenz_x0 is required"))?;
        let mut spec = LorenzSpec {
            sigma: self.f64_req("lorenz_sigma")?,
            rho: self.f64_req("lorenz_rho")?,
            beta: self.f64_req("lorenz_beta")?,
            dt: self.f64_req("lorenz_dt")?,
            x0: x0
                .try_into()
                .map_err(|_| cfg_err("lorenz_x0 needs exactly 3 values"))?,
            ..LorenzSpec::default()
        };
        if let Some(n) = self.usize("samples")? {
            spec.steps = n;
        }
        if let Some(s) = self.f64("noise_sigma")? {
            spec.noise_sigma = s;
        }
        spec.validate().map_err(|e| cfg_err(e.to_string()))?;
        Ok(spec)
    }

    pub fn loiter_spec(&self, five: bool) -> Result<LoiterSpec> {
        let mut spec = if five {
            LoiterSpec::five_point()
        } else {
            LoiterSpec::six_point()
        };
        spec.speed = self.f64_req("loiter_speed")?;
        spec.step_dt = self.f64_req("loiter_step_dt")?;
        let dwell = self.usize("loiter_dwell")?.unwrap_or(4);
        spec.dwell_steps = vec![dwell; spec.loiter_points.len()];
        if let Some(n) = self.usize("samples")? {
            spec.samples = n;
        }
        if let Some(s) = self.f64("noise_sigma")? {
            spec.noise_sigma = s;
        }
        spec.validate().map_err(|e| cfg_err(e.to_string()))?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history() -> Trajectory {
        Trajectory::from_rows((0..10).map(|k| (k as f64, vec![k as f64, 0.5 * k as f64]))).unwrap()
    }

    fn base() -> RunConfig {
        let mut c = RunConfig::default();
        c.merge_text("epsilon = 0.5\ndt = 0.5\nhorizon = 10 # comment\nbandwidth = 0.2\n")
            .unwrap();
        c
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut c = RunConfig::default();
        let err = c.merge_text("epsilon = 1\nepsilonn = 2\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 2"));
        assert!(c.set("nope", "1").is_err());
    }

    #[test]
    fn validation_messages() {
        let h = history();
        assert!(base().forecast_config(&h).is_ok());
        for (k, v, needle) in [
            ("epsilon", "0", "epsilon must be positive"),
            ("epsilon", "-1", "epsilon must be positive"),
            ("theta", "2.5", "theta must lie in [0, 2]"),
            ("alpha", "1", "alpha must lie in (0, 1)"),
            ("alpha", "0", "alpha must lie in (0, 1)"),
            ("dt", "0", "dt must be positive"),
            ("horizon", "0.1", "horizon T must be at least dt"),
            ("bandwidth", "1,2,3", "bandwidth needs 1 or 2 values"),
            ("epsilon", "abc", "epsilon must be a finite number"),
        ] {
            let mut c = base();
            c.set(k, v).unwrap();
            let msg = c.forecast_config(&h).unwrap_err().to_string();
            assert!(msg.contains(needle), "{k}={v}: {msg}");
        }
    }

    #[test]
    fn hash_tracks_values() {
        let a = base();
        let mut b = base();
        assert_eq!(a.hash(), b.hash());
        b.set("seed", "7").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn missing_bandwidth_uses_scott() {
        let mut c = base();
        c.set("bandwidth", "").unwrap();
        let cfg = c.forecast_config(&history()).unwrap();
        assert_eq!(cfg.bandwidth.dim(), 2);
    }
}
