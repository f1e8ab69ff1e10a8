use std::path::{Path, PathBuf};
use std::sync::Arc;

use trajkde_core::energy::Grid;
use trajkde_core::forecast::{run_forecast, Forecast};
use trajkde_core::hdr::estimate_hdr;
use trajkde_core::kde::DensityEstimate;
use trajkde_core::metrics::{evaluate, EvalReport};
use trajkde_core::rng::{stream, substream};
use trajkde_core::synthgen::{generate_loiter, generate_lorenz};
use trajkde_core::{Metric, Trajectory};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::formats::{
    format_density_grid, format_eval_steps, format_eval_summary, format_forecast, format_hdr_grid,
    format_support, format_trajectory, num, parse_forecast, parse_support, read_mask, read_text,
    read_trajectory, write_atomic, ForecastFile,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `name.meta` next to the outputs: everything needed to rerun bit for bit.
fn write_meta(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    extra: &[(&str, String)],
) -> Result<PathBuf> {
    let mut text = format!(
        "# trajkde meta\ncommand = {command}\nversion = {VERSION}\nconfig_hash = {}\n",
        cfg.hash()
    );
    for (k, v) in extra {
        text.push_str(&format!("{k} = {v}\n"));
    }
    text.push_str("# config\n");
    text.push_str(&cfg.canonical());
    let path = dir.join(format!("{command}.meta"));
    write_atomic(&path, &text)?;
    log::info!("{command}: outputs in {}", dir.display());
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct SynthOutputs {
    pub noisy: PathBuf,
    pub clean: PathBuf,
    /// `(history, truth)` when a holdout was requested.
    pub split: Option<(PathBuf, PathBuf)>,
    pub meta: PathBuf,
}

/// Writes `noisy.csv` and `clean.csv`. With `holdout = k > 0` it also writes
/// `history.csv` (all but the last `k` noisy samples) and `truth.csv` (the
/// clean samples from the last history time onward).
pub fn synth(cfg: &RunConfig) -> Result<SynthOutputs> {
    let seed = cfg.seed()?;
    let mut rng = stream(seed);
    let generator = cfg.raw("generator").unwrap_or("loiter");
    let (noisy, clean, noise) = match generator {
        "lorenz" => {
            let spec = cfg.lorenz_spec()?;
            let g = generate_lorenz(&spec, &mut rng)?;
            (g.noisy, g.clean, spec.noise_sigma)
        }
        "loiter" | "loiter5" => {
            let spec = cfg.loiter_spec(generator == "loiter5")?;
            let g = generate_loiter(&spec, &mut rng)?;
            (g.noisy, g.clean, spec.noise_sigma)
        }
        other => {
            return Err(CliError::Config(format!(
                "generator must be lorenz, loiter or loiter5, got {other:?}"
            )))
        }
    };
    let dir = cfg.out_dir();
    let out = |name: &str| dir.join(name);
    write_atomic(
        &out("noisy.csv"),
        &format_trajectory(&noisy, Metric::Euclidean),
    )?;
    write_atomic(
        &out("clean.csv"),
        &format_trajectory(&clean, Metric::Euclidean),
    )?;
    let holdout = cfg.usize("holdout")?.unwrap_or(0);
    let split = if holdout > 0 {
        let n = noisy.len();
        if holdout + 3 > n {
            return Err(CliError::Config(format!(
                "holdout {holdout} leaves fewer than 3 history samples out of {n}"
            )));
        }
        let history = noisy.slice(0, n - holdout);
        let truth = clean.slice(n - holdout - 1, n);
        write_atomic(
            &out("history.csv"),
            &format_trajectory(&history, Metric::Euclidean),
        )?;
        write_atomic(
            &out("truth.csv"),
            &format_trajectory(&truth, Metric::Euclidean),
        )?;
        Some((out("history.csv"), out("truth.csv")))
    } else {
        None
    };
    let meta = write_meta(
        &dir,
        "synth",
        cfg,
        &[
            ("seed", seed.to_string()),
            ("generator", generator.to_string()),
            ("noise_sigma", num(noise)),
            ("samples", noisy.len().to_string()),
        ],
    )?;
    Ok(SynthOutputs {
        noisy: out("noisy.csv"),
        clean: out("clean.csv"),
        split,
        meta,
    })
}

/// Writes `forecast.txt`, `support.txt` and `forecast.meta`; with
/// `export_density` also per-step density and region grids.
pub fn forecast(cfg: &RunConfig) -> Result<Forecast> {
    let input = cfg.path_req("input")?;
    let (history, file_metric) = read_trajectory(&input)?;
    let mut fc = cfg.forecast_config(&history)?;
    if cfg.raw("metric") == Some("euclidean") && file_metric != Metric::Euclidean {
        fc.metric = file_metric;
    }
    if let Some(mask) = cfg.path("mask") {
        fc.mask = Some(read_mask(&mask)?);
    }
    let f = run_forecast(&history, &fc).map_err(|e| match e {
        trajkde_core::Error::NoAnalogues { .. } => CliError::NoAnalogues(e.to_string()),
        trajkde_core::Error::InvalidParameter(_) => CliError::Config(e.to_string()),
        other => CliError::Data(format!("forecast failed: {other}")),
    })?;
    let dir = cfg.out_dir();
    let origin = history.time(history.len() - 1);
    write_atomic(&dir.join("forecast.txt"), &format_forecast(&f, &fc, origin))?;
    write_atomic(&dir.join("support.txt"), &format_support(&f, history.dim()))?;
    if cfg.bool("export_density")? {
        let cells = cfg.usize("density_cells")?.unwrap_or(100);
        for (s, e) in f.present() {
            let grid = density_grid(cfg, e.density(), cells)?;
            write_atomic(
                &dir.join(format!("density_step_{}.txt", s.offset)),
                &format_density_grid(e.density(), &grid, s.offset)?,
            )?;
            write_atomic(
                &dir.join(format!("hdr_step_{}.txt", s.offset)),
                &format_hdr_grid(&e.region, &grid, s.offset)?,
            )?;
        }
    }
    write_meta(
        &dir,
        "forecast",
        cfg,
        &[
            ("seed", fc.seed.to_string()),
            ("input", input.display().to_string()),
            ("matches", f.matches.len().to_string()),
            ("steps", f.steps.len().to_string()),
            ("present_steps", f.present().count().to_string()),
            ("dropped_paths", f.dropped_paths.to_string()),
        ],
    )?;
    Ok(f)
}

fn density_grid(cfg: &RunConfig, density: &DensityEstimate, cells: usize) -> Result<Grid> {
    let (mut lo, mut hi) = density.support_box();
    if let Some(l) = cfg.list("box_lower")? {
        lo = l;
    }
    if let Some(u) = cfg.list("box_upper")? {
        hi = u;
    }
    if lo.len() != density.dim() || hi.len() != density.dim() {
        return Err(CliError::Config(format!(
            "box_lower and box_upper need {} values",
            density.dim()
        )));
    }
    Ok(Grid::new(lo, hi, vec![cells.max(2); density.dim()])?)
}

pub struct LoadedForecast {
    pub file: ForecastFile,
    pub steps: Vec<trajkde_core::forecast::ForecastStep>,
}

pub fn load_forecast(dir: &Path) -> Result<LoadedForecast> {
    let file = parse_forecast(&read_text(&dir.join("forecast.txt"))?)?;
    let support = parse_support(&read_text(&dir.join("support.txt"))?)?;
    let steps = file.to_steps(&support)?;
    Ok(LoadedForecast { file, steps })
}

/// Writes `eval_summary.txt`, `eval_steps.csv` and `eval.meta`.
pub fn eval(cfg: &RunConfig) -> Result<EvalReport> {
    let (truth, _) = read_trajectory(&cfg.path_req("truth")?)?;
    let dir_in = cfg.path_req("forecast_dir")?;
    let loaded = load_forecast(&dir_in)?;
    if loaded.file.dim != truth.dim() {
        return Err(CliError::Data(format!(
            "forecast has dimension {}, truth has {}",
            loaded.file.dim,
            truth.dim()
        )));
    }
    let max_lag = cfg.usize("max_lag")?.unwrap_or(20);
    let report = evaluate(
        &truth,
        &loaded.steps,
        cfg.metric()?,
        loaded.file.origin,
        max_lag,
    )?;
    let dir = cfg.out_dir();
    write_atomic(&dir.join("eval_summary.txt"), &format_eval_summary(&report))?;
    write_atomic(&dir.join("eval_steps.csv"), &format_eval_steps(&report))?;
    write_meta(
        &dir,
        "eval",
        cfg,
        &[("forecast_dir", dir_in.display().to_string())],
    )?;
    Ok(report)
}

/// Density grid for one step plus one region grid per alpha in `alphas`
/// (default: the configured alpha). Regions for one step share a random
/// substream, so thresholds are monotone in alpha and the regions nest.
pub fn density(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let dir_in = cfg.path_req("forecast_dir")?;
    let loaded = load_forecast(&dir_in)?;
    let step = cfg
        .usize("step")?
        .ok_or_else(|| CliError::Config("step is required".into()))?;
    let est = loaded
        .steps
        .iter()
        .find(|s| s.offset == step)
        .ok_or_else(|| CliError::Data(format!("forecast has no step {step}")))?
        .estimate
        .as_ref()
        .ok_or_else(|| CliError::Data(format!("step {step} is absent")))?;
    let density: Arc<DensityEstimate> = est.density().clone();
    let cells = cfg.usize("density_cells")?.unwrap_or(100);
    let grid = density_grid(cfg, &density, cells)?;
    let dir = cfg.out_dir();
    let mut written = vec![dir.join(format!("density_step_{step}.txt"))];
    write_atomic(&written[0], &format_density_grid(&density, &grid, step)?)?;
    let alphas = match cfg.list("alphas")? {
        Some(a) => a,
        None => vec![cfg.alpha()?],
    };
    let seed = cfg.seed()?;
    let m = cfg.usize("mc_samples")?.unwrap_or(10_000);
    for a in alphas {
        let region = estimate_hdr(density.clone(), a, m, &mut substream(seed, step as u64))
            .map_err(|e| CliError::Config(e.to_string()))?;
        let path = dir.join(format!("hdr_step_{step}_alpha_{a}.txt"));
        write_atomic(&path, &format_hdr_grid(&region, &grid, step)?)?;
        written.push(path);
    }
    write_meta(&dir, "density", cfg, &[("step", step.to_string())])?;
    Ok(written)
}

/// Convenience for callers holding a trajectory in memory.
pub fn write_trajectory(path: &Path, traj: &Trajectory, metric: Metric) -> Result<()> {
    write_atomic(path, &format_trajectory(traj, metric))
}
