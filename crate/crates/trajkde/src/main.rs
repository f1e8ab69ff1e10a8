use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trajkde::{commands, CliError, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "trajkde",
    version,
    about = "Density forecasts for recurrent trajectories"
)]
struct Cli {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Set any config key, e.g. `--set sigma_mode=pheromone`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic history (clean and noisy files).
    Synth(SynthArgs),
    /// Forecast from a history file.
    Forecast(ForecastArgs),
    /// Score a forecast against a truth trajectory.
    Eval(EvalArgs),
    /// Export density and region grids for one forecast step.
    Density(DensityArgs),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    out_dir: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// lorenz, loiter or loiter5
    #[arg(long)]
    generator: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    noise_sigma: Option<String>,
    #[arg(long)]
    holdout: Option<String>,
}

#[derive(Args, Debug)]
struct ForecastArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    mask: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// One value, or one per dimension separated by commas.
    #[arg(long)]
    bandwidth: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    lagrangian: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    grid_cells: Option<String>,
    #[arg(long)]
    mc_samples: Option<String>,
    #[arg(long)]
    export_density: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    truth: Option<String>,
    #[arg(long)]
    forecast_dir: Option<String>,
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    max_lag: Option<String>,
}

#[derive(Args, Debug)]
struct DensityArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    forecast_dir: Option<String>,
    #[arg(long)]
    step: Option<String>,
    #[arg(long)]
    box_lower: Option<String>,
    #[arg(long)]
    box_upper: Option<String>,
    #[arg(long)]
    density_cells: Option<String>,
    /// Comma-separated alpha sweep.
    #[arg(long)]
    alphas: Option<String>,
}

fn apply(cfg: &mut RunConfig, pairs: &[(&str, &Option<String>)]) -> Result<(), CliError> {
    for (k, v) in pairs {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.merge_file(path)?;
    }
    for s in &cli.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {s:?}")))?;
        cfg.set(k, v)?;
    }
    let common =
        |cfg: &mut RunConfig, c: &Common| apply(cfg, &[("out_dir", &c.out_dir), ("seed", &c.seed)]);
    match cli.command {
        Command::Synth(a) => {
            common(&mut cfg, &a.common)?;
            apply(
                &mut cfg,
                &[
                    ("generator", &a.generator),
                    ("samples", &a.samples),
                    ("noise_sigma", &a.noise_sigma),
                    ("holdout", &a.holdout),
                ],
            )?;
            let out = commands::synth(&cfg)?;
            println!("{}", out.noisy.display());
            println!("{}", out.clean.display());
            if let Some((h, t)) = out.split {
                println!("{}", h.display());
                println!("{}", t.display());
            }
        }
        Command::Forecast(a) => {
            common(&mut cfg, &a.common)?;
            apply(
                &mut cfg,
                &[
                    ("input", &a.input),
                    ("mask", &a.mask),
                    ("epsilon", &a.epsilon),
                    ("theta", &a.theta),
                    ("dt", &a.dt),
                    ("horizon", &a.horizon),
                    ("alpha", &a.alpha),
                    ("bandwidth", &a.bandwidth),
                    ("kernel", &a.kernel),
                    ("lagrangian", &a.lagrangian),
                    ("sigma", &a.sigma),
                    ("metric", &a.metric),
                    ("grid_cells", &a.grid_cells),
                    ("mc_samples", &a.mc_samples),
                ],
            )?;
            if a.export_density {
                cfg.set("export_density", "true")?;
            }
            let f = commands::forecast(&cfg)?;
            println!(
                "matches {} steps {} present {}",
                f.matches.len(),
                f.steps.len(),
                f.present().count()
            );
        }
        Command::Eval(a) => {
            common(&mut cfg, &a.common)?;
            apply(
                &mut cfg,
                &[
                    ("truth", &a.truth),
                    ("forecast_dir", &a.forecast_dir),
                    ("metric", &a.metric),
                    ("max_lag", &a.max_lag),
                ],
            )?;
            let r = commands::eval(&cfg)?;
            print!("{}", trajkde::formats::format_eval_summary(&r));
        }
        Command::Density(a) => {
            common(&mut cfg, &a.common)?;
            apply(
                &mut cfg,
                &[
                    ("forecast_dir", &a.forecast_dir),
                    ("step", &a.step),
                    ("box_lower", &a.box_lower),
                    ("box_upper", &a.box_upper),
                    ("density_cells", &a.density_cells),
                    ("alphas", &a.alphas),
                ],
            )?;
            for p in commands::density(&cfg)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trajkde: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
