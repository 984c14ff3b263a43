use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;
use stokes_control::driver::{self, ExperimentConfig, ExperimentKind, OutputFormat};
use stokes_control::stokes::Strategy;

/// Experiment driver: joint spectra, preconditioned solves, data recovery,
/// timing and validation for the Stokes tracking-control problem.
#[derive(Parser, Debug)]
#[command(name = "stokes-lab", version, about)]
struct Args {
    /// Experiment kind: spectrum | solve | recovery | timing | validate.
    #[arg(long)]
    experiment: Option<String>,

    /// TOML configuration file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Finest grid exponent (h = 2^-level).
    #[arg(long)]
    level: Option<usize>,

    /// Preconditioner grid counts, e.g. 1,2,3,4 (1 = plain CG).
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,

    /// Tikhonov weights, e.g. 1e-4,1e-5.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,

    #[arg(long = "gamma-u")]
    gamma_u: Option<f64>,

    #[arg(long = "gamma-p")]
    gamma_p: Option<f64>,

    /// Pressure constraint strategy: zeromean | pinned.
    #[arg(long)]
    strategy: Option<String>,

    #[arg(long)]
    tol: Option<f64>,

    #[arg(long = "max-iter")]
    max_iter: Option<usize>,

    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Output format: csv | json.
    #[arg(long)]
    format: Option<String>,

    /// Seed for the random-vector checks in the validate experiment.
    #[arg(long)]
    seed: Option<u64>,

    /// Enable the heavy presets (finer grids, longer runs).
    #[arg(long)]
    heavy: bool,
}

fn build_config(args: &Args) -> stokes_control::Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.experiment) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            ExperimentConfig::from_toml(&text)?
        }
        (None, Some(exp)) => ExperimentConfig::new(exp.parse()?),
        (None, None) => {
            return Err(stokes_control::Error::Config(
                "either --experiment or --config is required".into(),
            ))
        }
    };
    if let Some(exp) = &args.experiment {
        cfg.experiment = exp.parse::<ExperimentKind>()?;
    }
    if let Some(v) = args.level {
        cfg.level = v;
    }
    if let Some(v) = &args.levels {
        cfg.num_levels = v.clone();
    }
    if let Some(v) = &args.beta {
        cfg.beta = v.clone();
    }
    if let Some(v) = args.gamma_u {
        cfg.gamma_u = v;
    }
    if let Some(v) = args.gamma_p {
        cfg.gamma_p = v;
    }
    if let Some(s) = &args.strategy {
        cfg.strategy = s.parse::<Strategy>()?;
    }
    if let Some(v) = args.tol {
        cfg.tol = v;
    }
    if let Some(v) = args.max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = &args.out {
        cfg.out = Some(v.clone());
    }
    if let Some(f) = &args.format {
        cfg.format = f.parse::<OutputFormat>()?;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if args.heavy {
        cfg.heavy = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &Args) -> stokes_control::Result<bool> {
    let cfg = build_config(args)?;
    let output = driver::run(&cfg)?;
    let text = match cfg.format {
        OutputFormat::Csv => driver::to_csv(&output),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&driver::to_json(&cfg, &output))
                .expect("json rendering cannot fail");
            s.push('\n');
            s
        }
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(output.all_ok)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
