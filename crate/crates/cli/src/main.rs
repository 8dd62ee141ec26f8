//! `cogwpt`: generate scenarios, solve them, sweep parameters and aggregate
//! the resulting CSVs.
//!
//! Failures print a JSON object `{"error": kind, "message": text}` on stderr
//! and exit with status 1 (2 for usage errors).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cogwpt_core::experiment::{
    compare_dir, run_sweep, run_sweep_fixed, solve_record, write_rows, Axis, ExperimentConfig, Scheme, SweepSpec,
    CSV_SCHEMA_VERSION,
};
use cogwpt_core::scenario::{load_scenario, save_scenario};
use cogwpt_core::Error;
use serde_json::json;

const OUT_DIR_ENV: &str = "COGWPT_OUT_DIR";

#[derive(Parser)]
#[command(name = "cogwpt", version, about = "Reaction-aware energy beamforming experiments")]
struct Cli {
    /// Directory for outputs given without an explicit path.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment config; the built-in defaults are used without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-key override, e.g. `budgets.q_sum=0.4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one channel realization and write it as JSON.
    Gen {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file [default: <out-dir>/scenario_<seed>.json]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one scheme on a stored scenario and write the result record.
    Solve {
        scenario: PathBuf,
        #[arg(long, default_value = "proposed")]
        scheme: Scheme,
        #[arg(long, default_value_t = cogwpt_core::beamopt::DEFAULT_GRID_POINTS)]
        lambda_grid: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one parameter over seeds and schemes, one CSV row per cell.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Sweep a stored scenario instead of drawing channels (q_sum or gamma only).
        #[arg(long, conflicts_with = "config")]
        scenario: Option<PathBuf>,
        #[arg(long)]
        axis: Axis,
        /// Comma-separated values [default: the axis' standard list]
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Seeds as a list `0,3,7` or a half-open range `0..20`.
        #[arg(long, default_value = "0")]
        seeds: String,
        #[arg(long, value_delimiter = ',', default_value = "proposed,zf,mrt,conventional")]
        schemes: Vec<Scheme>,
        /// Overrides the config's lambda_grid.
        #[arg(long)]
        lambda_grid: Option<usize>,
        /// Seed each proposed solve with the previous value's solution.
        #[arg(long)]
        warm_start: bool,
        /// Output CSV [default: <out-dir>/sweep_<axis>.csv]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Aggregate every sweep CSV in a directory into mean ± std tables and
    /// per-curve plot data.
    Compare {
        dir: PathBuf,
        /// Output directory [default: the input directory]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::Config(format!("cannot parse seeds `{text}` (use `0,3,7` or `0..20`)"));
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b <= a {
            return Err(bad());
        }
        Ok((a..b).collect())
    } else {
        text.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
    }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::load(args.config.as_deref(), &args.overrides)
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text + "\n")?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Gen { config, seed, out } => {
            let cfg = load_config(&config)?;
            let s = cfg.scenario(seed)?;
            let path = out.unwrap_or_else(|| cli.out_dir.join(format!("scenario_{seed}.json")));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            save_scenario(&s, &path)?;
            println!("{}", path.display());
        }
        Command::Solve {
            scenario,
            scheme,
            lambda_grid,
            out,
        } => {
            if lambda_grid < 2 {
                return Err(Error::Config("lambda_grid must be at least 2".into()));
            }
            let s = load_scenario(&scenario)?;
            let record = solve_record(&s, scheme, lambda_grid)?;
            write_json(out.as_deref(), &record)?;
        }
        Command::Sweep {
            config,
            scenario,
            axis,
            values,
            seeds,
            schemes,
            lambda_grid,
            warm_start,
            out,
            jobs,
        } => {
            let mut spec = SweepSpec::new(axis, parse_seeds(&seeds)?);
            if let Some(v) = values {
                spec.values = v;
            }
            spec.schemes = schemes;
            spec.warm_start = warm_start;
            let mut cfg = load_config(&config)?;
            if let Some(g) = lambda_grid {
                cfg.lambda_grid = g;
                cfg.validate()?;
            }
            let rows = match scenario {
                Some(p) => run_sweep_fixed(&load_scenario(&p)?, &spec, cfg.lambda_grid, jobs)?,
                None => run_sweep(&cfg, &spec, jobs)?,
            };
            let path = out.unwrap_or_else(|| cli.out_dir.join(format!("sweep_{axis}.csv")));
            write_rows(&path, &rows)?;
            let meta = json!({
                "csv_schema_version": CSV_SCHEMA_VERSION,
                "axis": axis.name(),
                "values": spec.values,
                "seeds": spec.seeds,
                "schemes": spec.schemes,
                "warm_start": spec.warm_start,
                "config": cfg,
            });
            write_json(Some(&path.with_extension("meta.json")), &meta)?;
            println!("{}", path.display());
        }
        Command::Compare { dir, out } => {
            let out = out.unwrap_or_else(|| dir.clone());
            let result = compare_dir(&dir, &out)?;
            println!("{:<10} {:>12} {:<13} {:>5} {:>14} {:>12}", "axis", "value", "scheme", "n", "total_W", "std_W");
            for r in &result.summary {
                println!(
                    "{:<10} {:>12} {:<13} {:>5} {:>14.6e} {:>12.3e}",
                    r.axis.name(),
                    r.axis_value,
                    r.scheme.name(),
                    r.count,
                    r.total.mean,
                    r.total.std
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = json!({"error": "usage", "message": e.to_string().trim_end()});
            eprintln!("{err}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}
