use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use fluxtheo::experiment::{read_counts_csv, FitOptions};
use fluxtheo::scenario::{run, run_fit, validate, FitSettings, RunOptions, Scenario};
use fluxtheo::selftest::{run_all, run_one, SelftestConfig, Status};
use fluxtheo::{ame, tolerance, Error};

/// Fluctuation theorems for quantum channels and annealer simulations.
#[derive(Parser)]
#[command(name = "fluxtheo", version)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps and fits, 0 for one per logical core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Local error target of the master-equation integrator.
    #[arg(long, global = true)]
    ode_tol: Option<f64>,
    /// Schedule CSV (columns s, A, B) replacing the one in anneal specs.
    #[arg(long, global = true)]
    schedule: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Run a scenario and write its results.
    Run { scenario: PathBuf },
    /// Fit the bath coupling to counts (columns J, t_f_us, state_label, count).
    Fit {
        data: PathBuf,
        /// Anneal spec JSON; J and t_f are taken from the data.
        spec: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        kappa_min: f64,
        #[arg(long, default_value_t = 1e-2)]
        kappa_max: f64,
        #[arg(long, default_value_t = FitOptions::default().points_per_decade)]
        points_per_decade: usize,
        #[arg(long, default_value_t = FitOptions::default().ln_tol)]
        ln_tol: f64,
    },
    /// Run the acceptance suite.
    Selftest {
        /// Reduced sample sizes; skips the kappa fit.
        #[arg(long)]
        quick: bool,
        /// Run a single criterion.
        #[arg(long)]
        only: Option<u8>,
    },
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_numerical() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}

fn execute(cli: Cli) -> Result<ExitCode, Error> {
    let opts = RunOptions { out: cli.out.clone(), seed: cli.seed, threads: cli.threads, schedule: cli.schedule.clone() };
    match cli.command {
        Command::Validate { scenario } => {
            let s = Scenario::load(&scenario)?;
            let report = validate(&s)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Run { scenario } => {
            let s = Scenario::load(&scenario)?;
            let out = run(&s, &opts)?;
            for f in &out.files {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit { data, spec, kappa_min, kappa_max, points_per_decade, ln_tol } => {
            let file: ame::AnnealSpecFile = serde_json::from_reader(std::fs::File::open(&spec)?)?;
            let mut template = file.build(spec.parent())?;
            if let Some(path) = &opts.schedule {
                template = template.with_schedule(ame::Schedule::from_csv_path(path)?)?;
            }
            let points = read_counts_csv(std::fs::File::open(&data)?, template.n_qubits())?;
            let settings = FitSettings {
                range: (kappa_min, kappa_max),
                options: FitOptions { points_per_decade, ln_tol, ..FitOptions::default() },
                threads: cli.threads,
            };
            let dir = cli.out.unwrap_or_else(|| PathBuf::from("out"));
            let out = run_fit(&points, template, &settings, &dir, Some(&data))?;
            println!("{}", serde_json::to_string_pretty(&out.summary)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest { quick, only } => {
            let cfg = SelftestConfig { quick, seed: cli.seed, threads: cli.threads };
            let reports = match only {
                Some(id) => {
                    let r = run_one(&cfg, id);
                    println!("{r}");
                    vec![r]
                }
                None => run_all(&cfg, |r| println!("{r}")),
            };
            let failed = reports.iter().filter(|r| r.status == Status::Fail).count();
            println!("{} of {} criteria failed", failed, reports.len());
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FLUXTHEO_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(tol) = cli.ode_tol {
        if !(tol > 0.0 && tol.is_finite()) {
            eprintln!("error: --ode-tol must be positive");
            return ExitCode::from(2);
        }
        tolerance::set(tolerance::Tolerances { ode: tol, ..tolerance::get() });
    }
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
