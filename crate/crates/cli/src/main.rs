//! `calabi`: batch front end for equiaffine checks, Calabi products and
//! their decomposition.

#![allow(clippy::needless_range_loop)]

mod commands;
mod output;
mod project;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use calabi_core::checks::Tolerances;
use calabi_core::decompose::DEFAULT_RESTARTS;
use clap::{Parser, Subcommand, ValueEnum};

use commands::Settings;
use output::{write_atomic, Envelope};
use project::Project;

/// Bad arguments or unreadable input; exits with status 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Parser)]
#[command(name = "calabi", version, about = "Equiaffine analysis of immersions and Calabi products")]
struct Cli {
    /// Seed for the axis searches.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tolerance override, `name=value`; repeatable.
    #[arg(long = "tol", global = true, value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Newton restarts per grid point.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// Project file (TOML) with immersions, grids and defaults.
    #[arg(long, global = true)]
    project: Option<PathBuf>,
    /// Also write the JSON document to this path.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Point,
    Pair,
}

#[derive(Subcommand)]
enum Command {
    /// Blaschke frame summary at one point.
    Analyze {
        file: String,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Sphere, apolarity, Gauss/Codazzi, unimodular and parallel-cubic reports.
    Check {
        file: String,
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
    },
    /// Emit the Calabi product of one (point) or two (pair) factors.
    Construct {
        kind: Kind,
        #[arg(required = true, num_args = 1..=2)]
        factors: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decide whether the surface is a Calabi product.
    Detect {
        file: String,
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
    },
    /// Recover factor point clouds from a detected product.
    Extract {
        file: String,
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn tolerances(project: &Project, overrides: &[String]) -> Result<Tolerances> {
    let mut tol = Tolerances::default();
    let known: Vec<String> = tol.names().map(String::from).collect();
    let mut set = |name: &str, value: f64| -> Result<()> {
        if !known.iter().any(|k| k == name) {
            bail!(Usage(format!("unknown tolerance '{name}' (known: {})", known.join(", "))));
        }
        if !(value.is_finite() && value >= 0.0) {
            bail!(Usage(format!("tolerance {name} must be a finite non-negative number")));
        }
        tol.set(name, value);
        Ok(())
    };
    for (k, v) in &project.config.options.tolerances {
        set(k, *v)?;
    }
    for item in overrides {
        let (k, v) = item.split_once('=').ok_or_else(|| Usage(format!("--tol expects name=value, got '{item}'")))?;
        let v: f64 = v.trim().parse().map_err(|_| Usage(format!("bad tolerance value in '{item}'")))?;
        set(k.trim(), v)?;
    }
    Ok(tol)
}

fn output_path(flag: Option<PathBuf>, project: &Project) -> Result<PathBuf> {
    flag.or_else(|| project.config.options.output.clone()).ok_or_else(|| Usage("an output path (-o) is required".into()).into())
}

fn run(cli: Cli) -> Result<bool> {
    let project = match &cli.project {
        Some(p) => Project::load(p)?,
        None => Project::default(),
    };
    let opts = &project.config.options;
    let settings = Settings {
        seed: cli.seed.or(opts.seed).unwrap_or(42),
        restarts: cli.restarts.or(opts.restarts).unwrap_or(DEFAULT_RESTARTS),
        tolerances: tolerances(&project, &cli.tol)?,
    };
    let seed = settings.seed;
    let env = match cli.command {
        Command::Analyze { file, at } => {
            let (input, def) = project.immersion(&file, None)?;
            let mut env = Envelope::new("analyze", vec![input], seed);
            commands::analyze(&mut env, &def, &at, &settings)?;
            env
        }
        Command::Check { file, grid } => {
            let (input, def) = project.immersion(&file, None)?;
            let points = project.grid(&grid, def.dim())?.points();
            let mut env = Envelope::new("check", vec![input], seed);
            commands::check(&mut env, &def, &points, &settings)?;
            env
        }
        Command::Construct { kind, factors, output } => {
            let out = output_path(output, &project)?;
            let mut inputs = Vec::new();
            let mut defs = Vec::new();
            for f in &factors {
                let (input, def) = project.immersion(f, None)?;
                inputs.push(input);
                defs.push(def);
            }
            let mut env = Envelope::new("construct", inputs, seed);
            commands::construct(&mut env, matches!(kind, Kind::Pair), &defs, &out, &settings)?;
            env
        }
        Command::Detect { file, grid } => {
            let (input, def) = project.immersion(&file, None)?;
            let points = project.grid(&grid, def.dim())?.points();
            let mut env = Envelope::new("detect", vec![input], seed);
            commands::detect_cmd(&mut env, &def, &points, &settings)?;
            env
        }
        Command::Extract { file, grid, output } => {
            let dir = output_path(output, &project)?;
            let (input, def) = project.immersion(&file, None)?;
            let points = project.grid(&grid, def.dim())?.points();
            let mut env = Envelope::new("extract", vec![input], seed);
            commands::extract(&mut env, &def, &points, &dir, &settings)?;
            env
        }
    };
    let json = env.to_json()?;
    if let Some(path) = &cli.report {
        write_atomic(path, json.as_bytes())?;
    }
    print!("{json}");
    Ok(env.all_pass())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("CALABI_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        calabi_core::exec::limit_threads(n);
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("calabi: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
