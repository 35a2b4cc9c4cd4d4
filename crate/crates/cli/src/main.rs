use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

mod config;
mod run;
mod scenarios;

use config::ScenarioConfig;

#[derive(Parser)]
#[command(name = "simulate", version, about = "Dipole-coupled emitter array scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, a run manifest, or a bundled scenario by name.
    Run {
        target: String,
        /// Output directory [default: out/<name>]
        #[arg(long, env = "DFSIM_OUT")]
        out: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Relative integrator tolerance; the absolute one is 1e-3 of it.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// List the bundled scenarios.
    List,
    /// Print a bundled scenario file.
    Show { name: String },
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'static str,
    seed: u64,
    wall_time_seconds: f64,
    outputs: Vec<&'a str>,
    config: &'a ScenarioConfig,
}

fn resolve(target: &str) -> Result<ScenarioConfig> {
    let path = Path::new(target);
    if path.exists() {
        return ScenarioConfig::load(path);
    }
    match scenarios::get(target) {
        Some(text) => ScenarioConfig::parse(text).with_context(|| format!("bundled scenario `{target}`")),
        None => bail!("`{target}` is neither a file nor a bundled scenario (see `simulate list`)"),
    }
}

fn run(target: &str, out: Option<PathBuf>, seed: Option<u64>, tol: Option<f64>) -> Result<()> {
    let mut cfg = resolve(target)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = tol {
        if !(t.is_finite() && t > 0.0) {
            bail!("--tol must be a positive number");
        }
        cfg.integrator.rtol = t;
        cfg.integrator.atol = 1e-3 * t;
    }
    cfg.validate()?;
    let dir = out.unwrap_or_else(|| Path::new("out").join(&cfg.name));

    let start = Instant::now();
    let output = run::run(&cfg).with_context(|| format!("scenario `{}` failed", cfg.name))?;
    let wall = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, table) in &output.files {
        table.write_file(&dir.join(name)).with_context(|| format!("writing {name}"))?;
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        wall_time_seconds: wall,
        outputs: output.files.iter().map(|(n, _)| n.as_str()).collect(),
        config: &cfg,
    };
    std::fs::write(dir.join("manifest.toml"), toml::to_string(&manifest)?)?;

    println!("{} ({:.2} s)", cfg.name, wall);
    for (key, value) in &output.summary {
        println!("  {key} = {}", value.render());
    }
    println!("  output: {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { target, out, seed, tol } => run(&target, out, seed, tol),
        Command::List => {
            for (name, about) in scenarios::list() {
                println!("{name:16} {about}");
            }
            Ok(())
        }
        Command::Show { name } => match scenarios::get(&name) {
            Some(text) => {
                print!("{text}");
                Ok(())
            }
            None => Err(anyhow::anyhow!("no bundled scenario `{name}`")),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
