//! Command-line driver for hyperbolic Cahn-Hilliard experiments: strict
//! JSON configs, simulation runs with CSV output, parameter sweeps and
//! stand-alone diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod output;
pub mod simulate;
pub mod sweep;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::Value;

use hch_core::GeodesicOptions;

pub use config::{config_from_value, parse_config, PotentialSpec, RunConfig};
pub use simulate::{simulate, SimOptions, Summary};
pub use sweep::{parse_plan, run_sweep, SweepPlan, SweepReport};

/// Exit code when a run or sweep point reports a failure.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code for invalid input or setup errors.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "hch",
    version,
    about = "Metastable dynamics of the 1D hyperbolic Cahn-Hilliard equation"
)]
pub struct Cli {
    /// JSON run config (a sweep plan for `sweep`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; the HCH_OUT environment variable takes precedence.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one configured run.
    Simulate {
        /// Continue from a snapshot file.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Also write a gnuplot script.
        #[arg(long)]
        plot: bool,
    },
    /// Run a sweep plan over eps or tau.
    Sweep,
    /// Dump the configured initial datum.
    Profile,
    /// Print the transition cost c0.
    C0 {
        /// Potential JSON; defaults to the config's potential or the quartic.
        #[arg(long)]
        potential: Option<String>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Tabulate the standing wave.
    Omega {
        #[arg(long)]
        potential: Option<String>,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        x_min: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        x_max: f64,
        #[arg(long, default_value_t = 2001)]
        points: usize,
    },
    /// Geodesic cost between two zeros of the potential.
    Phi {
        #[arg(long)]
        potential: Option<String>,
        #[arg(long, default_value_t = 0)]
        from: usize,
        #[arg(long, default_value_t = 1)]
        to: usize,
        #[arg(long, default_value_t = 33)]
        points: usize,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        restarts: usize,
    },
    /// Lower-bound certificate of a snapshot against the configured profile.
    Certify {
        #[arg(long)]
        snapshot: PathBuf,
    },
}

impl Cli {
    fn out_dir(&self) -> PathBuf {
        match std::env::var_os("HCH_OUT") {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.out.clone().unwrap_or_else(|| PathBuf::from("out")),
        }
    }

    fn config_text(&self) -> Result<Option<String>> {
        self.config
            .as_ref()
            .map(|p| {
                std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))
            })
            .transpose()
    }

    fn run_config(&self) -> Result<RunConfig> {
        let text = self.config_text()?.context("--config is required")?;
        let mut value: Value = serde_json::from_str(&text).context("config is not valid JSON")?;
        if let (Some(seed), Value::Object(map)) = (self.seed, &mut value) {
            map.insert("seed".into(), Value::from(seed));
        }
        config_from_value(value)
    }

    fn potential(&self, inline: &Option<String>) -> Result<PotentialSpec> {
        if let Some(text) = inline {
            return serde_json::from_str(text).context("invalid --potential");
        }
        match &self.config {
            Some(_) => Ok(self.run_config()?.potential),
            None => Ok(PotentialSpec::Quartic),
        }
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Runs the command line `args` (including the program name) and returns
/// the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let out = cli.out_dir();
    match &cli.command {
        Command::Simulate { resume, plot } => {
            let cfg = cli.run_config()?;
            let summary = simulate(
                &cfg,
                &out,
                &SimOptions {
                    resume: resume.clone(),
                    plot: *plot,
                },
            )?;
            match &summary.error {
                None => {
                    println!(
                        "ok: {} rows written to {}",
                        summary.rows,
                        out.join("run.csv").display()
                    );
                    Ok(0)
                }
                Some(e) => {
                    eprintln!("FAILED: {e}");
                    Ok(EXIT_FAILURE)
                }
            }
        }
        Command::Sweep => {
            let text = cli
                .config_text()?
                .context("--config must name a sweep plan")?;
            let plan = parse_plan(&text)?;
            let report = run_sweep(&plan, &out, cli.workers, cli.seed)?;
            for line in &report.lines {
                println!("{line}");
            }
            Ok(if report.any_failed { EXIT_FAILURE } else { 0 })
        }
        Command::Profile => {
            let cfg = cli.run_config()?;
            std::fs::create_dir_all(&out)?;
            let path = out.join("profile.dat");
            commands::profile(&cfg, &path)?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::C0 { potential, tol } => {
            let value = commands::c0(&cli.potential(potential)?, *tol)?;
            println!("c0 = {} (tolerance {tol:e})", output::num(value));
            Ok(0)
        }
        Command::Omega {
            potential,
            x_min,
            x_max,
            points,
        } => {
            std::fs::create_dir_all(&out)?;
            let path = out.join("omega.dat");
            let spec = cli.potential(potential)?;
            commands::omega(&spec, *x_min, *x_max, *points, Some(&path))?;
            let at0 = commands::omega(&spec, -1.0, 1.0, 3, None)?[1].1;
            println!(
                "omega(0) = {}; table written to {}",
                output::num(at0),
                path.display()
            );
            Ok(0)
        }
        Command::Phi {
            potential,
            from,
            to,
            points,
            iters,
            restarts,
        } => {
            let opts = GeodesicOptions {
                points: *points,
                iters: *iters,
                restarts: *restarts,
                seed: cli.seed.unwrap_or(0),
                ..Default::default()
            };
            let g = commands::phi(&cli.potential(potential)?, *from, *to, &opts)?;
            println!(
                "phi = {} (straight segment {}, {} descent iterations)",
                output::num(g.phi),
                output::num(g.straight),
                g.iterations
            );
            Ok(0)
        }
        Command::Certify { snapshot } => {
            let cfg = cli.run_config()?;
            let cert = commands::certify(&cfg, snapshot)?;
            std::fs::create_dir_all(&out)?;
            write_json(&out.join("certificate.json"), &cert)?;
            println!("{}", serde_json::to_string_pretty(&cert)?);
            Ok(if cert.verdict == hch_core::Verdict::Pass {
                0
            } else {
                EXIT_FAILURE
            })
        }
    }
}
