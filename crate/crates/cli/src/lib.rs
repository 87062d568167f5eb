//! Command line front end: scheme analysis, simulations and refinement studies.

pub mod config;
pub mod driver;
pub mod report;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use apkin_core::stability::{stability_report, AnalysisSettings};
use apkin_core::tableau::Registry;
use apkin_core::transport::SpaceGrid;
use clap::{Args, Parser, Subcommand};

pub use config::{Command, ConfigError, InitialData, Operator, Reference, RunConfig};
pub use driver::{converge, run_simulation, ConvergenceRow, ConvergenceStudy, RunError, RunSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "apkin", version, about = "Penalized IMEX Runge-Kutta schemes for kinetic equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Classification, AP and monotonicity properties of the schemes.
    Analyze(Flags),
    /// Run to the final time and record cell moments.
    Simulate(Flags),
    /// Grid refinement study of the density.
    Converge(Flags),
}

#[derive(Debug, Args, Default)]
pub struct Flags {
    /// `key = value` configuration file, overridden by the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scheme name, `all`, or a tableau file. Separate several with `;`.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    /// Cell count, or a comma separated list for `converge`. 1 runs space homogeneous.
    #[arg(long)]
    pub nx: Option<String>,
    #[arg(long)]
    pub nv: Option<String>,
    #[arg(long)]
    pub vmax: Option<String>,
    #[arg(long)]
    pub tfinal: Option<String>,
    #[arg(long)]
    pub cfl: Option<String>,
    /// bgk or boltzmann.
    #[arg(long)]
    pub operator: Option<String>,
    #[arg(long)]
    pub penalized: bool,
    /// eq or noneq.
    #[arg(long)]
    pub init: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    /// successive or finest.
    #[arg(long)]
    pub reference: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
}

impl Flags {
    /// File settings first, then flags.
    pub fn resolve(&self) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            cfg.apply_text(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        }
        let pairs = [
            ("scheme", &self.scheme),
            ("eps", &self.eps),
            ("nx", &self.nx),
            ("nv", &self.nv),
            ("vmax", &self.vmax),
            ("tfinal", &self.tfinal),
            ("cfl", &self.cfl),
            ("operator", &self.operator),
            ("init", &self.init),
            ("mu", &self.mu),
            ("sigma", &self.sigma),
            ("reference", &self.reference),
            ("seed", &self.seed),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, v).map_err(|e| e.to_string())?;
            }
        }
        if self.penalized {
            cfg.penalized = true;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        Ok(cfg)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Run(e) if e.is_usage() => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn slug(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

fn save_config(cfg: &RunConfig, command: Command) -> Result<(), CliError> {
    if let Some(dir) = &cfg.out {
        let mut w = create(dir, "config.txt")?;
        writeln!(w, "# apkin {}", command.as_str())?;
        w.write_all(cfg.serialize().as_bytes())?;
        w.flush()?;
    }
    Ok(())
}

pub fn cmd_analyze(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let schemes = driver::resolve_schemes(&cfg.schemes, &Registry::standard())?;
    let mut reg = Registry::new();
    for t in schemes {
        reg.insert(t);
    }
    let rows = stability_report(&reg, &AnalysisSettings::default());
    match &cfg.out {
        Some(dir) => {
            save_config(cfg, Command::Analyze)?;
            report::write_analysis(create(dir, "analysis.csv")?, &rows)?;
            stdout.write_all(report::format_analysis(&rows).as_bytes())?;
        }
        None => report::write_analysis(&mut *stdout, &rows)?,
    }
    if let Some((name, Err(e))) = rows.iter().find(|(_, r)| r.is_err()) {
        return Err(RunError::Other(format!("{name}: {e}")).into());
    }
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let schemes = driver::resolve_schemes(&cfg.schemes, &Registry::standard())?;
    save_config(cfg, Command::Simulate)?;
    for t in &schemes {
        for &nx in &cfg.nx {
            let centers = if nx == 1 {
                vec![0.0]
            } else {
                SpaceGrid::new(nx).map_err(|e| RunError::Setup(e.to_string()))?.centers()
            };
            let base = format!("{}_nx{nx}", slug(t.name()));
            let mut csv_out = match &cfg.out {
                Some(dir) => {
                    let mut w = csv::Writer::from_writer(create(dir, &format!("{base}_moments.csv"))?);
                    w.write_record(report::MOMENT_HEADER)?;
                    Some(w)
                }
                None => None,
            };
            let summary = run_simulation(cfg, t, nx, |step, time, snap| {
                if let Some(w) = csv_out.as_mut() {
                    let grid = apkin_core::phase_space::VelocityGrid::new(cfg.nv, cfg.vmax)
                        .map_err(|e| RunError::Setup(e.to_string()))?;
                    report::write_moments(w, step, time, &centers, &snap.moments(&grid))
                        .map_err(|e| RunError::Other(e.to_string()))?;
                }
                Ok(())
            })?;
            if let Some(mut w) = csv_out {
                w.flush()?;
            }
            if let Some(dir) = &cfg.out {
                let mut w = create(dir, &format!("{base}.snap"))?;
                summary.final_field.write_snapshot(&mut w).map_err(|e| RunError::Other(e.to_string()))?;
                w.flush()?;
            }
            writeln!(
                stdout,
                "{} nx={nx}: {} steps, dt={:.6e}, mu={:.6}, mass drift {:.3e}",
                t.name(),
                summary.steps,
                summary.dt,
                summary.mu,
                summary.mass_drift()
            )?;
        }
    }
    Ok(())
}

pub fn cmd_converge(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let schemes = driver::resolve_schemes(&cfg.schemes, &Registry::standard())?;
    driver::validate_nx_list(&cfg.nx)?;
    let studies = schemes.iter().map(|t| converge(cfg, t)).collect::<Result<Vec<_>, _>>()?;
    match &cfg.out {
        Some(dir) => {
            save_config(cfg, Command::Converge)?;
            report::write_convergence(create(dir, "convergence.csv")?, &studies)?;
            for s in &studies {
                let orders: Vec<String> =
                    s.rows.iter().filter_map(|r| r.order).map(|o| format!("{o:.3}")).collect();
                writeln!(stdout, "{}: orders {}", s.scheme, orders.join(", "))?;
            }
        }
        None => report::write_convergence(&mut *stdout, &studies)?,
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (command, flags) = match &cli.command {
        CliCommand::Analyze(f) => (Command::Analyze, f),
        CliCommand::Simulate(f) => (Command::Simulate, f),
        CliCommand::Converge(f) => (Command::Converge, f),
    };
    let result = flags.resolve().map_err(CliError::Usage).and_then(|cfg| match command {
        Command::Analyze => cmd_analyze(&cfg, stdout),
        Command::Simulate => cmd_simulate(&cfg, stdout),
        Command::Converge => cmd_converge(&cfg, stdout),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
