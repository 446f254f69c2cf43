//! Command-line front end. Every subcommand reads its parameters from one
//! flat map, filled from an optional `key = value` file and then from flags.
//!
//! Exit codes: 0 success, 2 usage, 3 validation, 4 I/O, 5 computation.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{CommandFactory, Parser, Subcommand};

use crate::error::Error;
pub use config::Params;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_COMPUTATION: i32 = 5;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Lib(Error::InvalidInput(_) | Error::InvalidConfig(_)) => "validation",
            CliError::Lib(Error::Unsupported(_)) => "unsupported",
            CliError::Lib(_) => "computation",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "usage" => EXIT_USAGE,
            "io" => EXIT_IO,
            "validation" | "unsupported" => EXIT_VALIDATION,
            _ => EXIT_COMPUTATION,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Io(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "semiclassics", version, about = "Thomas–Fermi, Weyl and Scott-correction computations")]
pub struct Cli {
    /// Parameter file with `key = value` lines; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// CSV destination; a `.meta` sidecar is written next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Directory for cached TF profiles.
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Extra parameter, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the Thomas–Fermi equation and export the profile.
    Tf {
        /// Only `solve` is available.
        action: Option<String>,
        #[arg(long)]
        tol: Option<String>,
        #[arg(long)]
        points: Option<String>,
        #[arg(long)]
        z: Option<String>,
    },
    /// Weyl phase-space integrals.
    Weyl {
        /// coulomb | tf
        #[arg(long)]
        potential: Option<String>,
        #[arg(long)]
        z: Option<String>,
        #[arg(long)]
        h: Option<String>,
        /// Comma-separated list.
        #[arg(long)]
        mu: Option<String>,
        /// Weight by `φ_R²`.
        #[arg(long = "R")]
        r: Option<String>,
    },
    /// Negative eigenvalues of `−h²Δ − V + μ` channel by channel.
    Trace {
        /// coulomb | tf | file
        #[arg(long)]
        potential: Option<String>,
        /// Two-column `r,V` CSV for `--potential file`.
        #[arg(long)]
        file: Option<String>,
        #[arg(long)]
        z: Option<String>,
        #[arg(long)]
        h: Option<String>,
        #[arg(long)]
        mu: Option<String>,
        #[arg(long)]
        dx: Option<String>,
        #[arg(long)]
        richardson: Option<String>,
        /// Localise with `φ_R`.
        #[arg(long = "R")]
        r: Option<String>,
    },
    /// Scott-correction estimates.
    Scott {
        /// mu-limit | cutoff-R | spectral-fit | ansatz-min
        #[arg(long)]
        route: Option<String>,
        #[arg(long)]
        kappa: Option<String>,
        #[arg(long)]
        beta: Option<String>,
        /// Cutoff radius (list for cutoff-R).
        #[arg(long = "R")]
        r: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        iterations: Option<String>,
        #[arg(long)]
        restarts: Option<String>,
    },
    /// Check the continuous partition of unity on a random cloud.
    PartitionCheck {
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        d_min: Option<String>,
        #[arg(long)]
        d_max: Option<String>,
    },
    /// Two-term expansion against mean-field energies over a Z sweep.
    Expansion {
        #[arg(long = "Z-list")]
        z_list: Option<String>,
        #[arg(long)]
        alpha: Option<String>,
        /// spectral | ansatz-min
        #[arg(long)]
        route: Option<String>,
        /// s0 | mu-limit
        #[arg(long)]
        s_provider: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Tf { .. } => "tf",
            Command::Weyl { .. } => "weyl",
            Command::Trace { .. } => "trace",
            Command::Scott { .. } => "scott",
            Command::PartitionCheck { .. } => "partition-check",
            Command::Expansion { .. } => "expansion",
        }
    }

    fn overrides(&self) -> Result<Params, CliError> {
        let mut p = Params::default();
        match self {
            Command::Tf { action, tol, points, z } => {
                if let Some(a) = action {
                    if a != "solve" {
                        return Err(CliError::Usage(format!("unknown tf action '{a}'")));
                    }
                }
                p.set_opt("tf_tol", tol.as_ref());
                p.set_opt("tf_points", points.as_ref());
                p.set_opt("z", z.as_ref());
            }
            Command::Weyl { potential, z, h, mu, r } => {
                p.set_opt("potential", potential.as_ref());
                p.set_opt("z", z.as_ref());
                p.set_opt("h", h.as_ref());
                p.set_opt("mu", mu.as_ref());
                p.set_opt("R", r.as_ref());
            }
            Command::Trace { potential, file, z, h, mu, dx, richardson, r } => {
                p.set_opt("potential", potential.as_ref());
                p.set_opt("file", file.as_ref());
                p.set_opt("z", z.as_ref());
                p.set_opt("h", h.as_ref());
                p.set_opt("mu", mu.as_ref());
                p.set_opt("dx", dx.as_ref());
                p.set_opt("richardson", richardson.as_ref());
                p.set_opt("R", r.as_ref());
            }
            Command::Scott { route, kappa, beta, r, seed, iterations, restarts } => {
                p.set_opt("route", route.as_ref());
                p.set_opt("kappa", kappa.as_ref());
                p.set_opt("beta", beta.as_ref());
                p.set_opt("R", r.as_ref());
                p.set_opt("seed", seed.as_ref());
                p.set_opt("iterations", iterations.as_ref());
                p.set_opt("restarts", restarts.as_ref());
            }
            Command::PartitionCheck { n, seed, d_min, d_max } => {
                p.set_opt("n", n.as_ref());
                p.set_opt("seed", seed.as_ref());
                p.set_opt("d_min", d_min.as_ref());
                p.set_opt("d_max", d_max.as_ref());
            }
            Command::Expansion { z_list, alpha, route, s_provider } => {
                p.set_opt("Z_list", z_list.as_ref());
                p.set_opt("alpha", alpha.as_ref());
                p.set_opt("route", route.as_ref());
                p.set_opt("s_provider", s_provider.as_ref());
            }
        }
        Ok(p)
    }
}

/// Resolved run: subcommand name, merged parameters and output locations.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    pub params: Params,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut params = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Params::parse(&text)?
        }
        None => Params::default(),
    };
    let mut flags = Params::default();
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        flags.set(k, v.trim());
    }
    let command = match &cli.command {
        Some(c) => {
            flags.merge(&c.overrides()?);
            c.name().to_string()
        }
        None => match params.raw("command") {
            Some(c) => c.to_string(),
            None => return Err(CliError::Usage("no subcommand given".into())),
        },
    };
    params.merge(&flags);
    Ok(RunConfig {
        command,
        params,
        out: cli.out.clone(),
        cache: cli.cache.clone(),
    })
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return report_error(&CliError::Lib(Error::InvalidInput("--threads must be at least 1".into())));
        }
        crate::exec::set_threads(n);
    }
    let result = resolve(&cli).and_then(|cfg| dispatch(&cfg));
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(m)) => {
            eprintln!("error: usage: {m}");
            eprintln!("{}", Cli::command().render_usage());
            EXIT_USAGE
        }
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &CliError) -> i32 {
    eprintln!("error: {}: {}", e.category(), e.message().replace('\n', " "));
    e.exit_code()
}

pub fn dispatch(cfg: &RunConfig) -> Result<(), CliError> {
    let report = commands::execute(cfg)?;
    output::emit(&report, cfg.out.as_deref())
}
