//! `epd-screen`: solvers and studies for costly experiments in screening.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};

use epd_screen::epd::FamilyTag;

use crate::commands::RunError;
use crate::config::{load_config, Command, ConfigError, Format, Multipliers, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "epd-screen",
    version,
    about = "Optimal costly experiments in screening problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Debug, Args)]
struct Opts {
    /// JSON run config; flags given on the command line override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Entropy cost level.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Cost levels for two-type sweeps.
    #[arg(long, global = true, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Cost multiplier.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Number of types.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Grid sizes for the refinement study.
    #[arg(long, global = true, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long, global = true, value_parser = ["uniform"])]
    dist: Option<String>,
    #[arg(long, global = true, num_args = 2, value_names = ["LO", "HI"])]
    range: Option<Vec<f64>>,
    /// Transfer cap.
    #[arg(long, global = true)]
    pbar: Option<f64>,
    #[arg(long, global = true, value_enum)]
    multipliers: Option<Multipliers>,
    /// Grid points (η grid, concavification grid or sweep cells per axis).
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Region scan step as a fraction of v_H.
    #[arg(long, global = true)]
    resolution: Option<f64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, env = "EPD_SCREEN_THREADS")]
    threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Record a timestamp in the output header.
    #[arg(long, global = true)]
    stamp: bool,
    /// Action family: monitoring, screening, quality, capacity.
    #[arg(long, global = true)]
    family: Option<String>,
    #[arg(long, global = true)]
    eta_max: Option<f64>,
    #[arg(long, global = true)]
    v_l: Option<f64>,
    #[arg(long, global = true)]
    v_h: Option<f64>,
    #[arg(long, global = true)]
    pi_h: Option<f64>,
    /// Impose the top type's participation constraint.
    #[arg(long, global = true)]
    top_ir: bool,
    /// Iteration cap of the multiplier descent.
    #[arg(long, global = true)]
    max_iter: Option<usize>,
}

fn build_config(cli: Cli) -> Result<RunConfig, ConfigError> {
    let o = cli.opts;
    let mut cfg = match (&o.config, cli.command) {
        (Some(path), cmd) => {
            let c = load_config(path)?;
            if let Some(cmd) = cmd {
                if cmd != c.command {
                    return Err(ConfigError(format!(
                        "command: config says '{}', command line says '{}'",
                        c.command.name(),
                        cmd.name()
                    )));
                }
            }
            c
        }
        (None, Some(command)) => RunConfig {
            command,
            ..RunConfig::default()
        },
        (None, None) => return Err(ConfigError("command: give a subcommand or --config".into())),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = o.$field {
                cfg.$field = v;
            }
        )*};
    }
    set!(
        gamma,
        gammas,
        alpha,
        n,
        n_list,
        multipliers,
        resolution,
        tol,
        trials,
        seed,
        format,
        eta_max,
        v_l,
        v_h,
        pi_h
    );
    if o.dist.is_some() {
        cfg.dist = o.dist;
    }
    if let Some(r) = o.range {
        cfg.range = (r[0], r[1]);
    }
    if o.pbar.is_some() {
        cfg.pbar = o.pbar;
    }
    if o.grid.is_some() {
        cfg.grid = o.grid;
    }
    if o.threads.is_some() {
        cfg.threads = o.threads;
    }
    if o.out.is_some() {
        cfg.out = o.out;
    }
    if let Some(f) = o.family {
        cfg.family = FamilyTag::parse(&f).map_err(|e| ConfigError(format!("family: {e}")))?;
    }
    if let Some(m) = o.max_iter {
        cfg.saddle.max_iter = m;
    }
    cfg.stamp |= o.stamp;
    cfg.saddle.top_ir |= o.top_ir;
    cfg.resolve();
    cfg.validate()?;
    Ok(cfg)
}

fn write_output(cfg: &RunConfig, table: &output::Table) -> std::io::Result<()> {
    match &cfg.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            output::write_table(&mut w, table, cfg)?;
            w.flush()
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            output::write_table(&mut w, table, cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let cfg = match build_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: threads: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match commands::run(&cfg) {
        Ok(o) => o,
        Err(RunError::Validation(m)) => {
            eprintln!("error: {m}");
            return ExitCode::from(1);
        }
        Err(RunError::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            return ExitCode::from(2);
        }
    };
    match write_output(&cfg, &outcome.table) {
        // The reader went away, e.g. `| head`.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: writing output: {e}");
            return ExitCode::from(1);
        }
        Ok(()) => {}
    }
    match outcome.failure {
        Some(m) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
        None => ExitCode::SUCCESS,
    }
}
