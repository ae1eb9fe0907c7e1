//! `jsfs` subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use jsfs_core::{DemographyTree, Engine, EntryMode, SfsEntry};

use crate::bench;
use crate::config::{read_config, Config};
use crate::entries::{format_value, read_entries, write_spectrum};
use crate::error::{exit, Error, Result};
use crate::oracle::{simulate_branch_lengths, Estimate};

/// |z| above which `validate` reports a mismatch.
pub const Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Parser)]
#[command(name = "jsfs", version, about = "Expected joint sample frequency spectra on population trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the entries listed in a TSV file.
    Compute {
        #[command(flatten)]
        common: Common,
        /// One entry per line, tab-separated derived counts.
        #[arg(long, required_unless_present = "full_spectrum", conflicts_with = "full_spectrum")]
        entries: Option<PathBuf>,
        /// Evaluate every polymorphic entry instead.
        #[arg(long)]
        full_spectrum: bool,
    },
    /// Evaluate every polymorphic entry.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Compare against Monte Carlo estimates.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Entries to check; all polymorphic entries by default.
        #[arg(long)]
        entries: Option<PathBuf>,
        #[arg(long, default_value_t = 1_000_000)]
        reps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Time precomputation and per-entry evaluation on random trees.
    Bench {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON demography file.
    #[arg(long)]
    demography: PathBuf,
    /// Output file; standard output by default.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Mutation rate θ; overrides the demography file.
    #[arg(long)]
    theta: Option<f64>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl Common {
    fn load(&self) -> Result<(Config, f64)> {
        let cfg = read_config(&self.demography)?;
        let theta = self.theta.unwrap_or(cfg.theta);
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Input("--theta must be a positive finite number".into()));
        }
        Ok((cfg, theta))
    }
}

/// Runs the command line `args` (including the program name) and returns
/// the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { exit::INPUT } else { exit::OK };
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(Error::Input("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Input(format!("cannot start worker threads: {e}")))
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        }),
        None => stdout.write_all(text.as_bytes()).map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

/// Evaluates `entries` on `jobs` threads, keeping their order.
pub fn evaluate_all(tree: &DemographyTree, entries: Vec<Vec<usize>>, jobs: usize) -> Result<Vec<SfsEntry>> {
    let engine = Engine::new(tree)?;
    let values = pool(jobs)?.install(|| {
        entries
            .par_iter()
            .map(|x| engine.evaluate(x))
            .collect::<jsfs_core::Result<Vec<f64>>>()
    })?;
    Ok(entries
        .into_iter()
        .zip(values)
        .map(|(x, value)| SfsEntry { x, value })
        .collect())
}

/// Report rows `x, analytic, mc_mean, mc_stderr, z` with values scaled by
/// `scale`, and the largest `|z|`.
pub fn validation_report(
    names: &[&str],
    spectrum: &[SfsEntry],
    estimate: impl Fn(&[usize]) -> Estimate,
    scale: f64,
) -> (String, f64) {
    let mut text = names.join("\t");
    text.push_str("\tanalytic\tmc_mean\tmc_stderr\tz\n");
    let mut worst = 0.0f64;
    for e in spectrum {
        let est = estimate(&e.x);
        let z = est.z_score(e.value);
        worst = worst.max(z.abs());
        for c in &e.x {
            text.push_str(&format!("{c}\t"));
        }
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            format_value(e.value * scale),
            format_value(est.mean * scale),
            format_value(est.stderr * scale),
            format_value(z)
        ));
    }
    (text, worst)
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Compute {
            common,
            entries,
            full_spectrum,
        } => {
            let (cfg, theta) = common.load()?;
            let list = match entries {
                Some(path) if !full_spectrum => read_entries(&path, &cfg.tree)?,
                _ => cfg.tree.enumerate_entries(EntryMode::full())?,
            };
            let spectrum = evaluate_all(&cfg.tree, list, common.jobs)?;
            emit(common.out.as_deref(), &write_spectrum(&spectrum, theta / 2.0), stdout)?;
            Ok(exit::OK)
        }
        Command::Spectrum { common } => {
            let (cfg, theta) = common.load()?;
            let list = cfg.tree.enumerate_entries(EntryMode::full())?;
            let spectrum = evaluate_all(&cfg.tree, list, common.jobs)?;
            emit(common.out.as_deref(), &write_spectrum(&spectrum, theta / 2.0), stdout)?;
            Ok(exit::OK)
        }
        Command::Validate {
            common,
            entries,
            reps,
            seed,
        } => {
            if reps == 0 {
                return Err(Error::Input("--reps must be at least 1".into()));
            }
            let (cfg, theta) = common.load()?;
            let list = match entries {
                Some(path) => read_entries(&path, &cfg.tree)?,
                None => cfg.tree.enumerate_entries(EntryMode::full())?,
            };
            let spectrum = evaluate_all(&cfg.tree, list, common.jobs)?;
            let mc = pool(common.jobs)?.install(|| simulate_branch_lengths(&cfg.tree, reps, seed));
            let names = cfg.tree.population_names();
            let (text, worst) = validation_report(&names, &spectrum, |x| mc.get(x), theta / 2.0);
            emit(common.out.as_deref(), &text, stdout)?;
            if worst > Z_THRESHOLD {
                let _ = writeln!(stderr, "validation failed: max |z| = {worst:.3} > {Z_THRESHOLD}");
                Ok(exit::MISMATCH)
            } else {
                Ok(exit::OK)
            }
        }
        Command::Bench { seed, out } => {
            let rows = bench::bench_grid(seed)?;
            emit(out.as_deref(), &bench::write_rows(&rows), stdout)?;
            Ok(exit::OK)
        }
    }
}
