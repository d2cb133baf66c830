//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use mhdmap::NoiseKind;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::pipeline;

#[derive(Debug, Parser)]
#[command(
    name = "mhdmap",
    version,
    about = "Pixel-space Mahalanobis anomaly scoring on synthetic phantoms"
)]
pub struct Cli {
    /// key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,

    /// Worker threads (0 = all cores). MHDMAP_THREADS takes precedence.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic phantom datasets.
    #[command(subcommand)]
    Phantom(PhantomCommand),

    /// Score every case of a phantom manifest.
    Score {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },

    /// Per-case and pooled AUPRC / best Dice as CSV.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },

    /// Permutation test between two variants' per-case AUPRC.
    Compare {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "s_smhd")]
        a: String,
        #[arg(long, default_value = "s_mean")]
        b: String,
        /// Sign-flip test on per-case differences instead of label shuffling.
        #[arg(long)]
        paired: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Noise field previews.
    #[command(subcommand)]
    Noise(NoiseCommand),
}

#[derive(Debug, Subcommand)]
pub enum PhantomCommand {
    /// Generate cases, a healthy population and a manifest.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        cases: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
pub enum NoiseCommand {
    Preview {
        #[arg(long, default_value = "simplex")]
        kind: String,
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pgm_dir: Option<PathBuf>,
    },
}

fn build_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Command::Phantom(PhantomCommand::Gen { seed, cases, .. }) = &cli.command {
        if let Some(s) = seed {
            cfg.seed = *s;
        }
        if let Some(c) = cases {
            cfg.cases = *c;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = build_config(&cli)?;
    let threads = cfg.effective_threads()?;
    pipeline::with_threads(threads, || match &cli.command {
        Command::Phantom(PhantomCommand::Gen { out, .. }) => {
            let m = pipeline::phantom_gen(&cfg, out)?;
            println!("{}", m.display());
            Ok(())
        }
        Command::Score { manifest, out } => {
            let m = pipeline::score(&cfg, manifest, out)?;
            println!("{}", m.display());
            Ok(())
        }
        Command::Eval { manifest, scores, out } => {
            let rows = pipeline::eval(&cfg, manifest, scores, out)?;
            for r in rows.iter().filter(|r| r.case_id.is_none()) {
                println!("pooled {} auprc={} dice_best={}", r.variant, r.auprc, r.dice_best);
            }
            Ok(())
        }
        Command::Compare { csv, a, b, paired, out } => {
            let r = pipeline::compare(&cfg, csv, a, b, *paired, out.as_deref())?;
            println!("{r}");
            Ok(())
        }
        Command::Noise(NoiseCommand::Preview {
            kind,
            count,
            size,
            seed,
            out,
            pgm_dir,
        }) => {
            let kind: NoiseKind = kind
                .parse()
                .map_err(|e: mhdmap::Error| CliError::Config(e.to_string()))?;
            pipeline::noise_preview(kind, *count, *size, *seed, out, pgm_dir.as_deref())
        }
    })?
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
