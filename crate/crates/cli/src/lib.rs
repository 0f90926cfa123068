//! `mishbench`: runs the activation-function experiments from JSON configs
//! and writes CSV/JSON/PGM outputs with a JSON sidecar holding the resolved
//! config.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use config::{Experiment, ExperimentConfig, ScaleOptions};
pub use error::{CliError, CliResult, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_IO, EXIT_OK};
use output::{resolve_output_dir, OutputDir, OUTPUT_DIR_ENV};

#[derive(Debug, Clone, Parser)]
#[command(name = "mishbench", version, about = "Mish activation experiments")]
pub struct Cli {
    /// Experiment to run; must match the config's `experiment`.
    #[arg(value_enum)]
    pub experiment: Experiment,
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the environment and the config).
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Use paper-scale defaults: 50 epochs, width 500, 23 runs.
    #[arg(long)]
    pub paper_scale: bool,
    /// Added to every configured seed.
    #[arg(long, default_value_t = 0)]
    pub seed_offset: u64,
}

/// What a successful run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Runs one experiment. The output directory comes from `--output-dir`,
/// then `env_output_dir`, then the config.
///
/// Config problems are reported before anything is written. A failed check
/// returns [`CliError::Check`] after all outputs are on disk.
pub fn run(cli: &Cli, env_output_dir: Option<PathBuf>) -> CliResult<RunOutcome> {
    let raw = ExperimentConfig::load(&cli.config)?;
    if raw.experiment != cli.experiment {
        return Err(CliError::config(format!(
            "command is `{}` but the config is for `{}`",
            cli.experiment, raw.experiment
        )));
    }
    let opts = ScaleOptions {
        paper_scale: cli.paper_scale,
        seed_offset: cli.seed_offset,
    };
    let mut cfg = raw.resolve(opts)?;
    let dir = resolve_output_dir(cli.output_dir.as_deref(), env_output_dir, cfg.output_dir.as_deref());
    cfg.output_dir = Some(dir.clone());
    let mut out = OutputDir::create(dir.clone())?;
    use experiments::*;
    let result = match cfg.experiment {
        Experiment::Gradcheck => gradcheck::run_gradcheck(&cfg, opts, &mut out),
        Experiment::Bench => bench::run_bench(&cfg, opts, &mut out),
        Experiment::Landscape => landscape::run_landscape(&cfg, opts, &mut out),
        Experiment::Train => training::run_train(&cfg, opts, &mut out),
        Experiment::SweepDepth => training::run_sweep_depth(&cfg, opts, &mut out),
        Experiment::SweepNoise => training::run_sweep_noise(&cfg, opts, &mut out),
        Experiment::SweepInit => training::run_sweep_init(&cfg, opts, &mut out),
        Experiment::Stats => training::run_stats(&cfg, opts, &mut out),
    };
    result.map(|()| RunOutcome {
        output_dir: dir,
        files: out.files().to_vec(),
    })
}

/// Parses arguments, runs, reports to stderr and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let env = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    match run(&cli, env) {
        Ok(o) => {
            eprintln!("wrote {} files to {}", o.files.len(), o.output_dir.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("mishbench: {e}");
            e.exit_code()
        }
    }
}
