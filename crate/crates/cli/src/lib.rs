//! The `rnng` command-line tool.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod gradient;
pub mod io;

use config::ConfigError;

#[derive(Parser, Debug)]
#[command(name = "rnng", version, about = "Incremental RNNG parsing, complexity metrics and ERP regression")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Run configuration file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train an RNNG on a bracketed treebank.
    TrainRnng {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: Option<String>,
        #[arg(long)]
        dev: Option<String>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Train the LSTM language model.
    TrainLm {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train: Option<String>,
        #[arg(long)]
        dev: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
    },
    /// Beam-search parse sentences and emit trees and per-word metrics.
    Parse {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        beam: BeamArgs,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        emit_metrics: bool,
        #[arg(long)]
        emit_trees: bool,
    },
    /// Per-token LM surprisal.
    LmSurprisal {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        input: Option<String>,
    },
    /// Labeled bracket F1 of predicted trees against gold trees.
    ScoreF1 {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gold: Option<String>,
        #[arg(long)]
        pred: Option<String>,
    },
    /// Cluster permutation tests and ROI likelihood-ratio tests.
    Regress {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epochs: Option<String>,
        #[arg(long)]
        metrics: Option<String>,
        /// Comma-separated target predictors.
        #[arg(long)]
        target: Option<String>,
        /// Comma-separated control predictors.
        #[arg(long)]
        controls: Option<String>,
        #[arg(long)]
        n_perm: Option<usize>,
        #[arg(long)]
        threshold_p: Option<f64>,
        /// Comma-separated regions: N400, P600, ANT or custom.
        #[arg(long)]
        roi: Option<String>,
    },
    /// Write a synthetic epoch bundle.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Metrics table whose rows become the stimuli.
        #[arg(long)]
        metrics: Option<String>,
    },
    /// Finite-difference gradient checks over several seeds.
    GradCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Parse at several beam sizes.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        beam: BeamArgs,
        /// Comma-separated action beam sizes.
        #[arg(long)]
        ks: Option<String>,
    },
    /// Summarize a finished run directory.
    Report {
        dir: PathBuf,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct BeamArgs {
    #[arg(long)]
    pub model: Option<String>,
    /// Plain text, one tokenized sentence per line.
    #[arg(long)]
    pub input: Option<String>,
    /// Gold trees; also the input when `--input` is absent.
    #[arg(long)]
    pub gold: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub word_beam: Option<usize>,
    #[arg(long)]
    pub fast_track: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

/// Collects `(key, value)` overrides from optional flags.
#[derive(Default)]
pub(crate) struct Overrides(pub Vec<(String, String)>);

impl Overrides {
    pub fn from_common(c: &Common) -> Result<Overrides, ConfigError> {
        let mut o = Overrides::default();
        let mut errors = Vec::new();
        for s in &c.set {
            match s.split_once('=') {
                Some((k, v)) => o.0.push((k.trim().into(), v.trim().into())),
                None => errors.push(format!("--set {s}: expected KEY=VALUE")),
            }
        }
        if !errors.is_empty() {
            return Err(ConfigError(errors));
        }
        o.opt("out", c.out.as_ref());
        o.opt("seed", c.seed.as_ref());
        Ok(o)
    }

    pub fn opt<T: ToString>(&mut self, key: &str, v: Option<&T>) {
        if let Some(v) = v {
            self.0.push((key.into(), v.to_string()));
        }
    }

    pub fn flag(&mut self, key: &str, on: bool) {
        if on {
            self.0.push((key.into(), "true".into()));
        }
    }

    pub fn beam(&mut self, b: &BeamArgs) {
        self.opt("model", b.model.as_ref());
        self.opt("input", b.input.as_ref());
        self.opt("gold", b.gold.as_ref());
        self.opt("k", b.k.as_ref());
        self.opt("word_beam", b.word_beam.as_ref());
        self.opt("fast_track", b.fast_track.as_ref());
        self.opt("max_iterations", b.max_iterations.as_ref());
    }
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 1 on a runtime failure, 2 on a usage or configuration
/// error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .try_init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    match commands::dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            if let Some(c) = e.downcast_ref::<ConfigError>() {
                eprintln!("error: {c}");
                2
            } else {
                eprintln!("error: {e:#}");
                1
            }
        }
    }
}
