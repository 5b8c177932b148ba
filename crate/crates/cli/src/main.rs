use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trajmc::data::{AnnotationFormat, PreparedDataset};
use trajmc::experiments::{
    cmd_evaluate, cmd_import, cmd_sweep, cmd_train, EvalMode, ExperimentConfig, ImportSource, SyntheticKind, Widths,
};
use trajmc::metrics::reports_to_csv;
use trajmc::models::Architecture;
use trajmc::Error;

#[derive(Parser)]
#[command(name = "trajmc", version, about = "Pedestrian trajectory forecasting with Monte-Carlo dropout")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse annotations (or generate a synthetic corpus) into a prepared-dataset cache.
    Import {
        #[command(flatten)]
        common: Common,
        /// Annotation files; ids are kept apart per file.
        #[arg(long, num_args = 1..)]
        src: Vec<PathBuf>,
        #[arg(long, value_parser = parse_from_str::<AnnotationFormat>)]
        format: Option<AnnotationFormat>,
        /// Generate `constant` or `curvilinear` walkers instead of reading files.
        #[arg(long, value_parser = parse_from_str::<SyntheticKind>, conflicts_with = "src")]
        synthetic: Option<SyntheticKind>,
        #[arg(long, default_value_t = 200)]
        tracks: usize,
        /// Longest horizon stored in the cache.
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        history: Option<usize>,
        #[arg(long)]
        train_fraction: Option<f64>,
        /// Cache file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one architecture, one checkpoint per horizon.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cache: PathBuf,
        #[arg(long, value_parser = parse_from_str::<Architecture>)]
        arch: Architecture,
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Dropout probability during training.
        #[arg(long)]
        dropout: Option<f64>,
        #[arg(long, value_parser = parse_from_str::<Widths>)]
        widths: Option<Widths>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a checkpoint on the cached test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cache: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Mc)]
        mode: Mode,
        /// Monte-Carlo passes.
        #[arg(long)]
        passes: Option<usize>,
        /// Dropout probability at inference.
        #[arg(long)]
        p: Option<f64>,
        /// Also write the raw sampled paths.
        #[arg(long)]
        samples: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid of MC evaluations over architectures, horizons and dropout rates.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Directory holding `.ckpt` files.
        #[arg(long)]
        checkpoints: PathBuf,
        #[arg(long)]
        cache: PathBuf,
        #[arg(long, value_delimiter = ',', value_parser = parse_from_str::<Architecture>)]
        archs: Option<Vec<Architecture>>,
        #[arg(long, value_delimiter = ',')]
        dropouts: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        #[arg(long)]
        passes: Option<usize>,
        /// Train and save any (architecture, horizon) checkpoint that is missing.
        #[arg(long)]
        train_missing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Deterministic,
    Mc,
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn base_config(common: &Common) -> trajmc::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parameter(_) => 2,
        Error::Parse { .. } | Error::Data(_) | Error::Checkpoint { .. } | Error::Dimension { .. } => 3,
        Error::Numeric { .. } => 4,
        Error::Io { .. } | Error::Serde(_) => 5,
    }
}

fn run(cli: Cli) -> trajmc::Result<()> {
    match cli.command {
        Command::Import { common, src, format, synthetic, tracks, horizon, history, train_fraction, out } => {
            let mut cfg = base_config(&common)?;
            if let Some(f) = format {
                cfg.format = f;
            }
            if let Some(h) = horizon {
                cfg.horizons = vec![h];
            }
            if let Some(t) = history {
                cfg.history_len = t;
            }
            if let Some(fr) = train_fraction {
                cfg.train_fraction = fr;
            }
            let source = match synthetic {
                Some(kind) => ImportSource::Synthetic { kind, tracks },
                None => {
                    let paths = if src.is_empty() { cfg.data.clone() } else { src };
                    ImportSource::Annotations { paths, format: cfg.format }
                }
            };
            let (_, summary) = cmd_import(&source, &out, &cfg)?;
            println!("{summary}");
            println!("wrote {}", out.display());
        }
        Command::Train { common, cache, arch, horizons, epochs, dropout, widths, out } => {
            let mut cfg = base_config(&common)?;
            if let Some(h) = horizons {
                cfg.horizons = h;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if let Some(p) = dropout {
                cfg.train_dropout = p;
            }
            if let Some(w) = widths {
                cfg.widths = w;
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            let ds = PreparedDataset::load(&cache)?;
            for o in cmd_train(&ds, arch, &cfg)? {
                let best = o.log.best_val_mse().map(|v| format!("{v:.6}")).unwrap_or_else(|| "n/a".into());
                println!("{} ({} epochs, best val MSE {best})", o.checkpoint.display(), o.log.len());
            }
        }
        Command::Evaluate { common, checkpoint, cache, mode, passes, p, samples, out } => {
            let cfg = base_config(&common)?;
            let mode = match mode {
                Mode::Deterministic => EvalMode::Deterministic,
                Mode::Mc => EvalMode::MonteCarlo {
                    passes: passes.unwrap_or(cfg.mc_passes),
                    p: p.unwrap_or(cfg.train_dropout),
                },
            };
            let ds = PreparedDataset::load(&cache)?;
            let eval = cmd_evaluate(&checkpoint, &ds, mode, cfg.seed, &out.unwrap_or(cfg.out_dir), samples)?;
            print!("{}", reports_to_csv(std::slice::from_ref(&eval.report)));
        }
        Command::Sweep { common, checkpoints, cache, archs, dropouts, horizons, passes, train_missing, out } => {
            let mut cfg = base_config(&common)?;
            if let Some(a) = archs {
                cfg.architectures = a;
            }
            if let Some(d) = dropouts {
                cfg.dropouts = d;
            }
            if let Some(h) = horizons {
                cfg.horizons = h;
            }
            if let Some(n) = passes {
                cfg.mc_passes = n;
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            let ds = PreparedDataset::load(&cache)?;
            let rows = cmd_sweep(&checkpoints, &ds, &cfg, train_missing)?;
            print!("{}", reports_to_csv(&rows));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
