use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sdcfr_cli::commands::{self, round_label, PolicyKind};
use sdcfr_cli::config::{ExperimentConfig, GameKind, GameSection};
use sdcfr_cli::{CliError, RunOptions};
use sdcfr_core::eval::Pairing;

#[derive(Parser)]
#[command(name = "sdcfr", version, about = "Tabular CFR, Deep CFR and Single Deep CFR experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per seed and write CSVs, checkpoints and a manifest.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in recipe: fig1a, fig1b, bigleduc, smoke, kuhn.
        #[arg(long)]
        recipe: Option<String>,
        /// Run only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Parent directory for run directories.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the number of iterations.
        #[arg(long)]
        iterations: Option<u64>,
        /// Save state and stop after this iteration.
        #[arg(long)]
        stop_after: Option<u64>,
        /// Print the resolved config and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Continue an interrupted run from its last saved iteration.
    Resume {
        run: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        stop_after: Option<u64>,
    },
    /// Exact exploitability of every strategy stored in a run directory.
    EvalExploitability { run: PathBuf },
    /// Duplicate-paired match between two strategies of a run.
    Head2head {
        run: PathBuf,
        #[arg(long, default_value = "sd_cfr")]
        a: String,
        #[arg(long, default_value = "deep_cfr")]
        b: String,
        #[arg(long, default_value_t = 10_000)]
        pairs: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Deal independent hands instead of mirrored pairs.
        #[arg(long)]
        independent: bool,
    },
    /// Per-depth disagreement between SD-CFR's and Deep CFR's average strategies.
    CompareStrategies {
        run: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        rollouts: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dump the infoset list and tabular linear CFR strategies of a game.
    Enumerate {
        #[arg(long, value_enum, default_value_t = GameArg::Leduc)]
        game: GameArg,
        /// Take the game section from this config file instead.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        iterations: u64,
        #[arg(long, default_value = "enumerate")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GameArg {
    Kuhn,
    Leduc,
    BigLeduc,
}

fn read_config(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config, recipe, seed, workers, out, iterations, stop_after, dry_run } => {
            let mut cfg = match (config, recipe) {
                (Some(_), Some(_)) => return Err(CliError::Usage("pass --config or --recipe, not both".into())),
                (Some(path), None) => read_config(&path)?,
                (None, Some(name)) => ExperimentConfig::recipe(&name).ok_or_else(|| {
                    CliError::Usage(format!("unknown recipe {name:?}; known: {}", ExperimentConfig::RECIPES.join(", ")))
                })?,
                (None, None) => ExperimentConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            if let Some(t) = iterations {
                cfg.iterations = t;
            }
            cfg.validate()?;
            if dry_run {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            for dir in sdcfr_cli::train(&cfg, &RunOptions { workers, stop_after })? {
                println!("{}", dir.display());
            }
        }
        Command::Resume { run, workers, stop_after } => {
            let dir = sdcfr_cli::resume(&run, &RunOptions { workers, stop_after })?;
            println!("{}", dir.display());
        }
        Command::EvalExploitability { run } => {
            println!("method\te_total_mA\te_per_player_mA");
            for (method, e) in commands::eval_exploitability(&run)? {
                println!("{method}\t{:.3}\t{:.3}", e.total_milli(), e.per_player_milli());
            }
        }
        Command::Head2head { run, a, b, pairs, seed, independent } => {
            let pairing = if independent { Pairing::Independent } else { Pairing::Duplicate };
            let r = commands::head2head(&run, PolicyKind::parse(&a)?, PolicyKind::parse(&b)?, pairs, seed, pairing)?;
            println!("{a} vs {b}: {:.2} ± {:.2} {} over {} hands", r.value, r.ci95, r.units, r.samples);
        }
        Command::CompareStrategies { run, rollouts, seed } => {
            println!("depth\tround\tmean\tci95\tstd\tn");
            for r in commands::compare_strategies(&run, rollouts, seed)? {
                println!("{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}", r.depth, round_label(r.round), r.mean, r.ci95, r.std, r.n);
            }
        }
        Command::Enumerate { game, config, iterations, out } => {
            let section = match config {
                Some(path) => read_config(&path)?.game,
                None => match game {
                    GameArg::Kuhn => GameSection { kind: GameKind::Kuhn, ..GameSection::default() },
                    GameArg::Leduc => GameSection::default(),
                    GameArg::BigLeduc => ExperimentConfig::recipe("bigleduc").expect("built-in recipe").game,
                },
            };
            let n = commands::enumerate(&section, iterations, &out)?;
            println!("{n} infosets written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
