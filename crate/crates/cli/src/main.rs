//! `crosstitch` — build anchor sets, re-express embedding tables in a
//! shared space, and move trained classifier heads between languages
//! without retraining.
//!
//! Every command stages its outputs and commits them together, writes a
//! reproducibility manifest next to the primary output, and exits
//! non-zero without leaving partial files when anything fails.

mod cmd;
mod manifest;
mod stage;

use std::process::ExitCode;

use clap::Parser;

#[derive(Parser)]
#[command(
    name = "crosstitch",
    version,
    about = "Stitch embedding tables into one space and carry classifiers across"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(clap::Args)]
struct Global {
    /// Base seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for row-level parallelism (0 = one per core).
    /// Never affects results, only wall time.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Lowercase tokens while loading tables, lexica, and datasets.
    #[arg(long, global = true)]
    lowercase: bool,
}

#[derive(clap::Subcommand)]
enum Command {
    /// Build an anchor TSV from a bilingual lexicon and two tables.
    Anchors(cmd::anchors::Args),
    /// Re-express both tables in the source space via anchor mixing.
    Map(cmd::map::Args),
    /// Fit a least-squares projection and project the target table.
    Ls(cmd::ls::Args),
    /// Train a linear classifier head over mean-pooled rows.
    Train(cmd::train::Args),
    /// Bind a trained head to another table and score it.
    StitchEval(cmd::stitch_eval::Args),
    /// Run the synthetic rotation benchmark end to end.
    Synth(cmd::synth::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    #[cfg(feature = "parallel")]
    if cli.global.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global();
        if let Err(err) = pool {
            eprintln!("error: cannot size the thread pool: {err}");
            return ExitCode::FAILURE;
        }
    }
    #[cfg(not(feature = "parallel"))]
    if cli.global.threads > 1 {
        eprintln!("note: built without parallel support; --threads is ignored");
    }

    let result = match cli.command {
        Command::Anchors(args) => cmd::anchors::run(args, &cli.global),
        Command::Map(args) => cmd::map::run(args, &cli.global),
        Command::Ls(args) => cmd::ls::run(args, &cli.global),
        Command::Train(args) => cmd::train::run(args, &cli.global),
        Command::StitchEval(args) => cmd::stitch_eval::run(args, &cli.global),
        Command::Synth(args) => cmd::synth::run(args, &cli.global),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
