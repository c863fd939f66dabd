//! `langmod`: modularity-based diagnostics for cross-lingual embeddings.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when the requested
//! metric is undefined for the data (e.g. a single language).

mod args;
mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use args::{BliArgs, ExpandArgs, ModularityArgs, RefineArgs, SweepArgs, TableArgs};

#[derive(Parser, Debug)]
#[command(name = "langmod", version, about = "Language-clustering diagnostics for cross-lingual word embeddings")]
struct Cli {
    /// Worker threads (default: all cores). Does not affect results.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalized modularity of the joint kNN lexical graph.
    Modularity(ModularityArgs),
    /// Precision@1 of CSLS translation retrieval.
    Bli(BliArgs),
    /// Iterative Procrustes refinement with model selection.
    Refine(RefineArgs),
    /// Nearest target words of a list of seed words.
    Expand(ExpandArgs),
    /// Pearson and Spearman correlation of each feature with a target column.
    Correlate(TableArgs),
    /// Standardized regression with leave-one-feature-out ablation.
    Ablate(TableArgs),
    /// Correlation of modularity with task scores over a (k, trees) grid.
    Sweep(SweepArgs),
}

const EXIT_INPUT: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|cause| cause.downcast_ref::<langmod::Error>())
        .map_or(EXIT_INPUT, |e| if e.is_degenerate() { EXIT_DEGENERATE } else { EXIT_INPUT })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }
    log::info!("threads: {}", rayon::current_num_threads());
    let result = match &cli.command {
        Command::Modularity(a) => commands::modularity_cmd(a),
        Command::Bli(a) => commands::bli_cmd(a),
        Command::Refine(a) => commands::refine_cmd(a),
        Command::Expand(a) => commands::expand_cmd(a),
        Command::Correlate(a) => commands::correlate_cmd(a),
        Command::Ablate(a) => commands::ablate_cmd(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
