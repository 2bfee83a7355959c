//! `ctgs`: generate, complete, analyze, verify and evaluate constrained text.
//!
//! Exit status: 0 on success, 1 when the request was understood but failed
//! (dead end, violations found, bad model file), 2 for usage errors
//! (unknown flags, unparsable filters, missing resources).

mod commands;
mod config;
mod error;
mod resources;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::FileConfig;
use crate::error::{CliError, EXIT_USAGE};
use crate::resources::{load_embeddings, load_lexicon, Resources, BUILTIN_K, BUILTIN_ORDER};

#[derive(Debug, Parser)]
#[command(name = "ctgs", version, about = "Constrained text generation")]
struct Cli {
    /// TOML file with defaults for the flags below; flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// `builtin`, a trained model file, or `provider:HOST:PORT`.
    #[arg(long)]
    model: Option<String>,
    /// Token list (one per line) for a provider model.
    #[arg(long, value_name = "FILE")]
    vocab: Option<PathBuf>,
    /// CMUdict-format pronunciations; the bundled dictionary by default.
    #[arg(long, value_name = "FILE")]
    lexicon: Option<PathBuf>,
    /// Whitespace-separated word vectors, for semantic filters.
    #[arg(long, value_name = "FILE")]
    embeddings: Option<PathBuf>,
    /// Estimate syllables of words missing from the lexicon.
    #[arg(long)]
    syllable_fallback: bool,
    /// Filter spec such as `ban_letters=e` or `syllables=2`; repeatable.
    #[arg(long = "filter", value_name = "SPEC")]
    filters: Vec<String>,
    /// Named filter bundle (`lipogram-e`, `eprime`).
    #[arg(long)]
    preset: Option<String>,
    /// Tokens to generate.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `greedy`, `temp:T`, `topk:K` or `topp:P`.
    #[arg(long)]
    strategy: Option<String>,
    /// Backtracking budget for dead ends.
    #[arg(long)]
    backtrack: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an n-gram model and write it as JSON.
    Train {
        /// Text file, or a manifest listing text files.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = BUILTIN_ORDER)]
        order: usize,
        #[arg(long, default_value_t = BUILTIN_K)]
        k: f64,
    },
    /// Generate text that satisfies the filters.
    Generate,
    /// Build text interactively from ranked continuations.
    Complete {
        /// Continuations listed per step.
        #[arg(long, default_value_t = 10)]
        m: usize,
    },
    /// Print the phonetic features of words.
    Analyze {
        #[arg(required = true)]
        words: Vec<String>,
    },
    /// Report every word containing a banned letter.
    Verify {
        #[arg(long, value_name = "LETTERS")]
        ban: String,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Perplexity and constraint error of models with and without the filters.
    Eval {
        /// Filter-compliant corpus to split; the bundled lipogram by default.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Additional training text, unconstrained; repeatable.
        #[arg(long = "extra-corpus", value_name = "FILE")]
        extra: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        orders: Vec<usize>,
        #[arg(long, default_value_t = BUILTIN_K)]
        k: f64,
        /// Fraction of the corpus used for training.
        #[arg(long, default_value_t = 0.9)]
        ratio: f64,
        /// Generated tokens per cell.
        #[arg(long)]
        length: Option<usize>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

fn settings(cli: &Cli) -> Result<(FileConfig, Resources), CliError> {
    let flags = FileConfig {
        model: cli.model.clone(),
        vocab: cli.vocab.clone(),
        lexicon: cli.lexicon.clone(),
        embeddings: cli.embeddings.clone(),
        syllable_fallback: cli.syllable_fallback.then_some(true),
        filters: cli.filters.clone(),
        preset: cli.preset.clone(),
        n: cli.n,
        seed: cli.seed,
        strategy: cli.strategy.clone(),
        backtrack: cli.backtrack,
        out: cli.out.clone(),
    };
    let cfg = match &cli.config {
        Some(path) => FileConfig::load(path)?.overlay(flags),
        None => flags,
    };
    let res = Resources {
        lexicon: load_lexicon(cfg.lexicon.as_deref())?,
        embeddings: cfg.embeddings.as_deref().map(load_embeddings).transpose()?,
        syllable_fallback: cfg.syllable_fallback.unwrap_or(false),
    };
    Ok((cfg, res))
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let (cfg, res) = settings(&cli)?;
    match cli.command {
        Command::Train { corpus, order, k } => commands::train(&corpus, order, k, &cfg, &res),
        Command::Generate => commands::generate(&cfg, &res),
        Command::Complete { m } => commands::complete(&cfg, &res, m, std::io::stdin().lock()),
        Command::Analyze { words } => commands::analyze(&words, &res),
        Command::Verify { ban, files } => commands::verify(&ban, &files),
        Command::Eval { corpus, extra, orders, k, ratio, length } => {
            commands::eval(&commands::EvalArgs { corpus, extra, orders, k, ratio, length }, &cfg, &res)
        }
        Command::Serve { addr } => commands::serve(&addr, &cfg, &res),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("ctgs: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
