//! `faithnli`: score, evaluate and analyse NLI-based faithfulness metrics.

mod analyze;
mod augment;
mod common;
mod config;
mod evaluate;
mod finetune;
mod score;

use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::config::{GlobalArgs, Settings};

#[derive(Debug, Parser)]
#[command(name = "faithnli", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score grounding/generation pairs with an NLI backend.
    Score(score::ScoreArgs),
    /// Per-corpus AUC with bootstrap intervals and significance tests.
    Evaluate(evaluate::EvaluateArgs),
    /// Add phrase-prefixed copies of every NLI instance.
    Augment(augment::AugmentArgs),
    /// Paired AUC difference between a variant and a reference metric.
    Ablate(evaluate::AblateArgs),
    /// Pronoun correlations, score histograms, generator bias and cost accounting.
    #[command(subcommand)]
    Analyze(analyze::AnalyzeCommand),
    /// Build corpora over repeated phrase subsets, or summarise their reports.
    Robustness(augment::RobustnessArgs),
    /// Fine-tune the NLI model and select the best checkpoint.
    Finetune(finetune::FinetuneArgs),
}

fn run(cli: Cli) -> Result<()> {
    let settings = Settings::resolve(&cli.global)?;
    match &cli.command {
        Command::Score(a) => score::run(a, &settings),
        Command::Evaluate(a) => evaluate::run_evaluate(a, &settings),
        Command::Augment(a) => augment::run_augment(a, &settings),
        Command::Ablate(a) => evaluate::run_ablate(a, &settings),
        Command::Analyze(a) => analyze::run(a, &settings),
        Command::Robustness(a) => augment::run_robustness(a, &settings),
        Command::Finetune(a) => finetune::run(a, &settings),
    }
}

/// The error chain, dropping links whose text the previous link already
/// includes.
fn describe(e: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for link in e.chain() {
        let text = link.to_string();
        if parts.last().is_some_and(|prev| prev.contains(&text)) {
            continue;
        }
        parts.push(text);
    }
    parts.join(": ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
