mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eudkit::connect::Strategy;

use crate::error::CliError;

/// Enhanced Universal Dependencies toolkit.
#[derive(Debug, Parser)]
#[command(name = "eudkit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive enhanced graphs from basic trees with heuristic rules.
    Enhance(EnhanceArgs),
    /// Decode enhanced graphs from edge probabilities.
    Decode(DecodeArgs),
    /// Make every node reachable from ROOT.
    Connect(ConnectArgs),
    /// Combine basic trees from several parsers.
    Ensemble(EnsembleArgs),
    /// Score enhanced graphs against gold (ELAS).
    Evaluate(EvaluateArgs),
    /// Check CoNLL-U well-formedness and full reachability.
    Validate(ValidateArgs),
    /// Enhance or decode, then connect, then optionally evaluate.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct RuleArgs {
    /// Comma-separated rules (case-lemma, case-feat, conj-lemma, relcl-ref),
    /// `none`, or `auto` to select the best set on development data.
    #[arg(long, default_value = "case-lemma,conj-lemma,relcl-ref")]
    rules: String,
    /// Gold development file for `--rules auto`.
    #[arg(long)]
    dev_gold: Option<PathBuf>,
    /// Predicted basic trees for the development file (defaults to the gold
    /// trees).
    #[arg(long)]
    dev_pred: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EnhanceArgs {
    /// Input CoNLL-U (stdin when absent or `-`).
    input: Option<PathBuf>,
    #[command(flatten)]
    rules: RuleArgs,
    /// Output file (stdout when absent).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// CoNLL-U whose sentences receive the decoded DEPS (stdin when absent).
    input: Option<PathBuf>,
    /// Edge probabilities, one JSON record per sentence.
    #[arg(long)]
    probs: PathBuf,
    /// Edges strictly above this probability are kept.
    #[arg(long, default_value_t = eudkit::decode::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConnectArgs {
    input: Option<PathBuf>,
    /// naive, greedy or oracle.
    #[arg(long, default_value = "greedy")]
    strategy: Strategy,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EnsembleArgs {
    /// Parser outputs over the same tokenization.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Comma-separated positive weights, one per input.
    #[arg(long)]
    weights: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Truncate labels at the first ':' (EULAS).
    #[arg(long)]
    coarse: bool,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    /// Ignore empty nodes and edges headed by them, like the official
    /// shared-task scorer.
    #[arg(long)]
    skip_empty_nodes: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    gold: PathBuf,
    system: PathBuf,
    #[command(flatten)]
    score: ScoreArgs,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    input: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Input CoNLL-U: basic trees to enhance, or the sentences to decode into
    /// (defaults to `--gold` when decoding, otherwise stdin).
    input: Option<PathBuf>,
    /// Decode from these edge probabilities instead of applying rules.
    #[arg(long)]
    probs: Option<PathBuf>,
    #[arg(long, default_value_t = eudkit::decode::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Rules to apply when `--probs` is not given.
    #[arg(long, conflicts_with = "probs")]
    rules: Option<String>,
    #[arg(long, requires = "rules")]
    dev_gold: Option<PathBuf>,
    #[arg(long, requires = "dev_gold")]
    dev_pred: Option<PathBuf>,
    #[arg(long, default_value = "greedy")]
    strategy: Strategy,
    /// Gold file to score the repaired output against.
    #[arg(long)]
    gold: Option<PathBuf>,
    #[command(flatten)]
    score: ScoreArgs,
    /// Where to write the repaired CoNLL-U. Without `-o` it goes to stdout,
    /// unless `--gold` is given, in which case only the report is printed.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Enhance(a) => commands::enhance(a.input, a.rules.rules, a.rules.dev_gold, a.rules.dev_pred, a.output),
        Command::Decode(a) => commands::decode(a.input, a.probs, a.threshold, a.output),
        Command::Connect(a) => commands::connect(a.input, a.strategy, a.output),
        Command::Ensemble(a) => commands::ensemble(a.inputs, a.weights, a.output),
        Command::Evaluate(a) => commands::evaluate(a.gold, a.system, a.score.into()),
        Command::Validate(a) => commands::validate(a.input),
        Command::Pipeline(a) => {
            let source = match (a.probs, a.rules) {
                (Some(probs), _) => commands::Source::Probs {
                    probs,
                    threshold: a.threshold,
                },
                (None, rules) => commands::Source::Rules {
                    rules: rules.unwrap_or_else(|| "case-lemma,conj-lemma,relcl-ref".to_owned()),
                    dev_gold: a.dev_gold,
                    dev_pred: a.dev_pred,
                },
            };
            commands::pipeline(commands::PipelineConfig {
                input: a.input,
                source,
                strategy: a.strategy,
                gold: a.gold,
                score: a.score.into(),
                output: a.output,
            })
        }
    }
}

impl From<ScoreArgs> for commands::ScoreConfig {
    fn from(a: ScoreArgs) -> Self {
        commands::ScoreConfig {
            coarse: a.coarse,
            json: a.json,
            skip_empty_nodes: a.skip_empty_nodes,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are not errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eudkit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
