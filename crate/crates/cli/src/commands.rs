use std::fs::{self, File};
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use eudkit::conllu::{read_document, serialize_document, Sentence};
use eudkit::connect::{connect as repair, ConnectError, Strategy};
use eudkit::decode::{decode_sentence, load_probabilities, DecodeError, EdgeProbabilities};
use eudkit::enhance::{best_rule_subset, enhance_document, EnhanceError, RuleSet};
use eudkit::ensemble::{combine, EnsembleError, EnsembleInput};
use eudkit::eval::{score_with, ElasReport, EmptyNodePolicy, LabelMode, ScoreOptions};
use eudkit::graph::{EnhancedGraph, GraphError, NodeMap};

use crate::error::{CliError, Stage};

pub struct ScoreConfig {
    pub coarse: bool,
    pub json: bool,
    pub skip_empty_nodes: bool,
}

impl ScoreConfig {
    fn options(&self) -> ScoreOptions {
        ScoreOptions {
            labels: if self.coarse { LabelMode::Coarse } else { LabelMode::Full },
            empty_nodes: if self.skip_empty_nodes {
                EmptyNodePolicy::Skip
            } else {
                EmptyNodePolicy::Literal
            },
        }
    }
}

pub enum Source {
    Probs {
        probs: PathBuf,
        threshold: f64,
    },
    Rules {
        rules: String,
        dev_gold: Option<PathBuf>,
        dev_pred: Option<PathBuf>,
    },
}

pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub source: Source,
    pub strategy: Strategy,
    pub gold: Option<PathBuf>,
    pub score: ScoreConfig,
    pub output: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// I/O

fn is_stdin(path: Option<&Path>) -> bool {
    path.is_none_or(|p| p == Path::new("-"))
}

fn display(path: Option<&Path>) -> String {
    match path {
        Some(p) if !is_stdin(Some(p)) => p.display().to_string(),
        _ => "<stdin>".to_owned(),
    }
}

fn open(path: Option<&Path>) -> Result<Box<dyn Read>, CliError> {
    if is_stdin(path) {
        return Ok(Box::new(io::stdin().lock()));
    }
    let path = path.unwrap();
    File::open(path)
        .map(|f| Box::new(f) as Box<dyn Read>)
        .map_err(|e| CliError::input(Stage::Read, format!("{}: {e}", path.display())))
}

fn read_conllu(path: Option<&Path>) -> Result<Vec<Sentence>, CliError> {
    let reader = BufReader::new(open(path)?);
    read_document(reader).map_err(|e| CliError::input(Stage::Read, format!("{}: {e}", display(path))))
}

fn write_conllu(path: Option<&Path>, sentences: &[Sentence]) -> Result<(), CliError> {
    let text = serialize_document(sentences).map_err(|e| CliError::internal(Stage::Write, e))?;
    let result = match path {
        Some(p) if p != Path::new("-") => fs::write(p, text),
        _ => io::stdout().lock().write_all(text.as_bytes()),
    };
    result.map_err(|e| CliError::input(Stage::Write, format!("{}: {e}", path.map_or("<stdout>".into(), |p| p.display().to_string()))))
}

/// Refuse to overwrite any of the inputs.
fn check_output(output: Option<&Path>, inputs: &[Option<&Path>]) -> Result<(), CliError> {
    let Some(out) = output.filter(|p| *p != Path::new("-")) else {
        return Ok(());
    };
    let canonical = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let out_c = canonical(out);
    for input in inputs.iter().flatten() {
        if *input == out || canonical(input) == out_c {
            return Err(CliError::Usage(format!(
                "output {} would overwrite an input file",
                out.display()
            )));
        }
    }
    Ok(())
}

fn sentence_label(index: usize, sentence: &Sentence) -> String {
    match sentence.sent_id() {
        Some(id) => format!("sentence {} ({id})", index + 1),
        None => format!("sentence {}", index + 1),
    }
}

// ---------------------------------------------------------------------------
// Stages

fn enhance_error(e: EnhanceError) -> CliError {
    match e {
        EnhanceError::Graph(g) => CliError::internal(Stage::Enhance, g),
        EnhanceError::UnknownRule(_) | EnhanceError::ConflictingCaseRules => CliError::Usage(e.to_string()),
        other => CliError::input(Stage::Enhance, other),
    }
}

fn resolve_rules(rules: &str, dev_gold: Option<&Path>, dev_pred: Option<&Path>) -> Result<RuleSet, CliError> {
    if rules != "auto" {
        if dev_gold.is_some() || dev_pred.is_some() {
            return Err(CliError::Usage("--dev-gold and --dev-pred only apply to --rules auto".into()));
        }
        return rules
            .parse()
            .map_err(|e: EnhanceError| CliError::Usage(format!("--rules: {e}")));
    }
    let Some(dev_gold) = dev_gold else {
        return Err(CliError::Usage("--rules auto needs --dev-gold".into()));
    };
    let gold = read_conllu(Some(dev_gold))?;
    let pred = match dev_pred {
        Some(p) => read_conllu(Some(p))?,
        None => gold.clone(),
    };
    let (best, report) = best_rule_subset(&gold, &pred).map_err(enhance_error)?;
    eprintln!("selected rules: {best} (development ELAS F1 {:.2})", report.f1);
    Ok(best)
}

fn run_decode(probs_path: &Path, threshold: f64, template: &[Sentence]) -> Result<Vec<Sentence>, CliError> {
    let file = File::open(probs_path).map_err(|e| CliError::input(Stage::Read, format!("{}: {e}", probs_path.display())))?;
    let probs: Vec<EdgeProbabilities<f64>> = load_probabilities(BufReader::new(file))
        .map_err(|e| CliError::input(Stage::Decode, format!("{}: {e}", probs_path.display())))?;
    if probs.len() != template.len() {
        return Err(CliError::input(
            Stage::Decode,
            format!("{} probability records for {} sentences", probs.len(), template.len()),
        ));
    }
    probs
        .iter()
        .zip(template)
        .enumerate()
        .map(|(i, (p, s))| {
            decode_sentence(p, s, threshold).map_err(|e| match e {
                DecodeError::Graph(GraphError::NodeCountMismatch { .. }) | DecodeError::SentenceMismatch { .. } => {
                    CliError::input(Stage::Decode, format!("{}: {e}", sentence_label(i, s)))
                }
                other => CliError::internal(Stage::Decode, format!("{}: {other}", sentence_label(i, s))),
            })
        })
        .collect()
}

fn run_connect(sentences: &[Sentence], strategy: Strategy) -> Result<Vec<Sentence>, CliError> {
    sentences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let graph = EnhancedGraph::from_sentence(s)
                .map_err(|e| CliError::input(Stage::Connect, format!("{}: {e}", sentence_label(i, s))))?;
            let outcome = repair(&graph, strategy).map_err(|e| match e {
                ConnectError::TooLarge { .. } => CliError::input(Stage::Connect, format!("{}: {e}", sentence_label(i, s))),
                other => CliError::Usage(other.to_string()),
            })?;
            outcome
                .repaired
                .to_sentence(s)
                .map_err(|e| CliError::internal(Stage::Connect, e))
        })
        .collect()
}

fn run_score(gold: &[Sentence], system: &[Sentence], config: &ScoreConfig) -> Result<ElasReport, CliError> {
    score_with(gold, system, config.options()).map_err(|e| CliError::input(Stage::Evaluate, e))
}

fn print_report(report: &ElasReport, json: bool) -> Result<(), CliError> {
    if json {
        let text = serde_json::to_string(report).map_err(|e| CliError::internal(Stage::Evaluate, e))?;
        println!("{text}");
    } else {
        let m = report.metric();
        println!("{m} precision: {:.2}", report.precision);
        println!("{m} recall: {:.2}", report.recall);
        println!("{m} F1: {:.2}", report.f1);
        println!("edges: tp {} fp {} fn {}", report.tp, report.fp, report.fn_);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Subcommands

pub fn enhance(
    input: Option<PathBuf>,
    rules: String,
    dev_gold: Option<PathBuf>,
    dev_pred: Option<PathBuf>,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    check_output(output.as_deref(), &[input.as_deref(), dev_gold.as_deref(), dev_pred.as_deref()])?;
    let rules = resolve_rules(&rules, dev_gold.as_deref(), dev_pred.as_deref())?;
    let doc = read_conllu(input.as_deref())?;
    let enhanced = enhance_document(&doc, &rules).map_err(enhance_error)?;
    write_conllu(output.as_deref(), &enhanced)
}

fn check_threshold(threshold: f64) -> Result<(), CliError> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--threshold {threshold} is outside (0, 1)")))
    }
}

pub fn decode(input: Option<PathBuf>, probs: PathBuf, threshold: f64, output: Option<PathBuf>) -> Result<(), CliError> {
    check_threshold(threshold)?;
    check_output(output.as_deref(), &[input.as_deref(), Some(&probs)])?;
    let template = read_conllu(input.as_deref())?;
    let decoded = run_decode(&probs, threshold, &template)?;
    write_conllu(output.as_deref(), &decoded)
}

pub fn connect(input: Option<PathBuf>, strategy: Strategy, output: Option<PathBuf>) -> Result<(), CliError> {
    check_output(output.as_deref(), &[input.as_deref()])?;
    let doc = read_conllu(input.as_deref())?;
    let repaired = run_connect(&doc, strategy)?;
    write_conllu(output.as_deref(), &repaired)
}

pub fn ensemble(inputs: Vec<PathBuf>, weights: Option<String>, output: Option<PathBuf>) -> Result<(), CliError> {
    let weights = weights
        .map(|w| {
            w.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Usage(format!("--weights: '{x}' is not a number")))
                })
                .collect::<Result<Vec<f64>, _>>()
        })
        .transpose()?;
    let input_refs: Vec<Option<&Path>> = inputs.iter().map(|p| Some(p.as_path())).collect();
    check_output(output.as_deref(), &input_refs)?;
    if inputs.iter().filter(|p| is_stdin(Some(p))).count() > 1 {
        return Err(CliError::Usage("stdin can be used for at most one ensemble member".into()));
    }
    let members = inputs
        .iter()
        .map(|p| read_conllu(Some(p)))
        .collect::<Result<Vec<_>, _>>()?;
    let input = EnsembleInput::new(members, weights).map_err(|e| match e {
        EnsembleError::WeightCount { .. } | EnsembleError::InvalidWeight { .. } => CliError::Usage(format!("--weights: {e}")),
        other => CliError::input(Stage::Ensemble, other),
    })?;
    let combined = combine(&input).map_err(|e| CliError::input(Stage::Ensemble, e))?;
    write_conllu(output.as_deref(), &combined)
}

pub fn evaluate(gold: PathBuf, system: PathBuf, config: ScoreConfig) -> Result<(), CliError> {
    let gold = read_conllu(Some(&gold))?;
    let system = read_conllu(Some(&system))?;
    let report = run_score(&gold, &system, &config)?;
    print_report(&report, config.json)
}

pub fn validate(input: Option<PathBuf>) -> Result<(), CliError> {
    let doc = read_conllu(input.as_deref())?;
    for (i, sentence) in doc.iter().enumerate() {
        let graph = EnhancedGraph::from_sentence(sentence)
            .map_err(|e| CliError::input(Stage::Validate, format!("{}: {e}", sentence_label(i, sentence))))?;
        let report = graph.reachability();
        if let Some(&node) = report.unreachable.iter().next() {
            let id = NodeMap::new(sentence)
                .token_id(node)
                .map_or_else(|| node.index().to_string(), |id| id.to_string());
            return Err(CliError::input(
                Stage::Validate,
                format!(
                    "{}: node {id} is not reachable from ROOT ({} unreachable)",
                    sentence_label(i, sentence),
                    report.unreachable.len()
                ),
            ));
        }
    }
    println!("valid: {} sentences", doc.len());
    Ok(())
}

pub fn pipeline(config: PipelineConfig) -> Result<(), CliError> {
    let input = match (&config.source, &config.input) {
        (_, Some(p)) => Some(p.clone()),
        (Source::Probs { .. }, None) => config.gold.clone(),
        (Source::Rules { .. }, None) => None,
    };
    let mut inputs = vec![input.as_deref(), config.gold.as_deref()];
    match &config.source {
        Source::Probs { probs, threshold } => {
            check_threshold(*threshold)?;
            inputs.push(Some(probs));
        }
        Source::Rules { dev_gold, dev_pred, .. } => {
            inputs.push(dev_gold.as_deref());
            inputs.push(dev_pred.as_deref());
        }
    }
    check_output(config.output.as_deref(), &inputs)?;

    let stage_one = match &config.source {
        Source::Probs { probs, threshold } => {
            let template = read_conllu(input.as_deref())?;
            run_decode(probs, *threshold, &template)?
        }
        Source::Rules {
            rules,
            dev_gold,
            dev_pred,
        } => {
            let rules = resolve_rules(rules, dev_gold.as_deref(), dev_pred.as_deref())?;
            let doc = read_conllu(input.as_deref())?;
            enhance_document(&doc, &rules).map_err(enhance_error)?
        }
    };
    let repaired = run_connect(&stage_one, config.strategy)?;

    if config.output.is_some() || config.gold.is_none() {
        write_conllu(config.output.as_deref(), &repaired)?;
    }
    if let Some(gold_path) = &config.gold {
        let gold = read_conllu(Some(gold_path))?;
        let report = run_score(&gold, &repaired, &config.score)?;
        print_report(&report, config.score.json)?;
    }
    Ok(())
}
