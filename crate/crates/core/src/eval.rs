//! ELAS/EULAS scoring of enhanced graphs.
//!
//! Edges are compared as `(head, dependent, label)` triples per sentence.
//! Gold and system files must share their word tokenization; there is no
//! character-level alignment of diverging segmentations.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::conllu::{DepHead, Sentence, TokenId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    /// Compare full DEPS labels (ELAS).
    Full,
    /// Compare labels truncated to the universal relation (EULAS).
    Coarse,
}

/// How edges touching empty nodes are scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum EmptyNodePolicy {
    /// Empty nodes take part; they match only under identical `base.sub` ids.
    #[default]
    Literal,
    /// Edges whose head or dependent is an empty node are ignored on both
    /// sides, as the IWPT 2020 scorer does when given uncollapsed files.
    Skip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ScoreOptions {
    pub labels: LabelMode,
    pub empty_nodes: EmptyNodePolicy,
}

impl From<LabelMode> for ScoreOptions {
    fn from(labels: LabelMode) -> Self {
        ScoreOptions {
            labels,
            empty_nodes: EmptyNodePolicy::Literal,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("gold has {gold} sentences, system has {system}")]
    SentenceCount { gold: usize, system: usize },
    #[error("sentence {sentence}: {detail}")]
    Tokenization { sentence: usize, detail: String },
    #[error("cannot average an empty list of scores")]
    EmptyMacro,
}

/// Precision, recall and F1 (as percentages) over enhanced edges.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ElasReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mode: LabelMode,
}

fn percentage(num: usize, denom: usize) -> f64 {
    if denom == 0 {
        0.0
    } else {
        100.0 * num as f64 / denom as f64
    }
}

impl ElasReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, mode: LabelMode) -> Self {
        let precision = percentage(tp, tp + fp);
        let recall = percentage(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ElasReport {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            mode,
        }
    }

    /// Name of the metric for the label mode.
    pub fn metric(&self) -> &'static str {
        match self.mode {
            LabelMode::Full => "ELAS",
            LabelMode::Coarse => "EULAS",
        }
    }
}

/// Truncate every step of a (possibly `>`-joined) label at its first colon.
pub fn coarse_label(label: &str) -> String {
    label
        .split('>')
        .map(|step| step.split(':').next().unwrap_or(step))
        .collect::<Vec<_>>()
        .join(">")
}

type EdgeKey = (DepHead, TokenId, String);

/// Edges with multiplicities. In full mode every count is 1; in coarse mode
/// two labels of the same head and dependent may collapse into one key.
fn edge_bag(sentence: &Sentence, options: ScoreOptions) -> BTreeMap<EdgeKey, usize> {
    let mut edges = BTreeMap::new();
    for token in &sentence.tokens {
        match token.id {
            TokenId::Word(_) => {}
            TokenId::Empty(..) if options.empty_nodes == EmptyNodePolicy::Literal => {}
            _ => continue,
        }
        for dep in &token.deps {
            if options.empty_nodes == EmptyNodePolicy::Skip
                && matches!(dep.head, DepHead::Node(TokenId::Empty(..)))
            {
                continue;
            }
            let label = match options.labels {
                LabelMode::Full => dep.label.clone(),
                LabelMode::Coarse => coarse_label(&dep.label),
            };
            *edges.entry((dep.head, token.id, label)).or_insert(0) += 1;
        }
    }
    edges
}

fn check_tokenization(idx: usize, gold: &Sentence, system: &Sentence) -> Result<(), EvalError> {
    let (gw, sw) = (gold.word_count(), system.word_count());
    if gw != sw {
        return Err(EvalError::Tokenization {
            sentence: idx + 1,
            detail: format!("gold has {} words, system has {}", gw, sw),
        });
    }
    for (g, s) in gold.words().zip(system.words()) {
        if g.form != s.form {
            return Err(EvalError::Tokenization {
                sentence: idx + 1,
                detail: format!("word {}: gold form '{}', system form '{}'", g.id, g.form, s.form),
            });
        }
    }
    Ok(())
}

/// Edge counts `(tp, fp, fn)` for one sentence pair.
pub fn sentence_counts(gold: &Sentence, system: &Sentence, options: ScoreOptions) -> (usize, usize, usize) {
    let gold = edge_bag(gold, options);
    let system = edge_bag(system, options);
    let tp = gold
        .iter()
        .map(|(key, &g)| g.min(system.get(key).copied().unwrap_or(0)))
        .sum::<usize>();
    let total = |bag: &BTreeMap<EdgeKey, usize>| bag.values().sum::<usize>();
    (tp, total(&system) - tp, total(&gold) - tp)
}

/// Score system sentences against gold.
pub fn score(gold: &[Sentence], system: &[Sentence], mode: LabelMode) -> Result<ElasReport, EvalError> {
    score_with(gold, system, mode.into())
}

pub fn score_with(
    gold: &[Sentence],
    system: &[Sentence],
    options: ScoreOptions,
) -> Result<ElasReport, EvalError> {
    if gold.len() != system.len() {
        return Err(EvalError::SentenceCount {
            gold: gold.len(),
            system: system.len(),
        });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (idx, (g, s)) in gold.iter().zip(system).enumerate() {
        check_tokenization(idx, g, s)?;
        let (t, p, n) = sentence_counts(g, s, options);
        tp += t;
        fp += p;
        fn_ += n;
    }
    Ok(ElasReport::from_counts(tp, fp, fn_, options.labels))
}

/// Full-label ELAS precision of two repairs of the same system output.
///
/// Returns `(precision_naive, precision_greedy)`.
pub fn precision_delta(
    gold: &[Sentence],
    naive_fixed: &[Sentence],
    greedy_fixed: &[Sentence],
) -> Result<(f64, f64), EvalError> {
    let naive = score(gold, naive_fixed, LabelMode::Full)?;
    let greedy = score(gold, greedy_fixed, LabelMode::Full)?;
    Ok((naive.precision, greedy.precision))
}

/// F1 of one treebank, tagged with its language.
#[derive(Clone, Debug, PartialEq)]
pub struct TreebankScore {
    pub treebank: String,
    pub language: String,
    pub f1: f64,
}

impl TreebankScore {
    pub fn new(treebank: impl Into<String>, language: impl Into<String>, f1: f64) -> Self {
        TreebankScore {
            treebank: treebank.into(),
            language: language.into(),
            f1,
        }
    }

    pub fn from_report(treebank: impl Into<String>, language: impl Into<String>, report: &ElasReport) -> Self {
        TreebankScore::new(treebank, language, report.f1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MacroReport {
    pub per_treebank: Vec<(String, f64)>,
    /// Mean F1 over treebanks.
    pub treebank_average: f64,
    /// Mean over languages of the mean F1 of each language's treebanks.
    pub language_average: f64,
    pub language_of: BTreeMap<String, String>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Treebank and language macro averages.
pub fn macro_average(scores: &[TreebankScore]) -> Result<MacroReport, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyMacro);
    }
    let mut by_language: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in scores {
        by_language.entry(&s.language).or_default().push(s.f1);
    }
    Ok(MacroReport {
        per_treebank: scores.iter().map(|s| (s.treebank.clone(), s.f1)).collect(),
        treebank_average: mean(scores.iter().map(|s| s.f1)),
        language_average: mean(by_language.values().map(|f1s| mean(f1s.iter().copied()))),
        language_of: scores
            .iter()
            .map(|s| (s.treebank.clone(), s.language.clone()))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::parse_document;

    const GOLD: &str = "1\tTale\ttale\tNOUN\tNN\t_\t0\troot\t0:root\t_\n\
        2\tof\tof\tADP\tIN\t_\t3\tcase\t3:case\t_\n\
        3\tjoy\tjoy\tNOUN\tNN\t_\t1\tnmod\t1:nmod:of\t_\n\
        4\tand\tand\tCCONJ\tCC\t_\t5\tcc\t5:cc\t_\n\
        5\tsorrow\tsorrow\tNOUN\tNN\t_\t3\tconj\t1:nmod:of|3:conj:and\t_\n\n";

    fn doc(s: &str) -> Vec<Sentence> {
        parse_document(s).unwrap()
    }

    #[test]
    fn identical_scores_100() {
        let g = doc(GOLD);
        let r = score(&g, &g, LabelMode::Full).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (6, 0, 0));
        assert_eq!(r.f1, 100.0);
    }

    #[test]
    fn label_mismatch_full_vs_coarse() {
        let g = doc(GOLD);
        let s = doc(&GOLD.replace("1:nmod:of|3:conj:and", "1:nmod:from|3:conj:and"));
        let full = score(&g, &s, LabelMode::Full).unwrap();
        assert_eq!((full.tp, full.fp, full.fn_), (5, 1, 1));
        let coarse = score(&g, &s, LabelMode::Coarse).unwrap();
        assert_eq!((coarse.tp, coarse.fp, coarse.fn_), (6, 0, 0));
    }

    #[test]
    fn coarse_truncation() {
        assert_eq!(coarse_label("nmod:of"), "nmod");
        assert_eq!(coarse_label("acl:relcl"), "acl");
        assert_eq!(coarse_label("root"), "root");
        assert_eq!(coarse_label("conj:en>obl:voor"), "conj>obl");
    }

    #[test]
    fn zero_denominators() {
        let r = ElasReport::from_counts(0, 0, 0, LabelMode::Full);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        let r = ElasReport::from_counts(0, 3, 2, LabelMode::Full);
        assert_eq!(r.f1, 0.0);
    }

    #[test]
    fn mismatches_are_errors() {
        let g = doc(GOLD);
        assert_eq!(
            score(&g, &[], LabelMode::Full),
            Err(EvalError::SentenceCount { gold: 1, system: 0 })
        );
        let s = doc(&GOLD.replace("sorrow\tsorrow", "sorow\tsorrow"));
        assert!(matches!(
            score(&g, &s, LabelMode::Full),
            Err(EvalError::Tokenization { sentence: 1, .. })
        ));
    }

    #[test]
    fn empty_node_policies() {
        let gold = doc("1\ta\t_\t_\t_\t_\t0\troot\t0:root\t_\n\
                        1.1\tb\t_\t_\t_\t_\t_\t_\t1:conj\t_\n\
                        2\tc\t_\t_\t_\t_\t1\tdep\t1.1:obj\t_\n\n");
        let system = doc("1\ta\t_\t_\t_\t_\t0\troot\t0:root\t_\n\
                          2\tc\t_\t_\t_\t_\t1\tdep\t1:obj\t_\n\n");
        let literal = score(&gold, &system, LabelMode::Full).unwrap();
        assert_eq!((literal.tp, literal.fp, literal.fn_), (1, 1, 2));
        let skip = score_with(
            &gold,
            &system,
            ScoreOptions {
                labels: LabelMode::Full,
                empty_nodes: EmptyNodePolicy::Skip,
            },
        )
        .unwrap();
        assert_eq!((skip.tp, skip.fp, skip.fn_), (1, 1, 0));
        let same = score(&gold, &gold, LabelMode::Full).unwrap();
        assert_eq!(same.tp, 3);
    }

    #[test]
    fn macro_examples() {
        let one = macro_average(&[TreebankScore::new("a", "x", 71.5)]).unwrap();
        assert_eq!(one.treebank_average, 71.5);
        assert_eq!(one.language_average, 71.5);

        let m = macro_average(&[
            TreebankScore::new("cs_a", "cs", 60.0),
            TreebankScore::new("cs_b", "cs", 80.0),
            TreebankScore::new("en_a", "en", 90.0),
        ])
        .unwrap();
        assert!((m.treebank_average - 76.6667).abs() < 1e-4);
        assert!((m.language_average - 80.0).abs() < 1e-12);
        assert_eq!(m.language_of["cs_b"], "cs");
        assert_eq!(macro_average(&[]), Err(EvalError::EmptyMacro));
    }

    #[test]
    fn precision_delta_on_connected_output() {
        let g = doc(GOLD);
        let (naive, greedy) = precision_delta(&g, &g, &g).unwrap();
        assert_eq!(naive, greedy);
    }
}
