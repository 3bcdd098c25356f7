//! Heuristic enhancement of basic trees.
//!
//! The enhanced graph starts as a copy of the basic tree. Rules then rewrite
//! labels of basic edges (case markers, coordinating conjunctions) or add
//! edges (relative-clause co-reference). No rule removes an edge or changes
//! the node set, so a graph built from a tree stays connected.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::conllu::{Sentence, Token};
use crate::eval::{score, ElasReport, EvalError, LabelMode};
use crate::graph::{Edge, EnhancedGraph, GraphError, NodeIndex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleId {
    /// Append the lowercased lemma of the case marker(s) to `nmod`/`obl`.
    CaseLemma,
    /// Append the lowercased `Case` feature of the modifier to `nmod`/`obl`.
    CaseFeat,
    /// Append the lowercased lemma of the coordinating conjunction to `conj`.
    ConjLemma,
    /// Link the antecedent of a relative clause to the relative pronoun and
    /// give it the pronoun's role in the clause.
    RelClauseRef,
}

impl RuleId {
    pub const ALL: [RuleId; 4] = [
        RuleId::CaseLemma,
        RuleId::CaseFeat,
        RuleId::ConjLemma,
        RuleId::RelClauseRef,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleId::CaseLemma => "case-lemma",
            RuleId::CaseFeat => "case-feat",
            RuleId::ConjLemma => "conj-lemma",
            RuleId::RelClauseRef => "relcl-ref",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleId {
    type Err = EnhanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| EnhanceError::UnknownRule(s.to_owned()))
    }
}

/// A set of enabled rules. The two case rules never occur together.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct RuleSet {
    enabled: BTreeSet<RuleId>,
}

impl RuleSet {
    pub fn new(rules: impl IntoIterator<Item = RuleId>) -> Result<Self, EnhanceError> {
        let enabled: BTreeSet<_> = rules.into_iter().collect();
        if enabled.contains(&RuleId::CaseLemma) && enabled.contains(&RuleId::CaseFeat) {
            return Err(EnhanceError::ConflictingCaseRules);
        }
        Ok(RuleSet { enabled })
    }

    pub fn empty() -> Self {
        RuleSet::default()
    }

    pub fn contains(&self, rule: RuleId) -> bool {
        self.enabled.contains(&rule)
    }

    pub fn len(&self) -> usize {
        self.enabled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.enabled.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = RuleId> + '_ {
        self.enabled.iter().copied()
    }

    /// Every admissible rule set, smallest first and lexicographically by
    /// rule order within a size.
    pub fn admissible() -> Vec<RuleSet> {
        let mut sets: Vec<Vec<RuleId>> = (0u32..1 << RuleId::ALL.len())
            .map(|mask| {
                RuleId::ALL
                    .iter()
                    .enumerate()
                    .filter(|(bit, _)| mask & (1 << bit) != 0)
                    .map(|(_, &r)| r)
                    .collect()
            })
            .collect();
        sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        sets.into_iter().filter_map(|s| RuleSet::new(s).ok()).collect()
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.enabled.is_empty() {
            return f.write_str("none");
        }
        let names: Vec<_> = self.enabled.iter().map(|r| r.name()).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for RuleSet {
    type Err = EnhanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(RuleSet::empty());
        }
        let rules = s
            .split(',')
            .map(|r| r.trim().parse())
            .collect::<Result<Vec<RuleId>, _>>()?;
        RuleSet::new(rules)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseMode {
    Lemma,
    FeatValue,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnhanceError {
    #[error("word {token} has no basic head")]
    MissingHead { token: usize },
    #[error("unknown rule '{0}'")]
    UnknownRule(String),
    #[error("the case-lemma and case-feat rules cannot be combined")]
    ConflictingCaseRules,
    #[error("dev gold has {gold} sentences, predictions have {predicted}")]
    SentenceCount { gold: usize, predicted: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// The basic tree as an enhanced graph: one `(head, word, deprel)` edge per
/// word.
pub fn copy_basic(sentence: &Sentence) -> Result<EnhancedGraph, EnhanceError> {
    let mut graph = EnhancedGraph::new(sentence.word_count(), 0);
    for (idx, word) in sentence.words().enumerate() {
        let head = word.head.ok_or(EnhanceError::MissingHead { token: idx + 1 })?;
        graph.add_edge(NodeIndex(head), NodeIndex(idx + 1), word.deprel.clone())?;
    }
    Ok(graph)
}

fn word_list(sentence: &Sentence) -> Vec<&Token> {
    sentence.words().collect()
}

/// Basic-tree dependents of word `head` with the given deprel, in surface
/// order.
fn dependents_with<'a>(words: &[&'a Token], head: usize, deprel: &str) -> Vec<&'a Token> {
    words
        .iter()
        .filter(|t| t.head == Some(head) && t.deprel == deprel)
        .copied()
        .collect()
}

fn lemma_of(token: &Token) -> String {
    let lemma = if token.lemma == "_" {
        &token.form
    } else {
        &token.lemma
    };
    lemma.to_lowercase()
}

/// Edges of `graph` that are also basic-tree edges of `words`.
fn basic_edges<'g>(graph: &'g EnhancedGraph, words: &[&Token]) -> Vec<&'g Edge> {
    graph
        .edges()
        .filter(|e| {
            let d = e.dependent.index();
            d >= 1
                && d <= words.len()
                && words[d - 1].head == Some(e.head.index())
                && words[d - 1].deprel == e.label
        })
        .collect()
}

/// Add case information to `nmod` and `obl` edges whose dependent has a
/// `case` dependent.
pub fn apply_case_rule(graph: &EnhancedGraph, sentence: &Sentence, mode: CaseMode) -> EnhancedGraph {
    let words = word_list(sentence);
    let mut out = graph.clone();
    for edge in basic_edges(graph, &words) {
        if edge.label != "nmod" && edge.label != "obl" {
            continue;
        }
        let dependent = edge.dependent.index();
        let markers = dependents_with(&words, dependent, "case");
        if markers.is_empty() {
            continue;
        }
        let suffix = match mode {
            CaseMode::Lemma => markers.iter().map(|c| lemma_of(c)).collect::<Vec<_>>().join("_"),
            CaseMode::FeatValue => match words[dependent - 1].feature("Case") {
                Some(case) => case.to_lowercase(),
                None => continue,
            },
        };
        out.relabel(edge, format!("{}:{}", edge.label, suffix));
    }
    out
}

/// Add the lemma of the coordinating conjunction to `conj` edges.
pub fn apply_conj_rule(graph: &EnhancedGraph, sentence: &Sentence) -> EnhancedGraph {
    let words = word_list(sentence);
    let mut out = graph.clone();
    for edge in basic_edges(graph, &words) {
        if edge.label != "conj" {
            continue;
        }
        if let Some(cc) = dependents_with(&words, edge.dependent.index(), "cc").first() {
            out.relabel(edge, format!("conj:{}", lemma_of(cc)));
        }
    }
    out
}

fn is_relative_pronoun(token: &Token) -> bool {
    token
        .feature("PronType")
        .map(|v| v.split(',').any(|t| t == "Rel"))
        .unwrap_or(false)
}

/// Resolve relative pronouns of `acl:relcl` clauses to their antecedent.
///
/// For a clause headed by `d` modifying `h`, the leftmost direct dependent
/// `p` of `d` with `PronType=Rel` yields `(h, p, ref)`, and every edge
/// `(d, p, r)` yields `(d, h, r)`.
pub fn apply_relcl_rule(graph: &EnhancedGraph, sentence: &Sentence) -> EnhancedGraph {
    let words = word_list(sentence);
    let mut out = graph.clone();
    for edge in basic_edges(graph, &words) {
        if !edge.label.starts_with("acl:relcl") || edge.head.is_root() {
            continue;
        }
        let (antecedent, clause) = (edge.head, edge.dependent);
        let Some(pronoun) = words
            .iter()
            .position(|t| t.head == Some(clause.index()) && is_relative_pronoun(t))
            .map(|pos| NodeIndex(pos + 1))
        else {
            continue;
        };

        out.add_edge(antecedent, pronoun, "ref")
            .expect("antecedent and pronoun are distinct words");
        let roles: Vec<String> = graph
            .outgoing(clause)
            .filter(|e| e.dependent == pronoun)
            .map(|e| e.label.clone())
            .collect();
        for role in roles {
            out.add_edge(clause, antecedent, role)
                .expect("clause head and antecedent are distinct words");
        }
    }
    out
}

/// Apply `rules` to the basic tree of `sentence` in the order case,
/// conjunction, relative clause.
pub fn enhance(sentence: &Sentence, rules: &RuleSet) -> Result<EnhancedGraph, EnhanceError> {
    let mut graph = copy_basic(sentence)?;
    if rules.contains(RuleId::CaseLemma) {
        graph = apply_case_rule(&graph, sentence, CaseMode::Lemma);
    }
    if rules.contains(RuleId::CaseFeat) {
        graph = apply_case_rule(&graph, sentence, CaseMode::FeatValue);
    }
    if rules.contains(RuleId::ConjLemma) {
        graph = apply_conj_rule(&graph, sentence);
    }
    if rules.contains(RuleId::RelClauseRef) {
        graph = apply_relcl_rule(&graph, sentence);
    }
    Ok(graph)
}

/// Enhance a sentence and write the result into its DEPS column.
///
/// Empty nodes of the input are dropped, since a graph derived from the basic
/// tree has none.
pub fn enhance_sentence(sentence: &Sentence, rules: &RuleSet) -> Result<Sentence, EnhanceError> {
    let graph = enhance(sentence, rules)?;
    Ok(graph.to_sentence(&sentence.without_empty_nodes())?)
}

pub fn enhance_document(sentences: &[Sentence], rules: &RuleSet) -> Result<Vec<Sentence>, EnhanceError> {
    sentences.iter().map(|s| enhance_sentence(s, rules)).collect()
}

/// Pick the admissible rule set with the highest full-label ELAS F1 of the
/// enhanced predictions against the gold DEPS.
///
/// Ties go to the smaller set, then to the lexicographically first.
pub fn best_rule_subset(
    dev_gold: &[Sentence],
    dev_pred_basic: &[Sentence],
) -> Result<(RuleSet, ElasReport), EnhanceError> {
    if dev_gold.len() != dev_pred_basic.len() {
        return Err(EnhanceError::SentenceCount {
            gold: dev_gold.len(),
            predicted: dev_pred_basic.len(),
        });
    }
    let mut best: Option<(RuleSet, ElasReport)> = None;
    for rules in RuleSet::admissible() {
        let system = enhance_document(dev_pred_basic, &rules)?;
        let report = score(dev_gold, &system, LabelMode::Full)?;
        if best.as_ref().is_none_or(|(_, b)| report.f1 > b.f1) {
            best = Some((rules, report));
        }
    }
    Ok(best.expect("there is at least one admissible rule set"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::parse_document;

    fn sentence(input: &str) -> Sentence {
        parse_document(input).unwrap().remove(0)
    }

    fn labels(g: &EnhancedGraph) -> Vec<(usize, usize, String)> {
        g.edges()
            .map(|e| (e.head.index(), e.dependent.index(), e.label.clone()))
            .collect()
    }

    const TALE: &str = "1\tTale\ttale\tNOUN\tNN\tNumber=Sing\t0\troot\t0:root\t_\n\
        2\tof\tof\tADP\tIN\t_\t3\tcase\t3:case\t_\n\
        3\tjoy\tjoy\tNOUN\tNN\tNumber=Sing\t1\tnmod\t1:nmod:of\t_\n\
        4\tand\tand\tCCONJ\tCC\t_\t5\tcc\t5:cc\t_\n\
        5\tsorrow\tsorrow\tNOUN\tNN\tNumber=Sing\t3\tconj\t1:nmod:of|3:conj:and\t_\n\n";

    const RELCL: &str = "1\tthe\tthe\tDET\tDT\t_\t2\tdet\t_\t_\n\
        2\tman\tman\tNOUN\tNN\t_\t0\troot\t_\t_\n\
        3\twho\twho\tPRON\tWP\tPronType=Rel\t4\tnsubj\t_\t_\n\
        4\tarrived\tarrive\tVERB\tVBD\t_\t2\tacl:relcl\t_\t_\n\n";

    #[test]
    fn copy_two_words() {
        let s = sentence("1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\t1\tobj\t_\t_\n\n");
        let g = copy_basic(&s).unwrap();
        assert_eq!(
            labels(&g),
            vec![(0, 1, "root".into()), (1, 2, "obj".into())]
        );
        assert!(g.reachability().is_connected());
    }

    #[test]
    fn copy_requires_heads() {
        let s = sentence("1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\t_\tobj\t_\t_\n\n");
        assert_eq!(copy_basic(&s), Err(EnhanceError::MissingHead { token: 2 }));
    }

    #[test]
    fn case_lemma_on_tale_of_joy() {
        let s = sentence(TALE);
        let g = apply_case_rule(&copy_basic(&s).unwrap(), &s, CaseMode::Lemma);
        assert!(g.contains(NodeIndex(1), NodeIndex(3), "nmod:of"));
        // no case dependent on sorrow: conj untouched
        assert!(g.contains(NodeIndex(3), NodeIndex(5), "conj"));
    }

    #[test]
    fn case_feature_mode() {
        let s = sentence(
            "1\tmluví\tmluvit\tVERB\t_\t_\t0\troot\t_\t_\n\
             2\to\to\tADP\t_\tCase=Loc\t3\tcase\t_\t_\n\
             3\tlesu\tles\tNOUN\t_\tCase=Loc|Number=Sing\t1\tobl\t_\t_\n\
             4\tbratra\tbratr\tNOUN\t_\tCase=Gen\t3\tnmod\t_\t_\n\
             5\tkvůli\tkvůli\tADP\t_\t_\t6\tcase\t_\t_\n\
             6\tnim\ton\tPRON\t_\t_\t1\tobl\t_\t_\n\n",
        );
        let g = apply_case_rule(&copy_basic(&s).unwrap(), &s, CaseMode::FeatValue);
        assert!(g.contains(NodeIndex(1), NodeIndex(3), "obl:loc"));
        // no case dependent
        assert!(g.contains(NodeIndex(3), NodeIndex(4), "nmod"));
        // case dependent but no Case feature
        assert!(g.contains(NodeIndex(1), NodeIndex(6), "obl"));
    }

    #[test]
    fn genitive_obl_feature_mode() {
        let s = sentence(
            "1\tbál\tbát\tVERB\t_\t_\t0\troot\t_\t_\n\
             2\tse\tse\tPRON\t_\t_\t1\texpl\t_\t_\n\
             3\tz\tz\tADP\t_\tCase=Gen\t4\tcase\t_\t_\n\
             4\ttmy\ttma\tNOUN\t_\tCase=Gen\t1\tobl\t_\t_\n\n",
        );
        let g = apply_case_rule(&copy_basic(&s).unwrap(), &s, CaseMode::FeatValue);
        assert!(g.contains(NodeIndex(1), NodeIndex(4), "obl:gen"));
    }

    #[test]
    fn multiple_case_markers_join() {
        let s = sentence(
            "1\tleft\tleave\tVERB\t_\t_\t0\troot\t_\t_\n\
             2\tout\tout\tADP\t_\t_\t4\tcase\t_\t_\n\
             3\tof\tof\tADP\t_\t_\t4\tcase\t_\t_\n\
             4\tspite\tspite\tNOUN\t_\t_\t1\tobl\t_\t_\n\n",
        );
        let g = apply_case_rule(&copy_basic(&s).unwrap(), &s, CaseMode::Lemma);
        assert!(g.contains(NodeIndex(1), NodeIndex(4), "obl:out_of"));
    }

    #[test]
    fn conj_lemma() {
        let s = sentence(TALE);
        let g = apply_conj_rule(&copy_basic(&s).unwrap(), &s);
        assert!(g.contains(NodeIndex(3), NodeIndex(5), "conj:and"));
        assert!(g.contains(NodeIndex(1), NodeIndex(3), "nmod"));

        let no_cc = sentence(
            "1\tred\tred\tADJ\t_\t_\t0\troot\t_\t_\n\
             2\tgreen\tgreen\tADJ\t_\t_\t1\tconj\t_\t_\n\n",
        );
        let g = apply_conj_rule(&copy_basic(&no_cc).unwrap(), &no_cc);
        assert!(g.contains(NodeIndex(1), NodeIndex(2), "conj"));
    }

    #[test]
    fn each_coordination_gets_its_own_conjunction() {
        let s = sentence(
            "1\tcats\tcat\tNOUN\t_\t_\t0\troot\t_\t_\n\
             2\tor\tor\tCCONJ\t_\t_\t3\tcc\t_\t_\n\
             3\tdogs\tdog\tNOUN\t_\t_\t1\tconj\t_\t_\n\
             4\tbut\tbut\tCCONJ\t_\t_\t5\tcc\t_\t_\n\
             5\tbirds\tbird\tNOUN\t_\t_\t1\tconj\t_\t_\n\
             6\tAND\tand\tCCONJ\t_\t_\t7\tcc\t_\t_\n\
             7\tfish\tfish\tNOUN\t_\t_\t5\tconj\t_\t_\n\n",
        );
        let g = apply_conj_rule(&copy_basic(&s).unwrap(), &s);
        assert!(g.contains(NodeIndex(1), NodeIndex(3), "conj:or"));
        assert!(g.contains(NodeIndex(1), NodeIndex(5), "conj:but"));
        assert!(g.contains(NodeIndex(5), NodeIndex(7), "conj:and"));
    }

    #[test]
    fn relative_clause_reference() {
        let s = sentence(RELCL);
        let base = copy_basic(&s).unwrap();
        let g = apply_relcl_rule(&base, &s);
        assert!(g.contains(NodeIndex(2), NodeIndex(3), "ref"));
        assert!(g.contains(NodeIndex(4), NodeIndex(2), "nsubj"));
        // basic edges kept
        assert!(g.contains(NodeIndex(4), NodeIndex(3), "nsubj"));
        assert_eq!(g.edge_count(), base.edge_count() + 2);
    }

    #[test]
    fn relative_clause_without_pronoun() {
        let s = sentence(&RELCL.replace("PronType=Rel", "_"));
        let base = copy_basic(&s).unwrap();
        assert_eq!(apply_relcl_rule(&base, &s), base);

        let no_relcl = sentence(TALE);
        let base = copy_basic(&no_relcl).unwrap();
        assert_eq!(apply_relcl_rule(&base, &no_relcl), base);
    }

    #[test]
    fn relcl_copies_case_enhanced_role() {
        // the house in which I live
        let s = sentence(
            "1\tthe\tthe\tDET\t_\t_\t2\tdet\t_\t_\n\
             2\thouse\thouse\tNOUN\t_\t_\t0\troot\t_\t_\n\
             3\tin\tin\tADP\t_\t_\t4\tcase\t_\t_\n\
             4\twhich\twhich\tPRON\t_\tPronType=Int,Rel\t6\tobl\t_\t_\n\
             5\tI\tI\tPRON\t_\t_\t6\tnsubj\t_\t_\n\
             6\tlive\tlive\tVERB\t_\t_\t2\tacl:relcl\t_\t_\n\n",
        );
        let rules: RuleSet = "case-lemma,relcl-ref".parse().unwrap();
        let g = enhance(&s, &rules).unwrap();
        assert!(g.contains(NodeIndex(6), NodeIndex(2), "obl:in"));
        assert!(g.contains(NodeIndex(2), NodeIndex(4), "ref"));
    }

    #[test]
    fn rule_sets() {
        let all = RuleSet::admissible();
        assert_eq!(all.len(), 12);
        assert!(all[0].is_empty());
        assert_eq!(all[1].to_string(), "case-lemma");
        assert!(all
            .iter()
            .all(|s| !(s.contains(RuleId::CaseLemma) && s.contains(RuleId::CaseFeat))));
        assert_eq!(
            "case-lemma,case-feat".parse::<RuleSet>(),
            Err(EnhanceError::ConflictingCaseRules)
        );
        assert!(matches!(
            "case".parse::<RuleSet>(),
            Err(EnhanceError::UnknownRule(_))
        ));
        let r: RuleSet = "relcl-ref, conj-lemma".parse().unwrap();
        assert_eq!(r.to_string(), "conj-lemma,relcl-ref");
        assert_eq!(r.to_string().parse::<RuleSet>().unwrap(), r);
    }

    #[test]
    fn empty_set_wins_when_gold_is_the_basic_tree() {
        let gold = parse_document(
            "1\ta\ta\tX\t_\t_\t0\troot\t0:root\t_\n2\tb\tb\tX\t_\t_\t1\tobj\t1:obj\t_\n\n",
        )
        .unwrap();
        let (rules, report) = best_rule_subset(&gold, &gold).unwrap();
        assert!(rules.is_empty());
        assert_eq!(report.f1, 100.0);
    }

    #[test]
    fn case_lemma_wins_on_nmod_of_gold() {
        let gold = parse_document(TALE).unwrap();
        let (rules, report) = best_rule_subset(&gold, &gold).unwrap();
        assert!(rules.contains(RuleId::CaseLemma));
        let empty = score(
            &gold,
            &enhance_document(&gold, &RuleSet::empty()).unwrap(),
            LabelMode::Full,
        )
        .unwrap();
        assert!(report.f1 > empty.f1);
    }
}
