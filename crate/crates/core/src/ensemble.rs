//! Combining basic-tree predictions from several parsers by weighted voting.
//!
//! Each word takes the head with the largest summed member weight. When the
//! voted heads do not form a tree, the best single-root arborescence over the
//! voted edges is used instead. Labels are then voted among the members that
//! chose the winning head, and LEMMA, UPOS, XPOS and FEATS by plurality.
//! Ties always go to the candidate first proposed by the lowest member index.

use thiserror::Error;

use crate::arborescence::{max_arborescence, tree_weight, WeightedEdge};
use crate::conllu::{Sentence, TokenId};
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum EnsembleError {
    #[error("an ensemble needs at least one member")]
    NoMembers,
    #[error("{found} weights given for {expected} members")]
    WeightCount { expected: usize, found: usize },
    #[error("weight {value} of member {member} is not a positive finite number")]
    InvalidWeight { member: usize, value: f64 },
    #[error("member {member} has {found} sentences, member 0 has {expected}")]
    SentenceCount {
        member: usize,
        expected: usize,
        found: usize,
    },
    #[error("member {member}, sentence {sentence}: {detail}")]
    Tokenization {
        member: usize,
        sentence: usize,
        detail: String,
    },
    #[error("member {member}, sentence {sentence}, word {word}: head is missing or out of range")]
    BadHead {
        member: usize,
        sentence: usize,
        word: usize,
    },
    #[error("sentence {sentence}: no member provides a valid tree to fall back on")]
    NoValidTree { sentence: usize },
}

/// Parallel predictions for the same documents, one document per member.
#[derive(Clone, Debug)]
pub struct EnsembleInput<W> {
    members: Vec<Vec<Sentence>>,
    weights: Vec<W>,
}

impl<W: Real> EnsembleInput<W> {
    /// Checks that all members share sentence boundaries and word forms, and
    /// that every weight is positive. Missing weights default to 1.
    pub fn new(members: Vec<Vec<Sentence>>, weights: Option<Vec<W>>) -> Result<Self, EnsembleError> {
        if members.is_empty() {
            return Err(EnsembleError::NoMembers);
        }
        let weights = weights.unwrap_or_else(|| vec![W::one(); members.len()]);
        if weights.len() != members.len() {
            return Err(EnsembleError::WeightCount {
                expected: members.len(),
                found: weights.len(),
            });
        }
        for (member, &w) in weights.iter().enumerate() {
            if !(w > W::zero() && w.is_finite()) {
                return Err(EnsembleError::InvalidWeight {
                    member,
                    value: w.widen(),
                });
            }
        }
        let reference = &members[0];
        for (m, doc) in members.iter().enumerate() {
            if doc.len() != reference.len() {
                return Err(EnsembleError::SentenceCount {
                    member: m,
                    expected: reference.len(),
                    found: doc.len(),
                });
            }
            for (s, (sent, base)) in doc.iter().zip(reference).enumerate() {
                check_sentence(sent, base, m, s)?;
            }
        }
        Ok(EnsembleInput { members, weights })
    }

    pub fn members(&self) -> &[Vec<Sentence>] {
        &self.members
    }

    pub fn weights(&self) -> &[W] {
        &self.weights
    }
}

fn check_sentence(sent: &Sentence, base: &Sentence, member: usize, sentence: usize) -> Result<(), EnsembleError> {
    let mismatch = |detail: String| EnsembleError::Tokenization {
        member,
        sentence,
        detail,
    };
    if sent.word_count() != base.word_count() {
        return Err(mismatch(format!(
            "{} words, member 0 has {}",
            sent.word_count(),
            base.word_count()
        )));
    }
    for (a, b) in sent.words().zip(base.words()) {
        if a.form != b.form {
            return Err(mismatch(format!("word {} is '{}', member 0 has '{}'", a.id, a.form, b.form)));
        }
    }
    let n = sent.word_count();
    for (word, token) in sent.words().enumerate() {
        match token.head {
            Some(h) if h <= n && h != word + 1 => {}
            _ => {
                return Err(EnsembleError::BadHead {
                    member,
                    sentence,
                    word: word + 1,
                })
            }
        }
    }
    Ok(())
}

/// Whether `heads` (1-based head of word `i + 1` at index `i`, 0 for ROOT)
/// is a tree with exactly one word attached to ROOT.
pub fn is_valid_tree(heads: &[usize]) -> bool {
    let n = heads.len();
    if heads.iter().any(|&h| h > n) || heads.iter().filter(|&&h| h == 0).count() != 1 {
        return false;
    }
    for start in 1..=n {
        let mut v = start;
        for _ in 0..=n {
            if v == 0 {
                break;
            }
            v = heads[v - 1];
        }
        if v != 0 {
            return false;
        }
    }
    true
}

/// Weighted plurality; ties go to the value proposed by the earliest member.
fn plurality<K: PartialEq + Clone, W: Real>(votes: impl IntoIterator<Item = (K, W)>, tol: W) -> Option<K> {
    let mut tally: Vec<(K, W)> = Vec::new();
    for (key, w) in votes {
        match tally.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = entry.1 + w,
            None => tally.push((key, w)),
        }
    }
    let mut best: Option<(K, W)> = None;
    for (key, w) in tally {
        if best.as_ref().is_none_or(|(_, bw)| w > *bw + tol) {
            best = Some((key, w));
        }
    }
    best.map(|(k, _)| k)
}

/// Combine one sentence; `members` must already satisfy the input checks.
fn combine_sentence<W: Real>(members: &[&Sentence], weights: &[W], index: usize) -> Result<Sentence, EnsembleError> {
    let total = weights.iter().fold(W::zero(), |a, &b| a + b);
    let tol = W::epsilon().sqrt() * total;
    let n = members[0].word_count();
    let heads_of = |m: usize| -> Vec<usize> { members[m].words().map(|t| t.head.unwrap()).collect() };
    let member_heads: Vec<Vec<usize>> = (0..members.len()).map(heads_of).collect();

    // Voted edges; rank is the first member proposing the edge.
    let mut edges: Vec<WeightedEdge<W>> = Vec::new();
    for (m, heads) in member_heads.iter().enumerate() {
        for (i, &h) in heads.iter().enumerate() {
            match edges.iter_mut().find(|e| e.head == h && e.dependent == i + 1) {
                Some(e) => e.weight = e.weight + weights[m],
                None => edges.push(WeightedEdge {
                    head: h,
                    dependent: i + 1,
                    weight: weights[m],
                    rank: m,
                }),
            }
        }
    }

    let voted: Vec<usize> = (1..=n)
        .map(|d| {
            plurality(
                member_heads.iter().zip(weights).map(|(heads, &w)| (heads[d - 1], w)),
                tol,
            )
            .expect("at least one member")
        })
        .collect();

    let heads = if is_valid_tree(&voted) {
        voted
    } else {
        match best_single_root(n, &edges, tol) {
            Some(heads) => heads,
            None => fallback_member(&member_heads, weights, tol).ok_or(EnsembleError::NoValidTree { sentence: index })?,
        }
    };

    let mut out = members[0].without_empty_nodes();
    let mut word = 0;
    for token in out.tokens.iter_mut() {
        if !matches!(token.id, TokenId::Word(_)) {
            continue;
        }
        let head = heads[word];
        let agreeing = || {
            members
                .iter()
                .zip(weights)
                .filter(move |(s, _)| s.words().nth(word).unwrap().head == Some(head))
        };
        let pick = |f: &dyn Fn(&crate::conllu::Token) -> String| {
            plurality(members.iter().zip(weights).map(|(s, &w)| (f(s.words().nth(word).unwrap()), w)), tol)
                .expect("at least one member")
        };
        token.head = Some(head);
        token.deprel = plurality(
            agreeing().map(|(s, &w)| (s.words().nth(word).unwrap().deprel.clone(), w)),
            tol,
        )
        .expect("the chosen head was proposed by some member");
        token.lemma = pick(&|t| t.lemma.clone());
        token.upos = pick(&|t| t.upos.clone());
        token.xpos = pick(&|t| t.xpos.clone());
        let feats = plurality(
            members
                .iter()
                .zip(weights)
                .map(|(s, &w)| (s.words().nth(word).unwrap().feats.clone(), w)),
            tol,
        )
        .expect("at least one member");
        token.feats = feats;
        token.deps.clear();
        word += 1;
    }
    Ok(out)
}

/// Best arborescence over voted edges in which exactly one word hangs off
/// ROOT; ties go to the lowest root word.
fn best_single_root<W: Real>(n: usize, edges: &[WeightedEdge<W>], tol: W) -> Option<Vec<usize>> {
    let mut best: Option<(Vec<usize>, W)> = None;
    for root_edge in edges.iter().filter(|e| e.head == 0) {
        let restricted: Vec<WeightedEdge<W>> = edges
            .iter()
            .filter(|e| e.head != 0 || e.dependent == root_edge.dependent)
            .copied()
            .collect();
        let Some(parent) = max_arborescence(n + 1, 0, &restricted, tol) else {
            continue;
        };
        let weight = tree_weight(&parent, 0, &restricted, tol);
        let replace = match &best {
            None => true,
            Some((current, w)) => {
                weight > *w + tol || (weight + tol >= *w && root_of(&parent) < root_of(current))
            }
        };
        if replace {
            best = Some((parent[1..].to_vec(), weight));
        }
    }
    best.map(|(heads, _)| heads)
}

fn root_of(heads: &[usize]) -> usize {
    heads.iter().position(|&h| h == 0).unwrap_or(usize::MAX)
}

/// Tree of the heaviest member whose tree is valid.
fn fallback_member<W: Real>(member_heads: &[Vec<usize>], weights: &[W], tol: W) -> Option<Vec<usize>> {
    let mut best: Option<(usize, W)> = None;
    for (m, heads) in member_heads.iter().enumerate() {
        if is_valid_tree(heads) && best.is_none_or(|(_, w)| weights[m] > w + tol) {
            best = Some((m, weights[m]));
        }
    }
    best.map(|(m, _)| member_heads[m].clone())
}

/// Combine all members sentence by sentence.
pub fn combine<W: Real>(input: &EnsembleInput<W>) -> Result<Vec<Sentence>, EnsembleError> {
    (0..input.members[0].len())
        .map(|s| {
            let sentences: Vec<&Sentence> = input.members.iter().map(|doc| &doc[s]).collect();
            combine_sentence(&sentences, &input.weights, s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::Token;

    fn tree(heads: &[usize]) -> Sentence {
        let tokens = heads
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let mut t = Token::new(TokenId::Word(i + 1), format!("w{}", i + 1));
                t.head = Some(h);
                t.deprel = if h == 0 { "root".into() } else { "dep".into() };
                t
            })
            .collect();
        Sentence::new(vec!["# sent_id = t".into()], tokens)
    }

    fn heads(s: &Sentence) -> Vec<usize> {
        s.words().map(|t| t.head.unwrap()).collect()
    }

    fn run(members: &[&[usize]], weights: Option<Vec<f64>>) -> Vec<usize> {
        let docs = members.iter().map(|h| vec![tree(h)]).collect();
        let input = EnsembleInput::new(docs, weights).unwrap();
        heads(&combine(&input).unwrap()[0])
    }

    #[test]
    fn identical_members() {
        assert_eq!(run(&[&[2, 0, 2], &[2, 0, 2]], None), vec![2, 0, 2]);
    }

    #[test]
    fn majority_head_wins() {
        assert_eq!(run(&[&[2, 0, 2, 2, 4], &[2, 0, 2, 2, 4], &[5, 0, 2, 2, 4]], None), vec![2, 0, 2, 2, 4]);
    }

    #[test]
    fn ties_go_to_first_member() {
        assert_eq!(run(&[&[2, 0], &[0, 1]], None), vec![2, 0]);
        assert_eq!(run(&[&[0, 1], &[2, 0]], None), vec![0, 1]);
    }

    #[test]
    fn weights_decide() {
        assert_eq!(run(&[&[2, 0], &[0, 1]], Some(vec![1.0, 3.0])), vec![0, 1]);
    }

    #[test]
    fn voted_cycle_is_repaired() {
        // votes: word 1 -> 0, word 2 -> 3 (three-way tie), word 3 -> 2
        let out = run(&[&[0, 3, 1], &[0, 1, 2], &[2, 0, 2]], None);
        assert!(is_valid_tree(&out), "{out:?}");
    }

    #[test]
    fn multiple_roots_are_repaired() {
        let out = run(&[&[0, 1, 1], &[2, 0, 2], &[0, 0, 1]], None);
        // votes: 1->0, 2->{1,0,0} => 0, 3->1; two roots
        assert!(is_valid_tree(&out), "{out:?}");
        assert_eq!(out.iter().filter(|&&h| h == 0).count(), 1);
    }

    #[test]
    fn labels_follow_the_chosen_head() {
        let mut a = tree(&[2, 0]);
        a.tokens[0].deprel = "nsubj".into();
        let mut b = tree(&[2, 0]);
        b.tokens[0].deprel = "obj".into();
        let mut c = tree(&[0, 1]);
        c.tokens[1].deprel = "obj".into();
        let input = EnsembleInput::new(vec![vec![c], vec![b], vec![a]], Some(vec![1.0, 1.0, 1.5])).unwrap();
        let out = &combine(&input).unwrap()[0];
        assert_eq!(heads(out), vec![2, 0]);
        assert_eq!(out.tokens[0].deprel, "nsubj");
    }

    #[test]
    fn other_columns_by_plurality() {
        let mut docs = Vec::new();
        for (lemma, upos) in [("a", "NOUN"), ("b", "VERB"), ("b", "NOUN")] {
            let mut s = tree(&[0]);
            s.tokens[0].lemma = lemma.into();
            s.tokens[0].upos = upos.into();
            docs.push(vec![s]);
        }
        let out = &combine(&EnsembleInput::<f64>::new(docs, None).unwrap()).unwrap()[0];
        assert_eq!(out.tokens[0].lemma, "b");
        assert_eq!(out.tokens[0].upos, "NOUN");
    }

    #[test]
    fn input_errors() {
        assert_eq!(
            EnsembleInput::<f64>::new(vec![], None).unwrap_err(),
            EnsembleError::NoMembers
        );
        assert!(matches!(
            EnsembleInput::new(vec![vec![tree(&[0])]], Some(vec![0.0])),
            Err(EnsembleError::InvalidWeight { .. })
        ));
        assert!(matches!(
            EnsembleInput::new(vec![vec![tree(&[0])]], Some(vec![1.0, 2.0])),
            Err(EnsembleError::WeightCount { .. })
        ));
        assert!(matches!(
            EnsembleInput::<f64>::new(vec![vec![tree(&[0])], vec![tree(&[0, 1])]], None),
            Err(EnsembleError::Tokenization { .. })
        ));
        assert!(matches!(
            EnsembleInput::<f64>::new(vec![vec![tree(&[0])], vec![]], None),
            Err(EnsembleError::SentenceCount { .. })
        ));
        assert!(matches!(
            EnsembleInput::<f64>::new(vec![vec![tree(&[0, 5])]], None),
            Err(EnsembleError::BadHead { word: 2, .. })
        ));
    }

    #[test]
    fn tree_validity() {
        assert!(is_valid_tree(&[2, 0, 2]));
        assert!(!is_valid_tree(&[0, 0]));
        assert!(!is_valid_tree(&[2, 1, 0]));
        assert!(!is_valid_tree(&[]));
    }
}
