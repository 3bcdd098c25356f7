//! Decoding enhanced graphs from edge-existence probabilities.
//!
//! Every (dependent, head) cell is decided independently: an edge exists
//! when its probability is strictly above the threshold. A node that ends up
//! without any head receives its single most probable head instead. There
//! is no spanning-tree step and no global constraint, so the decoded graph
//! may contain cycles and may be fragmented.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::Sentence;
use crate::graph::{EnhancedGraph, GraphError, NodeIndex};
use crate::scalar::Real;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("threshold {0} is outside (0, 1)")]
    ThresholdOutOfRange(f64),
    #[error("{what}: expected {expected} entries, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("probability {value} at [{dependent}][{head}] is outside [0, 1]")]
    ProbabilityOutOfRange {
        dependent: usize,
        head: usize,
        value: f64,
    },
    #[error("label index {index} at [{dependent}][{head}] is outside a vocabulary of {vocab}")]
    LabelOutOfRange {
        dependent: usize,
        head: usize,
        index: usize,
        vocab: usize,
    },
    #[error("row 0 (ROOT as dependent) must be all zeros")]
    RootRowNotZero,
    #[error("probabilities are for '{probs}' but the sentence is '{sentence}'")]
    SentenceMismatch { probs: String, sentence: String },
    #[error("record {record}: {message}")]
    Malformed { record: usize, message: String },
    #[error("dependent and head are both {0}")]
    SameIndex(usize),
    #[error("ROOT cannot be a dependent")]
    RootDependent,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Edge-existence probabilities and per-cell best labels for one sentence.
///
/// Both matrices are dense, row-major and indexed `[dependent][head]` over
/// `n_words + n_empty + 1` nodes, node 0 being ROOT.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeProbabilities<T> {
    sent_id: String,
    n_words: usize,
    n_empty: usize,
    edge_prob: Vec<T>,
    best_label: Vec<usize>,
    label_vocab: Vec<String>,
}

impl<T: Real> EdgeProbabilities<T> {
    pub fn new(
        n_words: usize,
        n_empty: usize,
        edge_prob: Vec<T>,
        best_label: Vec<usize>,
        label_vocab: Vec<String>,
    ) -> Result<Self, DecodeError> {
        let n = n_words + n_empty + 1;
        for (what, found) in [("edge_prob", edge_prob.len()), ("best_label", best_label.len())] {
            if found != n * n {
                return Err(DecodeError::ShapeMismatch {
                    what,
                    expected: n * n,
                    found,
                });
            }
        }
        for (cell, &p) in edge_prob.iter().enumerate() {
            // NaN fails both comparisons and is rejected here as well.
            if !(p >= T::zero() && p <= T::one()) {
                return Err(DecodeError::ProbabilityOutOfRange {
                    dependent: cell / n,
                    head: cell % n,
                    value: p.widen(),
                });
            }
        }
        if edge_prob[..n].iter().any(|p| !p.is_zero()) {
            return Err(DecodeError::RootRowNotZero);
        }
        for (cell, &index) in best_label.iter().enumerate() {
            if index >= label_vocab.len() && cell >= n && cell % n != cell / n {
                return Err(DecodeError::LabelOutOfRange {
                    dependent: cell / n,
                    head: cell % n,
                    index,
                    vocab: label_vocab.len(),
                });
            }
        }
        Ok(EdgeProbabilities {
            sent_id: String::new(),
            n_words,
            n_empty,
            edge_prob,
            best_label,
            label_vocab,
        })
    }

    pub fn with_sent_id(mut self, sent_id: impl Into<String>) -> Self {
        self.sent_id = sent_id.into();
        self
    }

    pub fn sent_id(&self) -> &str {
        &self.sent_id
    }

    pub fn n_words(&self) -> usize {
        self.n_words
    }

    pub fn n_empty(&self) -> usize {
        self.n_empty
    }

    /// Matrix side: words, empty nodes and ROOT.
    pub fn n_nodes(&self) -> usize {
        self.n_words + self.n_empty + 1
    }

    pub fn prob(&self, dependent: usize, head: usize) -> T {
        self.edge_prob[dependent * self.n_nodes() + head]
    }

    pub fn label(&self, dependent: usize, head: usize) -> &str {
        &self.label_vocab[self.best_label[dependent * self.n_nodes() + head]]
    }

    pub fn label_vocab(&self) -> &[String] {
        &self.label_vocab
    }
}

fn check_threshold<T: Real>(threshold: T) -> Result<(), DecodeError> {
    if threshold > T::zero() && threshold < T::one() {
        Ok(())
    } else {
        Err(DecodeError::ThresholdOutOfRange(threshold.widen()))
    }
}

/// Heads chosen for `dependent`: every head above the threshold, or the
/// most probable head (lowest index on ties) when there is none.
pub fn select_heads<T: Real>(probs: &EdgeProbabilities<T>, dependent: usize, threshold: T) -> Vec<usize> {
    let candidates = (0..probs.n_nodes()).filter(|&head| head != dependent);
    let above: Vec<usize> = candidates
        .clone()
        .filter(|&head| probs.prob(dependent, head) > threshold)
        .collect();
    if !above.is_empty() {
        return above;
    }
    let mut best: Option<(usize, T)> = None;
    for head in candidates {
        let p = probs.prob(dependent, head);
        if best.is_none_or(|(_, bp)| p > bp) {
            best = Some((head, p));
        }
    }
    best.map(|(head, _)| vec![head]).unwrap_or_default()
}

/// Decode an enhanced graph from edge probabilities.
pub fn decode<T: Real>(probs: &EdgeProbabilities<T>, threshold: T) -> Result<EnhancedGraph, DecodeError> {
    check_threshold(threshold)?;
    let mut graph = EnhancedGraph::new(probs.n_words, probs.n_empty);
    for dependent in 1..probs.n_nodes() {
        for head in select_heads(probs, dependent, threshold) {
            graph.add_edge(NodeIndex(head), NodeIndex(dependent), probs.label(dependent, head))?;
        }
    }
    Ok(graph)
}

/// Decode and write the result into the DEPS column of `template`.
pub fn decode_sentence<T: Real>(
    probs: &EdgeProbabilities<T>,
    template: &Sentence,
    threshold: T,
) -> Result<Sentence, DecodeError> {
    if let Some(id) = template.sent_id() {
        if !probs.sent_id.is_empty() && probs.sent_id != id {
            return Err(DecodeError::SentenceMismatch {
                probs: probs.sent_id.clone(),
                sentence: id.to_owned(),
            });
        }
    }
    Ok(decode(probs, threshold)?.to_sentence(template)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DistanceBucket {
    /// 1 to 4
    Short,
    /// 5 to 9
    Medium,
    /// 10 to 14
    Far,
    /// 15 and above
    LongRange,
}

impl DistanceBucket {
    /// Bucket of an absolute distance; `None` for 0.
    pub fn of(distance: usize) -> Option<Self> {
        match distance {
            0 => None,
            1..=4 => Some(DistanceBucket::Short),
            5..=9 => Some(DistanceBucket::Medium),
            10..=14 => Some(DistanceBucket::Far),
            _ => Some(DistanceBucket::LongRange),
        }
    }
}

/// Qualitative position of a head relative to its dependent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HeadFeature {
    pub direction: Direction,
    pub bucket: DistanceBucket,
}

/// Direction and distance bucket of `head` as seen from `dependent`.
///
/// The signed distance is `head - dependent`; negative means the head is to
/// the left.
pub fn head_feature(dependent: usize, head: usize) -> Result<HeadFeature, DecodeError> {
    if dependent == 0 {
        return Err(DecodeError::RootDependent);
    }
    if dependent == head {
        return Err(DecodeError::SameIndex(head));
    }
    let signed = head as isize - dependent as isize;
    let direction = if signed < 0 {
        Direction::Left
    } else {
        Direction::Right
    };
    let bucket = DistanceBucket::of(signed.unsigned_abs()).expect("distance is nonzero");
    Ok(HeadFeature { direction, bucket })
}

/// A matrix in the interchange format, either flat row-major or as rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Matrix<V> {
    Flat(Vec<V>),
    Rows(Vec<Vec<V>>),
}

impl<V> Matrix<V> {
    fn into_flat(self, n: usize, what: &'static str) -> Result<Vec<V>, DecodeError> {
        match self {
            Matrix::Flat(values) => Ok(values),
            Matrix::Rows(rows) => {
                if rows.len() != n {
                    return Err(DecodeError::ShapeMismatch {
                        what,
                        expected: n,
                        found: rows.len(),
                    });
                }
                if let Some(row) = rows.iter().find(|r| r.len() != n) {
                    return Err(DecodeError::ShapeMismatch {
                        what,
                        expected: n,
                        found: row.len(),
                    });
                }
                Ok(rows.into_iter().flatten().collect())
            }
        }
    }
}

/// One line of the probability interchange file.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct ProbabilityRecord {
    sent_id: String,
    n_words: usize,
    n_empty: usize,
    labels: Vec<String>,
    edge_prob: Matrix<f64>,
    best_label: Matrix<usize>,
}

/// Read line-delimited JSON probability records, one per sentence.
pub fn load_probabilities<T: Real, R: BufRead>(reader: R) -> Result<Vec<EdgeProbabilities<T>>, DecodeError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record_no = idx + 1;
        let with_record = |e: DecodeError| match e {
            DecodeError::Malformed { .. } => e,
            other => DecodeError::Malformed {
                record: record_no,
                message: other.to_string(),
            },
        };
        let record: ProbabilityRecord = serde_json::from_str(&line).map_err(|e| DecodeError::Malformed {
            record: record_no,
            message: e.to_string(),
        })?;
        let n = record.n_words + record.n_empty + 1;
        let edge_prob = record
            .edge_prob
            .into_flat(n, "edge_prob")
            .map_err(&with_record)?
            .into_iter()
            .map(T::from_f64_lossy)
            .collect();
        let best_label = record.best_label.into_flat(n, "best_label").map_err(&with_record)?;
        let probs = EdgeProbabilities::new(record.n_words, record.n_empty, edge_prob, best_label, record.labels)
            .map_err(with_record)?
            .with_sent_id(record.sent_id);
        out.push(probs);
    }
    Ok(out)
}

/// Write probability records as line-delimited JSON with flat matrices.
pub fn write_probabilities<T: Real, W: Write>(mut writer: W, probs: &[EdgeProbabilities<T>]) -> Result<(), DecodeError> {
    for p in probs {
        let record = ProbabilityRecord {
            sent_id: p.sent_id.clone(),
            n_words: p.n_words,
            n_empty: p.n_empty,
            labels: p.label_vocab.clone(),
            edge_prob: Matrix::Flat(p.edge_prob.iter().map(|v| v.widen()).collect()),
            best_label: Matrix::Flat(p.best_label.clone()),
        };
        let line = serde_json::to_string(&record).map_err(|e| DecodeError::Malformed {
            record: 0,
            message: e.to_string(),
        })?;
        writeln!(writer, "{}", line)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(n: usize, cells: &[(usize, usize, f64)]) -> Vec<f64> {
        let mut m = vec![0.0; n * n];
        for &(d, h, p) in cells {
            m[d * n + h] = p;
        }
        m
    }

    fn edges(g: &EnhancedGraph) -> Vec<(usize, usize, String)> {
        g.edges()
            .map(|e| (e.head.index(), e.dependent.index(), e.label.clone()))
            .collect()
    }

    #[test]
    fn two_word_decode() {
        let mut labels = vec![0; 9];
        labels[3] = 0; // [1][0] root
        labels[2 * 3 + 1] = 1; // [2][1] obj
        let p = EdgeProbabilities::new(
            2,
            0,
            matrix(3, &[(1, 0, 0.9), (2, 1, 0.8)]),
            labels,
            vec!["root".into(), "obj".into()],
        )
        .unwrap();
        let g = decode(&p, 0.5).unwrap();
        assert_eq!(
            edges(&g),
            vec![(0, 1, "root".into()), (1, 2, "obj".into())]
        );
    }

    #[test]
    fn fallback_takes_most_probable_head() {
        // word 1 has nothing above 0.5; best is column 3 with 0.4
        let p = EdgeProbabilities::new(
            3,
            0,
            matrix(4, &[(1, 0, 0.1), (1, 2, 0.3), (1, 3, 0.4), (2, 0, 0.9), (3, 2, 0.7)]),
            vec![0; 16],
            vec!["dep".into()],
        )
        .unwrap();
        let g = decode(&p, 0.5).unwrap();
        let heads: Vec<_> = g.incoming(NodeIndex(1)).map(|e| e.head.index()).collect();
        assert_eq!(heads, vec![3]);
    }

    #[test]
    fn fallback_ties_go_to_lowest_head() {
        let p = EdgeProbabilities::new(
            3,
            0,
            matrix(4, &[(2, 3, 0.3), (2, 1, 0.3), (1, 0, 0.9), (3, 1, 0.9)]),
            vec![0; 16],
            vec!["dep".into()],
        )
        .unwrap();
        assert_eq!(select_heads(&p, 2, 0.5), vec![1]);
        // all-zero row falls back to ROOT
        let p = EdgeProbabilities::new(1, 0, vec![0.0; 4], vec![0; 4], vec!["root".into()]).unwrap();
        assert_eq!(select_heads(&p, 1, 0.5), vec![0]);
    }

    #[test]
    fn threshold_is_strict() {
        let p = EdgeProbabilities::new(
            2,
            0,
            matrix(3, &[(1, 0, 0.9), (2, 1, 0.5), (2, 0, 0.2)]),
            vec![0; 9],
            vec!["dep".into()],
        )
        .unwrap();
        // 0.5 is not above 0.5 but is still the fallback maximum
        assert_eq!(select_heads(&p, 2, 0.5), vec![1]);
        assert_eq!(select_heads(&p, 2, 0.1), vec![0, 1]);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            EdgeProbabilities::new(1, 0, vec![0.0; 3], vec![0; 4], vec!["x".into()]),
            Err(DecodeError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            EdgeProbabilities::new(1, 0, vec![0.0, 0.0, 1.5, 0.0], vec![0; 4], vec!["x".into()]),
            Err(DecodeError::ProbabilityOutOfRange { .. })
        ));
        assert!(matches!(
            EdgeProbabilities::new(1, 0, vec![0.0, 0.0, f64::NAN, 0.0], vec![0; 4], vec!["x".into()]),
            Err(DecodeError::ProbabilityOutOfRange { .. })
        ));
        assert!(matches!(
            EdgeProbabilities::new(1, 0, vec![0.0, 0.3, 1.0, 0.0], vec![0; 4], vec!["x".into()]),
            Err(DecodeError::RootRowNotZero)
        ));
        assert!(matches!(
            EdgeProbabilities::new(1, 0, vec![0.0, 0.0, 1.0, 0.0], vec![0, 0, 2, 0], vec!["x".into()]),
            Err(DecodeError::LabelOutOfRange { .. })
        ));
        let p = EdgeProbabilities::new(1, 0, vec![0.0, 0.0, 1.0, 0.0], vec![0; 4], vec!["x".into()]).unwrap();
        for t in [0.0, 1.0, -0.2, 1.5] {
            assert!(matches!(decode(&p, t), Err(DecodeError::ThresholdOutOfRange(_))));
        }
    }

    #[test]
    fn works_with_f32() {
        let p: EdgeProbabilities<f32> =
            EdgeProbabilities::new(1, 0, vec![0.0, 0.0, 0.75, 0.0], vec![0; 4], vec!["root".into()]).unwrap();
        let g = decode(&p, 0.5f32).unwrap();
        assert!(g.contains(NodeIndex(0), NodeIndex(1), "root"));
    }

    #[test]
    fn head_features() {
        let f = head_feature(5, 2).unwrap();
        assert_eq!((f.direction, f.bucket), (Direction::Left, DistanceBucket::Short));
        let f = head_feature(2, 9).unwrap();
        assert_eq!((f.direction, f.bucket), (Direction::Right, DistanceBucket::Medium));
        let f = head_feature(1, 16).unwrap();
        assert_eq!((f.direction, f.bucket), (Direction::Right, DistanceBucket::LongRange));
        let f = head_feature(3, 0).unwrap();
        assert_eq!(f.direction, Direction::Left);
        assert_eq!(DistanceBucket::of(14), Some(DistanceBucket::Far));
        assert_eq!(DistanceBucket::of(15), Some(DistanceBucket::LongRange));
        assert!(matches!(head_feature(4, 4), Err(DecodeError::SameIndex(4))));
        assert!(matches!(head_feature(0, 4), Err(DecodeError::RootDependent)));
    }

    #[test]
    fn interchange_records() {
        let empty: Vec<EdgeProbabilities<f64>> = load_probabilities(&b""[..]).unwrap();
        assert!(empty.is_empty());

        let line = r#"{"sent_id":"s1","n_words":2,"n_empty":0,"labels":["root","obj"],
            "edge_prob":[0,0,0, 0.9,0,0.1, 0.2,0.8,0],"best_label":[0,0,0, 0,0,1, 0,1,0]}"#
            .replace('\n', "");
        let loaded: Vec<EdgeProbabilities<f64>> = load_probabilities(line.as_bytes()).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].sent_id(), "s1");
        assert_eq!(loaded[0].prob(2, 1), 0.8);
        assert_eq!(loaded[0].label(2, 1), "obj");

        let mut buf = Vec::new();
        write_probabilities(&mut buf, &loaded).unwrap();
        let again: Vec<EdgeProbabilities<f64>> = load_probabilities(&buf[..]).unwrap();
        assert_eq!(again, loaded);

        let rows = r#"{"sent_id":"s1","n_words":2,"n_empty":0,"labels":["x"],"edge_prob":[[0,0,0],[1,0,0],[0,1,0]],"best_label":[[0,0,0],[0,0,0],[0,0,0]]}"#;
        let loaded: Vec<EdgeProbabilities<f32>> = load_probabilities(rows.as_bytes()).unwrap();
        assert_eq!(loaded[0].prob(1, 0), 1.0);
    }

    #[test]
    fn interchange_errors() {
        let short_rows = r#"{"sent_id":"s","n_words":2,"n_empty":0,"labels":["x"],"edge_prob":[[0,0,0],[1,0,0]],"best_label":[0,0,0,0,0,0,0,0,0]}"#;
        let err = load_probabilities::<f64, _>(short_rows.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("edge_prob"), "{err}");
        assert!(err.to_string().starts_with("record 1"), "{err}");

        let bad_prob = r#"{"sent_id":"s","n_words":1,"n_empty":0,"labels":["x"],"edge_prob":[0,0,2,0],"best_label":[0,0,0,0]}"#;
        assert!(load_probabilities::<f64, _>(bad_prob.as_bytes()).is_err());

        let garbage = "\n{\"sent_id\": 3}\n";
        match load_probabilities::<f64, _>(garbage.as_bytes()).unwrap_err() {
            DecodeError::Malformed { record, .. } => assert_eq!(record, 2),
            e => panic!("{e}"),
        }
    }
}
