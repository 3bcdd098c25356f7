//! Enhanced dependency graphs over a dense node index space.
//!
//! Node 0 is the notional ROOT, nodes `1..=n_words` are the words of the
//! sentence and empty nodes follow in file order, so the graph shares its
//! index space with the rows and columns of an edge-probability matrix.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::conllu::{Dep, DepHead, Sentence, TokenId};

/// Dense node index; 0 is the notional ROOT.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeIndex(pub usize);

impl NodeIndex {
    pub const ROOT: NodeIndex = NodeIndex(0);

    pub fn index(self) -> usize {
        self.0
    }

    pub fn is_root(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for NodeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for NodeIndex {
    fn from(idx: usize) -> Self {
        NodeIndex(idx)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub head: NodeIndex,
    pub dependent: NodeIndex,
    pub label: String,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("node {0} is outside the graph")]
    NodeOutOfRange(NodeIndex),
    #[error("the notional ROOT cannot be a dependent")]
    RootAsDependent,
    #[error("self-loop on node {0}")]
    SelfLoop(NodeIndex),
    #[error("token {token} has enhanced head {head}, which is not in the sentence")]
    DanglingHead { token: String, head: String },
    #[error("graph has {graph_words} words and {graph_empty} empty nodes, sentence has {sentence_words} and {sentence_empty}")]
    NodeCountMismatch {
        graph_words: usize,
        graph_empty: usize,
        sentence_words: usize,
        sentence_empty: usize,
    },
}

/// Labeled directed multigraph over ROOT, words and empty nodes.
///
/// Parallel edges with distinct labels are allowed; self-loops, edges into
/// ROOT and duplicate triples are not. Cycles are permitted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnhancedGraph {
    n_words: usize,
    n_empty: usize,
    edges: BTreeSet<Edge>,
}

impl EnhancedGraph {
    pub fn new(n_words: usize, n_empty: usize) -> Self {
        EnhancedGraph {
            n_words,
            n_empty,
            edges: BTreeSet::new(),
        }
    }

    /// Build a graph from `(head, dependent, label)` triples.
    pub fn from_edges<'a, I>(n_words: usize, n_empty: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize, &'a str)>,
    {
        let mut graph = EnhancedGraph::new(n_words, n_empty);
        for (head, dependent, label) in edges {
            graph.add_edge(NodeIndex(head), NodeIndex(dependent), label)?;
        }
        Ok(graph)
    }

    pub fn n_words(&self) -> usize {
        self.n_words
    }

    pub fn n_empty(&self) -> usize {
        self.n_empty
    }

    /// Number of nodes including ROOT.
    pub fn n_nodes(&self) -> usize {
        1 + self.n_words + self.n_empty
    }

    /// All non-ROOT nodes in surface order (words, then empty nodes).
    pub fn nodes(&self) -> impl Iterator<Item = NodeIndex> {
        (1..self.n_nodes()).map(NodeIndex)
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, head: NodeIndex, dependent: NodeIndex, label: &str) -> bool {
        self.edges.contains(&Edge {
            head,
            dependent,
            label: label.to_owned(),
        })
    }

    /// Edges whose dependent is `dependent`.
    pub fn incoming(&self, dependent: NodeIndex) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.dependent == dependent)
    }

    /// Edges whose head is `head`.
    pub fn outgoing(&self, head: NodeIndex) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.head == head)
    }

    /// Add an edge. Returns `false` if the identical edge was already present.
    pub fn add_edge(
        &mut self,
        head: NodeIndex,
        dependent: NodeIndex,
        label: impl Into<String>,
    ) -> Result<bool, GraphError> {
        for node in [head, dependent] {
            if node.0 >= self.n_nodes() {
                return Err(GraphError::NodeOutOfRange(node));
            }
        }
        if dependent.is_root() {
            return Err(GraphError::RootAsDependent);
        }
        if head == dependent {
            return Err(GraphError::SelfLoop(head));
        }
        Ok(self.edges.insert(Edge {
            head,
            dependent,
            label: label.into(),
        }))
    }

    /// Replace the label of an existing edge. Returns `false` if `edge` is
    /// not in the graph.
    pub fn relabel(&mut self, edge: &Edge, label: impl Into<String>) -> bool {
        if !self.edges.remove(edge) {
            return false;
        }
        self.edges.insert(Edge {
            head: edge.head,
            dependent: edge.dependent,
            label: label.into(),
        });
        true
    }

    /// Children of every node, indexed by head.
    pub fn adjacency(&self) -> Vec<Vec<NodeIndex>> {
        let mut children = vec![Vec::new(); self.n_nodes()];
        for edge in &self.edges {
            let list = &mut children[edge.head.0];
            if list.last() != Some(&edge.dependent) {
                list.push(edge.dependent);
            }
        }
        children
    }

    /// Mark every node reachable from any of `starts` (the starts included).
    pub fn reachable_from(&self, starts: &[NodeIndex]) -> Vec<bool> {
        reachable_with(&self.adjacency(), starts)
    }

    /// Which nodes can be reached from ROOT by following edges head to
    /// dependent.
    pub fn reachability(&self) -> ReachabilityReport {
        let seen = self.reachable_from(&[NodeIndex::ROOT]);
        let (reachable, unreachable) = self.nodes().partition(|n| seen[n.0]);
        ReachabilityReport {
            reachable,
            unreachable,
            root_children: self.outgoing(NodeIndex::ROOT).map(|e| e.dependent).collect(),
        }
    }

    /// Build the graph described by the DEPS column of a sentence.
    pub fn from_sentence(sentence: &Sentence) -> Result<Self, GraphError> {
        let map = NodeMap::new(sentence);
        let mut graph = EnhancedGraph::new(map.n_words, map.empties.len());
        for token in &sentence.tokens {
            let Some(dependent) = map.node(token.id) else {
                continue;
            };
            for dep in &token.deps {
                let head = map.head_node(dep.head).ok_or_else(|| GraphError::DanglingHead {
                    token: token.id.to_string(),
                    head: dep.head.to_string(),
                })?;
                graph.add_edge(head, dependent, dep.label.clone())?;
            }
        }
        Ok(graph)
    }

    /// Rewrite the DEPS column of `template` from this graph, leaving every
    /// other column untouched.
    pub fn to_sentence(&self, template: &Sentence) -> Result<Sentence, GraphError> {
        let map = NodeMap::new(template);
        if map.n_words != self.n_words || map.empties.len() != self.n_empty {
            return Err(GraphError::NodeCountMismatch {
                graph_words: self.n_words,
                graph_empty: self.n_empty,
                sentence_words: map.n_words,
                sentence_empty: map.empties.len(),
            });
        }

        let mut deps: Vec<Vec<Dep>> = vec![Vec::new(); self.n_nodes()];
        for edge in &self.edges {
            deps[edge.dependent.0].push(Dep::new(map.dep_head(edge.head), edge.label.clone()));
        }

        let mut sentence = template.clone();
        for token in &mut sentence.tokens {
            if let Some(node) = map.node(token.id) {
                token.deps = std::mem::take(&mut deps[node.0]);
                // Edge order puts empty nodes after all words; DEPS wants
                // them right after their base word.
                token.deps.sort();
            }
        }
        Ok(sentence)
    }
}

pub(crate) fn reachable_with(children: &[Vec<NodeIndex>], starts: &[NodeIndex]) -> Vec<bool> {
    let mut seen = vec![false; children.len()];
    let mut queue = VecDeque::new();
    for &start in starts {
        if !seen[start.0] {
            seen[start.0] = true;
            queue.push_back(start);
        }
    }
    while let Some(node) = queue.pop_front() {
        for &child in &children[node.0] {
            if !seen[child.0] {
                seen[child.0] = true;
                queue.push_back(child);
            }
        }
    }
    seen
}

/// Result of a reachability check from the notional ROOT.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReachabilityReport {
    pub reachable: BTreeSet<NodeIndex>,
    pub unreachable: BTreeSet<NodeIndex>,
    pub root_children: BTreeSet<NodeIndex>,
}

impl ReachabilityReport {
    pub fn is_connected(&self) -> bool {
        self.unreachable.is_empty()
    }
}

/// Bijection between the word/empty-node ids of a sentence and node indices.
#[derive(Clone, Debug)]
pub struct NodeMap {
    n_words: usize,
    empties: Vec<(usize, usize)>,
}

impl NodeMap {
    pub fn new(sentence: &Sentence) -> Self {
        NodeMap {
            n_words: sentence.word_count(),
            empties: sentence
                .empty_nodes()
                .filter_map(|t| match t.id {
                    TokenId::Empty(base, sub) => Some((base, sub)),
                    _ => None,
                })
                .collect(),
        }
    }

    /// Node of a word or empty node; `None` for multiword ranges and
    /// unknown ids.
    pub fn node(&self, id: TokenId) -> Option<NodeIndex> {
        match id {
            TokenId::Word(n) if n >= 1 && n <= self.n_words => Some(NodeIndex(n)),
            TokenId::Empty(base, sub) => self
                .empties
                .iter()
                .position(|&e| e == (base, sub))
                .map(|pos| NodeIndex(self.n_words + 1 + pos)),
            _ => None,
        }
    }

    pub fn head_node(&self, head: DepHead) -> Option<NodeIndex> {
        match head {
            DepHead::Root => Some(NodeIndex::ROOT),
            DepHead::Node(id) => self.node(id),
        }
    }

    /// The token id at `node`, `None` for ROOT or out-of-range indices.
    pub fn token_id(&self, node: NodeIndex) -> Option<TokenId> {
        match node.0 {
            0 => None,
            n if n <= self.n_words => Some(TokenId::Word(n)),
            n => self
                .empties
                .get(n - self.n_words - 1)
                .map(|&(base, sub)| TokenId::Empty(base, sub)),
        }
    }

    fn dep_head(&self, node: NodeIndex) -> DepHead {
        match self.token_id(node) {
            Some(id) => DepHead::Node(id),
            None => DepHead::Root,
        }
    }
}
