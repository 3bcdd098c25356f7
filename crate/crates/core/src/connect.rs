//! Making every node of an enhanced graph reachable from ROOT.
//!
//! All strategies repair the graph the same way, by attaching nodes directly
//! to ROOT with the label `root`; they differ only in which nodes they pick.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::{reachable_with, Edge, EnhancedGraph, NodeIndex};

pub const DEFAULT_ORACLE_LIMIT: usize = 16;

pub const ROOT_LABEL: &str = "root";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Attach every unreachable node.
    Naive,
    /// Repeatedly attach the unreachable node that reaches the most other
    /// unreachable nodes.
    Greedy,
    /// Exhaustive search for a smallest set of nodes to attach.
    Oracle,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Naive, Strategy::Greedy, Strategy::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::Greedy => "greedy",
            Strategy::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = ConnectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|strategy| strategy.name() == s)
            .ok_or_else(|| ConnectError::UnknownStrategy(s.to_owned()))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConnectError {
    #[error("{unreachable} unreachable nodes exceed the oracle limit of {limit}")]
    TooLarge { unreachable: usize, limit: usize },
    #[error("unknown strategy '{0}' (expected naive, greedy or oracle)")]
    UnknownStrategy(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepairOutcome {
    pub repaired: EnhancedGraph,
    /// Added `(ROOT, node, "root")` edges in the order they were chosen.
    pub added_edges: Vec<Edge>,
    pub strategy: Strategy,
}

impl RepairOutcome {
    /// Nodes attached to ROOT by the repair.
    pub fn added_nodes(&self) -> Vec<NodeIndex> {
        self.added_edges.iter().map(|e| e.dependent).collect()
    }
}

fn attach(graph: &EnhancedGraph, nodes: &[NodeIndex], strategy: Strategy) -> RepairOutcome {
    let mut repaired = graph.clone();
    let mut added_edges = Vec::with_capacity(nodes.len());
    for &node in nodes {
        repaired
            .add_edge(NodeIndex::ROOT, node, ROOT_LABEL)
            .expect("unreachable nodes are valid non-root dependents");
        added_edges.push(Edge {
            head: NodeIndex::ROOT,
            dependent: node,
            label: ROOT_LABEL.to_owned(),
        });
    }
    RepairOutcome {
        repaired,
        added_edges,
        strategy,
    }
}

pub fn connect_naive(graph: &EnhancedGraph) -> RepairOutcome {
    let unreachable: Vec<NodeIndex> = graph.reachability().unreachable.into_iter().collect();
    attach(graph, &unreachable, Strategy::Naive)
}

pub fn connect_greedy(graph: &EnhancedGraph) -> RepairOutcome {
    let mut repaired = graph.clone();
    let mut chosen = Vec::new();
    loop {
        let unreachable = repaired.reachability().unreachable;
        if unreachable.is_empty() {
            break;
        }
        let children = repaired.adjacency();
        let mut best: Option<(NodeIndex, usize)> = None;
        for &candidate in &unreachable {
            let seen = reachable_with(&children, &[candidate]);
            let count = unreachable.iter().filter(|v| seen[v.index()]).count();
            // Strictly greater keeps the first node in surface order on ties.
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((candidate, count));
            }
        }
        let (node, _) = best.expect("unreachable set is not empty");
        repaired
            .add_edge(NodeIndex::ROOT, node, ROOT_LABEL)
            .expect("unreachable nodes are valid non-root dependents");
        chosen.push(node);
    }
    attach(graph, &chosen, Strategy::Greedy)
}

/// Smallest set of nodes whose attachment to ROOT connects the graph.
///
/// Subsets are tried by size, then lexicographically, so the result is the
/// first minimum-size subset in that order.
pub fn connect_oracle(graph: &EnhancedGraph, max_nodes: usize) -> Result<RepairOutcome, ConnectError> {
    let unreachable: Vec<NodeIndex> = graph.reachability().unreachable.into_iter().collect();
    if unreachable.len() > max_nodes {
        return Err(ConnectError::TooLarge {
            unreachable: unreachable.len(),
            limit: max_nodes,
        });
    }
    let children = graph.adjacency();
    let connects = |subset: &[usize]| {
        let mut starts = vec![NodeIndex::ROOT];
        starts.extend(subset.iter().map(|&i| unreachable[i]));
        reachable_with(&children, &starts).iter().all(|&r| r)
    };
    let n = unreachable.len();
    for size in 0..=n {
        // Index combinations in lexicographic order.
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            if connects(&combo) {
                let nodes: Vec<NodeIndex> = combo.iter().map(|&i| unreachable[i]).collect();
                return Ok(attach(graph, &nodes, Strategy::Oracle));
            }
            let Some(pos) = (0..size).rev().find(|&i| combo[i] < n - size + i) else {
                break;
            };
            combo[pos] += 1;
            for i in pos + 1..size {
                combo[i] = combo[i - 1] + 1;
            }
        }
    }
    unreachable!("attaching every unreachable node always connects the graph")
}

/// Repair with the given strategy; the oracle uses [`DEFAULT_ORACLE_LIMIT`].
pub fn connect(graph: &EnhancedGraph, strategy: Strategy) -> Result<RepairOutcome, ConnectError> {
    match strategy {
        Strategy::Naive => Ok(connect_naive(graph)),
        Strategy::Greedy => Ok(connect_greedy(graph)),
        Strategy::Oracle => connect_oracle(graph, DEFAULT_ORACLE_LIMIT),
    }
}
