//! Toolkit for enhanced Universal Dependencies graphs: CoNLL-U I/O, graph
//! operations, rule-based enhancement, probability decoding, connectivity
//! repair, tree ensembling and ELAS scoring.

pub mod arborescence;
pub mod conllu;
pub mod connect;
pub mod decode;
pub mod enhance;
pub mod ensemble;
pub mod eval;
pub mod graph;
pub mod scalar;

pub use conllu::{ConlluError, Dep, DepHead, Sentence, Token, TokenId};
pub use graph::{Edge, EnhancedGraph, GraphError, NodeIndex, ReachabilityReport};
pub use scalar::Real;

/// Edge probabilities in double precision.
pub type EdgeProbabilities = decode::EdgeProbabilities<f64>;
/// Edge probabilities in single precision.
pub type EdgeProbabilitiesF32 = decode::EdgeProbabilities<f32>;
/// Ensemble input with double-precision weights.
pub type EnsembleInput = ensemble::EnsembleInput<f64>;
/// Ensemble input with single-precision weights.
pub type EnsembleInputF32 = ensemble::EnsembleInput<f32>;
