//! Perturbation-based attribution for knowledge-graph retrieval-augmented
//! generation.
//!
//! The pipeline removes random subsets of triples from the working graph,
//! regenerates the answer for each perturbed graph, scores how far every
//! perturbed answer drifted from the original, and fits a kernel-weighted
//! linear surrogate over the removal masks. The surrogate's coefficients are
//! the per-triple attributions; node scores and color intensities derive from
//! them.
//!
//! ```no_run
//! use kgrag_explain::prelude::*;
//!
//! let kg = KnowledgeGraph::from_strs([
//!     ("glucose binding", "expression_present", "pancreas"),
//!     ("insulin", "interacts_with", "insulin receptor"),
//! ])?;
//! let explanation = explain(&kg, "What is glucose binding?", &ExplainConfig::default())?;
//! println!("top triple: {}", kg.triples()[explanation.report.ranking[0]]);
//! # Ok::<(), kgrag_explain::Error>(())
//! ```

pub mod cli;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod export;
pub mod generator;
pub mod kg;
pub mod metrics;
pub mod perturbation;
pub mod pipeline;
pub mod reasoning;
mod remote;
pub mod similarity;
pub mod surrogate;
pub mod text;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::embedding::{Embedder, EmbedderConfig, EmbeddingVector};
    pub use crate::error::{Error, Result};
    pub use crate::generator::{Answer, Generator, GeneratorConfig};
    pub use crate::kg::{Entity, KnowledgeGraph, Relation, Triple};
    pub use crate::perturbation::PerturbationConfig;
    pub use crate::pipeline::{explain, ExplainConfig, Explanation, SurrogateMethod};
    pub use crate::similarity::{KernelMode, SimilarityConfig, TextMetric};
}
