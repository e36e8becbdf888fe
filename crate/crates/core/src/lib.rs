//! Construction, retrieval and maintenance of a mathematical knowledge graph.
//!
//! The graph stores definitions, theorems and problems as vertices and their
//! reference relationships as tactic-labelled directed edges. Around it sit
//! rule-based extraction from LaTeX, LLM-driven augmentation, a cosine vector
//! index over entity embeddings, automatic fusion and completion, and the
//! evaluation tooling used to measure retrieval quality.

pub mod completion;
pub mod cycles;
pub mod embedding;
pub mod eval;
pub mod fusion;
pub mod graph;
pub mod index;
pub mod ingest;
pub mod llm;
pub mod model;
pub mod store;

pub use graph::{Direction, Edge, GraphError, GraphStats, KnowledgeGraph};
pub use model::{BodySegment, DerivationRecord, Entity, EntityId, EntityType, MathField, TacticLabel};
