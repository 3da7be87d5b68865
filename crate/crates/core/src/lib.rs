//! Core pipeline for emotion-aware audiovisual recommendation.
//!
//! Text is scored into a 27-label [`emotion::EmotionVector`], mapped to six
//! [`knowledge_graph::MusicalParameters`], expanded into a three-stage
//! [`journey::Journey`], rendered as prompts, and matched against clip
//! embeddings with an [`retrieval::IvfIndex`]. [`curation`] cuts the clips
//! from feature streams offline and [`stats`] analyses session feedback.

pub mod curation;
pub mod emotion;
pub mod journey;
pub mod knowledge_graph;
pub mod prompt;
pub mod retrieval;
pub mod stats;

pub use emotion::{EmotionLabel, EmotionVector};
pub use journey::{Journey, StageRole, TargetPreset};
pub use knowledge_graph::{KnowledgeGraph, MusicalParameters, Param, Tier};
pub use prompt::PromptTemplate;
pub use retrieval::{ClipEmbedding, IvfIndex, SearchResult, TextEncoder};
