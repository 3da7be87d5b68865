//! Session service for the emoheal pipeline.
//!
//! Text goes in, a three-stage clip playlist comes out. Nothing a request
//! carries is written to disk; questionnaire feedback lives in a bounded
//! in-memory buffer for the lifetime of the process.

pub mod api;
pub mod config;
pub mod encoder;
pub mod feedback;
pub mod index;
pub mod pipeline;
pub mod scorer;

pub use api::{router, AppState};
pub use config::ServiceConfig;
pub use feedback::{FeedbackRecord, FeedbackStore, StatsReport};
pub use index::SharedIndex;
pub use pipeline::{Pipeline, SessionError, SessionResponse, StageView};
pub use scorer::{external_score, HttpScorer, ScoreError};
