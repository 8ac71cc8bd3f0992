//! Grounding and evaluation engine for generative recommendation.
//!
//! A generator turns a user's recent history into free text describing an
//! item. The text is embedded and every catalog item is ranked by its L2
//! distance to that embedding, optionally reweighted by item popularity or a
//! collaborative model's prediction scores. The [`eval`] and [`tune`]
//! modules run the all-ranking protocol over temporally split data.

pub mod bm25;
pub mod collab;
pub mod embed;
pub mod error;
pub mod eval;
pub mod generate;
pub mod ground;
pub mod ingest;
pub mod pop;
pub mod text;
pub mod tune;

pub use error::{Error, Result};
