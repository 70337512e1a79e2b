//! Static-analysis warning identification from control-flow paths.
//!
//! The pipeline turns a warning on C source into an abstract token sequence
//! ([`frontend`] → [`cfg`] → [`paths`] → [`tokens`], glued by [`extract`]),
//! picks cross-project training instances by BM25 relevance
//! ([`retrieval`]), and classifies with a small Transformer encoder
//! ([`encoder`]). [`stats`] holds the evaluation metrics and tests, and
//! [`generate`] builds labeled synthetic corpora.

pub mod cfg;
pub mod corpus;
pub mod encoder;
pub mod exec;
pub mod extract;
pub mod fixtures;
pub mod frontend;
pub mod generate;
pub mod paths;
pub mod retrieval;
pub mod stats;
pub mod tokens;

pub use corpus::{Instance, Label};
pub use exec::Exec;
