//! Embedding-space evaluation of prompt-level style control for
//! text-to-music models.
//!
//! Given per-clip embeddings for an artist's reference excerpts and for
//! generations under a baseline prompt, an artist-name prompt and five
//! descriptor-augmented prompts (matched seeds), the crate computes Fréchet
//! Audio Distance, nearest-reference cosine distance and cross-artist
//! centroid-similarity deltas, and reports the gap between artist-name and
//! descriptor prompts.

pub mod cli;
pub mod condition;
pub mod emb_store;
pub mod metrics;
pub mod promptkit;
pub mod protocol;
pub mod report;
pub mod synth;

pub use condition::ConditionKey;
