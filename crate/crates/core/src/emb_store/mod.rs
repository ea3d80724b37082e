//! Embedding files and experiment manifests.

mod emb1;
mod manifest;

pub use emb1::{read_emb1, write_emb1, EmbError, EmbeddingMatrix, HEADER_LEN};
pub use manifest::{
    load_manifest, ArtistBlock, ClipRecord, Manifest, ManifestDoc, ManifestError, Role, SeedRow,
    DEFAULT_REFERENCE_COUNT, MANIFEST_VERSION,
};
