//! Experiment manifest: which clip embedding belongs to which artist,
//! condition, seed and embedding space.
//!
//! Validation order is fixed so every malformed manifest maps to one error:
//! JSON schema, per-record fields, clip id uniqueness, reference counts,
//! matched-seed completeness, then the embedding files themselves.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::emb1::{read_emb1, EmbError, EmbeddingMatrix};
use crate::condition::ConditionKey;
use crate::promptkit;

pub const MANIFEST_VERSION: u32 = 1;
pub const DEFAULT_REFERENCE_COUNT: usize = 15;

fn default_reference_count() -> usize {
    DEFAULT_REFERENCE_COUNT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Generated,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipRecord {
    pub clip_id: String,
    pub artist: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<ConditionKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub space_tag: String,
    /// EMB1 file, relative to the manifest's directory.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_rows: Option<usize>,
    /// Opaque per-clip metadata such as excerpt timestamps; carried, never interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtistBlock {
    pub name: String,
    pub baseline_prompt: String,
    pub references: Vec<ClipRecord>,
    pub generated: Vec<ClipRecord>,
    /// Descriptor bundle JSON, relative to the manifest's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub descriptors: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestDoc {
    pub version: u32,
    pub seeds: Vec<u64>,
    #[serde(default = "default_reference_count")]
    pub reference_count: usize,
    pub artists: Vec<ArtistBlock>,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("schema error{}: {message}", context_suffix(.artist, .clip_id))]
    Schema { message: String, artist: Option<String>, clip_id: Option<String> },
    #[error("duplicate clip_id {clip_id:?}")]
    DuplicateClipId { clip_id: String },
    #[error("artist {artist:?} space {space:?}: expected {expected} reference clips, found {found}")]
    ReferenceCountMismatch { artist: String, space: String, expected: usize, found: usize },
    #[error("artist {artist:?} space {space:?} seed {seed}: {found} records for condition {condition}, expected 1")]
    MatchedSeedViolation { artist: String, space: String, seed: u64, condition: ConditionKey, found: usize },
    #[error("clip {clip_id:?}: embedding file {path} unreadable: {source}")]
    MissingEmbeddingFile { clip_id: String, path: PathBuf, source: io::Error },
    #[error("clip {clip_id:?}: embedding file {path}: {source}")]
    Embedding { clip_id: String, path: PathBuf, source: EmbError },
}

fn context_suffix(artist: &Option<String>, clip_id: &Option<String>) -> String {
    match (artist, clip_id) {
        (_, Some(c)) => format!(" in clip {c:?}"),
        (Some(a), None) => format!(" in artist {a:?}"),
        (None, None) => String::new(),
    }
}

fn schema(message: impl Into<String>) -> ManifestError {
    ManifestError::Schema { message: message.into(), artist: None, clip_id: None }
}

fn artist_schema(artist: &str, message: impl Into<String>) -> ManifestError {
    ManifestError::Schema { message: message.into(), artist: Some(artist.to_owned()), clip_id: None }
}

fn clip_schema(clip: &ClipRecord, message: impl Into<String>) -> ManifestError {
    ManifestError::Schema {
        message: message.into(),
        artist: Some(clip.artist.clone()),
        clip_id: Some(clip.clip_id.clone()),
    }
}

/// Clip ids of one seed's matched generations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeedRow {
    pub seed: u64,
    pub baseline: String,
    pub artist_name: String,
    pub styled: Vec<String>,
}

impl ManifestDoc {
    pub fn from_json(text: &str) -> Result<Self, ManifestError> {
        serde_json::from_str(text).map_err(|e| schema(format!("{e} (line {}, column {})", e.line(), e.column())))
    }

    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn artist(&self, name: &str) -> Option<&ArtistBlock> {
        self.artists.iter().find(|a| a.name == name)
    }

    /// Every embedding space mentioned by any record, sorted.
    pub fn spaces(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .artists
            .iter()
            .flat_map(|a| a.references.iter().chain(&a.generated))
            .map(|c| c.space_tag.as_str())
            .collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// Structural validation: everything except the embedding files.
    pub fn validate(&self) -> Result<(), ManifestError> {
        if self.version != MANIFEST_VERSION {
            return Err(schema(format!("unsupported manifest version {}", self.version)));
        }
        if self.seeds.is_empty() {
            return Err(schema("seed list is empty"));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(schema("seed list has duplicates"));
        }
        if self.reference_count == 0 {
            return Err(schema("reference_count must be positive"));
        }
        if self.artists.is_empty() {
            return Err(schema("no artists"));
        }
        let mut names = BTreeSet::new();
        for a in &self.artists {
            if a.name.is_empty() {
                return Err(schema("artist with empty name"));
            }
            if !names.insert(a.name.as_str()) {
                return Err(artist_schema(&a.name, "artist declared twice"));
            }
        }
        for a in &self.artists {
            self.check_records(a)?;
        }
        let mut ids = BTreeSet::new();
        for c in self.artists.iter().flat_map(|a| a.references.iter().chain(&a.generated)) {
            if !ids.insert(c.clip_id.as_str()) {
                return Err(ManifestError::DuplicateClipId { clip_id: c.clip_id.clone() });
            }
        }
        let spaces = self.spaces();
        for a in &self.artists {
            for space in &spaces {
                let found = a.references.iter().filter(|c| &c.space_tag == space).count();
                if found != self.reference_count {
                    return Err(ManifestError::ReferenceCountMismatch {
                        artist: a.name.clone(),
                        space: space.clone(),
                        expected: self.reference_count,
                        found,
                    });
                }
            }
        }
        for a in &self.artists {
            for space in &spaces {
                self.seed_rows(&a.name, space)?;
                self.check_cross_completeness(a, space)?;
            }
        }
        Ok(())
    }

    fn check_records(&self, a: &ArtistBlock) -> Result<(), ManifestError> {
        let seeds: BTreeSet<u64> = self.seeds.iter().copied().collect();
        for c in &a.references {
            if c.artist != a.name {
                return Err(clip_schema(c, format!("record lists artist {:?} under {:?}", c.artist, a.name)));
            }
            if c.role != Role::Reference {
                return Err(clip_schema(c, "record in references must have role \"reference\""));
            }
            if c.condition.is_some() || c.seed.is_some() {
                return Err(clip_schema(c, "reference records carry no condition or seed"));
            }
            check_common(c)?;
        }
        for c in &a.generated {
            if c.artist != a.name {
                return Err(clip_schema(c, format!("record lists artist {:?} under {:?}", c.artist, a.name)));
            }
            if c.role != Role::Generated {
                return Err(clip_schema(c, "record in generated must have role \"generated\""));
            }
            let condition = c.condition.as_ref().ok_or_else(|| clip_schema(c, "generated record without condition"))?;
            condition.check(&a.name).map_err(|m| clip_schema(c, m))?;
            let seed = c.seed.ok_or_else(|| clip_schema(c, "generated record without seed"))?;
            if !seeds.contains(&seed) {
                return Err(clip_schema(c, format!("seed {seed} is not in the declared seed list")));
            }
            check_common(c)?;
        }
        Ok(())
    }

    /// Cross-styled records are optional, but a source that appears at all
    /// must cover every seed and every descriptor set.
    fn check_cross_completeness(&self, a: &ArtistBlock, space: &str) -> Result<(), ManifestError> {
        let sources: BTreeSet<&str> = a
            .generated
            .iter()
            .filter_map(|c| match &c.condition {
                Some(ConditionKey::CrossStyled { source, .. }) => Some(source.as_str()),
                _ => None,
            })
            .collect();
        let counts = condition_counts(a, space);
        for source in sources {
            for &seed in &self.seeds {
                for condition in ConditionKey::cross_sets(source) {
                    let found = counts.get(&(seed, condition.clone())).copied().unwrap_or(0);
                    if found != 1 {
                        return Err(ManifestError::MatchedSeedViolation {
                            artist: a.name.clone(),
                            space: space.to_owned(),
                            seed,
                            condition,
                            found,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-seed table of (baseline, artist name, styled 1..=5) clip ids for
    /// one artist and space, in declared seed order.
    pub fn seed_rows(&self, artist: &str, space: &str) -> Result<Vec<SeedRow>, ManifestError> {
        let a = self.artist(artist).ok_or_else(|| schema(format!("unknown artist {artist:?}")))?;
        let mut by_key: BTreeMap<(u64, ConditionKey), Vec<&str>> = BTreeMap::new();
        for c in a.generated.iter().filter(|c| c.space_tag == space) {
            if let (Some(seed), Some(cond)) = (c.seed, c.condition.clone()) {
                by_key.entry((seed, cond)).or_default().push(&c.clip_id);
            }
        }
        let take = |seed: u64, condition: ConditionKey| -> Result<String, ManifestError> {
            match by_key.get(&(seed, condition.clone())).map(Vec::as_slice) {
                Some([id]) => Ok((*id).to_owned()),
                other => Err(ManifestError::MatchedSeedViolation {
                    artist: artist.to_owned(),
                    space: space.to_owned(),
                    seed,
                    condition,
                    found: other.map_or(0, <[&str]>::len),
                }),
            }
        };
        self.seeds
            .iter()
            .map(|&seed| {
                Ok(SeedRow {
                    seed,
                    baseline: take(seed, ConditionKey::Baseline)?,
                    artist_name: take(seed, ConditionKey::ArtistName)?,
                    styled: ConditionKey::styled_sets().map(|k| take(seed, k)).collect::<Result<_, _>>()?,
                })
            })
            .collect()
    }
}

fn check_common(c: &ClipRecord) -> Result<(), ManifestError> {
    if c.clip_id.is_empty() {
        return Err(clip_schema(c, "empty clip_id"));
    }
    if c.path.is_empty() {
        return Err(clip_schema(c, "empty path"));
    }
    if c.n_rows == Some(0) {
        return Err(clip_schema(c, "n_rows must be positive"));
    }
    Ok(())
}

fn condition_counts(a: &ArtistBlock, space: &str) -> BTreeMap<(u64, ConditionKey), usize> {
    let mut counts = BTreeMap::new();
    for c in a.generated.iter().filter(|c| c.space_tag == space) {
        if let (Some(seed), Some(cond)) = (c.seed, c.condition.clone()) {
            *counts.entry((seed, cond)).or_insert(0) += 1;
        }
    }
    counts
}

/// A validated manifest with every embedding file loaded. Immutable after
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    doc: ManifestDoc,
    root: PathBuf,
    embeddings: BTreeMap<String, EmbeddingMatrix>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, ManifestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.to_owned(), source })?;
    let doc = ManifestDoc::from_json(&text)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Manifest::from_doc(doc, root)
}

impl Manifest {
    /// Validates `doc` and loads its embeddings, resolving paths against `root`.
    pub fn from_doc(doc: ManifestDoc, root: PathBuf) -> Result<Self, ManifestError> {
        doc.validate()?;
        for a in &doc.artists {
            check_descriptors(a, &root)?;
        }
        let mut embeddings = BTreeMap::new();
        let mut dims: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for c in doc.artists.iter().flat_map(|a| a.references.iter().chain(&a.generated)) {
            let path = root.join(&c.path);
            let m = read_emb1(&path).map_err(|e| match e {
                EmbError::Io(source) => {
                    ManifestError::MissingEmbeddingFile { clip_id: c.clip_id.clone(), path: path.clone(), source }
                }
                source => ManifestError::Embedding { clip_id: c.clip_id.clone(), path: path.clone(), source },
            })?;
            if m.space_tag() != c.space_tag {
                return Err(clip_schema(
                    c,
                    format!("file space tag {:?} does not match record {:?}", m.space_tag(), c.space_tag),
                ));
            }
            if let Some(n) = c.n_rows {
                if n != m.n_rows() {
                    return Err(clip_schema(c, format!("file has {} rows, record declares {n}", m.n_rows())));
                }
            }
            match dims.get(c.space_tag.as_str()) {
                Some(&(dim, first)) if dim != m.dim() => {
                    return Err(clip_schema(
                        c,
                        format!("dimension {} differs from {dim} of clip {first:?} in the same space", m.dim()),
                    ));
                }
                Some(_) => {}
                None => {
                    dims.insert(&c.space_tag, (m.dim(), &c.clip_id));
                }
            }
            embeddings.insert(c.clip_id.clone(), m);
        }
        Ok(Self { doc, root, embeddings })
    }

    pub fn doc(&self) -> &ManifestDoc {
        &self.doc
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn seeds(&self) -> &[u64] {
        &self.doc.seeds
    }

    /// Artist names, sorted.
    pub fn artists(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.doc.artists.iter().map(|a| a.name.as_str()).collect();
        v.sort_unstable();
        v
    }

    pub fn spaces(&self) -> Vec<String> {
        self.doc.spaces()
    }

    pub fn embedding(&self, clip_id: &str) -> Option<&EmbeddingMatrix> {
        self.embeddings.get(clip_id)
    }

    pub fn generated_count(&self, artist: &str) -> usize {
        self.doc.artist(artist).map_or(0, |a| a.generated.len())
    }

    /// Reference records for `artist` in `space`, sorted by clip id.
    pub fn references(&self, artist: &str, space: &str) -> Vec<&ClipRecord> {
        let mut v: Vec<&ClipRecord> =
            self.doc.artist(artist).into_iter().flat_map(|a| &a.references).filter(|c| c.space_tag == space).collect();
        v.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));
        v
    }

    /// Generated records for one condition, sorted by seed.
    pub fn generated(&self, artist: &str, space: &str, condition: &ConditionKey) -> Vec<&ClipRecord> {
        let mut v: Vec<&ClipRecord> = self
            .doc
            .artist(artist)
            .into_iter()
            .flat_map(|a| &a.generated)
            .filter(|c| c.space_tag == space && c.condition.as_ref() == Some(condition))
            .collect();
        v.sort_by_key(|c| c.seed);
        v
    }

    /// Source artists with cross-styled records under `artist`, sorted.
    pub fn cross_sources(&self, artist: &str) -> Vec<&str> {
        let set: BTreeSet<&str> = self
            .doc
            .artist(artist)
            .into_iter()
            .flat_map(|a| &a.generated)
            .filter_map(|c| match &c.condition {
                Some(ConditionKey::CrossStyled { source, .. }) => Some(source.as_str()),
                _ => None,
            })
            .collect();
        set.into_iter().collect()
    }

    pub fn seed_rows(&self, artist: &str, space: &str) -> Result<Vec<SeedRow>, ManifestError> {
        self.doc.seed_rows(artist, space)
    }
}

fn check_descriptors(a: &ArtistBlock, root: &Path) -> Result<(), ManifestError> {
    let Some(rel) = &a.descriptors else {
        return Ok(());
    };
    let path = root.join(rel);
    let text = fs::read_to_string(&path)
        .map_err(|e| artist_schema(&a.name, format!("descriptor bundle {}: {e}", path.display())))?;
    let bundle = promptkit::parse_bundle(&text)
        .map_err(|e| artist_schema(&a.name, format!("descriptor bundle {}: {e}", path.display())))?;
    if bundle.artist_name != a.name {
        return Err(artist_schema(&a.name, format!("descriptor bundle is for {:?}", bundle.artist_name)));
    }
    if bundle.baseline != a.baseline_prompt {
        return Err(artist_schema(&a.name, "baseline_prompt differs from the descriptor bundle baseline"));
    }
    Ok(())
}
