//! Synthetic experiment fixtures.
//!
//! Geometry per embedding space, with `R = radius` and unit axes `e_i`:
//! artist `i` has reference centroid `c_i = R·e_i`; every baseline prompt
//! lands near `m = (R/2)·Σ e_i + R·e_A` (one neutral axis past the
//! artists). A condition moves the population mean from `m` toward some
//! centroid by a fraction `α`. Each (artist, seed) draws one noise matrix
//! that every condition of that seed reuses, so conditions differ only in
//! their mean, as matched seeds intend.
//!
//! Scenarios:
//! - `null`: every generated population is the reference population itself
//!   (requires `reference_count == seeds.len()`).
//! - `displacement`: artist-name and styled sets move toward the artist's
//!   own centroid; cross-styled sets move toward the source artist's.
//! - `cross_displacement`: only cross-styled sets move (toward the source);
//!   own styled sets and artist-name equal the baseline.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GaussianStream, SynthError};
use crate::condition::{ConditionKey, DESCRIPTOR_SETS};
use crate::emb_store::{write_emb1, ArtistBlock, ClipRecord, EmbeddingMatrix, ManifestDoc, Role, MANIFEST_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Null,
    Displacement,
    CrossDisplacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub tag: String,
    pub dim: usize,
    /// Rows per clip file; more than one mimics frame-level extractors.
    #[serde(default = "one")]
    pub frames: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub radius: f64,
    /// Standard deviation of the per-clip noise.
    pub noise: f64,
    /// Standard deviation of the per-frame noise on top of the clip noise.
    pub frame_noise: f64,
    /// Fraction moved toward the artist centroid by the artist-name prompt.
    pub name_shift: f64,
    /// Base fraction moved by a descriptor set; set `k` moves
    /// `styled_shift · (0.6 + 0.2·(k − 1))`.
    pub styled_shift: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { radius: 4.0, noise: 0.3, frame_noise: 0.1, name_shift: 0.8, styled_shift: 0.4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub rng_seed: u64,
    pub artists: Vec<String>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_reference_count")]
    pub reference_count: usize,
    pub spaces: Vec<SpaceSpec>,
    #[serde(default)]
    pub geometry: Geometry,
    /// Emit cross-styled records for every ordered artist pair.
    #[serde(default = "yes")]
    pub cross_artist: bool,
}

fn default_reference_count() -> usize {
    crate::emb_store::DEFAULT_REFERENCE_COUNT
}

fn yes() -> bool {
    true
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |m: String| Err(SynthError::InvalidSpec(m));
        if self.artists.is_empty() || self.artists.iter().any(String::is_empty) {
            return invalid("artists must be non-empty names".into());
        }
        if has_duplicates(self.artists.iter().map(|a| slug(a))) {
            return invalid("artist names must be distinct after slugging".into());
        }
        if self.seeds.is_empty() || has_duplicates(self.seeds.iter()) {
            return invalid("seeds must be a non-empty list of distinct values".into());
        }
        if self.reference_count == 0 {
            return invalid("reference_count must be positive".into());
        }
        if self.scenario == Scenario::Null && self.reference_count != self.seeds.len() {
            return invalid(format!(
                "null scenario reuses one clip per seed as references: reference_count {} != {} seeds",
                self.reference_count,
                self.seeds.len()
            ));
        }
        if self.spaces.is_empty() || has_duplicates(self.spaces.iter().map(|s| slug(&s.tag))) {
            return invalid("spaces must be a non-empty list of distinct tags".into());
        }
        for s in &self.spaces {
            if s.tag.is_empty() || s.frames == 0 {
                return invalid(format!("space {:?}: empty tag or zero frames", s.tag));
            }
            if s.dim < self.artists.len() + 1 {
                return invalid(format!("space {:?}: dim {} < artists + 1", s.tag, s.dim));
            }
        }
        let g = &self.geometry;
        let finite_nonneg =
            [g.radius, g.noise, g.frame_noise, g.name_shift, g.styled_shift].iter().all(|v| v.is_finite() && *v >= 0.0);
        if !finite_nonneg || g.radius == 0.0 {
            return invalid("geometry values must be finite and non-negative, radius positive".into());
        }
        Ok(())
    }

    fn set_shift(&self, k: u8) -> f64 {
        (self.geometry.styled_shift * (0.6 + 0.2 * f64::from(k - 1))).min(1.0)
    }
}

fn has_duplicates<T: Ord>(items: impl Iterator<Item = T>) -> bool {
    let v: Vec<T> = items.collect();
    let n = v.len();
    v.into_iter().collect::<std::collections::BTreeSet<T>>().len() != n
}

/// Lowercase ASCII alphanumerics, everything else collapsed to `-`.
fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_owned()
}

const KIND_REFERENCE: u64 = 0;
const KIND_GENERATED: u64 = 1;

fn stream_id(space: usize, kind: u64, artist: usize, index: usize) -> u64 {
    ((space as u64) << 48) | (kind << 40) | ((artist as u64) << 24) | index as u64
}

/// Noise matrix for one clip: a shared clip offset plus per-frame jitter.
fn clip_noise(spec: &ScenarioSpec, space: &SpaceSpec, stream: u64) -> Vec<Vec<f64>> {
    let mut s = GaussianStream::new(spec.rng_seed, stream);
    let clip: Vec<f64> = s.normals(space.dim).iter().map(|z| z * spec.geometry.noise).collect();
    (0..space.frames).map(|_| clip.iter().map(|c| c + spec.geometry.frame_noise * s.next_normal()).collect()).collect()
}

fn offset(mean: &[f64], noise: &[Vec<f64>]) -> Vec<Vec<f64>> {
    noise.iter().map(|row| row.iter().zip(mean).map(|(n, m)| m + n).collect()).collect()
}

fn toward(from: &[f64], to: &[f64], alpha: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + alpha * (b - a)).collect()
}

struct Writer<'a> {
    out_dir: &'a Path,
}

impl Writer<'_> {
    fn clip(&self, space: &str, artist: &str, clip_id: &str, rows: &[Vec<f64>]) -> Result<(String, usize), SynthError> {
        let rel = format!("emb/{}/{}/{clip_id}.emb1", slug(space), slug(artist));
        let path = self.out_dir.join(&rel);
        let dir = path.parent().expect("has parent");
        fs::create_dir_all(dir).map_err(|source| SynthError::Io { path: dir.to_owned(), source })?;
        let m = EmbeddingMatrix::from_rows_f64(space, rows)?;
        write_emb1(&m, &path).map_err(|e| match e {
            crate::emb_store::EmbError::Io(source) => SynthError::Io { path: path.clone(), source },
            other => other.into(),
        })?;
        Ok((rel, m.n_rows()))
    }
}

/// Writes EMB1 files under `out_dir/emb/` and `out_dir/manifest.json`;
/// returns the manifest path. Output is a pure function of `spec`.
pub fn write_fixture(spec: &ScenarioSpec, out_dir: &Path) -> Result<PathBuf, SynthError> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|source| SynthError::Io { path: out_dir.to_owned(), source })?;
    let w = Writer { out_dir };
    let n_artists = spec.artists.len();
    let mut blocks: Vec<ArtistBlock> = spec
        .artists
        .iter()
        .map(|name| ArtistBlock {
            name: name.clone(),
            baseline_prompt: format!("synthetic baseline prompt for {name}"),
            references: Vec::new(),
            generated: Vec::new(),
            descriptors: None,
        })
        .collect();

    for (si, space) in spec.spaces.iter().enumerate() {
        let r = spec.geometry.radius;
        let axis = |i: usize, scale: f64| -> Vec<f64> {
            let mut v = vec![0.0; space.dim];
            v[i] = scale;
            v
        };
        let centroids: Vec<Vec<f64>> = (0..n_artists).map(|i| axis(i, r)).collect();
        let mut base_mean = axis(n_artists, r);
        for v in base_mean.iter_mut().take(n_artists) {
            *v = r / 2.0;
        }

        for (ai, artist) in spec.artists.iter().enumerate() {
            let sl = slug(artist);
            let tag = slug(&space.tag);
            let record = |clip_id: String, role, condition, seed, (path, n_rows): (String, usize)| ClipRecord {
                clip_id,
                artist: artist.clone(),
                role,
                condition,
                seed,
                space_tag: space.tag.clone(),
                path,
                n_rows: Some(n_rows),
                metadata: None,
            };

            let seed_noise: Vec<Vec<Vec<f64>>> =
                (0..spec.seeds.len()).map(|i| clip_noise(spec, space, stream_id(si, KIND_GENERATED, ai, i))).collect();

            #[allow(clippy::needless_range_loop)]
            for j in 0..spec.reference_count {
                let rows = match spec.scenario {
                    Scenario::Null => offset(&base_mean, &seed_noise[j]),
                    _ => offset(&centroids[ai], &clip_noise(spec, space, stream_id(si, KIND_REFERENCE, ai, j))),
                };
                let id = format!("{sl}.{tag}.ref{j:02}");
                let written = w.clip(&space.tag, artist, &id, &rows)?;
                blocks[ai].references.push(record(id, Role::Reference, None, None, written));
            }

            let own = &centroids[ai];
            let mut conditions: Vec<(ConditionKey, String, Vec<f64>)> = Vec::new();
            let (name_alpha, set_alpha): (f64, Box<dyn Fn(u8) -> f64>) = match spec.scenario {
                Scenario::Null | Scenario::CrossDisplacement => (0.0, Box::new(|_| 0.0)),
                Scenario::Displacement => (spec.geometry.name_shift.min(1.0), Box::new(|k| spec.set_shift(k))),
            };
            conditions.push((ConditionKey::Baseline, "baseline".into(), base_mean.clone()));
            conditions.push((ConditionKey::ArtistName, "artist_name".into(), toward(&base_mean, own, name_alpha)));
            for k in 1..=DESCRIPTOR_SETS {
                conditions.push((ConditionKey::Styled(k), format!("styled{k}"), toward(&base_mean, own, set_alpha(k))));
            }
            if spec.cross_artist {
                for (bi, source) in spec.artists.iter().enumerate().filter(|&(bi, _)| bi != ai) {
                    for k in 1..=DESCRIPTOR_SETS {
                        let alpha = match spec.scenario {
                            Scenario::Null => 0.0,
                            _ => spec.set_shift(k),
                        };
                        conditions.push((
                            ConditionKey::CrossStyled { source: source.clone(), set: k },
                            format!("cross-{}-{k}", slug(source)),
                            toward(&base_mean, &centroids[bi], alpha),
                        ));
                    }
                }
            }

            for (i, &seed) in spec.seeds.iter().enumerate() {
                for (condition, label, mean) in &conditions {
                    let id = format!("{sl}.{tag}.s{seed}.{label}");
                    let written = w.clip(&space.tag, artist, &id, &offset(mean, &seed_noise[i]))?;
                    blocks[ai].generated.push(record(
                        id,
                        Role::Generated,
                        Some(condition.clone()),
                        Some(seed),
                        written,
                    ));
                }
            }
        }
    }

    let doc = ManifestDoc {
        version: MANIFEST_VERSION,
        seeds: spec.seeds.clone(),
        reference_count: spec.reference_count,
        artists: blocks,
    };
    let path = out_dir.join("manifest.json");
    fs::write(&path, doc.to_canonical_json()).map_err(|source| SynthError::Io { path: path.clone(), source })?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emb_store::load_manifest;

    fn spec(scenario: Scenario) -> ScenarioSpec {
        ScenarioSpec {
            scenario,
            rng_seed: 5,
            artists: vec!["Artist A".into(), "Artist B".into()],
            seeds: (0..10).collect(),
            reference_count: if scenario == Scenario::Null { 10 } else { 15 },
            spaces: vec![
                SpaceSpec { tag: "vggish".into(), dim: 8, frames: 3 },
                SpaceSpec { tag: "clap".into(), dim: 6, frames: 1 },
            ],
            geometry: Geometry::default(),
            cross_artist: true,
        }
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("Tyler, The Creator"), "tyler-the-creator");
        assert_eq!(slug("  x  "), "x");
    }

    #[test]
    fn fixture_validates_with_protocol_counts() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = spec(Scenario::Displacement);
        s.cross_artist = false;
        let m = load_manifest(write_fixture(&s, dir.path()).unwrap()).unwrap();
        for a in ["Artist A", "Artist B"] {
            // 70 per space, two spaces.
            assert_eq!(m.generated_count(a), 140);
            assert_eq!(m.references(a, "clap").len(), 15);
        }
        let first = m.references("Artist A", "vggish")[0];
        assert_eq!(m.embedding(&first.clip_id).unwrap().n_rows(), 3);
    }

    #[test]
    fn cross_records_are_complete() {
        let dir = tempfile::tempdir().unwrap();
        let m = load_manifest(write_fixture(&spec(Scenario::Displacement), dir.path()).unwrap()).unwrap();
        assert_eq!(m.cross_sources("Artist A"), vec!["Artist B"]);
        assert_eq!(m.generated_count("Artist A"), 2 * (70 + 50));
    }

    #[test]
    fn rerun_is_byte_identical_and_seed_sensitive() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let s = spec(Scenario::Displacement);
        write_fixture(&s, a.path()).unwrap();
        write_fixture(&s, b.path()).unwrap();
        let file = "emb/vggish/artist-a/artist-a.vggish.s3.styled2.emb1";
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap());
        assert_eq!(
            fs::read(a.path().join("manifest.json")).unwrap(),
            fs::read(b.path().join("manifest.json")).unwrap()
        );

        let c = tempfile::tempdir().unwrap();
        write_fixture(&ScenarioSpec { rng_seed: 6, ..s }, c.path()).unwrap();
        assert_ne!(fs::read(a.path().join(file)).unwrap(), fs::read(c.path().join(file)).unwrap());
    }

    #[test]
    fn matched_seeds_share_noise() {
        let dir = tempfile::tempdir().unwrap();
        let m = load_manifest(write_fixture(&spec(Scenario::CrossDisplacement), dir.path()).unwrap()).unwrap();
        let base = m.embedding("artist-a.clap.s4.baseline").unwrap();
        assert_eq!(m.embedding("artist-a.clap.s4.styled5").unwrap().as_slice(), base.as_slice());
        assert_ne!(m.embedding("artist-a.clap.s4.cross-artist-b-1").unwrap().as_slice(), base.as_slice());
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(Scenario::Null);
        s.reference_count = 15;
        assert!(matches!(s.validate(), Err(SynthError::InvalidSpec(_))));
        let mut s = spec(Scenario::Displacement);
        s.spaces[0].dim = 2;
        assert!(matches!(s.validate(), Err(SynthError::InvalidSpec(_))));
        let mut s = spec(Scenario::Displacement);
        s.seeds = vec![1, 1];
        assert!(matches!(s.validate(), Err(SynthError::InvalidSpec(_))));
        assert!(matches!(ScenarioSpec::from_json("{}"), Err(SynthError::InvalidSpec(_))));
    }
}
