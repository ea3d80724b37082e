//! The evaluation protocol: per-condition metrics against an artist's
//! reference set, aggregation across descriptor sets, the cross-artist Δ
//! matrix, and matched-seed pairing.
//!
//! Clip vectors are the mean of a clip's embedding rows. FAD uses the clip
//! vectors by default, or every frame row with [`Pooling::Frame`].
//! Clips within a condition are ordered by seed and references by clip id
//! before any arithmetic, so record order in the manifest never matters.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::condition::ConditionKey;
use crate::emb_store::{Manifest, ManifestError, SeedRow};
use crate::metrics::{
    self, centroid_similarity, estimate_gaussian, frechet_distance, min_distance_condition, ClipDistance, CovDivisor,
    DeltaStat, GaussianSummary, MetricError,
};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("unknown artist {0:?}")]
    UnknownArtist(String),
    #[error("embedding space {0:?} does not occur in the manifest")]
    UnknownSpace(String),
    #[error("artist {artist:?} space {space:?}: no records for condition {condition}")]
    MissingCondition { artist: String, space: String, condition: ConditionKey },
    #[error("space {space:?}: no cross-styled records of source {source_artist:?} evaluated against {target:?}")]
    MissingCrossCondition { space: String, target: String, source_artist: String },
    #[error("artist {artist:?} space {space:?} condition {condition}: {source}")]
    Metric { artist: String, space: String, condition: String, source: MetricError },
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

type Result<T> = std::result::Result<T, ProtocolError>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// One vector per clip (mean of its rows) for every metric.
    #[default]
    Clip,
    /// FAD pools every frame row of the population; cosine metrics stay clip-level.
    Frame,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EvalConfig {
    pub cov_divisor: CovDivisor,
    pub pooling: Pooling,
}

fn as_label<S: Serializer>(c: &ConditionKey, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionMetrics {
    #[serde(serialize_with = "as_label")]
    pub condition: ConditionKey,
    pub fad: f64,
    pub dmin_median: f64,
    pub centroid_sim_mean: f64,
    pub n_clips: usize,
    pub per_clip_dmin: Vec<ClipDistance>,
}

/// Clip ids, clip vectors and frame rows of one population, in evaluation order.
struct Population {
    ids: Vec<String>,
    clips: Vec<Vec<f64>>,
    frames: Vec<Vec<f64>>,
}

impl Population {
    fn gather<'a>(manifest: &Manifest, records: impl Iterator<Item = &'a crate::emb_store::ClipRecord>) -> Self {
        let mut pop = Population { ids: Vec::new(), clips: Vec::new(), frames: Vec::new() };
        for rec in records {
            let m = manifest.embedding(&rec.clip_id).expect("validated manifest has every embedding");
            pop.ids.push(rec.clip_id.clone());
            pop.clips.push(m.mean_row());
            pop.frames.extend(m.rows_f64());
        }
        pop
    }

    fn fad_rows(&self, pooling: Pooling) -> &[Vec<f64>] {
        match pooling {
            Pooling::Clip => &self.clips,
            Pooling::Frame => &self.frames,
        }
    }
}

/// An artist's reference population in one space, with its Gaussian summary.
struct ReferenceContext<'m> {
    manifest: &'m Manifest,
    artist: String,
    space: String,
    refs: Population,
    summary: GaussianSummary,
    config: EvalConfig,
}

impl<'m> ReferenceContext<'m> {
    fn new(manifest: &'m Manifest, artist: &str, space: &str, config: EvalConfig) -> Result<Self> {
        if !manifest.artists().contains(&artist) {
            return Err(ProtocolError::UnknownArtist(artist.to_owned()));
        }
        if !manifest.spaces().iter().any(|s| s == space) {
            return Err(ProtocolError::UnknownSpace(space.to_owned()));
        }
        let refs = Population::gather(manifest, manifest.references(artist, space).into_iter());
        let summary = estimate_gaussian(refs.fad_rows(config.pooling), config.cov_divisor).map_err(|source| {
            ProtocolError::Metric { artist: artist.into(), space: space.into(), condition: "references".into(), source }
        })?;
        Ok(Self { manifest, artist: artist.into(), space: space.into(), refs, summary, config })
    }

    fn metric_err(&self, condition: &ConditionKey) -> impl FnOnce(MetricError) -> ProtocolError + '_ {
        let condition = condition.to_string();
        move |source| ProtocolError::Metric {
            artist: self.artist.clone(),
            space: self.space.clone(),
            condition,
            source,
        }
    }

    fn population(&self, condition: &ConditionKey) -> Result<Population> {
        let records = self.manifest.generated(&self.artist, &self.space, condition);
        if records.is_empty() {
            return Err(ProtocolError::MissingCondition {
                artist: self.artist.clone(),
                space: self.space.clone(),
                condition: condition.clone(),
            });
        }
        Ok(Population::gather(self.manifest, records.into_iter()))
    }

    fn centroid_similarity(&self, condition: &ConditionKey) -> Result<f64> {
        let pop = self.population(condition)?;
        centroid_similarity(&pop.clips, &self.refs.clips).map_err(self.metric_err(condition))
    }

    fn evaluate(&self, condition: &ConditionKey) -> Result<ConditionMetrics> {
        let pop = self.population(condition)?;
        let err = || self.metric_err(condition);
        let summary = estimate_gaussian(pop.fad_rows(self.config.pooling), self.config.cov_divisor).map_err(err())?;
        let fad = frechet_distance(&summary, &self.summary).map_err(err())?;
        let dmin = min_distance_condition(&pop.clips, &self.refs.clips, &pop.ids).map_err(err())?;
        let centroid_sim_mean = centroid_similarity(&pop.clips, &self.refs.clips).map_err(err())?;
        Ok(ConditionMetrics {
            condition: condition.clone(),
            fad,
            dmin_median: dmin.median,
            centroid_sim_mean,
            n_clips: pop.ids.len(),
            per_clip_dmin: dmin.per_clip,
        })
    }
}

/// FAD, median nearest-reference distance and mean centroid similarity of
/// one condition's generated clips against the artist's references.
pub fn evaluate_condition(
    manifest: &Manifest,
    artist: &str,
    space: &str,
    condition: &ConditionKey,
    config: EvalConfig,
) -> Result<ConditionMetrics> {
    ReferenceContext::new(manifest, artist, space, config)?.evaluate(condition)
}

/// Mean and sample standard deviation (divisor `n − 1`).
pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Mean computed as `v₀ + Σ(vᵢ − v₀)/n`, which returns `v₀` exactly when
/// all values are equal.
fn anchored_mean(values: &[f64]) -> f64 {
    let v0 = values[0];
    v0 + values.iter().map(|v| v - v0).sum::<f64>() / values.len() as f64
}

/// Styled-set FAD summary and the name-free gap for one artist and space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StyledFadSummary {
    pub styled_fad_mean: f64,
    pub styled_fad_std: f64,
    /// `styled_fad_mean − artist_name_fad`; positive when descriptors trail
    /// the artist name.
    pub name_free_gap: f64,
}

impl StyledFadSummary {
    pub fn new(set_fads: &[f64], artist_name_fad: f64) -> Self {
        let (mean, std) = mean_and_sample_std(set_fads);
        Self { styled_fad_mean: mean, styled_fad_std: std, name_free_gap: mean - artist_name_fad }
    }
}

/// Per-seed nearest-reference distances across the seven matched conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedSeedRow {
    pub seed: u64,
    pub baseline_dmin: f64,
    pub artist_name_dmin: f64,
    pub styled_dmin: Vec<f64>,
    pub artist_name_minus_baseline: f64,
    pub styled_minus_baseline: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArtistSpaceReport {
    pub artist: String,
    pub space: String,
    pub n_references: usize,
    pub baseline: ConditionMetrics,
    pub artist_name: ConditionMetrics,
    pub styled: Vec<ConditionMetrics>,
    #[serde(flatten)]
    pub fad_summary: StyledFadSummary,
    /// Median over all styled clips of every set pooled together.
    pub styled_dmin_median_pooled: f64,
    /// One median per descriptor set, in set order.
    pub styled_dmin_median_per_set: Vec<f64>,
    /// `styled_dmin_median_pooled − artist_name.dmin_median`.
    pub name_free_gap_dmin: f64,
    pub cross_styled: Vec<ConditionMetrics>,
    pub paired_by_seed: Vec<PairedSeedRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossEntry {
    /// Artist whose references and baseline prompt were used.
    pub target: String,
    /// Artist whose descriptor sets were appended.
    pub source: String,
    #[serde(flatten)]
    pub delta: DeltaStat,
    pub per_set: Vec<DeltaStat>,
}

/// Δ matrix for one space: `entries[t][s]` evaluates artist `s`'s
/// descriptors against artist `t`'s references. Artists are sorted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossArtistMatrix {
    pub space: String,
    pub artists: Vec<String>,
    pub entries: Vec<Vec<CrossEntry>>,
}

impl CrossArtistMatrix {
    pub fn delta(&self, target: usize, source: usize) -> f64 {
        self.entries[target][source].delta.delta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateReport {
    pub cells: Vec<ArtistSpaceReport>,
    pub cross_artist: Vec<CrossArtistMatrix>,
    /// Spaces for which the cross-artist matrix could not be formed, with the reason.
    pub skipped: Vec<String>,
}

/// Matched-seed table for one artist and space.
pub fn pair_by_seed(manifest: &Manifest, artist: &str, space: &str) -> Result<Vec<SeedRow>> {
    Ok(manifest.seed_rows(artist, space)?)
}

fn paired_rows(rows: &[SeedRow], dmin: &BTreeMap<&str, f64>) -> Vec<PairedSeedRow> {
    rows.iter()
        .map(|r| {
            let base = dmin[r.baseline.as_str()];
            let name = dmin[r.artist_name.as_str()];
            let styled: Vec<f64> = r.styled.iter().map(|id| dmin[id.as_str()]).collect();
            PairedSeedRow {
                seed: r.seed,
                baseline_dmin: base,
                artist_name_dmin: name,
                styled_minus_baseline: styled.iter().map(|s| s - base).collect(),
                styled_dmin: styled,
                artist_name_minus_baseline: name - base,
            }
        })
        .collect()
}

fn artist_space_report(
    manifest: &Manifest,
    artist: &str,
    space: &str,
    config: EvalConfig,
) -> Result<ArtistSpaceReport> {
    let ctx = ReferenceContext::new(manifest, artist, space, config)?;
    let baseline = ctx.evaluate(&ConditionKey::Baseline)?;
    let artist_name = ctx.evaluate(&ConditionKey::ArtistName)?;
    let styled = ConditionKey::styled_sets().map(|k| ctx.evaluate(&k)).collect::<Result<Vec<_>>>()?;
    let cross_styled = manifest
        .cross_sources(artist)
        .into_iter()
        .flat_map(ConditionKey::cross_sets)
        .map(|k| ctx.evaluate(&k))
        .collect::<Result<Vec<_>>>()?;

    let set_fads: Vec<f64> = styled.iter().map(|m| m.fad).collect();
    let pooled: Vec<f64> = styled.iter().flat_map(|m| m.per_clip_dmin.iter().map(|c| c.d_min)).collect();
    let styled_dmin_median_pooled = metrics::median(&pooled).expect("styled sets are non-empty");

    let dmin: BTreeMap<&str, f64> = [&baseline, &artist_name]
        .into_iter()
        .chain(&styled)
        .flat_map(|m| m.per_clip_dmin.iter().map(|c| (c.clip_id.as_str(), c.d_min)))
        .collect();
    let paired_by_seed = paired_rows(&pair_by_seed(manifest, artist, space)?, &dmin);

    Ok(ArtistSpaceReport {
        artist: artist.to_owned(),
        space: space.to_owned(),
        n_references: ctx.refs.ids.len(),
        fad_summary: StyledFadSummary::new(&set_fads, artist_name.fad),
        styled_dmin_median_per_set: styled.iter().map(|m| m.dmin_median).collect(),
        name_free_gap_dmin: styled_dmin_median_pooled - artist_name.dmin_median,
        styled_dmin_median_pooled,
        baseline,
        artist_name,
        styled,
        cross_styled,
        paired_by_seed,
    })
}

/// Δ of each source artist's descriptor sets against each target artist's
/// references: the per-set centroid similarities are averaged over the five
/// sets, then the target baseline's similarity is subtracted.
pub fn cross_artist_matrix(manifest: &Manifest, space: &str, config: EvalConfig) -> Result<CrossArtistMatrix> {
    let artists: Vec<String> = manifest.artists().into_iter().map(str::to_owned).collect();
    let entries = artists
        .iter()
        .map(|target| {
            let ctx = ReferenceContext::new(manifest, target, space, config)?;
            let baseline_sim = ctx.centroid_similarity(&ConditionKey::Baseline)?;
            let sources = manifest.cross_sources(target);
            artists
                .iter()
                .map(|source| {
                    let conditions: Vec<ConditionKey> = if source == target {
                        ConditionKey::styled_sets().collect()
                    } else if sources.contains(&source.as_str()) {
                        ConditionKey::cross_sets(source).collect()
                    } else {
                        return Err(ProtocolError::MissingCrossCondition {
                            space: space.to_owned(),
                            target: target.clone(),
                            source_artist: source.clone(),
                        });
                    };
                    let sims = conditions.iter().map(|c| ctx.centroid_similarity(c)).collect::<Result<Vec<_>>>()?;
                    Ok(CrossEntry {
                        target: target.clone(),
                        source: source.clone(),
                        delta: metrics::delta(anchored_mean(&sims), baseline_sim),
                        per_set: sims.iter().map(|&s| metrics::delta(s, baseline_sim)).collect(),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossArtistMatrix { space: space.to_owned(), artists, entries })
}

/// Evaluates every artist in every requested space. Cells run in parallel
/// and are returned sorted by artist, then space.
pub fn aggregate(manifest: &Manifest, spaces: &[String], config: EvalConfig) -> Result<AggregateReport> {
    let mut spaces = spaces.to_vec();
    spaces.sort();
    spaces.dedup();
    let known = manifest.spaces();
    if let Some(s) = spaces.iter().find(|s| !known.contains(s)) {
        return Err(ProtocolError::UnknownSpace(s.clone()));
    }
    let jobs: Vec<(&str, &str)> =
        manifest.artists().into_iter().flat_map(|a| spaces.iter().map(move |s| (a, s.as_str()))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(artist, space)| artist_space_report(manifest, artist, space, config))
        .collect::<Result<Vec<_>>>()?;

    let mut cross_artist = Vec::new();
    let mut skipped = Vec::new();
    for space in &spaces {
        match cross_artist_matrix(manifest, space, config) {
            Ok(m) => cross_artist.push(m),
            Err(e @ ProtocolError::MissingCrossCondition { .. }) => skipped.push(e.to_string()),
            Err(e) => return Err(e),
        }
    }
    Ok(AggregateReport { cells, cross_artist, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emb_store::load_manifest;
    use crate::synth::{write_fixture, Geometry, Scenario, ScenarioSpec, SpaceSpec};
    use approx::assert_abs_diff_eq;

    fn fixture(scenario: Scenario, cross: bool) -> (tempfile::TempDir, Manifest) {
        let dir = tempfile::tempdir().unwrap();
        let spec = ScenarioSpec {
            scenario,
            rng_seed: 99,
            artists: vec!["A".into(), "B".into()],
            seeds: (0..10).collect(),
            reference_count: if scenario == Scenario::Null { 10 } else { 15 },
            spaces: vec![SpaceSpec { tag: "vggish".into(), dim: 6, frames: 2 }],
            geometry: Geometry::default(),
            cross_artist: cross,
        };
        let m = load_manifest(write_fixture(&spec, dir.path()).unwrap()).unwrap();
        (dir, m)
    }

    #[test]
    fn sample_std_examples() {
        assert_eq!(mean_and_sample_std(&[2.0; 5]), (2.0, 0.0));
        let (m, s) = mean_and_sample_std(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(m, 3.0);
        assert_abs_diff_eq!(s, 2.5f64.sqrt(), epsilon = 1e-15);
        let summary = StyledFadSummary::new(&[1.4; 5], 1.0);
        assert_abs_diff_eq!(summary.name_free_gap, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn anchored_mean_is_exact_for_equal_values() {
        let x = 0.1 + 0.2;
        assert_eq!(anchored_mean(&[x; 5]), x);
        assert_abs_diff_eq!(anchored_mean(&[1.0, 2.0, 3.0]), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn self_evaluation_is_zero() {
        let (_d, m) = fixture(Scenario::Null, false);
        let r = evaluate_condition(&m, "A", "vggish", &ConditionKey::Styled(2), EvalConfig::default()).unwrap();
        assert!(r.fad <= 1e-9, "{}", r.fad);
        assert_eq!(r.dmin_median, 0.0);
        assert_abs_diff_eq!(r.centroid_sim_mean, 1.0, epsilon = 0.05);
        assert_eq!(r.n_clips, 10);
    }

    #[test]
    fn missing_inputs() {
        let (_d, m) = fixture(Scenario::Displacement, false);
        let cfg = EvalConfig::default();
        let cross = ConditionKey::CrossStyled { source: "B".into(), set: 1 };
        assert!(matches!(
            evaluate_condition(&m, "A", "vggish", &cross, cfg),
            Err(ProtocolError::MissingCondition { .. })
        ));
        assert!(matches!(
            evaluate_condition(&m, "Z", "vggish", &ConditionKey::Baseline, cfg),
            Err(ProtocolError::UnknownArtist(_))
        ));
        assert!(matches!(
            evaluate_condition(&m, "A", "clap", &ConditionKey::Baseline, cfg),
            Err(ProtocolError::UnknownSpace(_))
        ));
        assert!(matches!(cross_artist_matrix(&m, "vggish", cfg), Err(ProtocolError::MissingCrossCondition { .. })));
        let report = aggregate(&m, &["vggish".into()], cfg).unwrap();
        assert!(report.cross_artist.is_empty());
        assert_eq!(report.skipped.len(), 1);
    }

    #[test]
    fn pairing_table_shape() {
        let (_d, m) = fixture(Scenario::Displacement, false);
        let rows = pair_by_seed(&m, "B", "vggish").unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r.styled.len() == 5));
    }

    #[test]
    fn null_fixture_zero_laws() {
        let (_d, m) = fixture(Scenario::Null, true);
        let report = aggregate(&m, &["vggish".into()], EvalConfig::default()).unwrap();
        let matrix = &report.cross_artist[0];
        for t in 0..2 {
            for s in 0..2 {
                assert_eq!(matrix.delta(t, s), 0.0);
            }
        }
        for cell in &report.cells {
            assert!(cell.paired_by_seed.iter().all(|r| r.styled_minus_baseline.iter().all(|&d| d == 0.0)));
            assert!(cell.styled.iter().all(|c| c.fad <= 1e-9));
        }
    }

    #[test]
    fn displacement_signs() {
        let (_d, m) = fixture(Scenario::Displacement, true);
        let report = aggregate(&m, &["vggish".into()], EvalConfig::default()).unwrap();
        let matrix = &report.cross_artist[0];
        assert_eq!(matrix.artists, ["A", "B"]);
        assert!(matrix.delta(0, 0) > 0.0 && matrix.delta(1, 1) > 0.0);
        assert!(matrix.delta(0, 1) < 0.0 && matrix.delta(1, 0) < 0.0);
        for cell in &report.cells {
            assert!(cell.artist_name.fad < cell.baseline.fad);
            assert!(cell.fad_summary.name_free_gap > 0.0);
        }
    }

    #[test]
    fn frame_pooling_changes_only_fad() {
        let (_d, m) = fixture(Scenario::Displacement, false);
        let clip = EvalConfig::default();
        let frame = EvalConfig { pooling: Pooling::Frame, ..clip };
        let a = evaluate_condition(&m, "A", "vggish", &ConditionKey::Styled(1), clip).unwrap();
        let b = evaluate_condition(&m, "A", "vggish", &ConditionKey::Styled(1), frame).unwrap();
        assert_ne!(a.fad, b.fad);
        assert_eq!(a.dmin_median, b.dmin_median);
        assert_eq!(a.centroid_sim_mean, b.centroid_sim_mean);
    }

    #[test]
    fn record_order_does_not_matter() {
        let (dir, m) = fixture(Scenario::Displacement, true);
        let mut doc = m.doc().clone();
        for a in &mut doc.artists {
            a.generated.reverse();
            a.references.rotate_left(4);
        }
        doc.artists.reverse();
        let shuffled = Manifest::from_doc(doc, dir.path().into()).unwrap();
        let cfg = EvalConfig::default();
        assert_eq!(
            aggregate(&m, &["vggish".into()], cfg).unwrap(),
            aggregate(&shuffled, &["vggish".into()], cfg).unwrap()
        );
    }
}
