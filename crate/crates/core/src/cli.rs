//! `namegap` command line: validate, evaluate, prompts, synth.
//!
//! Exit codes: 0 success, 2 schema/usage, 3 matched-seed or count
//! violations, 4 numeric failure, 5 I/O. Failures print one JSON object per
//! line on stderr.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::emb_store::{load_manifest, EmbError, ManifestError};
use crate::metrics::CovDivisor;
use crate::promptkit::{build_prompts, parse_bundle, BundleError};
use crate::protocol::{aggregate, EvalConfig, Pooling, ProtocolError};
use crate::report::{write_atomic, ReportDocument};
use crate::synth::{write_fixture, ScenarioSpec, SynthError};

pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_MATCHED_SEED: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "namegap", version, about = "Evaluate prompt-level style control in embedding space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a manifest and every embedding file it references
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Compute FAD, min-distance and cross-artist Δ for every artist and space
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated space tags; defaults to every space in the manifest
        #[arg(long, value_delimiter = ',')]
        spaces: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Pool every frame row into the FAD Gaussians instead of clip means
        #[arg(long)]
        frame_level: bool,
        #[arg(long, default_value = "n-1")]
        cov_divisor: CovDivisor,
    },
    /// Print baseline, artist-name and the five styled prompts of a bundle
    Prompts {
        #[arg(long)]
        bundle: PathBuf,
    },
    /// Write a synthetic fixture (EMB1 files and manifest) from a scenario spec
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("bundle {path}: {source}")]
    Bundle { path: PathBuf, source: BundleError },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn emb_code(e: &EmbError) -> i32 {
    match e {
        EmbError::NonFiniteValue { .. } | EmbError::ZeroNormRow { .. } => EXIT_NUMERIC,
        EmbError::Io(_) => EXIT_IO,
        _ => EXIT_SCHEMA,
    }
}

fn manifest_code(e: &ManifestError) -> i32 {
    match e {
        ManifestError::Schema { .. } | ManifestError::DuplicateClipId { .. } => EXIT_SCHEMA,
        ManifestError::ReferenceCountMismatch { .. } | ManifestError::MatchedSeedViolation { .. } => EXIT_MATCHED_SEED,
        ManifestError::Io { .. } | ManifestError::MissingEmbeddingFile { .. } => EXIT_IO,
        ManifestError::Embedding { source, .. } => emb_code(source),
    }
}

fn manifest_kind(e: &ManifestError) -> &'static str {
    match e {
        ManifestError::Io { .. } => "ManifestUnreadable",
        ManifestError::Schema { .. } => "SchemaError",
        ManifestError::DuplicateClipId { .. } => "DuplicateClipId",
        ManifestError::ReferenceCountMismatch { .. } => "ReferenceCountMismatch",
        ManifestError::MatchedSeedViolation { .. } => "MatchedSeedViolation",
        ManifestError::MissingEmbeddingFile { .. } => "MissingEmbeddingFile",
        ManifestError::Embedding { source, .. } => match source {
            EmbError::BadMagic { .. } => "BadMagic",
            EmbError::VersionUnsupported(_) => "VersionUnsupported",
            EmbError::TruncatedHeader { .. } | EmbError::TruncatedPayload { .. } => "TruncatedPayload",
            EmbError::NonFiniteValue { .. } => "NonFiniteValue",
            EmbError::ZeroNormRow { .. } => "ZeroNormRow",
            _ => "MalformedEmbedding",
        },
    }
}

fn manifest_context(e: &ManifestError, d: &mut Map<String, Value>) {
    match e {
        ManifestError::Io { path, .. } => {
            d.insert("path".into(), json!(path));
        }
        ManifestError::Schema { artist, clip_id, .. } => {
            d.insert("artist".into(), json!(artist));
            d.insert("clip_id".into(), json!(clip_id));
        }
        ManifestError::DuplicateClipId { clip_id } => {
            d.insert("clip_id".into(), json!(clip_id));
        }
        ManifestError::ReferenceCountMismatch { artist, space, expected, found } => {
            d.insert("artist".into(), json!(artist));
            d.insert("space".into(), json!(space));
            d.insert("expected".into(), json!(expected));
            d.insert("found".into(), json!(found));
        }
        ManifestError::MatchedSeedViolation { artist, space, seed, condition, found } => {
            d.insert("artist".into(), json!(artist));
            d.insert("space".into(), json!(space));
            d.insert("seed".into(), json!(seed));
            d.insert("condition".into(), json!(condition.to_string()));
            d.insert("found".into(), json!(found));
        }
        ManifestError::MissingEmbeddingFile { clip_id, path, .. } | ManifestError::Embedding { clip_id, path, .. } => {
            d.insert("clip_id".into(), json!(clip_id));
            d.insert("path".into(), json!(path));
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Manifest(e) | Self::Protocol(ProtocolError::Manifest(e)) => manifest_code(e),
            Self::Protocol(ProtocolError::Metric { .. }) => EXIT_NUMERIC,
            Self::Protocol(ProtocolError::MissingCondition { .. } | ProtocolError::MissingCrossCondition { .. }) => {
                EXIT_MATCHED_SEED
            }
            Self::Protocol(ProtocolError::UnknownArtist(_) | ProtocolError::UnknownSpace(_)) => EXIT_SCHEMA,
            Self::Bundle { .. } => EXIT_SCHEMA,
            Self::Synth(SynthError::Io { .. }) | Self::Io { .. } => EXIT_IO,
            Self::Synth(SynthError::Embedding(e)) => emb_code(e),
            Self::Synth(_) => EXIT_SCHEMA,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Manifest(e) | Self::Protocol(ProtocolError::Manifest(e)) => manifest_kind(e),
            Self::Protocol(ProtocolError::Metric { .. }) => "NumericFailure",
            Self::Protocol(ProtocolError::MissingCondition { .. }) => "MissingCondition",
            Self::Protocol(ProtocolError::MissingCrossCondition { .. }) => "MissingCrossCondition",
            Self::Protocol(ProtocolError::UnknownArtist(_)) => "UnknownArtist",
            Self::Protocol(ProtocolError::UnknownSpace(_)) => "UnknownSpace",
            Self::Bundle { source, .. } => match source {
                BundleError::Schema { .. } | BundleError::Field { .. } => "SchemaError",
                BundleError::WrongSetCount(_) => "WrongSetCount",
                BundleError::WrongTokenCount { .. } => "WrongTokenCount",
                BundleError::TokenTooLong { .. } => "TokenTooLong",
                BundleError::TokenTooShort { .. } => "TokenTooShort",
                BundleError::NonLowercaseAscii { .. } => "NonLowercaseAscii",
                BundleError::EmptyWord { .. } => "EmptyWord",
                BundleError::DuplicateSet { .. } => "DuplicateSet",
            },
            Self::Synth(SynthError::Io { .. }) | Self::Io { .. } => "IoFailure",
            Self::Synth(_) => "InvalidSpec",
        }
    }

    /// One-line machine-readable description of the failure.
    pub fn diagnostic(&self) -> Value {
        let mut d = Map::new();
        d.insert("error".into(), json!(self.kind()));
        d.insert("exit_code".into(), json!(self.exit_code()));
        d.insert("message".into(), json!(self.to_string()));
        match self {
            Self::Manifest(e) | Self::Protocol(ProtocolError::Manifest(e)) => manifest_context(e, &mut d),
            Self::Protocol(ProtocolError::Metric { artist, space, condition, .. }) => {
                d.insert("artist".into(), json!(artist));
                d.insert("space".into(), json!(space));
                d.insert("condition".into(), json!(condition));
            }
            Self::Protocol(ProtocolError::MissingCondition { artist, space, condition }) => {
                d.insert("artist".into(), json!(artist));
                d.insert("space".into(), json!(space));
                d.insert("condition".into(), json!(condition.to_string()));
            }
            Self::Bundle { path, source } => {
                d.insert("path".into(), json!(path));
                match source {
                    BundleError::Schema { line, column, .. } => {
                        d.insert("line".into(), json!(line));
                        d.insert("column".into(), json!(column));
                    }
                    BundleError::Field { field, .. } => {
                        d.insert("field".into(), json!(field));
                    }
                    BundleError::TokenTooLong { at, .. }
                    | BundleError::TokenTooShort { at, .. }
                    | BundleError::NonLowercaseAscii { at, .. }
                    | BundleError::EmptyWord { at, .. } => {
                        d.insert("field".into(), json!(at.to_string()));
                    }
                    BundleError::WrongTokenCount { set, .. } => {
                        d.insert("field".into(), json!(format!("sets[{set}]")));
                    }
                    BundleError::WrongSetCount(_) | BundleError::DuplicateSet { .. } => {
                        d.insert("field".into(), json!("sets"));
                    }
                }
            }
            Self::Io { path, .. } | Self::Synth(SynthError::Io { path, .. }) => {
                d.insert("path".into(), json!(path));
            }
            _ => {}
        }
        Value::Object(d)
    }
}

/// Runs one command, writing its normal output to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn std::io::Write) -> Result<(), CliError> {
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| CliError::Io { path, source }
    };
    match cli.command {
        Command::Validate { manifest } => {
            let m = load_manifest(&manifest)?;
            let artists: Map<String, Value> = m
                .artists()
                .into_iter()
                .map(|a| {
                    let refs: usize = m.spaces().iter().map(|s| m.references(a, s).len()).sum();
                    (a.to_owned(), json!({"generated": m.generated_count(a), "references": refs}))
                })
                .collect();
            let summary = json!({"status": "ok", "seeds": m.seeds().len(), "spaces": m.spaces(), "artists": artists});
            writeln!(stdout, "{summary}").map_err(io(Path::new("<stdout>")))?;
        }
        Command::Evaluate { manifest, spaces, out, format, frame_level, cov_divisor } => {
            let m = load_manifest(&manifest)?;
            let spaces = if spaces.is_empty() { m.spaces() } else { spaces };
            let config = EvalConfig { cov_divisor, pooling: if frame_level { Pooling::Frame } else { Pooling::Clip } };
            let report = aggregate(&m, &spaces, config)?;
            let mut spaces = spaces;
            spaces.sort();
            spaces.dedup();
            let doc = ReportDocument::new(report, config, spaces);
            let bytes = match format {
                Format::Json => doc.to_canonical_json(),
                Format::Csv => doc.to_csv(),
            };
            write_atomic(&out, bytes.as_bytes()).map_err(io(&out))?;
        }
        Command::Prompts { bundle } => {
            let text = fs::read_to_string(&bundle).map_err(io(&bundle))?;
            let parsed = parse_bundle(&text).map_err(|source| CliError::Bundle { path: bundle.clone(), source })?;
            for line in build_prompts(&parsed).lines() {
                writeln!(stdout, "{line}").map_err(io(Path::new("<stdout>")))?;
            }
        }
        Command::Synth { spec, out } => {
            let text = fs::read_to_string(&spec).map_err(io(&spec))?;
            let manifest = write_fixture(&ScenarioSpec::from_json(&text)?, &out)?;
            writeln!(stdout, "{}", manifest.display()).map_err(io(Path::new("<stdout>")))?;
        }
    }
    Ok(())
}
