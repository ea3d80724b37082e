//! Descriptor bundles and prompt construction.
//!
//! A bundle is the JSON object returned by the descriptor-sampling LLM:
//! one neutral baseline sentence and five sets of three short style tokens.
//! Styled prompts append a set to the baseline with `", "` separators; the
//! artist-name control appends `" [<artist>]"`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SET_COUNT: usize = 5;
pub const TOKENS_PER_SET: usize = 3;
pub const MIN_TOKEN_WORDS: usize = 2;
pub const MAX_TOKEN_WORDS: usize = 4;

/// Position of a token inside a bundle, 1-based as people count sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenPos {
    pub set: usize,
    pub token: usize,
}

impl fmt::Display for TokenPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sets[{}][{}]", self.set, self.token)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BundleError {
    #[error("schema error at line {line}, column {column}: {message}")]
    Schema { message: String, line: usize, column: usize },
    #[error("field {field}: {message}")]
    Field { field: &'static str, message: String },
    #[error("expected {SET_COUNT} descriptor sets, found {0}")]
    WrongSetCount(usize),
    #[error("set {set}: expected {TOKENS_PER_SET} tokens, found {found}")]
    WrongTokenCount { set: usize, found: usize },
    #[error("{at}: token {token:?} has {words} words, at most {MAX_TOKEN_WORDS} allowed")]
    TokenTooLong { at: TokenPos, token: String, words: usize },
    #[error("{at}: token {token:?} has {words} words, at least {MIN_TOKEN_WORDS} required")]
    TokenTooShort { at: TokenPos, token: String, words: usize },
    #[error("{at}: token {token:?} must be lowercase ASCII letters, digits, hyphens and spaces")]
    NonLowercaseAscii { at: TokenPos, token: String },
    #[error("{at}: token {token:?} has an empty word (leading, trailing or doubled space)")]
    EmptyWord { at: TokenPos, token: String },
    #[error("sets {first} and {second} contain the same tokens")]
    DuplicateSet { first: usize, second: usize },
}

/// Validated descriptor bundle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorBundle {
    pub artist_name: String,
    pub baseline: String,
    pub sets: Vec<Vec<String>>,
}

impl DescriptorBundle {
    pub fn new(artist_name: String, baseline: String, sets: Vec<Vec<String>>) -> Result<Self, BundleError> {
        let bundle = Self { artist_name, baseline, sets };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<(), BundleError> {
        if self.artist_name.trim().is_empty() {
            return Err(BundleError::Field { field: "artist_name", message: "must not be empty".into() });
        }
        if self.baseline.trim().is_empty() {
            return Err(BundleError::Field { field: "baseline", message: "must not be empty".into() });
        }
        if self.sets.len() != SET_COUNT {
            return Err(BundleError::WrongSetCount(self.sets.len()));
        }
        for (i, set) in self.sets.iter().enumerate() {
            if set.len() != TOKENS_PER_SET {
                return Err(BundleError::WrongTokenCount { set: i + 1, found: set.len() });
            }
            for (j, token) in set.iter().enumerate() {
                validate_token(token, TokenPos { set: i + 1, token: j + 1 })?;
            }
        }
        // Sets are compared as unordered token collections.
        let canonical: Vec<Vec<&str>> = self
            .sets
            .iter()
            .map(|s| {
                let mut v: Vec<&str> = s.iter().map(String::as_str).collect();
                v.sort_unstable();
                v
            })
            .collect();
        for i in 0..canonical.len() {
            for j in i + 1..canonical.len() {
                if canonical[i] == canonical[j] {
                    return Err(BundleError::DuplicateSet { first: i + 1, second: j + 1 });
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }
}

/// Checks one style token: lowercase ASCII words of `[a-z0-9-]`, single
/// spaces between them, two to four words. Hyphenated compounds such as
/// `sub-bass` count as one word.
pub fn validate_token(token: &str, at: TokenPos) -> Result<(), BundleError> {
    let allowed = |c: char| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == ' ';
    if !token.chars().all(allowed) {
        return Err(BundleError::NonLowercaseAscii { at, token: token.to_owned() });
    }
    let words: Vec<&str> = token.split(' ').collect();
    if words.iter().any(|w| w.is_empty()) {
        return Err(BundleError::EmptyWord { at, token: token.to_owned() });
    }
    match words.len() {
        n if n > MAX_TOKEN_WORDS => Err(BundleError::TokenTooLong { at, token: token.to_owned(), words: n }),
        n if n < MIN_TOKEN_WORDS => Err(BundleError::TokenTooShort { at, token: token.to_owned(), words: n }),
        _ => Ok(()),
    }
}

pub fn parse_bundle(json_text: &str) -> Result<DescriptorBundle, BundleError> {
    let bundle: DescriptorBundle = serde_json::from_str(json_text).map_err(|e| BundleError::Schema {
        message: e.to_string(),
        line: e.line(),
        column: e.column(),
    })?;
    bundle.validate()?;
    Ok(bundle)
}

/// The seven prompts rendered per seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptSet {
    pub baseline_prompt: String,
    pub artist_name_prompt: String,
    pub styled_prompts: Vec<String>,
}

impl PromptSet {
    /// Prompts in listing order: baseline, artist name, styled 1..=5.
    pub fn lines(&self) -> impl Iterator<Item = &str> {
        [self.baseline_prompt.as_str(), self.artist_name_prompt.as_str()]
            .into_iter()
            .chain(self.styled_prompts.iter().map(String::as_str))
    }

    /// Styled prompt for descriptor set `k` (1-based).
    pub fn styled(&self, k: usize) -> Option<&str> {
        k.checked_sub(1).and_then(|i| self.styled_prompts.get(i)).map(String::as_str)
    }
}

pub fn artist_name_prompt(baseline: &str, artist_name: &str) -> String {
    format!("{baseline} [{artist_name}]")
}

pub fn styled_prompt(baseline: &str, tokens: &[String]) -> String {
    let mut out = baseline.to_owned();
    for t in tokens {
        out.push_str(", ");
        out.push_str(t);
    }
    out
}

pub fn build_prompts(bundle: &DescriptorBundle) -> PromptSet {
    PromptSet {
        baseline_prompt: bundle.baseline.clone(),
        artist_name_prompt: artist_name_prompt(&bundle.baseline, &bundle.artist_name),
        styled_prompts: bundle.sets.iter().map(|s| styled_prompt(&bundle.baseline, s)).collect(),
    }
}
