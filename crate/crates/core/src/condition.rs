use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of descriptor sets sampled per artist.
pub const DESCRIPTOR_SETS: u8 = 5;

/// Experimental condition a generated clip was rendered under.
///
/// Ordering is baseline, artist name, styled sets, then cross-artist sets;
/// reports iterate conditions in this order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKey {
    Baseline,
    ArtistName,
    /// Baseline prompt plus the artist's own descriptor set `1..=5`.
    Styled(u8),
    /// Evaluated artist's baseline plus descriptor set `set` of another artist.
    CrossStyled {
        source: String,
        set: u8,
    },
}

impl ConditionKey {
    pub fn set_index(&self) -> Option<u8> {
        match self {
            Self::Styled(k) | Self::CrossStyled { set: k, .. } => Some(*k),
            _ => None,
        }
    }

    pub fn styled_sets() -> impl Iterator<Item = ConditionKey> {
        (1..=DESCRIPTOR_SETS).map(ConditionKey::Styled)
    }

    pub fn cross_sets(source: &str) -> impl Iterator<Item = ConditionKey> + '_ {
        (1..=DESCRIPTOR_SETS).map(move |set| ConditionKey::CrossStyled { source: source.to_owned(), set })
    }

    /// Checks set range and that a cross condition does not name `artist`.
    pub fn check(&self, artist: &str) -> Result<(), String> {
        if let Some(k) = self.set_index() {
            if !(1..=DESCRIPTOR_SETS).contains(&k) {
                return Err(format!("descriptor set index {k} outside 1..={DESCRIPTOR_SETS}"));
            }
        }
        if let Self::CrossStyled { source, .. } = self {
            if source == artist {
                return Err(format!("cross_styled source {source:?} is the evaluated artist"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ConditionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Baseline => f.write_str("baseline"),
            Self::ArtistName => f.write_str("artist_name"),
            Self::Styled(k) => write!(f, "styled:{k}"),
            Self::CrossStyled { source, set } => write!(f, "cross_styled:{source}:{set}"),
        }
    }
}
