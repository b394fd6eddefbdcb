use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EntityAddress, IdentityError, KeyMaterial, PublicKeyBytes};
use crate::bytes::{sha256, Digest};
use crate::canonical::canonical_encode;

pub const MAX_NAME_BYTES: usize = 128;
pub const MAX_SUMMARY_BYTES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Host,
    Human,
    Agent,
    Tool,
    Resource,
    Service,
    Arbiter,
    Organization,
}

impl EntityKind {
    pub const ALL: [EntityKind; 8] = [
        EntityKind::Host,
        EntityKind::Human,
        EntityKind::Agent,
        EntityKind::Tool,
        EntityKind::Resource,
        EntityKind::Service,
        EntityKind::Arbiter,
        EntityKind::Organization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Host => "host",
            EntityKind::Human => "human",
            EntityKind::Agent => "agent",
            EntityKind::Tool => "tool",
            EntityKind::Resource => "resource",
            EntityKind::Service => "service",
            EntityKind::Arbiter => "arbiter",
            EntityKind::Organization => "organization",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = IdentityError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| IdentityError::UnknownKind(s.to_owned()))
    }
}

/// Public discovery document of an entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityCard {
    pub name: String,
    pub address: EntityAddress,
    pub kind: EntityKind,
    pub signing_public: PublicKeyBytes,
    pub encryption_public: PublicKeyBytes,
    pub discoverable: bool,
    /// Short progressive-disclosure summary, never a full schema.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capability_summary: Option<String>,
}

impl EntityCard {
    pub fn new(
        name: impl Into<String>,
        address: EntityAddress,
        kind: EntityKind,
        keys: &KeyMaterial,
    ) -> Result<Self, IdentityError> {
        let card = Self {
            name: name.into(),
            address,
            kind,
            signing_public: keys.signing_public(),
            encryption_public: keys.encryption_public(),
            discoverable: false,
            capability_summary: None,
        };
        card.validate()?;
        Ok(card)
    }

    pub fn discoverable(mut self, yes: bool) -> Self {
        self.discoverable = yes;
        self
    }

    pub fn with_summary(mut self, summary: impl Into<String>) -> Result<Self, IdentityError> {
        self.capability_summary = Some(summary.into());
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), IdentityError> {
        if self.name.len() > MAX_NAME_BYTES {
            return Err(IdentityError::NameTooLong(self.name.len()));
        }
        if let Some(s) = &self.capability_summary {
            if s.len() > MAX_SUMMARY_BYTES {
                return Err(IdentityError::SummaryTooLong(s.len()));
            }
        }
        Ok(())
    }
}

/// SHA-256 over the card's canonical encoding.
pub fn card_fingerprint(card: &EntityCard) -> Digest {
    sha256(&canonical_encode(card).expect("cards contain no floats"))
}
