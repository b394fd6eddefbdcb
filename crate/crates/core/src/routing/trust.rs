use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bytes::Digest;
use crate::identity::{card_fingerprint, EntityAddress, EntityCard};

/// Directional: `owner` accepts mail from `peer` as long as the peer's card
/// still matches the pinned fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustEdge {
    pub owner: EntityAddress,
    pub peer: EntityAddress,
    pub peer_card_fingerprint: Digest,
    pub established_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustStatus {
    Trusted,
    Untrusted,
    /// An edge exists but the peer now presents a different card.
    CardChanged,
}

/// Trust edges of every entity on one host, keyed by owner then peer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustStore {
    edges: BTreeMap<EntityAddress, BTreeMap<EntityAddress, TrustEdge>>,
}

impl TrustStore {
    /// Pin `peer_card` for `owner`, replacing any older pin.
    pub fn add(&mut self, owner: EntityAddress, peer_card: &EntityCard, now: u64) -> TrustEdge {
        let edge = TrustEdge {
            owner,
            peer: peer_card.address,
            peer_card_fingerprint: card_fingerprint(peer_card),
            established_at: now,
        };
        self.edges
            .entry(owner)
            .or_default()
            .insert(edge.peer, edge.clone());
        edge
    }

    pub fn edge(&self, owner: &EntityAddress, peer: &EntityAddress) -> Option<&TrustEdge> {
        self.edges.get(owner).and_then(|m| m.get(peer))
    }

    pub fn edges_of(&self, owner: &EntityAddress) -> impl Iterator<Item = &TrustEdge> {
        self.edges.get(owner).into_iter().flat_map(|m| m.values())
    }

    pub fn status(&self, owner: &EntityAddress, peer_card: &EntityCard) -> TrustStatus {
        match self.edge(owner, &peer_card.address) {
            None => TrustStatus::Untrusted,
            Some(e) if e.peer_card_fingerprint == card_fingerprint(peer_card) => {
                TrustStatus::Trusted
            }
            Some(_) => TrustStatus::CardChanged,
        }
    }
}
