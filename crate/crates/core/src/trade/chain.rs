//! Arbiter-signed, hash-linked snapshots of every contract transition.

use serde::{Deserialize, Serialize};

use super::{Contract, ContractState};
use crate::bytes::{sha256, ContractId, Digest};
use crate::canonical::canonical_encode;
use crate::identity::{verify_signature, EntityAddress, Intent, KeyMaterial, PublicKeyBytes, SignatureBytes};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub sequence: u64,
    pub contract_id: ContractId,
    pub state: ContractState,
    pub intent: Intent,
    pub draft_version: u32,
    pub actor: EntityAddress,
    pub recorded_at: u64,
    /// Digest of the full contract record after the transition; binds terms,
    /// deliveries, cost records and settlement to the chain.
    pub contract_digest: Digest,
    pub prev_hash: Digest,
    pub hash: Digest,
    pub arbiter_signature: SignatureBytes,
}

/// The hashed portion of a snapshot, in the same field names.
#[derive(Serialize)]
struct SnapshotBody<'a> {
    sequence: u64,
    contract_id: &'a ContractId,
    state: ContractState,
    intent: &'a Intent,
    draft_version: u32,
    actor: &'a EntityAddress,
    recorded_at: u64,
    contract_digest: &'a Digest,
    prev_hash: &'a Digest,
}

impl Snapshot {
    pub fn compute_hash(&self) -> Digest {
        let body = SnapshotBody {
            sequence: self.sequence,
            contract_id: &self.contract_id,
            state: self.state,
            intent: &self.intent,
            draft_version: self.draft_version,
            actor: &self.actor,
            recorded_at: self.recorded_at,
            contract_digest: &self.contract_digest,
            prev_hash: &self.prev_hash,
        };
        sha256(&canonical_encode(&body).expect("snapshot bodies contain no floats"))
    }

    pub(crate) fn seal(
        contract: &Contract,
        intent: Intent,
        actor: EntityAddress,
        prev: Option<&Snapshot>,
        now: u64,
        arbiter: &KeyMaterial,
    ) -> Snapshot {
        let contract_digest =
            sha256(&canonical_encode(contract).expect("contracts contain no floats"));
        let mut snap = Snapshot {
            sequence: prev.map_or(0, |p| p.sequence + 1),
            contract_id: contract.contract_id,
            state: contract.state,
            intent,
            draft_version: contract.draft_version,
            actor,
            recorded_at: now,
            contract_digest,
            prev_hash: prev.map_or(Digest::ZERO, |p| p.hash),
            hash: Digest::ZERO,
            arbiter_signature: SignatureBytes::ZERO,
        };
        snap.hash = snap.compute_hash();
        snap.arbiter_signature = arbiter.sign(&snap.hash.0);
        snap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainFault {
    Unparseable,
    Empty,
    Sequence,
    ContractMismatch,
    PrevHash,
    Hash,
    Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    pub valid: bool,
    pub length: usize,
    pub first_failure: Option<usize>,
    pub fault: Option<ChainFault>,
}

impl ChainReport {
    fn ok(length: usize) -> Self {
        Self {
            valid: true,
            length,
            first_failure: None,
            fault: None,
        }
    }

    fn broken(length: usize, at: usize, fault: ChainFault) -> Self {
        Self {
            valid: false,
            length,
            first_failure: Some(at),
            fault: Some(fault),
        }
    }
}

/// Check links and hashes first (cheap), then signatures up to the first
/// structural fault, so the reported index is always the earliest one.
pub fn verify_chain(snapshots: &[Snapshot], arbiter_key: &PublicKeyBytes) -> ChainReport {
    let n = snapshots.len();
    if n == 0 {
        return ChainReport::broken(0, 0, ChainFault::Empty);
    }
    let mut structural: Option<(usize, ChainFault)> = None;
    for (i, s) in snapshots.iter().enumerate() {
        let fault = if s.sequence != i as u64 {
            Some(ChainFault::Sequence)
        } else if s.contract_id != snapshots[0].contract_id {
            Some(ChainFault::ContractMismatch)
        } else if s.prev_hash != if i == 0 { Digest::ZERO } else { snapshots[i - 1].hash } {
            Some(ChainFault::PrevHash)
        } else if s.compute_hash() != s.hash {
            Some(ChainFault::Hash)
        } else {
            None
        };
        if let Some(f) = fault {
            structural = Some((i, f));
            break;
        }
    }
    let sig_limit = structural.map_or(n, |(i, _)| i);
    for (i, s) in snapshots[..sig_limit].iter().enumerate() {
        if !verify_signature(arbiter_key, &s.hash.0, &s.arbiter_signature) {
            return ChainReport::broken(n, i, ChainFault::Signature);
        }
    }
    match structural {
        Some((i, f)) => ChainReport::broken(n, i, f),
        None => ChainReport::ok(n),
    }
}

/// Verify a chain file (JSON array of snapshots). Bytes that do not parse
/// count as tampering.
pub fn verify_chain_bytes(bytes: &[u8], arbiter_key: &PublicKeyBytes) -> ChainReport {
    match serde_json::from_slice::<Vec<Snapshot>>(bytes) {
        Ok(chain) => verify_chain(&chain, arbiter_key),
        Err(_) => ChainReport::broken(0, 0, ChainFault::Unparseable),
    }
}
