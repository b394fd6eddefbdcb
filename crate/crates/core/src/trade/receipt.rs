use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{cost_totals, CostDimension, CostRecord, SettlementRef};
use crate::bytes::{sha256, ContractId, Digest};
use crate::canonical::{canonical_encode, encode_value, to_value};
use crate::identity::{verify_signature, EntityAddress, EntityCard, KeyMaterial, SignatureBytes};

/// Arbiter attestation of what a contract delivered and cost. Verifiable from
/// its own bytes plus the arbiter's public key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Receipt {
    pub contract_id: ContractId,
    pub final_snapshot_hash: Digest,
    pub cost_digest: Digest,
    pub totals: BTreeMap<CostDimension, u64>,
    pub settlement: SettlementRef,
    pub issued_at: u64,
    pub arbiter: EntityAddress,
    pub arbiter_signature: SignatureBytes,
}

pub fn cost_digest(records: &[CostRecord]) -> Digest {
    sha256(&canonical_encode(records).expect("cost records contain no floats"))
}

impl Receipt {
    fn signing_bytes(&self) -> Vec<u8> {
        let mut tree = to_value(self).expect("receipts contain no floats");
        tree.as_object_mut()
            .expect("object")
            .remove("arbiter_signature");
        encode_value(&tree)
    }

    pub(crate) fn issue(
        contract_id: ContractId,
        final_snapshot_hash: Digest,
        records: &[CostRecord],
        settlement: SettlementRef,
        arbiter: EntityAddress,
        keys: &KeyMaterial,
        now: u64,
    ) -> Receipt {
        let mut r = Receipt {
            contract_id,
            final_snapshot_hash,
            cost_digest: cost_digest(records),
            totals: cost_totals(records),
            settlement,
            issued_at: now,
            arbiter,
            arbiter_signature: SignatureBytes::ZERO,
        };
        r.arbiter_signature = keys.sign(&r.signing_bytes());
        r
    }
}

/// Signature check against the arbiter card; when cost records are supplied,
/// the digest and per-dimension totals must also recompute.
pub fn verify_receipt(
    receipt: &Receipt,
    arbiter_card: &EntityCard,
    cost_records: Option<&[CostRecord]>,
) -> bool {
    if receipt.arbiter != arbiter_card.address {
        return false;
    }
    if !verify_signature(
        &arbiter_card.signing_public,
        &receipt.signing_bytes(),
        &receipt.arbiter_signature,
    ) {
        return false;
    }
    match cost_records {
        Some(records) => {
            cost_digest(records) == receipt.cost_digest && cost_totals(records) == receipt.totals
        }
        None => true,
    }
}
