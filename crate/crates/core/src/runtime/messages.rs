//! Payload bodies the runtime itself produces or interprets, and the event log.

use serde::{Deserialize, Serialize};

use crate::bytes::{ApprovalId, ContractId, Digest, EnvelopeId};
use crate::checkpoint::OwnerDecision;
use crate::identity::{EntityAddress, HostUid, Intent};
use crate::routing::RouteDecision;
use crate::trade::{
    ContractAction, ContractState, CostRecord, Fraction, FundingMode, Receipt, Terms,
};
use crate::transport::LivenessTransition;

/// Body of an ERROR envelope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope_id: Option<EnvelopeId>,
}

/// Body of an APPROVAL_REQUEST envelope sent to an owner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApprovalRequestBody {
    pub approval_id: ApprovalId,
    pub entity: EntityAddress,
    pub envelope_id: EnvelopeId,
    pub sender: EntityAddress,
    pub intent: Intent,
    pub checkpoint: String,
    pub reason: String,
}

/// Body of every CONTRACT_* request. Which fields matter depends on the intent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractMessage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contract_id: Option<ContractId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buyer: Option<EntityAddress>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seller: Option<EntityAddress>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arbiter: Option<EntityAddress>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Terms>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub funding_mode: Option<FundingMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rework_limit: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<Digest>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cost_records: Vec<CostRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buyer_fraction: Option<Fraction>,
}

impl ContractMessage {
    pub fn about(id: ContractId) -> Self {
        Self {
            contract_id: Some(id),
            ..Self::default()
        }
    }

    /// Map a transition intent plus this body onto a ledger action.
    pub fn action(&self, intent: &Intent) -> Result<ContractAction, String> {
        let need = |what: &str| format!("{intent} needs {what}");
        Ok(match intent.as_str() {
            "CONTRACT_AMEND" => ContractAction::Amend {
                terms: self.terms.clone().ok_or_else(|| need("terms"))?,
            },
            "CONTRACT_APPROVE" => ContractAction::Approve,
            "CONTRACT_ACTIVATE" => ContractAction::Activate,
            "CONTRACT_COMPLETE" => ContractAction::Complete {
                artifacts: self.artifacts.clone(),
                cost_records: self.cost_records.clone(),
            },
            "CONTRACT_REWORK" => ContractAction::Rework,
            "CONTRACT_ACCEPT" => ContractAction::Accept,
            "CONTRACT_SETTLE" => ContractAction::Settle {
                direct_reference: self.direct_reference.clone(),
            },
            "CONTRACT_CANCEL" => ContractAction::Cancel,
            "CONTRACT_DISPUTE" => ContractAction::Dispute,
            "CONTRACT_RESOLVE" => ContractAction::Resolve {
                buyer_fraction: self.buyer_fraction.ok_or_else(|| need("buyer_fraction"))?,
            },
            other => return Err(format!("{other} is not a contract transition")),
        })
    }
}

/// Body of a CONTRACT_STATE reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractStateBody {
    pub contract_id: ContractId,
    pub state: ContractState,
    pub draft_version: u32,
    pub chain_length: usize,
    pub head_hash: Digest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receipt: Option<Receipt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub host: HostUid,
    pub decision: RouteDecision,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum NetEvent {
    Sent {
        envelope_id: EnvelopeId,
        sender: EntityAddress,
        recipient: EntityAddress,
        intent: Intent,
    },
    Delivered {
        envelope_id: EnvelopeId,
        recipient: EntityAddress,
        intent: Intent,
    },
    Rejected {
        envelope_id: EnvelopeId,
        recipient: EntityAddress,
        checkpoint: String,
        code: String,
    },
    Failed {
        envelope_id: EnvelopeId,
        at_host: HostUid,
        code: String,
    },
    Parked {
        envelope_id: EnvelopeId,
        approval_id: ApprovalId,
        owner: EntityAddress,
    },
    Resolved {
        approval_id: ApprovalId,
        decision: OwnerDecision,
    },
    Queued {
        envelope_id: EnvelopeId,
        from: HostUid,
        to: HostUid,
    },
    QueueFull {
        envelope_id: EnvelopeId,
        from: HostUid,
        to: HostUid,
    },
    Flushed {
        from: HostUid,
        to: HostUid,
        count: usize,
    },
    Dropped {
        envelope_id: EnvelopeId,
        reason: String,
    },
    Liveness(LivenessTransition),
    Contract {
        contract_id: ContractId,
        from: ContractState,
        to: ContractState,
        intent: Intent,
        actor: EntityAddress,
        sequence: u64,
    },
    Payment {
        envelope_id: EnvelopeId,
        payer: EntityAddress,
        payee: EntityAddress,
        amount_microusd: u64,
    },
    Deployed {
        envelope_id: EnvelopeId,
        by: EntityAddress,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub at: u64,
    #[serde(flatten)]
    pub event: NetEvent,
}
