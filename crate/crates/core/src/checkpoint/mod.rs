//! Ordered policy enforcement on inbound mail, with decision records and
//! owner escalation. Also houses sessions, budgets and activity records.

mod builtin;
mod pipeline;
mod records;

pub use builtin::{
    default_session_exempt, CheckContext, Checkpoint, ContentLength, ContractApproval, Friend,
    Inbound, OwnerGate, PaymentApproval, PaymentProof, PaymentRequest, PaymentVerify, RateLimit,
    Session, Verdict, DEFAULT_AUTO_APPROVE_MICROUSD, DEFAULT_CONTENT_LIMIT, DEFAULT_RATE_LIMIT,
    DEFAULT_RATE_WINDOW_MS,
};
pub use pipeline::{resume_pipeline, run_pipeline, CheckpointSpec, Pipeline, PipelineRun};
pub use records::{
    export_jsonl, ActivityKind, ActivityRecord, ActivityState, BackwardTransition, Budget,
    DecisionOutcome, DecisionRecord, Participant, PendingApproval, Resolution, SessionError,
    SessionRecord, SessionStatus, SessionStore,
};

use serde::{Deserialize, Serialize};

use crate::bytes::ApprovalId;
use crate::identity::{verify_envelope, EntityCard, Envelope, Intent};

/// Body of an APPROVAL_RESPONSE envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApprovalResponse {
    pub approval_id: ApprovalId,
    pub decision: OwnerDecision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OwnerDecision {
    Approved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ApprovalError {
    #[error("unknown approval {0}")]
    Unknown(ApprovalId),
    #[error("approval {0} was already resolved")]
    AlreadyResolved(ApprovalId),
    #[error("resolver is not the designated owner")]
    NotOwner,
    #[error("owner signature does not verify")]
    BadSignature,
    #[error("malformed approval response: {0}")]
    Malformed(String),
}

impl ApprovalError {
    pub fn code(&self) -> &'static str {
        match self {
            ApprovalError::Unknown(_) => "UNKNOWN_APPROVAL",
            ApprovalError::AlreadyResolved(_) => "ALREADY_RESOLVED",
            ApprovalError::NotOwner => "NOT_OWNER",
            ApprovalError::BadSignature => "BAD_SIGNATURE",
            ApprovalError::Malformed(_) => "MALFORMED",
        }
    }
}

/// Check that `response` is a signed owner decision about `pending`.
/// `plaintext` is the (decrypted) response payload.
pub fn validate_resolution(
    pending: &PendingApproval,
    response: &Envelope,
    plaintext: &[u8],
    owner_card: &EntityCard,
) -> Result<OwnerDecision, ApprovalError> {
    if response.intent != Intent::APPROVAL_RESPONSE {
        return Err(ApprovalError::Malformed(format!("intent {}", response.intent)));
    }
    if response.sender != pending.requested_from || owner_card.address != pending.requested_from {
        return Err(ApprovalError::NotOwner);
    }
    if !matches!(verify_envelope(response, owner_card), Ok(true)) {
        return Err(ApprovalError::BadSignature);
    }
    let body: ApprovalResponse =
        serde_json::from_slice(plaintext).map_err(|e| ApprovalError::Malformed(e.to_string()))?;
    if body.approval_id != pending.approval_id {
        return Err(ApprovalError::Malformed("approval id mismatch".into()));
    }
    if pending.resolution != Resolution::Pending {
        return Err(ApprovalError::AlreadyResolved(pending.approval_id));
    }
    Ok(body.decision)
}
