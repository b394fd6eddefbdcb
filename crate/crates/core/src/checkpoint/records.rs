use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bytes::{ActivityId, ApprovalId, EnvelopeId, SessionId};
use crate::canonical::canonical_encode;
use crate::identity::{EntityAddress, Envelope, Intent};
use crate::trade::CostRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub spend_ceiling_microusd: u64,
    pub token_ceiling: u64,
    pub spent_microusd: u64,
    pub tokens_used: u64,
}

impl Budget {
    pub fn new(spend_ceiling_microusd: u64, token_ceiling: u64) -> Self {
        Self {
            spend_ceiling_microusd,
            token_ceiling,
            spent_microusd: 0,
            tokens_used: 0,
        }
    }

    pub fn remaining_microusd(&self) -> u64 {
        self.spend_ceiling_microusd - self.spent_microusd
    }

    pub fn can_spend(&self, amount: u64) -> bool {
        amount <= self.remaining_microusd()
    }

    pub fn can_use_tokens(&self, tokens: u64) -> bool {
        tokens <= self.token_ceiling - self.tokens_used
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Active,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub address: EntityAddress,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: SessionId,
    pub participants: Vec<Participant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<Budget>,
    pub status: SessionStatus,
    pub created_at: u64,
}

impl SessionRecord {
    pub fn includes(&self, who: &EntityAddress) -> bool {
        self.participants.iter().any(|p| p.address == *who)
    }

    pub fn role_of(&self, who: &EntityAddress) -> Option<&str> {
        self.participants
            .iter()
            .find(|p| p.address == *who)
            .map(|p| p.role.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    Unknown(SessionId),
    #[error("session {0} already exists")]
    Duplicate(SessionId),
    #[error("session {0} is closed")]
    Closed(SessionId),
    #[error("session {0} has no budget")]
    NoBudget(SessionId),
    #[error("charge of {amount} exceeds remaining budget {remaining}")]
    BudgetExceeded { amount: u64, remaining: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStore {
    sessions: BTreeMap<SessionId, SessionRecord>,
}

impl SessionStore {
    pub fn open(
        &mut self,
        session_id: SessionId,
        participants: Vec<Participant>,
        policy_ref: Option<String>,
        budget: Option<Budget>,
        now: u64,
    ) -> Result<&SessionRecord, SessionError> {
        if self.sessions.contains_key(&session_id) {
            return Err(SessionError::Duplicate(session_id));
        }
        Ok(self.sessions.entry(session_id).or_insert(SessionRecord {
            session_id,
            participants,
            policy_ref,
            budget,
            status: SessionStatus::Active,
            created_at: now,
        }))
    }

    pub fn close(&mut self, id: &SessionId) -> Result<(), SessionError> {
        let s = self.sessions.get_mut(id).ok_or(SessionError::Unknown(*id))?;
        s.status = SessionStatus::Closed;
        Ok(())
    }

    pub fn get(&self, id: &SessionId) -> Option<&SessionRecord> {
        self.sessions.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &SessionRecord> {
        self.sessions.values()
    }

    fn budget_mut(&mut self, id: &SessionId) -> Result<&mut Budget, SessionError> {
        let s = self.sessions.get_mut(id).ok_or(SessionError::Unknown(*id))?;
        if s.status == SessionStatus::Closed {
            return Err(SessionError::Closed(*id));
        }
        s.budget.as_mut().ok_or(SessionError::NoBudget(*id))
    }

    /// Add `amount` to the session's spend, refusing anything past the ceiling.
    pub fn charge_spend(&mut self, id: &SessionId, amount: u64) -> Result<(), SessionError> {
        let b = self.budget_mut(id)?;
        if !b.can_spend(amount) {
            return Err(SessionError::BudgetExceeded {
                amount,
                remaining: b.remaining_microusd(),
            });
        }
        b.spent_microusd += amount;
        Ok(())
    }

    pub fn charge_tokens(&mut self, id: &SessionId, tokens: u64) -> Result<(), SessionError> {
        let b = self.budget_mut(id)?;
        if !b.can_use_tokens(tokens) {
            return Err(SessionError::BudgetExceeded {
                amount: tokens,
                remaining: b.token_ceiling - b.tokens_used,
            });
        }
        b.tokens_used += tokens;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Pending,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingApproval {
    pub approval_id: ApprovalId,
    pub envelope: Envelope,
    /// The guarded entity whose pipeline parked the envelope.
    pub entity: EntityAddress,
    pub requested_from: EntityAddress,
    pub checkpoint: String,
    pub checkpoint_index: usize,
    pub reason: String,
    pub requested_at: u64,
    pub resolution: Resolution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved_at: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionOutcome {
    Allow,
    Reject,
    Escalate,
    Approved,
    Rejected,
}

/// One checkpoint verdict (or owner resolution) about one envelope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub envelope_id: EnvelopeId,
    pub sender: EntityAddress,
    pub recipient: EntityAddress,
    pub intent: Intent,
    pub checkpoint: String,
    pub outcome: DecisionOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    pub reason: String,
    pub at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approval_id: Option<ApprovalId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    ToolInvocation,
    Delivery,
    Settlement,
    Message,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityState {
    Started,
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityRecord {
    pub activity_id: ActivityId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<SessionId>,
    pub kind: ActivityKind,
    pub state: ActivityState,
    pub actor: EntityAddress,
    pub inputs: Vec<EnvelopeId>,
    pub outputs: Vec<EnvelopeId>,
    #[serde(default)]
    pub cost: Vec<CostRecord>,
    pub started_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("activity cannot move from {from:?} to {to:?}")]
pub struct BackwardTransition {
    pub from: ActivityState,
    pub to: ActivityState,
}

impl ActivityRecord {
    /// Started -> Completed | Failed; nothing else.
    pub fn finish(
        &mut self,
        to: ActivityState,
        outputs: Vec<EnvelopeId>,
        now: u64,
    ) -> Result<(), BackwardTransition> {
        if self.state != ActivityState::Started || to == ActivityState::Started {
            return Err(BackwardTransition {
                from: self.state,
                to,
            });
        }
        self.state = to;
        self.outputs.extend(outputs);
        self.finished_at = Some(now);
        Ok(())
    }
}

/// One canonical-JSON record per line.
pub fn export_jsonl<T: Serialize>(records: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        out.extend(canonical_encode(r).expect("records contain no floats"));
        out.push(b'\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytes::FixedBytes;
    use crate::identity::{EntityUid, HostUid};

    #[test]
    fn budget_boundary() {
        let mut s = SessionStore::default();
        let id = SessionId(FixedBytes([1; 16]));
        s.open(id, vec![], None, Some(Budget::new(10, 0)), 0).unwrap();
        s.charge_spend(&id, 10).unwrap();
        assert!(matches!(
            s.charge_spend(&id, 1),
            Err(SessionError::BudgetExceeded { .. })
        ));
        assert_eq!(s.get(&id).unwrap().budget.unwrap().spent_microusd, 10);
    }

    #[test]
    fn activities_only_move_forward() {
        let mut a = ActivityRecord {
            activity_id: ActivityId(FixedBytes([0; 16])),
            session_id: None,
            kind: ActivityKind::Message,
            state: ActivityState::Started,
            actor: EntityAddress::new(HostUid(1), EntityUid(1)),
            inputs: vec![],
            outputs: vec![],
            cost: vec![],
            started_at: 0,
            finished_at: None,
        };
        a.finish(ActivityState::Completed, vec![], 1).unwrap();
        assert!(a.finish(ActivityState::Failed, vec![], 2).is_err());
    }

    #[test]
    fn jsonl_is_one_line_per_record() {
        let out = export_jsonl(&[Budget::new(1, 2), Budget::new(3, 4)]);
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("{\"spend_ceiling_microusd\":1,"));
    }
}
