//! Answering "who did what, under which policy, at what cost" from the
//! records a network keeps: mailboxes, decision records, activities,
//! snapshot chains and receipts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bytes::{ContractId, Digest, EnvelopeId, SessionId};
use crate::checkpoint::{DecisionOutcome, DecisionRecord, PaymentRequest};
use crate::handlers::MailboxEntry;
use crate::identity::{EntityAddress, Intent};
use crate::runtime::{ContractMessage, NetEvent, Network};
use crate::trade::{verify_chain, verify_receipt, ContractState, CostRecord, Receipt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scope", content = "id", rename_all = "snake_case")]
pub enum AuditQuery {
    Session(SessionId),
    Contract(ContractId),
}

/// Money, cost and contract facts tied to one action.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EconomicLink {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contract_id: Option<ContractId>,
    /// Sequence of the snapshot this action produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_sequence: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payment_microusd: Option<u64>,
    /// Whether the ledger actually moved the payment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payment_settled: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cost: Vec<CostRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receipt_snapshot: Option<Digest>,
}

impl EconomicLink {
    fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditAction {
    pub envelope_id: EnvelopeId,
    pub intent: Intent,
    pub performed_by: EntityAddress,
    pub recipient: EntityAddress,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<SessionId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy_ref: Option<String>,
    pub received_at: u64,
    pub decisions: Vec<DecisionRecord>,
    pub escalated: bool,
    pub overridden: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub economic: Option<EconomicLink>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionAudit {
    pub sequence: u64,
    pub intent: Intent,
    pub actor: EntityAddress,
    pub state: ContractState,
    pub recorded_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractAudit {
    pub contract_id: ContractId,
    pub buyer: EntityAddress,
    pub seller: EntityAddress,
    pub arbiter: EntityAddress,
    pub state: ContractState,
    pub transitions: Vec<TransitionAudit>,
    pub chain_valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receipt_valid: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditAnswer {
    pub query: AuditQuery,
    pub actions: Vec<AuditAction>,
    pub contracts: Vec<ContractAudit>,
    /// Every action explained and every chain and receipt verified.
    pub complete: bool,
    pub gaps: Vec<String>,
}

/// The `contract_id` a payload names, if it is JSON and names one.
fn named_contract(plaintext: &[u8]) -> Option<ContractId> {
    let v: Value = serde_json::from_slice(plaintext).ok()?;
    serde_json::from_value(v.get("contract_id")?.clone()).ok()
}

fn is_economic(intent: &Intent) -> bool {
    intent.is_contract() || *intent == Intent::PAYMENT || *intent == Intent::RECEIPT
}

fn economic_link(net: &Network, entry: &MailboxEntry) -> EconomicLink {
    let env = &entry.envelope;
    let plain = &entry.plaintext.0;
    let mut link = EconomicLink::default();
    if env.intent == Intent::PAYMENT {
        if let Ok(req) = serde_json::from_slice::<PaymentRequest>(plain) {
            link.payment_microusd = Some(req.amount_microusd);
            link.payment_settled = Some(net.events().iter().any(
                |e| matches!(&e.event, NetEvent::Payment { envelope_id, .. } if *envelope_id == env.envelope_id),
            ));
        }
    }
    if env.intent == Intent::RECEIPT {
        if let Ok(r) = serde_json::from_slice::<Receipt>(plain) {
            link.contract_id = Some(r.contract_id);
            link.receipt_snapshot = Some(r.final_snapshot_hash);
        }
    } else if env.intent.is_contract() {
        link.contract_id = named_contract(plain);
        if let Ok(msg) = serde_json::from_slice::<ContractMessage>(plain) {
            link.cost = msg.cost_records;
        }
        if let Some(rec) = link.contract_id.and_then(|id| net.trade().get(&id)) {
            link.snapshot_sequence = rec
                .chain
                .iter()
                .find(|s| s.intent == env.intent && s.actor == env.sender && s.recorded_at == entry.received_at)
                .map(|s| s.sequence);
        }
    }
    // metered work (agent tokens, tool calls) is recorded on the activity
    for a in net.activities() {
        if a.inputs.contains(&env.envelope_id) && link.cost.is_empty() {
            link.cost = a.cost.clone();
        }
    }
    link
}

fn contract_audit(net: &Network, id: &ContractId) -> Option<ContractAudit> {
    let r = net.trade().get(id)?;
    let c = &r.contract;
    let report = verify_chain(&r.chain, &c.captured_cards.arbiter.signing_public);
    Some(ContractAudit {
        contract_id: *id,
        buyer: c.buyer,
        seller: c.seller,
        arbiter: c.arbiter,
        state: c.state,
        transitions: r
            .chain
            .iter()
            .map(|s| TransitionAudit {
                sequence: s.sequence,
                intent: s.intent.clone(),
                actor: s.actor,
                state: s.state,
                recorded_at: s.recorded_at,
            })
            .collect(),
        chain_valid: report.valid,
        first_failure: report.first_failure,
        receipt_valid: r
            .receipt
            .as_ref()
            .map(|rc| verify_receipt(rc, &c.captured_cards.arbiter, Some(&c.all_cost_records()))),
    })
}

/// Reconstruct every handled action in scope, in handling order.
pub fn audit(net: &Network, query: &AuditQuery) -> AuditAnswer {
    let mut entries: BTreeMap<EnvelopeId, &MailboxEntry> = BTreeMap::new();
    for host in net.tree().hosts() {
        for e in host.entities() {
            for m in e.mailbox.entries() {
                entries.insert(m.envelope.envelope_id, m);
            }
        }
    }
    let mut actions = Vec::new();
    let mut contract_ids = BTreeSet::new();
    let mut gaps = Vec::new();
    for id in net.handled() {
        let Some(entry) = entries.get(id) else {
            gaps.push(format!("{id}: handled but not in any mailbox"));
            continue;
        };
        let env = &entry.envelope;
        let in_scope = match query {
            AuditQuery::Session(s) => env.session_id == Some(*s),
            AuditQuery::Contract(c) => named_contract(&entry.plaintext.0) == Some(*c),
        };
        if !in_scope {
            continue;
        }
        let decisions: Vec<DecisionRecord> = net.decisions_for(id).into_iter().cloned().collect();
        let escalated = decisions.iter().any(|d| d.outcome == DecisionOutcome::Escalate);
        let overridden = decisions.iter().any(|d| d.outcome == DecisionOutcome::Approved);
        if decisions.is_empty() {
            gaps.push(format!("{id}: no decision records"));
        }
        if decisions
            .iter()
            .any(|d| matches!(d.outcome, DecisionOutcome::Reject | DecisionOutcome::Rejected))
        {
            gaps.push(format!("{id}: delivered despite a rejection"));
        }
        if escalated && !overridden {
            gaps.push(format!("{id}: escalated without an owner approval"));
        }
        let link = economic_link(net, entry);
        if is_economic(&env.intent) {
            let explained = match env.intent.as_str() {
                "PAYMENT" => link.payment_microusd.is_some(),
                "RECEIPT" => link.receipt_snapshot.is_some(),
                _ => link.contract_id.is_some(),
            };
            if !explained {
                gaps.push(format!("{id}: {} without economic linkage", env.intent));
            }
        }
        if let Some(c) = link.contract_id {
            contract_ids.insert(c);
        }
        actions.push(AuditAction {
            envelope_id: *id,
            intent: env.intent.clone(),
            performed_by: env.sender,
            recipient: env.recipient,
            session_id: env.session_id,
            policy_ref: env.policy_ref.clone(),
            received_at: entry.received_at,
            decisions,
            escalated,
            overridden,
            economic: (!link.is_empty()).then_some(link),
        });
    }
    if let AuditQuery::Contract(c) = query {
        contract_ids.insert(*c);
    }
    let mut contracts = Vec::new();
    for c in &contract_ids {
        match contract_audit(net, c) {
            Some(a) => {
                if !a.chain_valid {
                    gaps.push(format!("contract {c}: chain breaks at {:?}", a.first_failure));
                }
                if a.receipt_valid == Some(false) {
                    gaps.push(format!("contract {c}: receipt does not verify"));
                }
                contracts.push(a);
            }
            None => gaps.push(format!("contract {c}: unknown to the trade book")),
        }
    }
    AuditAnswer {
        query: *query,
        complete: gaps.is_empty(),
        actions,
        contracts,
        gaps,
    }
}
