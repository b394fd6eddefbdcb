//! Script vocabulary: steps that drive a network and expectations checked
//! against it. Entities, hosts, sessions, contracts and envelopes are named
//! by the script; raw addresses and hex ids are accepted too.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bytes::ApprovalId;
use crate::checkpoint::{CheckpointSpec, Resolution};
use crate::handlers::{HandlerBinding, ScriptedReply};
use crate::identity::{EntityKind, Intent};
use crate::trade::{ContractState, CostRecord, Fraction, FundingMode, Terms};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub name: String,
    pub seed: u64,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub entity: String,
    pub role: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub spend_ceiling_microusd: u64,
    #[serde(default)]
    pub token_ceiling: u64,
}

/// Contract fields by name; turned into a wire message by the executor.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractDetails {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buyer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seller: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arbiter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Terms>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub funding_mode: Option<FundingMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rework_limit: Option<u32>,
    /// Artifact names; each is hashed into its digest.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cost_records: Vec<CostRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buyer_fraction: Option<Fraction>,
}

fn yes() -> bool {
    true
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    Phase {
        name: String,
    },
    AddHost {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        parent: Option<String>,
    },
    Attach {
        parent: String,
        child: String,
    },
    Register {
        name: String,
        host: String,
        kind: EntityKind,
        binding: HandlerBinding,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pipeline: Option<Vec<CheckpointSpec>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        owner: Option<String>,
        #[serde(default = "yes")]
        discoverable: bool,
    },
    Provider {
        name: String,
        replies: Vec<ScriptedReply>,
    },
    Trust {
        owner: String,
        peer: String,
    },
    Befriend {
        a: String,
        b: String,
    },
    Session {
        name: String,
        participants: Vec<Member>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        policy_ref: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        budget: Option<BudgetSpec>,
    },
    Fund {
        entity: String,
        amount_microusd: u64,
    },
    Send {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        from: String,
        to: String,
        intent: Intent,
        #[serde(default)]
        body: Value,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        policy_ref: Option<String>,
        #[serde(default, skip_serializing_if = "is_false")]
        seal: bool,
    },
    Contract {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        from: String,
        to: String,
        intent: Intent,
        contract: String,
        #[serde(default)]
        details: ContractDetails,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session: Option<String>,
    },
    Decide {
        /// Label of the parked envelope ...
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        /// ... or the approval id itself.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        approval_id: Option<ApprovalId>,
        approve: bool,
    },
    Advance {
        ms: u64,
    },
    CutLink {
        a: String,
        b: String,
    },
    RestoreLink {
        a: String,
        b: String,
    },
    Flush {
        a: String,
        b: String,
    },
    Expect(Expectation),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "expect", rename_all = "snake_case")]
pub enum Expectation {
    /// The labelled envelope reached its handler exactly once.
    Delivered { label: String },
    /// Some checkpoint rejected it with `code`, and no handler ran.
    Rejected { label: String, code: String },
    /// Parked awaiting its owner.
    Parked { label: String },
    /// The sender holds an ERROR with `code` correlated to it.
    ErrorReply { label: String, code: String },
    /// The sender holds a reply of this intent correlated to it.
    Reply { label: String, intent: Intent },
    DecisionCount { code: String, count: usize },
    ApprovalCount { resolution: Resolution, count: usize },
    Discovered { at: String, entity: String },
    Queued { a: String, b: String, count: usize },
    ContractState { contract: String, state: ContractState },
    ChainValid { contract: String },
    ReceiptValid { contract: String },
    BudgetSpent { session: String, microusd: u64 },
    Balance { entity: String, available_microusd: u64 },
    AuditComplete { session: String },
}
