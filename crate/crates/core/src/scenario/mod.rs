//! Named, replayable scripts over a [`Network`], with checked expectations,
//! a deterministic report and the audit view over what happened.

pub mod ai_company;
mod audit;
mod script;

pub use audit::{audit, AuditAction, AuditAnswer, AuditQuery, ContractAudit, EconomicLink, TransitionAudit};
pub use script::{BudgetSpec, ContractDetails, Expectation, Member, ScenarioScript, Step};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bytes::{sha256, ApprovalId, ContractId, Digest, EnvelopeId, FixedBytes, SessionId};
use crate::canonical::{canonical_encode, canonical_string};
use crate::checkpoint::{export_jsonl, Budget, DecisionOutcome, Participant, Resolution};
use crate::handlers::ScriptedProvider;
use crate::identity::{EntityAddress, EntityCard, HostUid, Intent};
use crate::reputation::{aggregate_profile, extract_event, ReputationConfig, ReputationEvent, ReputationProfile};
use crate::routing::TrustEdge;
use crate::runtime::{ContractMessage, EntitySpec, ErrorBody, Mail, NetError, NetEvent, Network};
use crate::trade::{verify_chain, verify_receipt, ContractState, Receipt};
use crate::transport::LivenessTransition;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown {kind} {name:?}")]
    UnknownName { kind: &'static str, name: String },
    #[error("{kind} {name:?} is already defined")]
    Duplicate { kind: &'static str, name: String },
    #[error("bad step: {0}")]
    BadStep(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("step {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<ScenarioError>,
    },
}

impl ScenarioError {
    /// Machine-readable code; network failures keep their own.
    pub fn code(&self) -> &'static str {
        match self {
            ScenarioError::UnknownName { .. } => "UNKNOWN_NAME",
            ScenarioError::Duplicate { .. } => "DUPLICATE_NAME",
            ScenarioError::BadStep(_) => "BAD_STEP",
            ScenarioError::Net(e) => e.code(),
            ScenarioError::Step { source, .. } => source.code(),
        }
    }
}

/// Where an envelope ended up, as far as the network can tell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Disposition {
    Delivered,
    Parked { approval_id: ApprovalId },
    Rejected { code: String },
    Failed { code: String },
    Queued,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "output", rename_all = "snake_case")]
pub enum StepOutput {
    Done,
    Host { name: String, uid: HostUid },
    Entity { name: String, card: EntityCard },
    Trust { edges: Vec<TrustEdge> },
    Session { name: String, session_id: SessionId },
    Sent { envelope_id: EnvelopeId, disposition: Disposition },
    Decided { approval_id: ApprovalId, resolution: Resolution },
    Advanced { now: u64, transitions: Vec<LivenessTransition> },
    Flushed { count: usize },
    Checked { passed: bool, detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionResult {
    pub step: usize,
    pub expectation: Expectation,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub name: String,
    pub assertions: Vec<AssertionResult>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digests {
    pub decisions: Digest,
    pub events: Digest,
    pub activities: Digest,
    pub chains: Digest,
    pub receipts: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractSummary {
    pub name: String,
    pub contract_id: ContractId,
    pub state: ContractState,
    pub chain_length: usize,
    pub chain_valid: bool,
    pub head_hash: Digest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receipt: Option<Receipt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub seed: u64,
    pub phases: Vec<PhaseReport>,
    pub passed: bool,
    /// Index of the failed expectation that stopped the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted_at: Option<usize>,
    pub decision_count: usize,
    pub digests: Digests,
    pub contracts: Vec<ContractSummary>,
    pub audits: BTreeMap<String, AuditAnswer>,
    pub reputation: Vec<ReputationProfile>,
}

impl ScenarioReport {
    pub fn to_canonical(&self) -> String {
        canonical_string(self).expect("reports hold finite numbers only")
    }
}

/// A network plus the names a script gave to its parts.
pub struct Scenario {
    seed: u64,
    pub net: Network,
    hosts: BTreeMap<String, HostUid>,
    entities: BTreeMap<String, EntityAddress>,
    sessions: BTreeMap<String, SessionId>,
    labels: BTreeMap<String, EnvelopeId>,
    contracts: BTreeMap<String, ContractId>,
}

fn unknown(kind: &'static str, name: &str) -> ScenarioError {
    ScenarioError::UnknownName {
        kind,
        name: name.to_owned(),
    }
}

fn insert_new<V>(map: &mut BTreeMap<String, V>, kind: &'static str, name: &str, v: V) -> Result<(), ScenarioError> {
    if map.contains_key(name) {
        return Err(ScenarioError::Duplicate {
            kind,
            name: name.to_owned(),
        });
    }
    map.insert(name.to_owned(), v);
    Ok(())
}

/// Contract ids in scripts are derived, so a replay names the same contract.
pub fn derive_contract_id(seed: u64, name: &str) -> ContractId {
    let mut input = seed.to_be_bytes().to_vec();
    input.extend_from_slice(name.as_bytes());
    let d = sha256(&input);
    let mut out = [0u8; 16];
    out.copy_from_slice(&d.0[..16]);
    ContractId(FixedBytes(out))
}

fn digest_of<T: Serialize>(records: &[T]) -> Digest {
    sha256(&export_jsonl(records))
}

impl Scenario {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            net: Network::new(seed),
            hosts: BTreeMap::new(),
            entities: BTreeMap::new(),
            sessions: BTreeMap::new(),
            labels: BTreeMap::new(),
            contracts: BTreeMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hosts(&self) -> &BTreeMap<String, HostUid> {
        &self.hosts
    }

    pub fn entities(&self) -> &BTreeMap<String, EntityAddress> {
        &self.entities
    }

    pub fn session_names(&self) -> &BTreeMap<String, SessionId> {
        &self.sessions
    }

    pub fn labels(&self) -> &BTreeMap<String, EnvelopeId> {
        &self.labels
    }

    pub fn contract_names(&self) -> &BTreeMap<String, ContractId> {
        &self.contracts
    }

    // ---- name resolution ---------------------------------------------------

    pub fn host(&self, name: &str) -> Result<HostUid, ScenarioError> {
        if let Some(h) = self.hosts.get(name) {
            return Ok(*h);
        }
        name.parse().map_err(|_| unknown("host", name))
    }

    /// Entity by name, a host name (its host entity) or a literal address.
    pub fn entity(&self, name: &str) -> Result<EntityAddress, ScenarioError> {
        if let Some(a) = self.entities.get(name) {
            return Ok(*a);
        }
        if let Some(h) = self.hosts.get(name) {
            return Ok(EntityAddress::host_entity(*h));
        }
        name.parse().map_err(|_| unknown("entity", name))
    }

    pub fn session(&self, name: &str) -> Result<SessionId, ScenarioError> {
        if let Some(s) = self.sessions.get(name) {
            return Ok(*s);
        }
        name.parse().map_err(|_| unknown("session", name))
    }

    pub fn label(&self, name: &str) -> Result<EnvelopeId, ScenarioError> {
        if let Some(s) = self.labels.get(name) {
            return Ok(*s);
        }
        name.parse().map_err(|_| unknown("label", name))
    }

    /// A known name, a literal id, or else a fresh derived id.
    pub fn contract(&self, name: &str) -> ContractId {
        if let Some(c) = self.contracts.get(name) {
            return *c;
        }
        name.parse().unwrap_or_else(|_| derive_contract_id(self.seed, name))
    }

    fn opt_entity(&self, name: &Option<String>) -> Result<Option<EntityAddress>, ScenarioError> {
        name.as_deref().map(|n| self.entity(n)).transpose()
    }

    fn opt_session(&self, name: &Option<String>) -> Result<Option<SessionId>, ScenarioError> {
        name.as_deref().map(|n| self.session(n)).transpose()
    }

    // ---- reads -----------------------------------------------------------

    pub fn disposition(&self, id: &EnvelopeId) -> Disposition {
        if self.net.handled().contains(id) {
            return Disposition::Delivered;
        }
        if let Some(p) = self
            .net
            .approvals()
            .values()
            .find(|p| p.envelope.envelope_id == *id && p.resolution == Resolution::Pending)
        {
            return Disposition::Parked {
                approval_id: p.approval_id,
            };
        }
        if let Some(d) = self
            .net
            .decisions_for(id)
            .into_iter()
            .rev()
            .find(|d| matches!(d.outcome, DecisionOutcome::Reject | DecisionOutcome::Rejected))
        {
            return Disposition::Rejected {
                code: d.code.clone().unwrap_or_default(),
            };
        }
        let failed = self.net.events().iter().rev().find_map(|e| match &e.event {
            NetEvent::Failed { envelope_id, code, .. } if envelope_id == id => Some(code.clone()),
            _ => None,
        });
        if let Some(code) = failed {
            return Disposition::Failed { code };
        }
        let queued = self.net.events().iter().any(|e| {
            matches!(&e.event, NetEvent::Queued { envelope_id, .. } if envelope_id == id)
        });
        if queued {
            Disposition::Queued
        } else {
            Disposition::Unknown
        }
    }

    // ---- steps -----------------------------------------------------------

    pub fn apply(&mut self, step: &Step) -> Result<StepOutput, ScenarioError> {
        match step {
            Step::Phase { .. } => Ok(StepOutput::Done),
            Step::AddHost { name, parent } => {
                if self.hosts.contains_key(name) {
                    return Err(ScenarioError::Duplicate {
                        kind: "host",
                        name: name.clone(),
                    });
                }
                let parent = parent.as_deref().map(|p| self.host(p)).transpose()?;
                let uid = self.net.add_host(name)?;
                self.hosts.insert(name.clone(), uid);
                if let Some(p) = parent {
                    self.net.attach(p, uid)?;
                }
                Ok(StepOutput::Host { name: name.clone(), uid })
            }
            Step::Attach { parent, child } => {
                let (p, c) = (self.host(parent)?, self.host(child)?);
                self.net.attach(p, c)?;
                Ok(StepOutput::Done)
            }
            Step::Register {
                name,
                host,
                kind,
                binding,
                pipeline,
                owner,
                discoverable,
            } => {
                if self.entities.contains_key(name) {
                    return Err(ScenarioError::Duplicate {
                        kind: "entity",
                        name: name.clone(),
                    });
                }
                let mut spec = EntitySpec::new(self.host(host)?, name.as_str(), *kind, binding.clone());
                if let Some(p) = pipeline {
                    spec = spec.pipeline(p);
                }
                if let Some(o) = self.opt_entity(owner)? {
                    spec = spec.owner(o);
                }
                if !discoverable {
                    spec = spec.hidden();
                }
                let addr = self.net.register(spec)?;
                self.entities.insert(name.clone(), addr);
                Ok(StepOutput::Entity {
                    name: name.clone(),
                    card: self.net.card(&addr)?.clone(),
                })
            }
            Step::Provider { name, replies } => {
                self.net
                    .register_provider(name, Box::new(ScriptedProvider::new(replies.clone())));
                Ok(StepOutput::Done)
            }
            Step::Trust { owner, peer } => {
                let edge = self.net.add_trust(self.entity(owner)?, self.entity(peer)?)?;
                Ok(StepOutput::Trust { edges: vec![edge] })
            }
            Step::Befriend { a, b } => {
                let (a, b) = (self.entity(a)?, self.entity(b)?);
                let e1 = self.net.add_trust(a, b)?;
                let e2 = self.net.add_trust(b, a)?;
                Ok(StepOutput::Trust { edges: vec![e1, e2] })
            }
            Step::Session {
                name,
                participants,
                policy_ref,
                budget,
            } => {
                if self.sessions.contains_key(name) {
                    return Err(ScenarioError::Duplicate {
                        kind: "session",
                        name: name.clone(),
                    });
                }
                let members = participants
                    .iter()
                    .map(|m| {
                        Ok(Participant {
                            address: self.entity(&m.entity)?,
                            role: m.role.clone(),
                        })
                    })
                    .collect::<Result<Vec<_>, ScenarioError>>()?;
                let budget = budget.map(|b| Budget::new(b.spend_ceiling_microusd, b.token_ceiling));
                let id = self.net.open_session(members, policy_ref.clone(), budget)?;
                self.sessions.insert(name.clone(), id);
                Ok(StepOutput::Session {
                    name: name.clone(),
                    session_id: id,
                })
            }
            Step::Fund {
                entity,
                amount_microusd,
            } => {
                self.net.fund(self.entity(entity)?, *amount_microusd)?;
                Ok(StepOutput::Done)
            }
            Step::Send {
                label,
                from,
                to,
                intent,
                body,
                session,
                policy_ref,
                seal,
            } => {
                let body = if body.is_null() {
                    Vec::new()
                } else {
                    canonical_encode(body).map_err(|e| ScenarioError::BadStep(e.to_string()))?
                };
                let mut mail = Mail::new(self.entity(to)?, intent.clone(), body);
                mail.session = self.opt_session(session)?;
                mail.policy_ref = policy_ref.clone();
                mail.seal = *seal;
                self.send(label, from, mail)
            }
            Step::Contract {
                label,
                from,
                to,
                intent,
                contract,
                details,
                session,
            } => {
                if !intent.is_contract() {
                    return Err(ScenarioError::BadStep(format!("{intent} is not a contract intent")));
                }
                let id = self.contract(contract);
                let msg = ContractMessage {
                    contract_id: Some(id),
                    buyer: self.opt_entity(&details.buyer)?,
                    seller: self.opt_entity(&details.seller)?,
                    arbiter: self.opt_entity(&details.arbiter)?,
                    terms: details.terms.clone(),
                    funding_mode: details.funding_mode,
                    rework_limit: details.rework_limit,
                    artifacts: details.artifacts.iter().map(|a| sha256(a.as_bytes())).collect(),
                    cost_records: details.cost_records.clone(),
                    direct_reference: details.direct_reference.clone(),
                    buyer_fraction: details.buyer_fraction,
                };
                self.contracts.entry(contract.clone()).or_insert(id);
                let mut mail = Mail::json(self.entity(to)?, intent.clone(), &msg);
                mail.session = self.opt_session(session)?;
                self.send(label, from, mail)
            }
            Step::Decide {
                label,
                approval_id,
                approve,
            } => {
                let id = match (label, approval_id) {
                    (_, Some(id)) => *id,
                    (Some(l), None) => {
                        let env = self.label(l)?;
                        self.net
                            .approvals()
                            .values()
                            .filter(|p| p.envelope.envelope_id == env)
                            .map(|p| p.approval_id)
                            .last()
                            .ok_or_else(|| unknown("approval for label", l))?
                    }
                    (None, None) => return Err(ScenarioError::BadStep("decide needs a label or an approval id".into())),
                };
                self.net.owner_decide(id, *approve)?;
                Ok(StepOutput::Decided {
                    approval_id: id,
                    resolution: self.net.approvals()[&id].resolution,
                })
            }
            Step::Advance { ms } => {
                let transitions = self.net.advance(*ms)?;
                Ok(StepOutput::Advanced {
                    now: self.net.now(),
                    transitions,
                })
            }
            Step::CutLink { a, b } => {
                self.net.cut_link(self.host(a)?, self.host(b)?)?;
                Ok(StepOutput::Done)
            }
            Step::RestoreLink { a, b } => {
                self.net.restore_link(self.host(a)?, self.host(b)?)?;
                Ok(StepOutput::Done)
            }
            Step::Flush { a, b } => {
                let count = self.net.flush_on_reconnect(self.host(a)?, self.host(b)?)?;
                Ok(StepOutput::Flushed { count })
            }
            Step::Expect(e) => {
                let (passed, detail) = self.check(e)?;
                Ok(StepOutput::Checked { passed, detail })
            }
        }
    }

    fn send(&mut self, label: &Option<String>, from: &str, mail: Mail) -> Result<StepOutput, ScenarioError> {
        if let Some(l) = label {
            if self.labels.contains_key(l) {
                return Err(ScenarioError::Duplicate {
                    kind: "label",
                    name: l.clone(),
                });
            }
        }
        let id = self.net.send(self.entity(from)?, mail)?;
        if let Some(l) = label {
            insert_new(&mut self.labels, "label", l, id)?;
        }
        Ok(StepOutput::Sent {
            envelope_id: id,
            disposition: self.disposition(&id),
        })
    }

    fn sender_mail(&self, id: &EnvelopeId) -> Result<Vec<crate::handlers::MailboxEntry>, ScenarioError> {
        let sender = self
            .net
            .events()
            .iter()
            .find_map(|e| match &e.event {
                NetEvent::Sent { envelope_id, sender, .. } if envelope_id == id => Some(*sender),
                _ => None,
            })
            .ok_or_else(|| unknown("envelope", &id.to_string()))?;
        Ok(self
            .net
            .entity(&sender)
            .map(|e| e.mailbox.entries().to_vec())
            .unwrap_or_default())
    }

    /// Evaluate one expectation: `(passed, what was observed)`.
    pub fn check(&self, e: &Expectation) -> Result<(bool, String), ScenarioError> {
        Ok(match e {
            Expectation::Delivered { label } => {
                let id = self.label(label)?;
                let n = self.net.handled().iter().filter(|h| **h == id).count();
                (n == 1, format!("handled {n} time(s)"))
            }
            Expectation::Rejected { label, code } => {
                let id = self.label(label)?;
                let hit = self
                    .net
                    .decisions_for(&id)
                    .iter()
                    .any(|d| d.outcome == DecisionOutcome::Reject && d.code.as_deref() == Some(code.as_str()));
                let handled = self.net.handled().contains(&id);
                (hit && !handled, format!("{:?}", self.disposition(&id)))
            }
            Expectation::Parked { label } => {
                let id = self.label(label)?;
                let d = self.disposition(&id);
                (matches!(d, Disposition::Parked { .. }), format!("{d:?}"))
            }
            Expectation::ErrorReply { label, code } => {
                let id = self.label(label)?;
                let codes: Vec<String> = self
                    .sender_mail(&id)?
                    .iter()
                    .filter(|m| m.envelope.intent == Intent::ERROR)
                    .filter_map(|m| serde_json::from_slice::<ErrorBody>(&m.plaintext.0).ok())
                    .filter(|b| b.envelope_id == Some(id))
                    .map(|b| b.code)
                    .collect();
                (codes.contains(code), format!("error codes {codes:?}"))
            }
            Expectation::Reply { label, intent } => {
                let id = self.label(label)?;
                let got: Vec<Intent> = self
                    .sender_mail(&id)?
                    .iter()
                    .filter(|m| m.envelope.correlation_id == Some(id))
                    .map(|m| m.envelope.intent.clone())
                    .collect();
                (got.contains(intent), format!("replies {got:?}"))
            }
            Expectation::DecisionCount { code, count } => {
                let n = self
                    .net
                    .decisions()
                    .iter()
                    .filter(|d| d.code.as_deref() == Some(code.as_str()))
                    .count();
                (n == *count, format!("{n} decision(s) with {code}"))
            }
            Expectation::ApprovalCount { resolution, count } => {
                let n = self
                    .net
                    .approvals()
                    .values()
                    .filter(|p| p.resolution == *resolution)
                    .count();
                (n == *count, format!("{n} approval(s) {resolution:?}"))
            }
            Expectation::Discovered { at, entity } => {
                let want = self.entity(entity)?;
                let found = self.net.discover(self.host(at)?)?;
                let hit = found
                    .documents
                    .iter()
                    .any(|d| d.entities.iter().any(|c| c.address == want));
                (hit, format!("{} document(s)", found.documents.len()))
            }
            Expectation::Queued { a, b, count } => {
                let n = self.net.queue_len(self.host(a)?, self.host(b)?);
                (n == *count, format!("{n} queued"))
            }
            Expectation::ContractState { contract, state } => match self.net.trade().get(&self.contract(contract)) {
                Some(r) => (r.contract.state == *state, format!("state {}", r.contract.state)),
                None => (false, "no such contract".into()),
            },
            Expectation::ChainValid { contract } => match self.net.trade().get(&self.contract(contract)) {
                Some(r) => {
                    let rep = verify_chain(&r.chain, &r.contract.captured_cards.arbiter.signing_public);
                    (rep.valid, format!("length {} first failure {:?}", rep.length, rep.first_failure))
                }
                None => (false, "no such contract".into()),
            },
            Expectation::ReceiptValid { contract } => match self.net.trade().get(&self.contract(contract)) {
                Some(r) => match &r.receipt {
                    Some(receipt) => {
                        let costs = r.contract.all_cost_records();
                        let ok = verify_receipt(receipt, &r.contract.captured_cards.arbiter, Some(&costs));
                        (ok, format!("receipt verifies: {ok}"))
                    }
                    None => (false, "no receipt".into()),
                },
                None => (false, "no such contract".into()),
            },
            Expectation::BudgetSpent { session, microusd } => {
                let spent = self
                    .net
                    .sessions()
                    .get(&self.session(session)?)
                    .and_then(|s| s.budget)
                    .map(|b| b.spent_microusd);
                (spent == Some(*microusd), format!("spent {spent:?}"))
            }
            Expectation::Balance {
                entity,
                available_microusd,
            } => {
                let a = self.net.trade().ledger.account(&self.entity(entity)?).available;
                (a == *available_microusd, format!("available {a}"))
            }
            Expectation::AuditComplete { session } => {
                let ans = audit(&self.net, &AuditQuery::Session(self.session(session)?));
                (
                    ans.complete,
                    format!("{} action(s), gaps {:?}", ans.actions.len(), ans.gaps),
                )
            }
        })
    }

    // ---- report ----------------------------------------------------------

    pub fn digests(&self) -> Digests {
        let records: Vec<_> = self.net.trade().contracts().collect();
        let chains: Vec<_> = records.iter().map(|r| &r.chain).collect();
        let receipts: Vec<_> = records.iter().filter_map(|r| r.receipt.as_ref()).collect();
        let events: Vec<_> = self.net.events().to_vec();
        Digests {
            decisions: digest_of(self.net.decisions()),
            events: digest_of(&events),
            activities: digest_of(self.net.activities()),
            chains: sha256(&canonical_encode(&chains).expect("chains encode")),
            receipts: sha256(&canonical_encode(&receipts).expect("receipts encode")),
        }
    }

    /// Reputation events for every finished contract, by seller.
    pub fn reputation_events(&self) -> BTreeMap<EntityAddress, Vec<ReputationEvent>> {
        let mut by_subject: BTreeMap<EntityAddress, Vec<_>> = BTreeMap::new();
        for r in self.net.trade().contracts() {
            if let Ok(ev) = extract_event(r, None) {
                by_subject.entry(ev.subject).or_default().push(ev);
            }
        }
        by_subject
    }

    /// Profiles for every seller with at least one finished contract.
    pub fn reputation(&self) -> Vec<ReputationProfile> {
        let cfg = ReputationConfig::default();
        self.reputation_events()
            .into_iter()
            .filter_map(|(s, evs)| aggregate_profile(s, &evs, self.net.now(), &cfg).ok())
            .collect()
    }

    pub fn contract_summaries(&self) -> Vec<ContractSummary> {
        self.contracts
            .iter()
            .filter_map(|(name, id)| {
                let r = self.net.trade().get(id)?;
                let head = r.chain.last()?;
                Some(ContractSummary {
                    name: name.clone(),
                    contract_id: *id,
                    state: r.contract.state,
                    chain_length: r.chain.len(),
                    chain_valid: verify_chain(&r.chain, &r.contract.captured_cards.arbiter.signing_public).valid,
                    head_hash: head.hash,
                    receipt: r.receipt.clone(),
                })
            })
            .collect()
    }
}

pub struct ScenarioRun {
    pub scenario: Scenario,
    pub report: ScenarioReport,
    /// Output of every step that ran, in order.
    pub outputs: Vec<StepOutput>,
}

/// Run a script from a fresh network. A failed expectation stops the run
/// and is reported; a step that cannot execute is an error.
pub fn run_script(script: &ScenarioScript) -> Result<ScenarioRun, ScenarioError> {
    let mut sc = Scenario::new(script.seed);
    let mut phases: Vec<PhaseReport> = Vec::new();
    let mut outputs = Vec::new();
    let mut aborted_at = None;
    for (index, step) in script.steps.iter().enumerate() {
        if let Step::Phase { name } = step {
            phases.push(PhaseReport {
                name: name.clone(),
                assertions: Vec::new(),
                passed: true,
            });
        }
        let out = sc.apply(step).map_err(|e| ScenarioError::Step {
            index,
            source: Box::new(e),
        })?;
        if let (Step::Expect(e), StepOutput::Checked { passed, detail }) = (step, &out) {
            if phases.is_empty() {
                phases.push(PhaseReport {
                    name: "main".into(),
                    assertions: Vec::new(),
                    passed: true,
                });
            }
            let phase = phases.last_mut().expect("a phase is open");
            phase.assertions.push(AssertionResult {
                step: index,
                expectation: e.clone(),
                passed: *passed,
                detail: detail.clone(),
            });
            phase.passed &= passed;
            if !passed {
                outputs.push(out);
                aborted_at = Some(index);
                break;
            }
        }
        outputs.push(out);
    }
    let audits = sc
        .sessions
        .iter()
        .map(|(name, id)| (name.clone(), audit(&sc.net, &AuditQuery::Session(*id))))
        .collect();
    let report = ScenarioReport {
        scenario: script.name.clone(),
        seed: script.seed,
        passed: aborted_at.is_none() && phases.iter().all(|p| p.passed),
        phases,
        aborted_at,
        decision_count: sc.net.decisions().len(),
        digests: sc.digests(),
        contracts: sc.contract_summaries(),
        audits,
        reputation: sc.reputation(),
    };
    Ok(ScenarioRun {
        scenario: sc,
        report,
        outputs,
    })
}
