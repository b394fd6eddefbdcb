//! `fp`: operator CLI over the fp-core runtime. Every command maps to one
//! runtime operation; `--state-dir` makes a sequence of invocations act on
//! one persistent network.

mod store;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use fp_core::bytes::ApprovalId;
use fp_core::canonical::canonical_string;
use fp_core::checkpoint::{CheckpointSpec, PendingApproval};
use fp_core::handlers::{AdapterConfig, HandlerBinding, ToolEndpoint};
use fp_core::identity::{EntityKind, Intent, PublicKeyBytes};
use fp_core::reputation::{aggregate_profile, explain, ReputationConfig};
use fp_core::runtime::ErrorBody;
use fp_core::scenario::ai_company::{self, Variant};
use fp_core::scenario::{
    audit, run_script, AuditQuery, BudgetSpec, ContractDetails, Disposition, Member, ScenarioError,
    ScenarioScript, Step, StepOutput,
};
use fp_core::trade::{verify_chain_bytes, verify_receipt, CostRecord, Fraction, FundingMode, Receipt, Terms};

use store::Store;

#[derive(Debug)]
pub struct CliError {
    pub code: String,
    pub message: String,
}

impl CliError {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

fn bad(message: impl Into<String>) -> CliError {
    CliError::new("BAD_ARGUMENT", message)
}

#[derive(Parser)]
#[command(name = "fp", version, about = "Operate hosts, entities, sessions and contracts")]
struct Cli {
    /// Print canonical JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for keys and ids; fixed at the first command in a state dir.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory holding the command log and exported records.
    #[arg(long, global = true)]
    state_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ContractArgs {
    /// Acting entity.
    #[arg(long)]
    from: String,
    /// Contract name or id.
    #[arg(long)]
    contract: String,
    /// Recipient; defaults to the contract's arbiter.
    #[arg(long)]
    to: Option<String>,
    #[arg(long)]
    session: Option<String>,
    #[arg(long)]
    label: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Create a host, optionally as a child of another.
    HostInit {
        #[arg(long)]
        name: String,
        #[arg(long)]
        parent: Option<String>,
    },
    /// Link an existing child host under a parent.
    HostAttach {
        #[arg(long)]
        parent: String,
        #[arg(long)]
        child: String,
    },
    /// Register an entity and print its address.
    EntityRegister {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        name: String,
        /// Defaults to the first host created.
        #[arg(long)]
        host: Option<String>,
        /// human | agent:<provider> | tool:<server> | callback:<name>
        #[arg(long)]
        binding: Option<String>,
        #[arg(long)]
        owner: Option<String>,
        /// Intents that need the owner's sign-off (repeatable).
        #[arg(long)]
        gate: Vec<String>,
        /// Escalate CONTRACT_APPROVE and CONTRACT_ACCEPT to the owner.
        #[arg(long)]
        guard_contracts: bool,
        /// Full pipeline as a JSON array of checkpoint specs.
        #[arg(long)]
        pipeline: Option<String>,
        #[arg(long)]
        hidden: bool,
    },
    CardShow {
        entity: String,
    },
    TrustAdd {
        #[arg(long)]
        owner: String,
        #[arg(long)]
        peer: String,
        /// Also add the reverse edge.
        #[arg(long)]
        mutual: bool,
    },
    SessionOpen {
        #[arg(long)]
        name: String,
        /// entity[:role], repeatable.
        #[arg(long = "member", required = true)]
        members: Vec<String>,
        #[arg(long)]
        budget_microusd: Option<u64>,
        #[arg(long, default_value_t = 0)]
        token_ceiling: u64,
        #[arg(long)]
        policy: Option<String>,
    },
    /// Deposit into an entity's ledger account.
    Fund {
        #[arg(long)]
        entity: String,
        #[arg(long)]
        amount_microusd: u64,
    },
    Send {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        intent: String,
        /// JSON body.
        #[arg(long)]
        body: Option<String>,
        #[arg(long)]
        session: Option<String>,
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        seal: bool,
        #[arg(long)]
        label: Option<String>,
    },
    Inbox {
        entity: String,
        /// Reader; must be the entity or its owner.
        #[arg(long)]
        reader: Option<String>,
        #[arg(long, default_value_t = 0)]
        since: u64,
    },
    PendingList,
    /// Approve a parked envelope (approval id or send label).
    Approve {
        id: String,
    },
    Reject {
        id: String,
    },
    ContractPropose {
        #[command(flatten)]
        c: ContractArgs,
        #[arg(long)]
        buyer: String,
        #[arg(long)]
        seller: String,
        #[arg(long)]
        arbiter: String,
        #[arg(long)]
        price_microusd: u64,
        #[arg(long)]
        description: String,
        #[arg(long, default_value = "escrow")]
        funding: String,
        #[arg(long)]
        rework_limit: Option<u32>,
    },
    ContractAmend {
        #[command(flatten)]
        c: ContractArgs,
        #[arg(long)]
        price_microusd: u64,
        #[arg(long)]
        description: String,
    },
    ContractApprove {
        #[command(flatten)]
        c: ContractArgs,
    },
    ContractActivate {
        #[command(flatten)]
        c: ContractArgs,
    },
    ContractComplete {
        #[command(flatten)]
        c: ContractArgs,
        /// Artifact name, hashed into its digest (repeatable).
        #[arg(long)]
        artifact: Vec<String>,
        /// dimension=quantity, e.g. tokens=400 (repeatable).
        #[arg(long)]
        cost: Vec<String>,
    },
    ContractRework {
        #[command(flatten)]
        c: ContractArgs,
    },
    ContractAccept {
        #[command(flatten)]
        c: ContractArgs,
    },
    ContractSettle {
        #[command(flatten)]
        c: ContractArgs,
        /// Payment reference for direct-funded contracts.
        #[arg(long)]
        reference: Option<String>,
    },
    ContractDispute {
        #[command(flatten)]
        c: ContractArgs,
    },
    ContractResolve {
        #[command(flatten)]
        c: ContractArgs,
        /// Buyer's share as n/d.
        #[arg(long)]
        buyer_fraction: String,
    },
    ContractCancel {
        #[command(flatten)]
        c: ContractArgs,
    },
    ContractShow {
        contract: String,
    },
    /// Advance logical time, running due heartbeats.
    Advance {
        #[arg(long)]
        ms: u64,
    },
    ReputationShow {
        entity: String,
        #[arg(long)]
        explain: bool,
    },
    /// Verify an exported snapshot chain (and optionally a receipt).
    AuditVerify {
        #[arg(long)]
        chain: PathBuf,
        /// Arbiter signing key, hex; looked up in the state dir otherwise.
        #[arg(long)]
        arbiter_key: Option<String>,
        #[arg(long)]
        receipt: Option<PathBuf>,
    },
    AuditQuery {
        #[arg(long, conflicts_with = "contract")]
        session: Option<String>,
        #[arg(long)]
        contract: Option<String>,
    },
    /// Run a scenario script (built-in variant or a JSON file).
    ScenarioRun {
        #[arg(long, default_value = "ai-company")]
        variant: String,
        #[arg(long, conflicts_with = "variant")]
        script: Option<PathBuf>,
        /// Also write the canonical report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a built-in scenario script as canonical JSON.
    ScenarioShow {
        #[arg(long, default_value = "ai-company")]
        variant: String,
    },
}

/// What a command produced: a JSON value, its text rendering, and whether
/// it counts as success.
struct Output {
    value: Value,
    text: String,
    ok: bool,
    error: Option<CliError>,
}

impl Output {
    fn ok(value: Value, text: impl Into<String>) -> Self {
        Self {
            value,
            text: text.into(),
            ok: true,
            error: None,
        }
    }

    fn fail(value: Value, text: impl Into<String>, error: CliError) -> Self {
        Self {
            value,
            text: text.into(),
            ok: false,
            error: Some(error),
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    fp_core::canonical::to_value(v).expect("outputs hold finite numbers only")
}

fn parse_kind(s: &str) -> Result<EntityKind, CliError> {
    serde_json::from_value(Value::String(s.to_lowercase())).map_err(|_| bad(format!("unknown kind {s:?}")))
}

fn parse_intent(s: &str) -> Result<Intent, CliError> {
    Intent::from_str(&s.to_uppercase()).map_err(|e| bad(e.to_string()))
}

fn parse_binding(spec: Option<&str>, kind: EntityKind) -> Result<HandlerBinding, CliError> {
    let spec = spec.map(str::to_owned).unwrap_or_else(|| {
        match kind {
            EntityKind::Agent => "agent:echo",
            EntityKind::Tool => "tool:stub",
            EntityKind::Arbiter => "callback:arbiter",
            EntityKind::Organization => "callback:delegate",
            _ => "human",
        }
        .to_owned()
    });
    let (head, arg) = spec.split_once(':').unwrap_or((spec.as_str(), ""));
    Ok(match (head, arg) {
        ("human", _) => HandlerBinding::HumanInbox,
        ("agent", p) if !p.is_empty() => HandlerBinding::AgentAdapter(AdapterConfig::new(p)),
        ("tool", s) if !s.is_empty() => HandlerBinding::ToolBridge(ToolEndpoint::in_process(s)),
        ("callback", n) if !n.is_empty() => HandlerBinding::Callback(n.to_owned()),
        _ => return Err(bad(format!("bad binding {spec:?}"))),
    })
}

fn parse_cost(s: &str) -> Result<CostRecord, CliError> {
    let (dim, q) = s.split_once('=').ok_or_else(|| bad(format!("cost {s:?} is not dimension=quantity")))?;
    Ok(CostRecord {
        dimension: serde_json::from_value(Value::String(dim.to_owned()))
            .map_err(|_| bad(format!("unknown cost dimension {dim:?}")))?,
        quantity: q.parse().map_err(|_| bad(format!("bad quantity {q:?}")))?,
    })
}

fn parse_fraction(s: &str) -> Result<Fraction, CliError> {
    let (n, d) = s.split_once('/').ok_or_else(|| bad(format!("fraction {s:?} is not n/d")))?;
    let (n, d) = (
        n.parse().map_err(|_| bad(format!("bad numerator {n:?}")))?,
        d.parse().map_err(|_| bad(format!("bad denominator {d:?}")))?,
    );
    Ok(Fraction::new(n, d))
}

fn read_file(path: &PathBuf) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::new("IO", format!("{}: {e}", path.display())))
}

fn disposition_text(d: &Disposition) -> String {
    match d {
        Disposition::Delivered => "delivered".into(),
        Disposition::Parked { approval_id } => format!("parked awaiting owner, approval {approval_id}"),
        Disposition::Rejected { code } => format!("rejected {code}"),
        Disposition::Failed { code } => format!("failed {code}"),
        Disposition::Queued => "queued for an offline link".into(),
        Disposition::Unknown => "in flight".into(),
    }
}

/// Outcome of a send: rejections, failures and ERROR replies are failures.
fn sent(st: &Store, out: StepOutput) -> Output {
    let value = to_json(&out);
    let StepOutput::Sent { envelope_id, disposition } = out else {
        return Output::ok(value, "done");
    };
    let text = format!("{envelope_id} {}", disposition_text(&disposition));
    match &disposition {
        Disposition::Rejected { code } | Disposition::Failed { code } => {
            return Output::fail(value, text, CliError::new(code.clone(), disposition_text(&disposition)))
        }
        _ => {}
    }
    let net = &st.sc.net;
    let sender = st.steps.last().and_then(|s| match s {
        Step::Send { from, .. } | Step::Contract { from, .. } => st.sc.entity(from).ok(),
        _ => None,
    });
    let error = sender.and_then(|a| net.entity(&a)).and_then(|e| {
        e.mailbox
            .entries()
            .iter()
            .filter(|m| m.envelope.intent == Intent::ERROR)
            .filter_map(|m| serde_json::from_slice::<ErrorBody>(&m.plaintext.0).ok())
            .find(|b| b.envelope_id == Some(envelope_id))
    });
    match error {
        Some(b) => Output::fail(value, text, CliError::new(b.code, b.message)),
        None => Output::ok(value, text),
    }
}

fn contract_step(c: ContractArgs, intent: Intent, details: ContractDetails, st: &Store) -> Result<Step, CliError> {
    let to = match c.to {
        Some(t) => t,
        None => match &details.arbiter {
            Some(a) => a.clone(),
            None => {
                let id = st.sc.contract(&c.contract);
                let r = st
                    .sc
                    .net
                    .trade()
                    .get(&id)
                    .ok_or_else(|| CliError::new("UNKNOWN_CONTRACT", format!("no contract {}", c.contract)))?;
                r.contract.arbiter.to_string()
            }
        },
    };
    Ok(Step::Contract {
        label: c.label,
        from: c.from,
        to,
        intent,
        contract: c.contract,
        details,
        session: c.session,
    })
}

fn decide(st: &mut Store, id: &str, approve: bool) -> Result<Output, CliError> {
    let step = match ApprovalId::from_str(id) {
        Ok(a) => Step::Decide {
            label: None,
            approval_id: Some(a),
            approve,
        },
        Err(_) => Step::Decide {
            label: Some(id.to_owned()),
            approval_id: None,
            approve,
        },
    };
    let out = st.exec(step)?;
    let text = match &out {
        StepOutput::Decided { approval_id, resolution } => format!("{approval_id} {resolution:?}").to_lowercase(),
        _ => "done".into(),
    };
    Ok(Output::ok(to_json(&out), text))
}

fn run(cli: Cli) -> Result<Output, CliError> {
    let mut st = Store::open(cli.state_dir.as_deref(), cli.seed)?;
    let simple = |st: &mut Store, step: Step| -> Result<Output, CliError> {
        let out = st.exec(step)?;
        let text = match &out {
            StepOutput::Host { name, uid } => format!("{name} {uid}"),
            StepOutput::Entity { card, .. } => card.address.to_string(),
            StepOutput::Trust { edges } => edges
                .iter()
                .map(|e| format!("{} trusts {}", e.owner, e.peer))
                .collect::<Vec<_>>()
                .join("\n"),
            StepOutput::Session { session_id, .. } => session_id.to_string(),
            StepOutput::Advanced { now, transitions } => format!("now {now}, {} liveness change(s)", transitions.len()),
            _ => "ok".into(),
        };
        Ok(Output::ok(to_json(&out), text))
    };
    match cli.cmd {
        Cmd::HostInit { name, parent } => simple(&mut st, Step::AddHost { name, parent }),
        Cmd::HostAttach { parent, child } => simple(&mut st, Step::Attach { parent, child }),
        Cmd::EntityRegister {
            kind,
            name,
            host,
            binding,
            owner,
            gate,
            guard_contracts,
            pipeline,
            hidden,
        } => {
            let kind = parse_kind(&kind)?;
            let host = host
                .or_else(|| st.first_host())
                .ok_or_else(|| CliError::new("NO_HOST", "run host-init first"))?;
            let mut specs: Option<Vec<CheckpointSpec>> = match pipeline {
                Some(p) => Some(serde_json::from_str(&p).map_err(|e| bad(format!("pipeline: {e}")))?),
                None => None,
            };
            if guard_contracts || !gate.is_empty() {
                let specs = specs.get_or_insert_with(CheckpointSpec::defaults);
                if guard_contracts {
                    for s in specs.iter_mut() {
                        if let CheckpointSpec::ContractApproval { guarded } = s {
                            *guarded = true;
                        }
                    }
                }
                if !gate.is_empty() {
                    specs.push(CheckpointSpec::OwnerGate {
                        name: "owner_gate".into(),
                        intents: gate.iter().map(|g| parse_intent(g)).collect::<Result<_, _>>()?,
                    });
                }
            }
            let binding = parse_binding(binding.as_deref(), kind)?;
            simple(
                &mut st,
                Step::Register {
                    name,
                    host,
                    kind,
                    binding,
                    pipeline: specs,
                    owner,
                    discoverable: !hidden,
                },
            )
        }
        Cmd::CardShow { entity } => {
            let card = st.sc.net.card(&st.sc.entity(&entity)?).map_err(ScenarioError::from)?;
            let text = format!(
                "{} {} ({:?})\nsigning    {}\nencryption {}",
                card.address, card.name, card.kind, card.signing_public, card.encryption_public
            );
            Ok(Output::ok(to_json(card), text))
        }
        Cmd::TrustAdd { owner, peer, mutual } => {
            let step = if mutual {
                Step::Befriend { a: owner, b: peer }
            } else {
                Step::Trust { owner, peer }
            };
            simple(&mut st, step)
        }
        Cmd::SessionOpen {
            name,
            members,
            budget_microusd,
            token_ceiling,
            policy,
        } => {
            let participants = members
                .iter()
                .map(|m| {
                    let (e, r) = m.split_once(':').map_or((m.as_str(), "member"), |(e, r)| (e, r));
                    Member {
                        entity: e.to_owned(),
                        role: r.to_owned(),
                    }
                })
                .collect();
            let budget = budget_microusd.map(|b| BudgetSpec {
                spend_ceiling_microusd: b,
                token_ceiling,
            });
            simple(
                &mut st,
                Step::Session {
                    name,
                    participants,
                    policy_ref: policy,
                    budget,
                },
            )
        }
        Cmd::Fund { entity, amount_microusd } => simple(&mut st, Step::Fund { entity, amount_microusd }),
        Cmd::Send {
            from,
            to,
            intent,
            body,
            session,
            policy,
            seal,
            label,
        } => {
            let body = match body {
                Some(b) => serde_json::from_str(&b).map_err(|e| bad(format!("body: {e}")))?,
                None => Value::Null,
            };
            let out = st.exec(Step::Send {
                label,
                from,
                to,
                intent: parse_intent(&intent)?,
                body,
                session,
                policy_ref: policy,
                seal,
            })?;
            Ok(sent(&st, out))
        }
        Cmd::Inbox { entity, reader, since } => {
            let who = st.sc.entity(&entity)?;
            let reader = match reader {
                Some(r) => st.sc.entity(&r)?,
                None => who,
            };
            let entries = st.sc.net.inbox(&who, &reader, since).map_err(ScenarioError::from)?;
            let text = entries
                .iter()
                .map(|e| {
                    format!(
                        "#{} t={} {} from {}: {}",
                        e.seq,
                        e.received_at,
                        e.envelope.intent,
                        e.envelope.sender,
                        String::from_utf8_lossy(&e.plaintext.0)
                    )
                })
                .collect::<Vec<_>>()
                .join("\n");
            Ok(Output::ok(to_json(&entries), text))
        }
        Cmd::PendingList => {
            let pending: Vec<&PendingApproval> = st.sc.net.pending_approvals();
            let text = pending
                .iter()
                .map(|p| {
                    format!(
                        "{} {} from {} to {} ({}: {})",
                        p.approval_id, p.envelope.intent, p.envelope.sender, p.entity, p.checkpoint, p.reason
                    )
                })
                .collect::<Vec<_>>()
                .join("\n");
            Ok(Output::ok(to_json(&pending), text))
        }
        Cmd::Approve { id } => decide(&mut st, &id, true),
        Cmd::Reject { id } => decide(&mut st, &id, false),
        Cmd::ContractShow { contract } => {
            let id = st.sc.contract(&contract);
            let r = st
                .sc
                .net
                .trade()
                .get(&id)
                .ok_or_else(|| CliError::new("UNKNOWN_CONTRACT", format!("no contract {contract}")))?;
            let c = &r.contract;
            let text = format!(
                "{} {}\nbuyer {} seller {} arbiter {}\nprice {} ({:?}), draft v{}, {} snapshot(s){}",
                c.contract_id,
                c.state,
                c.buyer,
                c.seller,
                c.arbiter,
                c.price(),
                c.funding_mode,
                c.draft_version,
                r.chain.len(),
                if r.receipt.is_some() { ", receipt issued" } else { "" }
            );
            Ok(Output::ok(to_json(r), text))
        }
        Cmd::Advance { ms } => simple(&mut st, Step::Advance { ms }),
        Cmd::ReputationShow { entity, explain: want } => {
            let who = st.sc.entity(&entity)?;
            let events = st.sc.reputation_events().remove(&who).unwrap_or_default();
            let cfg = ReputationConfig::default();
            let now = st.sc.net.now();
            let profile = aggregate_profile(who, &events, now, &cfg).map_err(|e| CliError::new("REPUTATION", e.to_string()))?;
            let mut text = format!("{} overall {:.4} over {} contract(s)", who, profile.overall, events.len());
            for d in &profile.dimensions {
                text.push_str(&format!("\n  {:?} {:.4} (confidence {:.4})", d.dimension, d.value, d.confidence));
            }
            let value = if want {
                let ex = explain(&profile, &events, &cfg).map_err(|e| CliError::new("REPUTATION", e.to_string()))?;
                json!({ "profile": to_json(&profile), "explanation": to_json(&ex) })
            } else {
                to_json(&profile)
            };
            Ok(Output::ok(value, text))
        }
        Cmd::AuditVerify {
            chain,
            arbiter_key,
            receipt,
        } => {
            let bytes = read_file(&chain)?;
            let (key, arbiter_card) = match arbiter_key {
                Some(k) => (
                    PublicKeyBytes::from_str(&k).map_err(|e| bad(format!("arbiter key: {e}")))?,
                    None,
                ),
                None => {
                    // best-effort read of the contract id; the chain itself may be damaged
                    let id = serde_json::from_slice::<Value>(&bytes)
                        .ok()
                        .and_then(|v| v.get(0)?.get("contract_id")?.as_str().map(str::to_owned))
                        .ok_or_else(|| bad("cannot tell which contract this chain belongs to; pass --arbiter-key"))?;
                    let r = st
                        .sc
                        .net
                        .trade()
                        .get(&st.sc.contract(&id))
                        .ok_or_else(|| CliError::new("UNKNOWN_CONTRACT", format!("no contract {id} in state")))?;
                    let card = r.contract.captured_cards.arbiter.clone();
                    (card.signing_public, Some(card))
                }
            };
            let report = verify_chain_bytes(&bytes, &key);
            let mut value = json!({ "chain": to_json(&report) });
            let mut text = match report.first_failure {
                None => format!("chain ok, {} snapshot(s)", report.length),
                Some(i) => format!("chain broken at index {i} ({:?})", report.fault.expect("fault accompanies index")),
            };
            let mut ok = report.valid;
            if let Some(path) = receipt {
                let r: Receipt = serde_json::from_slice(&read_file(&path)?).map_err(|e| bad(format!("receipt: {e}")))?;
                let card = match arbiter_card {
                    Some(c) => c,
                    None => st.sc.net.card(&r.arbiter).map_err(ScenarioError::from)?.clone(),
                };
                let costs = st.sc.net.trade().get(&r.contract_id).map(|c| c.contract.all_cost_records());
                let valid = verify_receipt(&r, &card, costs.as_deref());
                value["receipt_valid"] = json!(valid);
                text.push_str(if valid { "\nreceipt ok" } else { "\nreceipt does not verify" });
                ok &= valid;
            }
            if ok {
                Ok(Output::ok(value, text))
            } else {
                let err = match report.first_failure {
                    Some(i) => CliError::new("CHAIN_BROKEN", format!("first broken link at index {i}")),
                    None => CliError::new("BAD_RECEIPT", "receipt does not verify"),
                };
                Ok(Output::fail(value, text, err))
            }
        }
        Cmd::AuditQuery { session, contract } => {
            let q = match (session, contract) {
                (Some(s), None) => AuditQuery::Session(st.sc.session(&s)?),
                (None, Some(c)) => AuditQuery::Contract(st.sc.contract(&c)),
                _ => return Err(bad("give --session or --contract")),
            };
            let ans = audit(&st.sc.net, &q);
            let mut text = String::new();
            for a in &ans.actions {
                text.push_str(&format!(
                    "{} {} by {} -> {} ({} decision(s){})\n",
                    a.envelope_id,
                    a.intent,
                    a.performed_by,
                    a.recipient,
                    a.decisions.len(),
                    if a.overridden { ", owner approved" } else { "" }
                ));
            }
            for c in &ans.contracts {
                text.push_str(&format!(
                    "contract {} {} chain_valid={} receipt_valid={:?}\n",
                    c.contract_id, c.state, c.chain_valid, c.receipt_valid
                ));
            }
            text.push_str(if ans.complete { "complete" } else { "INCOMPLETE" });
            for g in &ans.gaps {
                text.push_str(&format!("\n  gap: {g}"));
            }
            Ok(Output::ok(to_json(&ans), text))
        }
        Cmd::ScenarioShow { variant } => {
            let v = Variant::from_name(&variant).ok_or_else(|| bad(format!("unknown variant {variant:?}")))?;
            let s = ai_company::script(v, cli.seed.unwrap_or(ai_company::DEFAULT_SEED));
            Ok(Output::ok(to_json(&s), canonical_string(&s).expect("scripts encode")))
        }
        Cmd::ScenarioRun { variant, script, out } => {
            let mut s: ScenarioScript = match script {
                Some(path) => serde_json::from_slice(&read_file(&path)?).map_err(|e| bad(format!("script: {e}")))?,
                None => {
                    let v = Variant::from_name(&variant).ok_or_else(|| bad(format!("unknown variant {variant:?}")))?;
                    ai_company::script(v, ai_company::DEFAULT_SEED)
                }
            };
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            let run = run_script(&s)?;
            let report = run.report;
            if let Some(path) = out {
                std::fs::write(&path, report.to_canonical())
                    .map_err(|e| CliError::new("IO", format!("{}: {e}", path.display())))?;
            }
            let mut text = format!("{} (seed {})\n", report.scenario, report.seed);
            for p in &report.phases {
                let passed = p.assertions.iter().filter(|a| a.passed).count();
                text.push_str(&format!(
                    "  [{}] {} {}/{}\n",
                    if p.passed { "pass" } else { "FAIL" },
                    p.name,
                    passed,
                    p.assertions.len()
                ));
            }
            let phases_ok = report.phases.iter().filter(|p| p.passed).count();
            text.push_str(&format!("{phases_ok}/{} phases passed", report.phases.len()));
            let value = to_json(&report);
            if report.passed {
                Ok(Output::ok(value, text))
            } else {
                let at = report.aborted_at.map_or("?".into(), |i| i.to_string());
                Ok(Output::fail(value, text, CliError::new("SCENARIO_FAILED", format!("stopped at step {at}"))))
            }
        }
        Cmd::ContractPropose {
            c,
            buyer,
            seller,
            arbiter,
            price_microusd,
            description,
            funding,
            rework_limit,
        } => {
            let details = ContractDetails {
                buyer: Some(buyer),
                seller: Some(seller),
                arbiter: Some(arbiter),
                terms: Some(Terms {
                    description,
                    price_microusd,
                }),
                funding_mode: Some(FundingMode::from_str(&funding).map_err(bad)?),
                rework_limit,
                ..ContractDetails::default()
            };
            let step = contract_step(c, Intent::CONTRACT_PROPOSE, details, &st)?;
            let out = st.exec(step)?;
            Ok(sent(&st, out))
        }
        Cmd::ContractAmend {
            c,
            price_microusd,
            description,
        } => {
            let details = ContractDetails {
                terms: Some(Terms {
                    description,
                    price_microusd,
                }),
                ..ContractDetails::default()
            };
            let step = contract_step(c, Intent::CONTRACT_AMEND, details, &st)?;
            let out = st.exec(step)?;
            Ok(sent(&st, out))
        }
        Cmd::ContractComplete { c, artifact, cost } => {
            let details = ContractDetails {
                artifacts: artifact,
                cost_records: cost.iter().map(|s| parse_cost(s)).collect::<Result<_, _>>()?,
                ..ContractDetails::default()
            };
            let step = contract_step(c, Intent::CONTRACT_COMPLETE, details, &st)?;
            let out = st.exec(step)?;
            Ok(sent(&st, out))
        }
        Cmd::ContractSettle { c, reference } => {
            let details = ContractDetails {
                direct_reference: reference,
                ..ContractDetails::default()
            };
            let step = contract_step(c, Intent::CONTRACT_SETTLE, details, &st)?;
            let out = st.exec(step)?;
            Ok(sent(&st, out))
        }
        Cmd::ContractResolve { c, buyer_fraction } => {
            let details = ContractDetails {
                buyer_fraction: Some(parse_fraction(&buyer_fraction)?),
                ..ContractDetails::default()
            };
            let step = contract_step(c, Intent::CONTRACT_RESOLVE, details, &st)?;
            let out = st.exec(step)?;
            Ok(sent(&st, out))
        }
        Cmd::ContractApprove { c } => plain_transition(&mut st, c, Intent::CONTRACT_APPROVE),
        Cmd::ContractActivate { c } => plain_transition(&mut st, c, Intent::CONTRACT_ACTIVATE),
        Cmd::ContractRework { c } => plain_transition(&mut st, c, Intent::CONTRACT_REWORK),
        Cmd::ContractAccept { c } => plain_transition(&mut st, c, Intent::CONTRACT_ACCEPT),
        Cmd::ContractDispute { c } => plain_transition(&mut st, c, Intent::CONTRACT_DISPUTE),
        Cmd::ContractCancel { c } => plain_transition(&mut st, c, Intent::CONTRACT_CANCEL),
    }
}

fn plain_transition(st: &mut Store, c: ContractArgs, intent: Intent) -> Result<Output, CliError> {
    let step = contract_step(c, intent, ContractDetails::default(), st)?;
    let out = st.exec(step)?;
    Ok(sent(st, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json_mode = cli.json;
    let result = run(cli);
    match result {
        Ok(out) => {
            if json_mode {
                let mut v = out.value;
                if let Some(e) = &out.error {
                    v = json!({ "result": v, "error": { "code": e.code, "message": e.message } });
                }
                println!("{}", String::from_utf8(fp_core::canonical::encode_value(&v)).expect("utf-8"));
            } else {
                println!("{}", out.text);
                if let Some(e) = &out.error {
                    eprintln!("error [{}]: {}", e.code, e.message);
                }
            }
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            if json_mode {
                let v = json!({ "error": { "code": e.code, "message": e.message } });
                println!("{}", String::from_utf8(fp_core::canonical::encode_value(&v)).expect("utf-8"));
            } else {
                eprintln!("error [{}]: {}", e.code, e.message);
            }
            ExitCode::FAILURE
        }
    }
}
