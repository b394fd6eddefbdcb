//! The end-to-end reference run: a small AI company on a three-host tree
//! delegating work to agents, calling a tool behind a flaky link, getting an
//! owner sign-off for a deploy, and buying GPU time through an arbitrated
//! escrow contract under a session budget.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::script::{BudgetSpec, ContractDetails, Expectation, Member, ScenarioScript, Step};
use crate::checkpoint::{CheckpointSpec, Resolution};
use crate::handlers::{AdapterConfig, HandlerBinding, ScriptedReply, ToolEndpoint};
use crate::identity::{EntityKind, Intent};
use crate::trade::{ContractState, CostDimension, CostRecord, FundingMode, Terms};

pub const DEFAULT_SEED: u64 = 2026;

pub const ORG_FUNDING: u64 = 10_000_000;
pub const CONTRACT_PRICE: u64 = 3_000_000;
pub const INVOICES: [u64; 3] = [1_500_000, 2_000_000, 2_500_000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Everything approved, budget 4.0 USD: the third invoice bounces.
    Default,
    /// Budget exactly 3.5 USD: the first two invoices fill it to the
    /// micro-dollar, the third bounces.
    TightBudget,
    /// The founder refuses the deploy.
    RejectDeploy,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Default, Variant::TightBudget, Variant::RejectDeploy];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Default => "ai-company",
            Variant::TightBudget => "ai-company-tight-budget",
            Variant::RejectDeploy => "ai-company-reject-deploy",
        }
    }

    pub fn from_name(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn budget(self) -> u64 {
        match self {
            Variant::TightBudget => 3_500_000,
            _ => 4_000_000,
        }
    }
}

/// Invoices that fit the budget in order, and how many bounce.
pub fn invoice_outcome(budget: u64) -> (u64, usize) {
    let mut spent = 0;
    let mut rejected = 0;
    for amount in INVOICES {
        if spent + amount <= budget {
            spent += amount;
        } else {
            rejected += 1;
        }
    }
    (spent, rejected)
}

struct B {
    steps: Vec<Step>,
}

fn s(x: &str) -> String {
    x.to_owned()
}

impl B {
    fn push(&mut self, step: Step) -> &mut Self {
        self.steps.push(step);
        self
    }

    fn phase(&mut self, name: &str) -> &mut Self {
        self.push(Step::Phase { name: s(name) })
    }

    fn expect(&mut self, e: Expectation) -> &mut Self {
        self.push(Step::Expect(e))
    }

    fn register(
        &mut self,
        name: &str,
        host: &str,
        kind: EntityKind,
        binding: HandlerBinding,
        pipeline: Option<Vec<CheckpointSpec>>,
        owner: Option<&str>,
    ) -> &mut Self {
        self.push(Step::Register {
            name: s(name),
            host: s(host),
            kind,
            binding,
            pipeline,
            owner: owner.map(s),
            discoverable: true,
        })
    }

    fn befriend(&mut self, a: &str, b: &str) -> &mut Self {
        self.push(Step::Befriend { a: s(a), b: s(b) })
    }

    fn send(&mut self, label: &str, from: &str, to: &str, intent: Intent, body: serde_json::Value, session: &str) -> &mut Self {
        self.push(Step::Send {
            label: Some(s(label)),
            from: s(from),
            to: s(to),
            intent,
            body,
            session: Some(s(session)),
            policy_ref: None,
            seal: false,
        })
    }

    fn contract(&mut self, label: &str, from: &str, intent: Intent, details: ContractDetails) -> &mut Self {
        self.push(Step::Contract {
            label: Some(s(label)),
            from: s(from),
            to: s("arbiter"),
            intent,
            contract: s("gpu-job"),
            details,
            session: Some(s("compute")),
        })
    }

    fn state(&mut self, state: ContractState) -> &mut Self {
        self.expect(Expectation::ContractState {
            contract: s("gpu-job"),
            state,
        })
    }

    fn delivered(&mut self, label: &str) -> &mut Self {
        self.expect(Expectation::Delivered { label: s(label) })
    }

    fn reply(&mut self, label: &str, intent: Intent) -> &mut Self {
        self.expect(Expectation::Reply { label: s(label), intent })
    }
}

fn agent() -> HandlerBinding {
    HandlerBinding::AgentAdapter(AdapterConfig::new("echo"))
}

fn members(names: &[&str]) -> Vec<Member> {
    names
        .iter()
        .map(|n| Member {
            entity: s(n),
            role: s(if *n == "arbiter" { "arbiter" } else { "member" }),
        })
        .collect()
}

pub fn script(variant: Variant, seed: u64) -> ScenarioScript {
    let mut b = B { steps: Vec::new() };

    b.phase("topology-and-identity")
        .push(Step::AddHost { name: s("cloud"), parent: None })
        .push(Step::AddHost {
            name: s("company"),
            parent: Some(s("cloud")),
        })
        .push(Step::AddHost {
            name: s("tools"),
            parent: Some(s("company")),
        })
        .register("founder", "company", EntityKind::Human, HandlerBinding::HumanInbox, None, None);
    let mut org_pipeline = CheckpointSpec::defaults();
    org_pipeline.push(CheckpointSpec::OwnerGate {
        name: s("deploy_approval"),
        intents: BTreeSet::from([Intent::DEPLOY]),
    });
    b.register(
        "organization",
        "company",
        EntityKind::Organization,
        HandlerBinding::Callback(s("delegate")),
        Some(org_pipeline),
        Some("founder"),
    );
    for name in ["planner", "developer", "reviewer"] {
        b.register(name, "company", EntityKind::Agent, agent(), None, None);
    }
    b.expect(Expectation::Discovered {
        at: s("company"),
        entity: s("planner"),
    });

    b.phase("services-and-trust")
        .push(Step::Provider {
            name: s("gpu-model"),
            replies: vec![ScriptedReply {
                output: s("{\"model\":\"trained\",\"epochs\":3}"),
                exit_status: 0,
                stderr: String::new(),
            }],
        })
        .register(
            "gpu",
            "cloud",
            EntityKind::Service,
            HandlerBinding::AgentAdapter(AdapterConfig::new("gpu-model")),
            None,
            None,
        )
        .register(
            "arbiter",
            "cloud",
            EntityKind::Arbiter,
            HandlerBinding::Callback(s("arbiter")),
            Some(vec![
                CheckpointSpec::Session {
                    exempt: crate::checkpoint::default_session_exempt(),
                },
                CheckpointSpec::RateLimit {
                    limit: crate::checkpoint::DEFAULT_RATE_LIMIT,
                    window_ms: crate::checkpoint::DEFAULT_RATE_WINDOW_MS,
                },
                CheckpointSpec::ContentLength {
                    limit: crate::checkpoint::DEFAULT_CONTENT_LIMIT,
                },
            ]),
            None,
        );
    let mut tool_pipeline = CheckpointSpec::defaults();
    for spec in &mut tool_pipeline {
        if let CheckpointSpec::PaymentVerify { chargeable } = spec {
            chargeable.clear();
        }
    }
    b.register(
        "code_search",
        "tools",
        EntityKind::Tool,
        HandlerBinding::ToolBridge(ToolEndpoint::in_process("stub")),
        Some(tool_pipeline),
        None,
    );
    for (x, y) in [
        ("founder", "planner"),
        ("planner", "developer"),
        ("planner", "reviewer"),
        ("developer", "code_search"),
        ("developer", "organization"),
        ("organization", "gpu"),
        ("organization", "arbiter"),
        ("gpu", "arbiter"),
    ] {
        b.befriend(x, y);
    }
    b.push(Step::Session {
        name: s("build"),
        participants: members(&["founder", "organization", "planner", "developer", "reviewer", "code_search"]),
        policy_ref: Some(s("policy/build-v1")),
        budget: None,
    })
    .push(Step::Session {
        name: s("compute"),
        participants: members(&["organization", "gpu", "arbiter"]),
        policy_ref: Some(s("policy/compute-v1")),
        budget: Some(BudgetSpec {
            spend_ceiling_microusd: variant.budget(),
            token_ceiling: 0,
        }),
    })
    .expect(Expectation::Discovered {
        at: s("company"),
        entity: s("gpu"),
    })
    .expect(Expectation::Discovered {
        at: s("company"),
        entity: s("code_search"),
    });

    b.phase("delegation-tools-and-sign-off")
        .send("plan", "founder", "planner", Intent::TASK, json!({"task": "plan the v1 release"}), "build")
        .delivered("plan")
        .reply("plan", Intent::RESULT)
        .send("implement", "planner", "developer", Intent::TASK, json!({"task": "implement the router"}), "build")
        .send("review", "planner", "reviewer", Intent::TASK, json!({"task": "review the router"}), "build")
        .delivered("implement")
        .delivered("review")
        .reply("implement", Intent::RESULT)
        .push(Step::CutLink {
            a: s("company"),
            b: s("tools"),
        })
        .send(
            "search",
            "developer",
            "code_search",
            Intent::INVOKE,
            json!({"name": "search", "arguments": {"query": "deploy"}, "call_id": "search-1"}),
            "build",
        )
        .expect(Expectation::Queued {
            a: s("company"),
            b: s("tools"),
            count: 1,
        })
        .push(Step::RestoreLink {
            a: s("company"),
            b: s("tools"),
        })
        .push(Step::Flush {
            a: s("company"),
            b: s("tools"),
        })
        .delivered("search")
        .reply("search", Intent::RESULT)
        .send("deploy", "developer", "organization", Intent::DEPLOY, json!({"build": "v1"}), "build")
        .expect(Expectation::Parked { label: s("deploy") });
    match variant {
        Variant::RejectDeploy => {
            b.push(Step::Decide {
                label: Some(s("deploy")),
                approval_id: None,
                approve: false,
            })
            .expect(Expectation::ErrorReply {
                label: s("deploy"),
                code: s("OWNER_REJECTED"),
            })
            .expect(Expectation::ApprovalCount {
                resolution: Resolution::Rejected,
                count: 1,
            });
        }
        _ => {
            b.push(Step::Decide {
                label: Some(s("deploy")),
                approval_id: None,
                approve: true,
            })
            .delivered("deploy")
            .reply("deploy", Intent::RESULT)
            .expect(Expectation::ApprovalCount {
                resolution: Resolution::Approved,
                count: 1,
            });
        }
    }

    b.phase("compute-contract")
        .push(Step::Fund {
            entity: s("organization"),
            amount_microusd: ORG_FUNDING,
        })
        .contract(
            "propose",
            "organization",
            Intent::CONTRACT_PROPOSE,
            ContractDetails {
                buyer: Some(s("organization")),
                seller: Some(s("gpu")),
                arbiter: Some(s("arbiter")),
                terms: Some(Terms {
                    description: s("fine-tune the release model on 8 GPUs"),
                    price_microusd: CONTRACT_PRICE,
                }),
                funding_mode: Some(FundingMode::Escrow),
                ..ContractDetails::default()
            },
        )
        .reply("propose", Intent::CONTRACT_STATE)
        .state(ContractState::Draft)
        .contract("seller-approves", "gpu", Intent::CONTRACT_APPROVE, ContractDetails::default())
        .contract("buyer-approves", "organization", Intent::CONTRACT_APPROVE, ContractDetails::default())
        .state(ContractState::Pending)
        .contract("activate", "arbiter", Intent::CONTRACT_ACTIVATE, ContractDetails::default())
        .state(ContractState::Active)
        .expect(Expectation::Balance {
            entity: s("organization"),
            available_microusd: ORG_FUNDING - CONTRACT_PRICE,
        })
        .send("train", "organization", "gpu", Intent::TASK, json!({"task": "train"}), "compute")
        .reply("train", Intent::RESULT);
    for (i, amount) in INVOICES.iter().enumerate() {
        b.send(
            &format!("invoice-{}", i + 1),
            "gpu",
            "organization",
            Intent::PAYMENT,
            json!({"amount_microusd": amount, "memo": format!("gpu hours, part {}", i + 1)}),
            "compute",
        );
    }
    let (spent, rejected) = invoice_outcome(variant.budget());
    b.delivered("invoice-1")
        .expect(Expectation::Rejected {
            label: s("invoice-3"),
            code: s("BUDGET_EXCEEDED"),
        })
        .expect(Expectation::DecisionCount {
            code: s("BUDGET_EXCEEDED"),
            count: rejected,
        })
        .expect(Expectation::BudgetSpent {
            session: s("compute"),
            microusd: spent,
        })
        .expect(Expectation::Balance {
            entity: s("gpu"),
            available_microusd: spent,
        })
        .contract(
            "complete",
            "gpu",
            Intent::CONTRACT_COMPLETE,
            ContractDetails {
                artifacts: vec![s("model-v1.safetensors"), s("training-log.txt")],
                cost_records: vec![
                    CostRecord {
                        dimension: CostDimension::ComputeHours,
                        quantity: 16_000,
                    },
                    CostRecord {
                        dimension: CostDimension::Tokens,
                        quantity: 4,
                    },
                    CostRecord {
                        dimension: CostDimension::Usd,
                        quantity: CONTRACT_PRICE,
                    },
                ],
                ..ContractDetails::default()
            },
        )
        .state(ContractState::Completing)
        .contract("accept", "organization", Intent::CONTRACT_ACCEPT, ContractDetails::default())
        .state(ContractState::Settling)
        .contract("settle", "arbiter", Intent::CONTRACT_SETTLE, ContractDetails::default())
        .state(ContractState::Settled)
        .expect(Expectation::Balance {
            entity: s("gpu"),
            available_microusd: spent + CONTRACT_PRICE,
        });

    b.phase("audit")
        .expect(Expectation::ChainValid { contract: s("gpu-job") })
        .expect(Expectation::ReceiptValid { contract: s("gpu-job") })
        .expect(Expectation::AuditComplete { session: s("build") })
        .expect(Expectation::AuditComplete { session: s("compute") });

    ScenarioScript {
        name: s(variant.name()),
        seed,
        steps: b.steps,
    }
}
