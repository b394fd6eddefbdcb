use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::builtin::*;
use super::records::{DecisionOutcome, DecisionRecord};
use crate::bytes::ApprovalId;
use crate::identity::Intent;

/// Declarative description of one checkpoint, so pipelines can be configured
/// from scripts and the CLI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "checkpoint", rename_all = "snake_case")]
pub enum CheckpointSpec {
    Friend,
    Session {
        #[serde(default = "default_session_exempt")]
        exempt: BTreeSet<Intent>,
    },
    RateLimit { limit: u32, window_ms: u64 },
    ContentLength { limit: usize },
    PaymentVerify { chargeable: BTreeSet<Intent> },
    ContractApproval { guarded: bool },
    PaymentApproval { auto_approve_microusd: u64 },
    OwnerGate { name: String, intents: BTreeSet<Intent> },
}

impl CheckpointSpec {
    pub fn build(&self) -> Box<dyn Checkpoint> {
        match self.clone() {
            CheckpointSpec::Friend => Box::new(Friend),
            CheckpointSpec::Session { exempt } => Box::new(Session { exempt }),
            CheckpointSpec::RateLimit { limit, window_ms } => Box::new(RateLimit::new(limit, window_ms)),
            CheckpointSpec::ContentLength { limit } => Box::new(ContentLength { limit }),
            CheckpointSpec::PaymentVerify { chargeable } => Box::new(PaymentVerify { chargeable }),
            CheckpointSpec::ContractApproval { guarded } => Box::new(ContractApproval { guarded }),
            CheckpointSpec::PaymentApproval {
                auto_approve_microusd,
            } => Box::new(PaymentApproval {
                auto_approve_microusd,
            }),
            CheckpointSpec::OwnerGate { name, intents } => Box::new(OwnerGate { name, intents }),
        }
    }

    /// The seven built-ins in their default priority order.
    pub fn defaults() -> Vec<CheckpointSpec> {
        vec![
            CheckpointSpec::Friend,
            CheckpointSpec::Session {
                exempt: default_session_exempt(),
            },
            CheckpointSpec::RateLimit {
                limit: DEFAULT_RATE_LIMIT,
                window_ms: DEFAULT_RATE_WINDOW_MS,
            },
            CheckpointSpec::ContentLength {
                limit: DEFAULT_CONTENT_LIMIT,
            },
            CheckpointSpec::PaymentVerify {
                chargeable: [Intent::INVOKE].into_iter().collect(),
            },
            CheckpointSpec::ContractApproval { guarded: false },
            CheckpointSpec::PaymentApproval {
                auto_approve_microusd: DEFAULT_AUTO_APPROVE_MICROUSD,
            },
        ]
    }
}

/// An ordered list of checkpoints. The first non-Allow verdict ends a run.
#[derive(Default)]
pub struct Pipeline {
    checkpoints: Vec<Box<dyn Checkpoint>>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}

impl Pipeline {
    pub fn from_specs(specs: &[CheckpointSpec]) -> Self {
        Self {
            checkpoints: specs.iter().map(CheckpointSpec::build).collect(),
        }
    }

    pub fn default_pipeline() -> Self {
        Self::from_specs(&CheckpointSpec::defaults())
    }

    pub fn push(&mut self, cp: Box<dyn Checkpoint>) {
        self.checkpoints.push(cp);
    }

    pub fn len(&self) -> usize {
        self.checkpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checkpoints.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.checkpoints.iter().map(|c| c.name().to_owned()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PipelineRun {
    Admitted,
    Rejected {
        checkpoint: String,
        code: String,
        message: String,
    },
    Escalated {
        checkpoint_index: usize,
        checkpoint: String,
        reason: String,
        approval_id: ApprovalId,
    },
}

fn record(
    mail: &Inbound<'_>,
    now: u64,
    checkpoint: &str,
    outcome: DecisionOutcome,
    code: Option<String>,
    reason: String,
    approval_id: Option<ApprovalId>,
) -> DecisionRecord {
    DecisionRecord {
        envelope_id: mail.envelope.envelope_id,
        sender: mail.envelope.sender,
        recipient: mail.envelope.recipient,
        intent: mail.envelope.intent.clone(),
        checkpoint: checkpoint.to_owned(),
        outcome,
        code,
        reason,
        at: now,
        approval_id,
    }
}

/// Evaluate checkpoints `start..` in order, appending one decision per
/// evaluated checkpoint to `log`. On admission every checkpoint commits.
pub fn run_pipeline(
    pipeline: &mut Pipeline,
    mail: &Inbound<'_>,
    ctx: &mut CheckContext<'_>,
    start: usize,
    log: &mut Vec<DecisionRecord>,
    mint_approval: &mut dyn FnMut() -> ApprovalId,
) -> PipelineRun {
    for index in start..pipeline.checkpoints.len() {
        let cp = &mut pipeline.checkpoints[index];
        let name = cp.name().to_owned();
        match cp.evaluate(mail, ctx) {
            Verdict::Allow(why) => {
                log.push(record(mail, ctx.now, &name, DecisionOutcome::Allow, None, why, None));
            }
            Verdict::Reject { code, message } => {
                log.push(record(
                    mail,
                    ctx.now,
                    &name,
                    DecisionOutcome::Reject,
                    Some(code.clone()),
                    message.clone(),
                    None,
                ));
                return PipelineRun::Rejected {
                    checkpoint: name,
                    code,
                    message,
                };
            }
            Verdict::Escalate(reason) => {
                let approval_id = mint_approval();
                log.push(record(
                    mail,
                    ctx.now,
                    &name,
                    DecisionOutcome::Escalate,
                    None,
                    reason.clone(),
                    Some(approval_id),
                ));
                return PipelineRun::Escalated {
                    checkpoint_index: index,
                    checkpoint: name,
                    reason,
                    approval_id,
                };
            }
        }
    }
    for cp in pipeline.checkpoints.iter_mut() {
        cp.commit(mail, ctx);
    }
    PipelineRun::Admitted
}

/// Continue a parked envelope after its owner approved: the escalating
/// checkpoint gets a last word, then evaluation resumes after it.
pub fn resume_pipeline(
    pipeline: &mut Pipeline,
    mail: &Inbound<'_>,
    ctx: &mut CheckContext<'_>,
    escalated_at: usize,
    approval_id: ApprovalId,
    log: &mut Vec<DecisionRecord>,
    mint_approval: &mut dyn FnMut() -> ApprovalId,
) -> PipelineRun {
    let cp = &mut pipeline.checkpoints[escalated_at];
    let name = cp.name().to_owned();
    match cp.on_owner_approved(mail, ctx) {
        Verdict::Reject { code, message } => {
            log.push(record(
                mail,
                ctx.now,
                &name,
                DecisionOutcome::Reject,
                Some(code.clone()),
                message.clone(),
                Some(approval_id),
            ));
            PipelineRun::Rejected {
                checkpoint: name,
                code,
                message,
            }
        }
        _ => run_pipeline(pipeline, mail, ctx, escalated_at + 1, log, mint_approval),
    }
}
