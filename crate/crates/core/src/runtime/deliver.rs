//! Hop processing: verification, routing, the terminal pipeline, parking and
//! owner resolutions, and error envelopes back to senders.

use super::messages::{ApprovalRequestBody, ErrorBody, NetEvent, TraceEntry};
use super::{Hop, Mail, NetError, Network};
use crate::bytes::ApprovalId;
use crate::checkpoint::{
    resume_pipeline, run_pipeline, validate_resolution, ApprovalError, ApprovalResponse,
    CheckContext, DecisionOutcome, DecisionRecord, Inbound, OwnerDecision, PendingApproval,
    Pipeline, PipelineRun, Resolution,
};
use crate::identity::{decrypt_payload, verify_envelope, EntityAddress, EntityKind, Envelope, HostUid, Intent, Payload};
use crate::routing::RouteDecision;
use crate::transport::frame_encode;

/// Where a pipeline run starts.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Start {
    Fresh,
    Resume {
        checkpoint_index: usize,
        approval_id: ApprovalId,
    },
}

/// Host notices skip the recipient's pipeline: they are the network talking
/// about mail the recipient already sent, or asking its owner for a decision.
fn is_host_notice(intent: &Intent) -> bool {
    [
        Intent::ERROR,
        Intent::DISCOVERY_DOC,
        Intent::APPROVAL_REQUEST,
        Intent::PONG,
    ]
    .contains(intent)
}

impl Network {
    pub(crate) fn step(&mut self, hop: Hop) {
        let Hop { env, at, origin } = hop;
        if at == origin && !self.signature_ok(&env, at) {
            return;
        }
        let decision = match self.tree.host(&at) {
            Ok(h) => h.route(&env.recipient),
            Err(_) => RouteDecision::Unroutable(format!("host {at} is gone")),
        };
        let now = self.now();
        self.traces.entry(env.envelope_id).or_default().push(TraceEntry {
            host: at,
            decision: decision.clone(),
            at: now,
        });
        match decision {
            RouteDecision::Local(_) => {
                if at != origin && !self.signature_ok(&env, at) {
                    return;
                }
                self.terminal(env, at);
            }
            RouteDecision::Child(next) => self.forward(at, next, env),
            RouteDecision::Parent => {
                let parent = self.tree.host(&at).ok().and_then(|h| h.parent());
                match parent {
                    Some(p) => self.forward(at, p, env),
                    None => self.bounce(&env, at, "UNROUTABLE", "no parent".into()),
                }
            }
            RouteDecision::Unroutable(why) => self.bounce(&env, at, "UNROUTABLE", why),
        }
    }

    fn signature_ok(&mut self, env: &Envelope, at: HostUid) -> bool {
        let verdict = match self.directory.get(&env.sender) {
            None => Err(("UNKNOWN_SENDER", format!("no card for {}", env.sender))),
            Some(card) => match verify_envelope(env, card) {
                Ok(true) => Ok(()),
                Ok(false) => Err(("BAD_SIGNATURE", "signature does not verify".to_owned())),
                Err(e) => Err(("BAD_SIGNATURE", e.to_string())),
            },
        };
        match verdict {
            Ok(()) => true,
            Err((code, why)) => {
                self.bounce(env, at, code, why);
                false
            }
        }
    }

    /// Send over the link if it is up and nothing is waiting ahead of us;
    /// otherwise join the offline queue so FIFO order holds.
    pub(crate) fn forward(&mut self, from: HostUid, to: HostUid, env: Envelope) {
        let Some(link) = self.links.get_mut(&(from, to)) else {
            self.bounce(&env, from, "UNROUTABLE", format!("no link {from} -> {to}"));
            return;
        };
        if link.state.is_connected() && link.queue.is_empty() {
            let frame = frame_encode(&env).expect("signed envelopes encode");
            if let Ok(bytes) = link.wire.transmit(&frame) {
                let env = crate::transport::frame_decode(&bytes).expect("wire carries frames intact");
                self.hops.push_back(Hop { env, at: to, origin: from });
                return;
            }
        }
        let id = env.envelope_id;
        match link.queue.push(env.clone()) {
            Ok(()) => self.emit(NetEvent::Queued {
                envelope_id: id,
                from,
                to,
            }),
            Err(full) => {
                self.emit(NetEvent::QueueFull {
                    envelope_id: id,
                    from,
                    to,
                });
                self.bounce(&env, from, "QUEUE_FULL", full.to_string());
            }
        }
    }

    fn terminal(&mut self, env: Envelope, at: HostUid) {
        let recipient = env.recipient;
        let Some(entity) = self.tree.local_entity(&recipient) else {
            self.bounce(&env, at, "UNKNOWN_ENTITY", format!("no entity {recipient} on {at}"));
            return;
        };
        let plaintext = match &env.payload {
            Payload::Plain(b) => b.0.clone(),
            Payload::Sealed(cp) => match decrypt_payload(cp, entity.keys()) {
                Ok(p) => p,
                Err(e) => {
                    self.bounce(&env, at, "DECRYPT_FAILED", e.to_string());
                    return;
                }
            },
        };
        if env.intent == Intent::APPROVAL_RESPONSE && recipient == EntityAddress::host_entity(at) {
            self.approval_response(env, plaintext, at);
            return;
        }
        let sender_is_host = self
            .directory
            .get(&env.sender)
            .is_some_and(|c| c.kind == EntityKind::Host);
        if sender_is_host && is_host_notice(&env.intent) {
            let now = self.now();
            self.decisions.push(DecisionRecord {
                envelope_id: env.envelope_id,
                sender: env.sender,
                recipient,
                intent: env.intent.clone(),
                checkpoint: "host_notice".into(),
                outcome: DecisionOutcome::Allow,
                code: None,
                reason: format!("{} from host {}", env.intent, env.sender.host),
                at: now,
                approval_id: None,
            });
            self.dispatch(env, plaintext, at);
            return;
        }
        self.admit(env, plaintext, at, Start::Fresh);
    }

    /// Run (or resume) the recipient's pipeline and act on the outcome.
    pub(crate) fn admit(&mut self, env: Envelope, plaintext: Vec<u8>, at: HostUid, start: Start) {
        let recipient = env.recipient;
        let now = self.now();
        let Some(sender_card) = self.directory.get(&env.sender).cloned() else {
            self.bounce(&env, at, "UNKNOWN_SENDER", format!("no card for {}", env.sender));
            return;
        };
        let Some(entity) = self.tree.local_entity_mut(&recipient) else {
            self.bounce(&env, at, "UNKNOWN_ENTITY", format!("no entity {recipient}"));
            return;
        };
        let recipient_card = entity.card.clone();
        let owner = entity.owner;
        let mut pipeline = std::mem::take(&mut entity.pipeline);

        let run = {
            let Network {
                tree,
                sessions,
                trade,
                decisions,
                rng,
                ..
            } = self;
            let host = tree.host(&at).expect("terminal host exists");
            let mail = Inbound {
                envelope: &env,
                plaintext: &plaintext,
                sender_card: &sender_card,
                recipient: &recipient_card,
            };
            let mut ctx = CheckContext {
                now,
                owner,
                trust: &host.trust,
                sessions,
                trade,
            };
            let mut mint = || ApprovalId::random(rng);
            match start {
                Start::Fresh => run_pipeline(&mut pipeline, &mail, &mut ctx, 0, decisions, &mut mint),
                Start::Resume {
                    checkpoint_index,
                    approval_id,
                } => resume_pipeline(
                    &mut pipeline,
                    &mail,
                    &mut ctx,
                    checkpoint_index,
                    approval_id,
                    decisions,
                    &mut mint,
                ),
            }
        };
        restore_pipeline(self, &recipient, pipeline);

        match run {
            PipelineRun::Admitted => self.dispatch(env, plaintext, at),
            PipelineRun::Rejected {
                checkpoint,
                code,
                message,
            } => {
                self.emit(NetEvent::Rejected {
                    envelope_id: env.envelope_id,
                    recipient,
                    checkpoint,
                    code: code.clone(),
                });
                self.bounce(&env, at, &code, message);
            }
            PipelineRun::Escalated {
                checkpoint_index,
                checkpoint,
                reason,
                approval_id,
            } => {
                let owner = owner.expect("escalation requires an owner");
                self.park(env, at, owner, checkpoint_index, checkpoint, reason, approval_id);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn park(
        &mut self,
        env: Envelope,
        at: HostUid,
        owner: EntityAddress,
        checkpoint_index: usize,
        checkpoint: String,
        reason: String,
        approval_id: ApprovalId,
    ) {
        let body = ApprovalRequestBody {
            approval_id,
            entity: env.recipient,
            envelope_id: env.envelope_id,
            sender: env.sender,
            intent: env.intent.clone(),
            checkpoint: checkpoint.clone(),
            reason: reason.clone(),
        };
        self.emit(NetEvent::Parked {
            envelope_id: env.envelope_id,
            approval_id,
            owner,
        });
        let session = env.session_id;
        let correlation = env.envelope_id;
        self.approvals.insert(
            approval_id,
            PendingApproval {
                approval_id,
                entity: env.recipient,
                envelope: env,
                requested_from: owner,
                checkpoint,
                checkpoint_index,
                reason,
                requested_at: self.now(),
                resolution: Resolution::Pending,
                resolved_at: None,
            },
        );
        let mut mail = Mail::json(owner, Intent::APPROVAL_REQUEST, &body);
        mail.session = session;
        mail.correlation = Some(correlation);
        self.enqueue(EntityAddress::host_entity(at), mail)
            .expect("host entities are local");
    }

    fn approval_response(&mut self, env: Envelope, plaintext: Vec<u8>, at: HostUid) {
        let outcome = self.check_response(&env, &plaintext);
        let (approval_id, decision) = match outcome {
            Ok(v) => v,
            Err(e) => {
                self.bounce(&env, at, e.code(), e.to_string());
                return;
            }
        };
        let now = self.now();
        let pending = self.approvals.get_mut(&approval_id).expect("checked above");
        pending.resolution = match decision {
            OwnerDecision::Approved => Resolution::Approved,
            OwnerDecision::Rejected => Resolution::Rejected,
        };
        pending.resolved_at = Some(now);
        let parked = pending.envelope.clone();
        let index = pending.checkpoint_index;
        let entity = pending.entity;
        self.decisions.push(DecisionRecord {
            envelope_id: parked.envelope_id,
            sender: parked.sender,
            recipient: parked.recipient,
            intent: parked.intent.clone(),
            checkpoint: "owner_resolution".into(),
            outcome: match decision {
                OwnerDecision::Approved => DecisionOutcome::Approved,
                OwnerDecision::Rejected => DecisionOutcome::Rejected,
            },
            code: (decision == OwnerDecision::Rejected).then(|| "OWNER_REJECTED".to_owned()),
            reason: format!("owner {} decided via {}", env.sender, env.envelope_id),
            at: now,
            approval_id: Some(approval_id),
        });
        self.emit(NetEvent::Resolved {
            approval_id,
            decision,
        });
        if let Some(host) = self.tree.local_entity_mut(&env.recipient) {
            host.mailbox.push(env, plaintext, now);
        }
        match decision {
            OwnerDecision::Rejected => {
                self.bounce(&parked, entity.host, "OWNER_REJECTED", format!("approval {approval_id} rejected"));
            }
            OwnerDecision::Approved => {
                let plaintext = match self.open_payload(&parked) {
                    Ok(p) => p,
                    Err(e) => {
                        self.bounce(&parked, entity.host, e.code(), e.to_string());
                        return;
                    }
                };
                self.admit(
                    parked,
                    plaintext,
                    entity.host,
                    Start::Resume {
                        checkpoint_index: index,
                        approval_id,
                    },
                );
            }
        }
    }

    /// Sign and send the owner's decision on `approval_id` to the host that
    /// parked the envelope. Fails up front if the approval is unknown or
    /// already resolved, leaving everything unchanged.
    pub fn owner_decide(&mut self, approval_id: ApprovalId, approve: bool) -> Result<(), NetError> {
        let p = self
            .approvals
            .get(&approval_id)
            .ok_or(ApprovalError::Unknown(approval_id))?;
        if p.resolution != Resolution::Pending {
            return Err(ApprovalError::AlreadyResolved(approval_id).into());
        }
        let (owner, host, session, parked) = (p.requested_from, p.entity.host, p.envelope.session_id, p.envelope.envelope_id);
        let body = ApprovalResponse {
            approval_id,
            decision: if approve {
                OwnerDecision::Approved
            } else {
                OwnerDecision::Rejected
            },
        };
        let mut mail = Mail::json(EntityAddress::host_entity(host), Intent::APPROVAL_RESPONSE, &body);
        mail.session = session;
        mail.correlation = Some(parked);
        self.send(owner, mail)?;
        Ok(())
    }

    pub(crate) fn check_response(
        &self,
        env: &Envelope,
        plaintext: &[u8],
    ) -> Result<(ApprovalId, OwnerDecision), ApprovalError> {
        let body: ApprovalResponse =
            serde_json::from_slice(plaintext).map_err(|e| ApprovalError::Malformed(e.to_string()))?;
        let pending = self
            .approvals
            .get(&body.approval_id)
            .ok_or(ApprovalError::Unknown(body.approval_id))?;
        let owner_card = self.directory.get(&env.sender).ok_or(ApprovalError::NotOwner)?;
        let decision = validate_resolution(pending, env, plaintext, owner_card)?;
        Ok((body.approval_id, decision))
    }

    pub(crate) fn open_payload(&self, env: &Envelope) -> Result<Vec<u8>, NetError> {
        match &env.payload {
            Payload::Plain(b) => Ok(b.0.clone()),
            Payload::Sealed(cp) => {
                let e = self
                    .tree
                    .local_entity(&env.recipient)
                    .ok_or(NetError::NotLocal(env.recipient))?;
                Ok(decrypt_payload(cp, e.keys())?)
            }
        }
    }

    /// Return an ERROR to the sender of `failed`, from the host entity at
    /// `at`. Errors about errors are dropped (and recorded) to avoid loops.
    pub(crate) fn bounce(&mut self, failed: &Envelope, at: HostUid, code: &str, message: String) {
        self.emit(NetEvent::Failed {
            envelope_id: failed.envelope_id,
            at_host: at,
            code: code.to_owned(),
        });
        if failed.intent == Intent::ERROR {
            self.emit(NetEvent::Dropped {
                envelope_id: failed.envelope_id,
                reason: format!("{code} while delivering an ERROR"),
            });
            return;
        }
        let body = ErrorBody {
            code: code.to_owned(),
            message,
            envelope_id: Some(failed.envelope_id),
        };
        let mut mail = Mail::json(failed.sender, Intent::ERROR, &body);
        mail.session = failed.session_id;
        mail.correlation = Some(failed.envelope_id);
        let host = EntityAddress::host_entity(at);
        if self.enqueue(host, mail).is_err() {
            self.emit(NetEvent::Dropped {
                envelope_id: failed.envelope_id,
                reason: format!("{code}: host {at} cannot sign errors"),
            });
        }
    }
}

fn restore_pipeline(net: &mut Network, who: &EntityAddress, pipeline: Pipeline) {
    if let Some(e) = net.tree.local_entity_mut(who) {
        e.pipeline = pipeline;
    }
}
