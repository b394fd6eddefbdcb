//! Handler dispatch after admission, including the built-in callbacks every
//! network knows: `host`, `arbiter` and `delegate`.

use std::os::unix::net::UnixStream;

use serde_json::json;

use super::messages::{ContractMessage, ContractStateBody, ErrorBody, NetEvent};
use super::{Mail, Network};
use crate::bytes::{sha256, ContractId};
use crate::checkpoint::{ActivityKind, ActivityRecord, ActivityState, PaymentRequest};
use crate::handlers::{
    agent_execute, call_in_process, call_over_stream, serve_stream, AgentOutcome, HandlerBinding,
    ToolCallRequest, ToolCallResult, ToolEndpoint, ToolOutcome, ToolTransport,
};
use crate::identity::{EntityAddress, Envelope, HostUid, Intent};
use crate::trade::{capture, ContractState, CostDimension, CostRecord, TradeError, DEFAULT_REWORK_LIMIT};

/// What a custom callback sees.
pub struct CallbackCall<'a> {
    pub me: EntityAddress,
    pub envelope: &'a Envelope,
    pub plaintext: &'a [u8],
    pub now: u64,
}

/// Custom callbacks answer with mail to send as `me`.
pub type CallbackFn = Box<dyn FnMut(&CallbackCall<'_>) -> Vec<Mail>>;

fn error_body(code: &str, message: impl Into<String>, about: &Envelope) -> Vec<u8> {
    serde_json::to_vec(&ErrorBody {
        code: code.to_owned(),
        message: message.into(),
        envelope_id: Some(about.envelope_id),
    })
    .expect("error bodies serialize")
}

impl Network {
    /// Hand an admitted envelope to its recipient's handler.
    pub(crate) fn dispatch(&mut self, env: Envelope, plaintext: Vec<u8>, at: HostUid) {
        let me = env.recipient;
        let now = self.now();
        let Some(entity) = self.tree.local_entity_mut(&me) else {
            return;
        };
        entity.mailbox.push(env.clone(), plaintext.clone(), now);
        let binding = entity.binding.clone();
        self.handled.push(env.envelope_id);
        self.emit(NetEvent::Delivered {
            envelope_id: env.envelope_id,
            recipient: me,
            intent: env.intent.clone(),
        });
        match binding {
            HandlerBinding::HumanInbox => {}
            HandlerBinding::AgentAdapter(cfg) => {
                if env.intent == Intent::TASK {
                    self.run_agent(&cfg, &env, &plaintext);
                }
            }
            HandlerBinding::ToolBridge(ep) => {
                if env.intent == Intent::INVOKE {
                    self.run_tool(&ep, &env, &plaintext);
                }
            }
            HandlerBinding::Callback(name) => match name.as_str() {
                "host" => self.host_callback(&env, at),
                "arbiter" => self.arbiter_callback(&env, &plaintext),
                "delegate" => self.delegate_callback(&env, &plaintext),
                _ => self.custom_callback(&name, &env, &plaintext),
            },
        }
    }

    fn reply(&mut self, from: EntityAddress, original: &Envelope, intent: Intent, body: Vec<u8>) -> Option<crate::bytes::EnvelopeId> {
        self.enqueue(from, Mail::reply_to(original, intent, body)).ok()
    }

    fn open_activity(&mut self, kind: ActivityKind, actor: EntityAddress, env: &Envelope) -> usize {
        let activity_id = self.mint_activity();
        self.activities.push(ActivityRecord {
            activity_id,
            session_id: env.session_id,
            kind,
            state: ActivityState::Started,
            actor,
            inputs: vec![env.envelope_id],
            outputs: Vec::new(),
            cost: Vec::new(),
            started_at: self.now(),
            finished_at: None,
        });
        self.activities.len() - 1
    }

    fn close_activity(&mut self, idx: usize, ok: bool, output: Option<crate::bytes::EnvelopeId>, cost: Vec<CostRecord>) {
        let now = self.now();
        let a = &mut self.activities[idx];
        a.cost.extend(cost);
        let to = if ok { ActivityState::Completed } else { ActivityState::Failed };
        a.finish(to, output.into_iter().collect(), now)
            .expect("activities are closed once");
    }

    fn run_agent(&mut self, cfg: &crate::handlers::AdapterConfig, env: &Envelope, plaintext: &[u8]) {
        let me = env.recipient;
        let idx = self.open_activity(ActivityKind::Message, me, env);
        match agent_execute(cfg, plaintext, &mut self.providers, &mut self.sessions) {
            AgentOutcome::Reply { output, tokens } => {
                let out = self.reply(me, env, Intent::RESULT, output);
                let cost = vec![CostRecord {
                    dimension: CostDimension::Tokens,
                    quantity: tokens,
                }];
                self.close_activity(idx, true, out, cost);
            }
            AgentOutcome::Failure { code, message } => {
                let out = self.reply(me, env, Intent::ERROR, error_body(&code, message, env));
                self.close_activity(idx, false, out, Vec::new());
            }
        }
    }

    fn run_tool(&mut self, ep: &ToolEndpoint, env: &Envelope, plaintext: &[u8]) {
        let me = env.recipient;
        let idx = self.open_activity(ActivityKind::ToolInvocation, me, env);
        let req: ToolCallRequest = match serde_json::from_slice(plaintext) {
            Ok(r) => r,
            Err(e) => {
                let out = self.reply(me, env, Intent::ERROR, error_body("BAD_REQUEST", e.to_string(), env));
                self.close_activity(idx, false, out, Vec::new());
                return;
            }
        };
        let Some(server) = self.tool_servers.get(&ep.server).cloned() else {
            let out = self.reply(
                me,
                env,
                Intent::ERROR,
                error_body("NO_TOOL_SERVER", format!("no tool server {:?}", ep.server), env),
            );
            self.close_activity(idx, false, out, Vec::new());
            return;
        };
        let outcome = match ep.transport {
            ToolTransport::InProcess => call_in_process(&server, std::slice::from_ref(&req), ep.timeout_ms)
                .pop()
                .expect("one call, one outcome"),
            ToolTransport::Stream => match stream_call(&server, &req) {
                Ok(r) => ToolOutcome::Result(r),
                Err(message) => {
                    let out = self.reply(me, env, Intent::ERROR, error_body("TOOL_TRANSPORT", message, env));
                    self.close_activity(idx, false, out, Vec::new());
                    return;
                }
            },
        };
        let (intent, body, ok) = match outcome {
            ToolOutcome::Timeout { call_id, latency_ms } => (
                Intent::ERROR,
                error_body(
                    "TOOL_TIMEOUT",
                    format!("call {call_id} took {latency_ms} ms, limit {}", ep.timeout_ms),
                    env,
                ),
                false,
            ),
            ToolOutcome::Result(ToolCallResult {
                error: Some(err),
                call_id,
                ..
            }) => (
                Intent::ERROR,
                error_body("TOOL_ERROR", format!("call {call_id}: {} {}", err.code, err.message), env),
                false,
            ),
            ToolOutcome::Result(r) => (Intent::RESULT, serde_json::to_vec(&r).expect("results serialize"), true),
        };
        let out = self.reply(me, env, intent, body);
        self.close_activity(idx, ok, out, Vec::new());
    }

    fn host_callback(&mut self, env: &Envelope, at: HostUid) {
        let me = env.recipient;
        if env.intent == Intent::DISCOVER {
            let body = match self.discover(at) {
                Ok(doc) => serde_json::to_vec(&doc).expect("documents serialize"),
                Err(e) => {
                    self.reply(me, env, Intent::ERROR, error_body(e.code(), e.to_string(), env));
                    return;
                }
            };
            self.reply(me, env, Intent::DISCOVERY_DOC, body);
        } else if env.intent == Intent::PING {
            self.reply(me, env, Intent::PONG, Vec::new());
        }
    }

    fn state_body(&self, id: &ContractId) -> Vec<u8> {
        let r = self.trade.get(id).expect("contract exists");
        let body = ContractStateBody {
            contract_id: *id,
            state: r.contract.state,
            draft_version: r.contract.draft_version,
            chain_length: r.chain.len(),
            head_hash: r.chain.last().expect("chains are never empty").hash,
            receipt: r.receipt.clone(),
        };
        serde_json::to_vec(&body).expect("state bodies serialize")
    }

    fn arbiter_callback(&mut self, env: &Envelope, plaintext: &[u8]) {
        let me = env.recipient;
        if !env.intent.is_contract() || env.intent == Intent::CONTRACT_STATE {
            return;
        }
        let msg: ContractMessage = match serde_json::from_slice(plaintext) {
            Ok(m) => m,
            Err(e) => {
                self.reply(me, env, Intent::ERROR, error_body("BAD_REQUEST", e.to_string(), env));
                return;
            }
        };
        match self.arbitrate(me, env, &msg) {
            Ok(id) => {
                let body = self.state_body(&id);
                self.reply(me, env, Intent::CONTRACT_STATE, body);
            }
            Err((code, message)) => {
                self.reply(me, env, Intent::ERROR, error_body(&code, message, env));
            }
        }
    }

    fn arbitrate(&mut self, me: EntityAddress, env: &Envelope, msg: &ContractMessage) -> Result<ContractId, (String, String)> {
        let trade_err = |e: TradeError| (e.code().to_owned(), e.to_string());
        let now = self.now();
        let keys = self
            .tree
            .local_entity(&me)
            .expect("arbiter is local")
            .keys()
            .clone();
        if env.intent == Intent::CONTRACT_PROPOSE {
            let missing = |what: &str| ("BAD_REQUEST".to_owned(), format!("proposal needs {what}"));
            let buyer = msg.buyer.ok_or_else(|| missing("buyer"))?;
            let seller = msg.seller.ok_or_else(|| missing("seller"))?;
            let arbiter = msg.arbiter.unwrap_or(me);
            let card = |a: &EntityAddress| {
                self.directory
                    .get(a)
                    .cloned()
                    .ok_or_else(|| ("UNKNOWN_ENTITY".to_owned(), format!("no card for {a}")))
            };
            let cards = capture(&card(&buyer)?, &card(&seller)?, &card(&arbiter)?);
            let terms = msg.terms.clone().ok_or_else(|| missing("terms"))?;
            let id = match msg.contract_id {
                Some(id) => id,
                None => ContractId::random(&mut self.rng),
            };
            let rec = self
                .trade
                .propose(
                    id,
                    env.sender,
                    cards,
                    terms,
                    msg.funding_mode.unwrap_or(crate::trade::FundingMode::Escrow),
                    msg.rework_limit.unwrap_or(DEFAULT_REWORK_LIMIT),
                    &keys,
                    now,
                )
                .map_err(trade_err)?;
            let seq = rec.chain.len() as u64 - 1;
            self.emit(NetEvent::Contract {
                contract_id: id,
                from: ContractState::Draft,
                to: ContractState::Draft,
                intent: env.intent.clone(),
                actor: env.sender,
                sequence: seq,
            });
            return Ok(id);
        }
        let id = msg
            .contract_id
            .ok_or_else(|| ("BAD_REQUEST".to_owned(), format!("{} needs contract_id", env.intent)))?;
        let action = msg.action(&env.intent).map_err(|m| ("BAD_REQUEST".to_owned(), m))?;
        let outcome = self.trade.apply(&id, env.sender, action, &keys, now).map_err(trade_err)?;
        if let Some(snap) = &outcome.snapshot {
            self.emit(NetEvent::Contract {
                contract_id: id,
                from: outcome.from,
                to: outcome.to,
                intent: env.intent.clone(),
                actor: env.sender,
                sequence: snap.sequence,
            });
        }
        if env.intent == Intent::CONTRACT_COMPLETE && outcome.snapshot.is_some() {
            let idx = self.open_activity(ActivityKind::Delivery, env.sender, env);
            self.close_activity(idx, true, None, msg.cost_records.clone());
        }
        if let Some(receipt) = outcome.receipt {
            let idx = self.open_activity(ActivityKind::Settlement, me, env);
            let contract = &self.trade.get(&id).expect("settled contract exists").contract;
            let (buyer, seller) = (contract.buyer, contract.seller);
            let body = serde_json::to_vec(&receipt).expect("receipts serialize");
            let mut last = None;
            for party in [buyer, seller] {
                let mut mail = Mail::new(party, Intent::RECEIPT, body.clone());
                mail.session = env.session_id;
                mail.correlation = Some(env.envelope_id);
                last = self.enqueue(me, mail).ok().or(last);
            }
            let cost = receipt
                .totals
                .iter()
                .map(|(d, q)| CostRecord {
                    dimension: *d,
                    quantity: *q,
                })
                .collect();
            self.close_activity(idx, true, last, cost);
        }
        Ok(id)
    }

    /// An organisation-style entity that acts on its own behalf: forwards
    /// contract moves to the arbiter, pays invoices, acknowledges deploys.
    fn delegate_callback(&mut self, env: &Envelope, plaintext: &[u8]) {
        let me = env.recipient;
        if env.intent.is_contract() && env.intent != Intent::CONTRACT_STATE {
            let msg: ContractMessage = serde_json::from_slice(plaintext).unwrap_or_default();
            let arbiter = msg
                .arbiter
                .or_else(|| msg.contract_id.and_then(|id| self.trade.get(&id)).map(|r| r.contract.arbiter));
            let Some(arbiter) = arbiter else {
                self.reply(me, env, Intent::ERROR, error_body("BAD_REQUEST", "no arbiter named", env));
                return;
            };
            let mut mail = Mail::new(arbiter, env.intent.clone(), plaintext.to_vec());
            mail.session = env.session_id;
            mail.correlation = Some(env.envelope_id);
            mail.policy_ref = env.policy_ref.clone();
            let _ = self.enqueue(me, mail);
        } else if env.intent == Intent::PAYMENT {
            let Ok(req) = serde_json::from_slice::<PaymentRequest>(plaintext) else {
                return;
            };
            match self.trade.ledger.transfer(me, env.sender, req.amount_microusd) {
                Ok(()) => {
                    self.emit(NetEvent::Payment {
                        envelope_id: env.envelope_id,
                        payer: me,
                        payee: env.sender,
                        amount_microusd: req.amount_microusd,
                    });
                    let body = serde_json::to_vec(&json!({
                        "paid_microusd": req.amount_microusd,
                        "payment_digest": sha256(plaintext),
                    }))
                    .expect("json");
                    self.reply(me, env, Intent::RESULT, body);
                }
                Err(e) => {
                    self.reply(me, env, Intent::ERROR, error_body("INSUFFICIENT_FUNDS", e.to_string(), env));
                }
            }
        } else if env.intent == Intent::DEPLOY {
            self.emit(NetEvent::Deployed {
                envelope_id: env.envelope_id,
                by: env.sender,
            });
            self.reply(me, env, Intent::RESULT, br#"{"deployed":true}"#.to_vec());
        }
    }

    fn custom_callback(&mut self, name: &str, env: &Envelope, plaintext: &[u8]) {
        let me = env.recipient;
        let Some(mut f) = self.callbacks.remove(name) else {
            self.reply(
                me,
                env,
                Intent::ERROR,
                error_body("NO_HANDLER", format!("callback {name:?} is not registered"), env),
            );
            return;
        };
        let call = CallbackCall {
            me,
            envelope: env,
            plaintext,
            now: self.now(),
        };
        let out = f(&call);
        self.callbacks.insert(name.to_owned(), f);
        for mail in out {
            let _ = self.enqueue(me, mail);
        }
    }
}

/// One call over a fresh socket pair, server side on its own thread.
fn stream_call(server: &crate::handlers::SharedToolServer, req: &ToolCallRequest) -> Result<ToolCallResult, String> {
    let (mut client, srv_end) = UnixStream::pair().map_err(|e| e.to_string())?;
    let srv = server.clone();
    let worker = std::thread::spawn(move || serve_stream(srv, srv_end));
    let result = call_over_stream(&mut client, std::slice::from_ref(req)).map_err(|e| e.to_string());
    drop(client);
    worker
        .join()
        .map_err(|_| "tool server thread panicked".to_owned())?
        .map_err(|e| e.to_string())?;
    result.map(|mut v| v.remove(0))
}
