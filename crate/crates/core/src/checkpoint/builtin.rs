//! The built-in checkpoints and the trait custom ones implement.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::records::SessionStatus;
use super::SessionStore;
use crate::bytes::ContractId;
use crate::identity::{EntityAddress, EntityCard, Envelope, Intent};
use crate::routing::{TrustStatus, TrustStore};
use crate::trade::{verify_receipt, ContractState, Receipt, TradeBook};

pub const DEFAULT_RATE_LIMIT: u32 = 60;
pub const DEFAULT_RATE_WINDOW_MS: u64 = 60_000;
pub const DEFAULT_CONTENT_LIMIT: usize = 65_536;
pub const DEFAULT_AUTO_APPROVE_MICROUSD: u64 = 5_000_000;

/// An inbound envelope after signature verification and decryption.
pub struct Inbound<'a> {
    pub envelope: &'a Envelope,
    pub plaintext: &'a [u8],
    pub sender_card: &'a EntityCard,
    pub recipient: &'a EntityCard,
}

/// Shared state a checkpoint may consult. Per-checkpoint state (rate windows)
/// lives inside the checkpoint itself.
pub struct CheckContext<'a> {
    pub now: u64,
    pub owner: Option<EntityAddress>,
    pub trust: &'a TrustStore,
    pub sessions: &'a mut SessionStore,
    pub trade: &'a TradeBook,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Allow(String),
    Reject { code: String, message: String },
    Escalate(String),
}

impl Verdict {
    pub fn allow(why: impl Into<String>) -> Self {
        Verdict::Allow(why.into())
    }

    pub fn reject(code: &str, message: impl Into<String>) -> Self {
        Verdict::Reject {
            code: code.to_owned(),
            message: message.into(),
        }
    }
}

pub trait Checkpoint {
    fn name(&self) -> &str;

    fn evaluate(&mut self, mail: &Inbound<'_>, ctx: &mut CheckContext<'_>) -> Verdict;

    /// Called when the owner approves an envelope this checkpoint escalated;
    /// a late `Reject` (e.g. budget spent meanwhile) still wins.
    fn on_owner_approved(&mut self, _mail: &Inbound<'_>, _ctx: &mut CheckContext<'_>) -> Verdict {
        Verdict::allow("owner approved")
    }

    /// Called once the envelope is admitted by the whole pipeline.
    fn commit(&mut self, _mail: &Inbound<'_>, _ctx: &mut CheckContext<'_>) {}
}

fn escalate_to_owner(ctx: &CheckContext<'_>, reason: String) -> Verdict {
    match ctx.owner {
        Some(_) => Verdict::Escalate(reason),
        None => Verdict::reject("NO_OWNER", format!("{reason}, but no owner is designated")),
    }
}

pub struct Friend;

impl Checkpoint for Friend {
    fn name(&self) -> &str {
        "friend"
    }

    fn evaluate(&mut self, mail: &Inbound<'_>, ctx: &mut CheckContext<'_>) -> Verdict {
        match ctx.trust.status(&mail.recipient.address, mail.sender_card) {
            TrustStatus::Trusted => Verdict::allow("sender is a trusted peer"),
            TrustStatus::Untrusted => Verdict::reject(
                "NOT_FRIEND",
                format!("{} has no trust edge to {}", mail.recipient.address, mail.sender_card.address),
            ),
            TrustStatus::CardChanged => Verdict::reject(
                "CARD_CHANGED",
                format!("card of {} no longer matches the pinned fingerprint", mail.sender_card.address),
            ),
        }
    }
}

pub fn default_session_exempt() -> BTreeSet<Intent> {
    [
        Intent::DISCOVER,
        Intent::PING,
        Intent::PONG,
        Intent::APPROVAL_RESPONSE,
        Intent::ERROR,
    ]
    .into_iter()
    .collect()
}

pub struct Session {
    pub exempt: BTreeSet<Intent>,
}

impl Checkpoint for Session {
    fn name(&self) -> &str {
        "session"
    }

    fn evaluate(&mut self, mail: &Inbound<'_>, ctx: &mut CheckContext<'_>) -> Verdict {
        let env = mail.envelope;
        if self.exempt.contains(&env.intent) {
            return Verdict::allow(format!("{} is session-exempt", env.intent));
        }
        let Some(id) = env.session_id else {
            return Verdict::reject("NO_SESSION", "envelope names no session");
        };
        let Some(s) = ctx.sessions.get(&id) else {
            return Verdict::reject("NO_SESSION", format!("unknown session {id}"));
        };
        if s.status == SessionStatus::Closed {
            return Verdict::reject("SESSION_CLOSED", format!("session {id} is closed"));
        }
        for who in [&env.sender, &env.recipient] {
            if !s.includes(who) {
                return Verdict::reject(
                    "NOT_PARTICIPANT",
                    format!("{who} is not a participant of session {id}"),
                );
            }
        }
        Verdict::allow(format!("active session {id}"))
    }
}

/// Per-sender sliding window over admitted envelopes.
pub struct RateLimit {
    pub limit: u32,
    pub window_ms: u64,
    admitted: BTreeMap<EntityAddress, VecDeque<u64>>,
}

impl RateLimit {
    pub fn new(limit: u32, window_ms: u64) -> Self {
        Self {
            limit,
            window_ms,
            admitted: BTreeMap::new(),
        }
    }

    /// Admissions by `sender` inside the trailing window ending at `now`.
    pub fn count(&mut self, sender: &EntityAddress, now: u64) -> usize {
        let Some(q) = self.admitted.get_mut(sender) else {
            return 0;
        };
        while q.front().is_some_and(|&t| now.saturating_sub(t) >= self.window_ms) {
            q.pop_front();
        }
        q.len()
    }
}

impl Checkpoint for RateLimit {
    fn name(&self) -> &str {
        "rate_limit"
    }

    fn evaluate(&mut self, mail: &Inbound<'_>, ctx: &mut CheckContext<'_>) -> Verdict {
        let n = self.count(&mail.envelope.sender, ctx.now);
        if n < self.limit as usize {
            Verdict::allow(format!("{n} of {} in window", self.limit))
        } else {
            Verdict::reject(
                "RATE_LIMITED",
                format!("{n} envelopes in the last {} ms (limit {})", self.window_ms, self.limit),
            )
        }
    }

    fn commit(&mut self, mail: &Inbound<'_>, ctx: &mut CheckContext<'_>) {
        self.admitted
            .entry(mail.envelope.sender)
            .or_default()
            .push_back(ctx.now);
    }
}

pub struct ContentLength {
    pub limit: usize,
}

impl Checkpoint for ContentLength {
    fn name(&self) -> &str {
        "content_length"
    }

    fn evaluate(&mut self, mail: &Inbound<'_>, _ctx: &mut CheckContext<'_>) -> Verdict {
        let n = mail.envelope.payload.len();
        if n <= self.limit {
            Verdict::allow(format!("{n} bytes"))
        } else {
            Verdict::reject("TOO_LARGE", format!("{n} bytes exceeds {}", self.limit))
        }
    }
}

/// Proof attached to a chargeable request under the `payment_proof` key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentProof {
    Escrow(ContractId),
    Receipt(Box<Receipt>),
}

#[derive(Deserialize)]
struct ProofCarrier {
    payment_proof: PaymentProof,
}

pub struct PaymentVerify {
    pub chargeable: BTreeSet<Intent>,
}

impl PaymentVerify {
    fn check(&self, proof: &PaymentProof, sender: &EntityAddress, trade: &TradeBook) -> Result<String, String> {
        match proof {
            PaymentProof::Escrow(id) => {
                let r = trade.get(id).ok_or_else(|| format!("unknown contract {id}"))?;
                let c = &r.contract;
                if c.buyer != *sender {
                    return Err(format!("{sender} is not the buyer of {id}"));
                }
                if !matches!(c.state, ContractState::Active | ContractState::Completing) || !c.funds_frozen() {
                    return Err(format!("contract {id} holds no active escrow"));
                }
                Ok(format!("escrow {id} holds {}", c.price()))
            }
            PaymentProof::Receipt(receipt) => {
                let r = trade
                    .get(&receipt.contract_id)
                    .ok_or_else(|| format!("unknown contract {}", receipt.contract_id))?;
                if r.contract.buyer != *sender {
                    return Err(format!("{sender} is not the buyer of {}", receipt.contract_id));
                }
                if !verify_receipt(receipt, &r.contract.captured_cards.arbiter, None) {
                    return Err("receipt signature does not verify".to_owned());
                }
                Ok(format!("receipt for {}", receipt.contract_id))
            }
        }
    }
}

impl Checkpoint for PaymentVerify {
    fn name(&self) -> &str {
        "payment_verify"
    }

    fn evaluate(&mut self, mail: &Inbound<'_>, ctx: &mut CheckContext<'_>) -> Verdict {
        if !self.chargeable.contains(&mail.envelope.intent) {
            return Verdict::allow("not chargeable");
        }
        let proof = match serde_json::from_slice::<ProofCarrier>(mail.plaintext) {
            Ok(c) => c.payment_proof,
            Err(_) => return Verdict::reject("PAYMENT_REQUIRED", "no payment proof attached"),
        };
        match self.check(&proof, &mail.envelope.sender, ctx.trade) {
            Ok(why) => Verdict::Allow(why),
            Err(why) => Verdict::reject("PAYMENT_REQUIRED", why),
        }
    }
}

pub struct ContractApproval {
    pub guarded: bool,
}

impl Checkpoint for ContractApproval {
    fn name(&self) -> &str {
        "contract_approval"
    }

    fn evaluate(&mut self, mail: &Inbound<'_>, ctx: &mut CheckContext<'_>) -> Verdict {
        let intent = &mail.envelope.intent;
        if !self.guarded || (*intent != Intent::CONTRACT_APPROVE && *intent != Intent::CONTRACT_ACCEPT) {
            return Verdict::allow("no owner decision needed");
        }
        escalate_to_owner(ctx, format!("{intent} requires owner decision"))
    }
}

/// Body of a PAYMENT envelope: the payee asks the payer for `amount_microusd`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentRequest {
    pub amount_microusd: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memo: Option<String>,
}

pub struct PaymentApproval {
    pub auto_approve_microusd: u64,
}

fn budget_check(mail: &Inbound<'_>, ctx: &CheckContext<'_>, amount: u64) -> Option<Verdict> {
    let budget = mail
        .envelope
        .session_id
        .and_then(|id| ctx.sessions.get(&id))
        .and_then(|s| s.budget)?;
    (!budget.can_spend(amount)).then(|| {
        Verdict::reject(
            "BUDGET_EXCEEDED",
            format!(
                "payment of {amount} would exceed remaining budget {}",
                budget.remaining_microusd()
            ),
        )
    })
}

impl Checkpoint for PaymentApproval {
    fn name(&self) -> &str {
        "payment_approval"
    }

    fn evaluate(&mut self, mail: &Inbound<'_>, ctx: &mut CheckContext<'_>) -> Verdict {
        if mail.envelope.intent != Intent::PAYMENT {
            return Verdict::allow("not a payment");
        }
        let Ok(req) = serde_json::from_slice::<PaymentRequest>(mail.plaintext) else {
            return Verdict::reject("BAD_PAYMENT", "payment payload does not parse");
        };
        if let Some(v) = budget_check(mail, ctx, req.amount_microusd) {
            return v;
        }
        if req.amount_microusd > self.auto_approve_microusd {
            return escalate_to_owner(
                ctx,
                format!(
                    "payment of {} exceeds auto-approval threshold {}",
                    req.amount_microusd, self.auto_approve_microusd
                ),
            );
        }
        Verdict::allow(format!("payment of {} within policy", req.amount_microusd))
    }

    fn on_owner_approved(&mut self, mail: &Inbound<'_>, ctx: &mut CheckContext<'_>) -> Verdict {
        let Ok(req) = serde_json::from_slice::<PaymentRequest>(mail.plaintext) else {
            return Verdict::reject("BAD_PAYMENT", "payment payload does not parse");
        };
        budget_check(mail, ctx, req.amount_microusd)
            .unwrap_or_else(|| Verdict::allow("owner approved payment"))
    }

    fn commit(&mut self, mail: &Inbound<'_>, ctx: &mut CheckContext<'_>) {
        if mail.envelope.intent != Intent::PAYMENT {
            return;
        }
        let (Some(id), Ok(req)) = (
            mail.envelope.session_id,
            serde_json::from_slice::<PaymentRequest>(mail.plaintext),
        ) else {
            return;
        };
        if ctx.sessions.get(&id).is_some_and(|s| s.budget.is_some()) {
            ctx.sessions
                .charge_spend(&id, req.amount_microusd)
                .expect("admission checked the budget");
        }
    }
}

/// Escalates the listed intents to the entity's owner; the custom-hook shape
/// used for e.g. deployment sign-off.
pub struct OwnerGate {
    pub name: String,
    pub intents: BTreeSet<Intent>,
}

impl Checkpoint for OwnerGate {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&mut self, mail: &Inbound<'_>, ctx: &mut CheckContext<'_>) -> Verdict {
        if !self.intents.contains(&mail.envelope.intent) {
            return Verdict::allow("not gated");
        }
        escalate_to_owner(ctx, format!("{} requires owner sign-off", mail.envelope.intent))
    }
}
