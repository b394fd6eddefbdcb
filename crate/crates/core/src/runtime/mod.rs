//! A whole deterministic network in one process: hosts in a tree, simulated
//! links between neighbours, entities with their pipelines and handlers, and
//! the shared session, trade and provenance stores.
//!
//! Every mutation goes through `&mut Network`, so one host is touched per
//! step by construction. Envelopes in flight sit in a FIFO of hops that
//! `run_until_idle` drains.

mod deliver;
mod dispatch;
mod links;
mod messages;

pub use dispatch::{CallbackCall, CallbackFn};
pub use messages::{
    ApprovalRequestBody, ContractMessage, ContractStateBody, ErrorBody, EventRecord, NetEvent,
    TraceEntry,
};

use std::collections::{BTreeMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::bytes::{ActivityId, ApprovalId, EnvelopeId, SessionId};
use crate::checkpoint::{
    ActivityRecord, ApprovalError, Budget, CheckpointSpec, DecisionRecord, Participant,
    PendingApproval, Pipeline, SessionError, SessionStore,
};
use crate::handlers::{HandlerBinding, MailboxEntry, ProviderRegistry, SharedToolServer, StubToolServer};
use crate::identity::{
    encrypt_payload, sign_envelope, EntityAddress, EntityCard, EntityKind, EntityUid,
    EnvelopeDraft, Envelope, HostUid, IdentityError, Intent, KeyMaterial, Payload, SealError,
};
use crate::routing::{DiscoveryResult, Host, HostTree, LocalEntity, RoutingError, TrustEdge};
use crate::trade::{LedgerError, TradeBook, TradeError};
use crate::transport::{
    Clock, HeartbeatConfig, LinkState, LivenessTransition, OfflineQueue, SimWire,
    DEFAULT_QUEUE_CAPACITY,
};

/// Upper bound on hops processed by one `run_until_idle`; a runaway
/// reply loop between callbacks trips it instead of hanging.
pub const MAX_STEPS: usize = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Seal(#[from] SealError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Approval(#[from] ApprovalError),
    #[error(transparent)]
    Trade(#[from] TradeError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("{0} is not hosted in this network")]
    NotLocal(EntityAddress),
    #[error("no card known for {0}")]
    UnknownCard(EntityAddress),
    #[error("{reader} may not read the inbox of {entity}")]
    Unauthorized {
        reader: EntityAddress,
        entity: EntityAddress,
    },
    #[error("no link between {0} and {1}")]
    UnknownLink(HostUid, HostUid),
    #[error("gave up after {0} hops without going idle")]
    Runaway(usize),
}

impl NetError {
    pub fn code(&self) -> &'static str {
        match self {
            NetError::Routing(e) => e.code(),
            NetError::Identity(_) => "IDENTITY",
            NetError::Seal(_) => "DECRYPT_FAILED",
            NetError::Session(_) => "SESSION",
            NetError::Approval(e) => e.code(),
            NetError::Trade(e) => e.code(),
            NetError::Ledger(_) => "LEDGER",
            NetError::NotLocal(_) => "NOT_LOCAL",
            NetError::UnknownCard(_) => "UNKNOWN_ENTITY",
            NetError::Unauthorized { .. } => "UNAUTHORIZED",
            NetError::UnknownLink(..) => "UNKNOWN_LINK",
            NetError::Runaway(_) => "RUNAWAY",
        }
    }
}

/// An outgoing message before it is signed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mail {
    pub to: EntityAddress,
    pub intent: Intent,
    pub body: Vec<u8>,
    pub session: Option<SessionId>,
    pub correlation: Option<EnvelopeId>,
    pub policy_ref: Option<String>,
    /// Encrypt the body to the recipient's card.
    pub seal: bool,
}

impl Mail {
    pub fn new(to: EntityAddress, intent: Intent, body: impl Into<Vec<u8>>) -> Self {
        Self {
            to,
            intent,
            body: body.into(),
            session: None,
            correlation: None,
            policy_ref: None,
            seal: false,
        }
    }

    pub fn json<T: serde::Serialize>(to: EntityAddress, intent: Intent, body: &T) -> Self {
        Self::new(to, intent, serde_json::to_vec(body).expect("bodies serialize"))
    }

    pub fn in_session(mut self, id: SessionId) -> Self {
        self.session = Some(id);
        self
    }

    pub fn sealed(mut self) -> Self {
        self.seal = true;
        self
    }

    pub fn with_policy(mut self, policy: impl Into<String>) -> Self {
        self.policy_ref = Some(policy.into());
        self
    }

    /// Address the reply to `original`'s sender, in its session, correlated to it.
    pub fn reply_to(original: &Envelope, intent: Intent, body: impl Into<Vec<u8>>) -> Self {
        Self {
            to: original.sender,
            intent,
            body: body.into(),
            session: original.session_id,
            correlation: Some(original.envelope_id),
            policy_ref: original.policy_ref.clone(),
            seal: original.payload.is_sealed(),
        }
    }
}

/// What to register: everything about an entity except its keys and uid,
/// which the network mints.
pub struct EntitySpec {
    pub host: HostUid,
    pub name: String,
    pub kind: EntityKind,
    pub binding: HandlerBinding,
    pub pipeline: Pipeline,
    pub owner: Option<EntityAddress>,
    pub discoverable: bool,
    pub summary: Option<String>,
}

impl EntitySpec {
    pub fn new(host: HostUid, name: impl Into<String>, kind: EntityKind, binding: HandlerBinding) -> Self {
        Self {
            host,
            name: name.into(),
            kind,
            binding,
            pipeline: Pipeline::default_pipeline(),
            owner: None,
            discoverable: true,
            summary: None,
        }
    }

    pub fn pipeline(mut self, specs: &[CheckpointSpec]) -> Self {
        self.pipeline = Pipeline::from_specs(specs);
        self
    }

    pub fn custom_pipeline(mut self, pipeline: Pipeline) -> Self {
        self.pipeline = pipeline;
        self
    }

    pub fn owner(mut self, owner: EntityAddress) -> Self {
        self.owner = Some(owner);
        self
    }

    pub fn hidden(mut self) -> Self {
        self.discoverable = false;
        self
    }

    pub fn summary(mut self, s: impl Into<String>) -> Self {
        self.summary = Some(s.into());
        self
    }
}

#[derive(Debug)]
pub(crate) struct Link {
    pub wire: SimWire,
    pub state: LinkState,
    pub queue: OfflineQueue,
}

/// One envelope waiting to be processed at `at`.
#[derive(Debug, Clone)]
pub(crate) struct Hop {
    pub env: Envelope,
    pub at: HostUid,
    pub origin: HostUid,
}

#[derive(Debug, Clone, Copy)]
pub struct NetConfig {
    pub heartbeat: HeartbeatConfig,
    pub queue_capacity: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            heartbeat: HeartbeatConfig::default(),
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }
}

pub struct Network {
    clock: Clock,
    rng: ChaCha20Rng,
    config: NetConfig,
    tree: HostTree,
    links: BTreeMap<(HostUid, HostUid), Link>,
    directory: BTreeMap<EntityAddress, EntityCard>,
    hops: VecDeque<Hop>,
    sessions: SessionStore,
    trade: TradeBook,
    decisions: Vec<DecisionRecord>,
    approvals: BTreeMap<ApprovalId, PendingApproval>,
    activities: Vec<ActivityRecord>,
    providers: ProviderRegistry,
    tool_servers: BTreeMap<String, SharedToolServer>,
    callbacks: BTreeMap<String, CallbackFn>,
    events: Vec<EventRecord>,
    traces: BTreeMap<EnvelopeId, Vec<TraceEntry>>,
    liveness: Vec<LivenessTransition>,
    handled: Vec<EnvelopeId>,
}

impl Network {
    pub fn new(seed: u64) -> Self {
        Self::with_config(seed, NetConfig::default())
    }

    pub fn with_config(seed: u64, config: NetConfig) -> Self {
        let mut tool_servers = BTreeMap::new();
        tool_servers.insert(
            "stub".to_owned(),
            SharedToolServer::new(StubToolServer::standard().into()),
        );
        Self {
            clock: Clock::simulated(0),
            rng: ChaCha20Rng::seed_from_u64(seed),
            config,
            tree: HostTree::default(),
            links: BTreeMap::new(),
            directory: BTreeMap::new(),
            hops: VecDeque::new(),
            sessions: SessionStore::default(),
            trade: TradeBook::new(),
            decisions: Vec::new(),
            approvals: BTreeMap::new(),
            activities: Vec::new(),
            providers: ProviderRegistry::with_echo(),
            tool_servers,
            callbacks: BTreeMap::new(),
            events: Vec::new(),
            traces: BTreeMap::new(),
            liveness: Vec::new(),
            handled: Vec::new(),
        }
    }

    pub fn now(&self) -> u64 {
        self.clock.peek()
    }

    pub(crate) fn emit(&mut self, event: NetEvent) {
        let seq = self.events.len() as u64;
        let at = self.now();
        self.events.push(EventRecord { seq, at, event });
    }

    // ---- topology -------------------------------------------------------

    /// Hosts accept DISCOVER and PING from anyone, so their own entity runs
    /// only the volume checks.
    pub fn host_pipeline() -> Vec<CheckpointSpec> {
        vec![
            CheckpointSpec::RateLimit {
                limit: crate::checkpoint::DEFAULT_RATE_LIMIT,
                window_ms: crate::checkpoint::DEFAULT_RATE_WINDOW_MS,
            },
            CheckpointSpec::ContentLength {
                limit: crate::checkpoint::DEFAULT_CONTENT_LIMIT,
            },
        ]
    }

    pub fn add_host(&mut self, name: &str) -> Result<HostUid, NetError> {
        let mut uid = HostUid::random(&mut self.rng);
        while self.tree.get(&uid).is_some() {
            uid = HostUid::random(&mut self.rng);
        }
        self.add_host_with_uid(uid, name)
    }

    pub fn add_host_with_uid(&mut self, uid: HostUid, name: &str) -> Result<HostUid, NetError> {
        let keys = KeyMaterial::from_rng(&mut self.rng);
        let host = Host::new(
            uid,
            name,
            keys,
            HandlerBinding::Callback("host".into()),
            Pipeline::from_specs(&Self::host_pipeline()),
        );
        let card = host.card().clone();
        self.tree.insert(host)?;
        self.directory.insert(card.address, card);
        Ok(uid)
    }

    /// Attach and open a simulated link in each direction.
    pub fn attach(&mut self, parent: HostUid, child: HostUid) -> Result<(), NetError> {
        self.tree.attach_child(parent, child)?;
        let now = self.now();
        for (a, b) in [(parent, child), (child, parent)] {
            self.links.insert(
                (a, b),
                Link {
                    wire: SimWire::default(),
                    state: LinkState::new(b, now, &self.config.heartbeat),
                    queue: OfflineQueue::new(self.config.queue_capacity),
                },
            );
        }
        Ok(())
    }

    pub fn register(&mut self, spec: EntitySpec) -> Result<EntityAddress, NetError> {
        let host = self.tree.host(&spec.host)?;
        let mut uid = EntityUid::random(&mut self.rng);
        while uid == EntityUid::HOST || host.entity(&uid).is_some() {
            uid = EntityUid::random(&mut self.rng);
        }
        let keys = KeyMaterial::from_rng(&mut self.rng);
        let address = EntityAddress::new(spec.host, uid);
        let mut card = EntityCard::new(spec.name, address, spec.kind, &keys)?.discoverable(spec.discoverable);
        if let Some(s) = spec.summary {
            card = card.with_summary(s)?;
        }
        let entity = LocalEntity::new(card.clone(), keys, spec.binding, spec.pipeline, spec.owner);
        self.tree.host_mut(&spec.host)?.register_entity(entity)?;
        self.directory.insert(address, card);
        Ok(address)
    }

    /// Replace an entity's keys; its card changes fingerprint.
    pub fn rekey(&mut self, who: &EntityAddress) -> Result<&EntityCard, NetError> {
        let keys = KeyMaterial::from_rng(&mut self.rng);
        let e = self.tree.local_entity_mut(who).ok_or(NetError::NotLocal(*who))?;
        e.rekey(keys);
        let card = e.card.clone();
        self.directory.insert(*who, card);
        Ok(&self.directory[who])
    }

    pub fn add_trust(&mut self, owner: EntityAddress, peer: EntityAddress) -> Result<TrustEdge, NetError> {
        let card = self.card(&peer)?.clone();
        self.add_trust_card(owner, &card)
    }

    pub fn add_trust_card(&mut self, owner: EntityAddress, peer_card: &EntityCard) -> Result<TrustEdge, NetError> {
        if self.tree.local_entity(&owner).is_none() {
            return Err(NetError::NotLocal(owner));
        }
        let now = self.now();
        Ok(self.tree.host_mut(&owner.host)?.trust.add(owner, peer_card, now))
    }

    /// Trust in both directions.
    pub fn befriend(&mut self, a: EntityAddress, b: EntityAddress) -> Result<(), NetError> {
        self.add_trust(a, b)?;
        self.add_trust(b, a)?;
        Ok(())
    }

    pub fn open_session(
        &mut self,
        participants: Vec<Participant>,
        policy_ref: Option<String>,
        budget: Option<Budget>,
    ) -> Result<SessionId, NetError> {
        let id = SessionId::random(&mut self.rng);
        let now = self.now();
        self.sessions.open(id, participants, policy_ref, budget, now)?;
        Ok(id)
    }

    pub fn close_session(&mut self, id: &SessionId) -> Result<(), NetError> {
        Ok(self.sessions.close(id)?)
    }

    pub fn fund(&mut self, who: EntityAddress, amount_microusd: u64) -> Result<(), NetError> {
        Ok(self.trade.ledger.deposit(who, amount_microusd)?)
    }

    pub fn register_provider(&mut self, name: &str, p: Box<dyn crate::handlers::Provider>) {
        self.providers.register(name, p);
    }

    pub fn register_tool_server(&mut self, name: &str, server: StubToolServer) -> SharedToolServer {
        let shared = SharedToolServer::new(server.into());
        self.tool_servers.insert(name.to_owned(), shared.clone());
        shared
    }

    pub fn tool_server(&self, name: &str) -> Option<&SharedToolServer> {
        self.tool_servers.get(name)
    }

    pub fn register_callback(&mut self, name: &str, f: CallbackFn) {
        self.callbacks.insert(name.to_owned(), f);
    }

    // ---- sending --------------------------------------------------------

    /// Sign (and optionally seal) `mail` as `from`, then process until idle.
    pub fn send(&mut self, from: EntityAddress, mail: Mail) -> Result<EnvelopeId, NetError> {
        let id = self.enqueue(from, mail)?;
        self.run_until_idle()?;
        Ok(id)
    }

    /// Sign and queue without processing.
    pub fn enqueue(&mut self, from: EntityAddress, mail: Mail) -> Result<EnvelopeId, NetError> {
        let env = self.build(from, mail)?;
        let id = env.envelope_id;
        self.emit(NetEvent::Sent {
            envelope_id: id,
            sender: env.sender,
            recipient: env.recipient,
            intent: env.intent.clone(),
        });
        self.hops.push_back(Hop {
            env,
            at: from.host,
            origin: from.host,
        });
        Ok(id)
    }

    pub(crate) fn build(&mut self, from: EntityAddress, mail: Mail) -> Result<Envelope, NetError> {
        let payload = if mail.seal {
            let card = self.directory.get(&mail.to).ok_or(NetError::UnknownCard(mail.to))?;
            Payload::Sealed(encrypt_payload(&mail.body, card, &mut self.rng)?)
        } else {
            Payload::plain(mail.body)
        };
        let envelope_id = EnvelopeId::random(&mut self.rng);
        let draft = EnvelopeDraft {
            envelope_id,
            sender: from,
            recipient: mail.to,
            intent: mail.intent,
            session_id: mail.session,
            correlation_id: mail.correlation,
            policy_ref: mail.policy_ref,
            sent_at: self.now(),
            payload,
        };
        let keys = self.tree.local_entity(&from).ok_or(NetError::NotLocal(from))?.keys();
        Ok(sign_envelope(draft, keys)?)
    }

    /// Put an already-signed envelope on the wire at `at`, as if it arrived
    /// there from outside. Used to exercise verification.
    pub fn inject(&mut self, env: Envelope, at: HostUid) -> Result<(), NetError> {
        self.tree.host(&at)?;
        self.hops.push_back(Hop { env, at, origin: at });
        self.run_until_idle()
    }

    pub fn run_until_idle(&mut self) -> Result<(), NetError> {
        let mut steps = 0;
        while let Some(hop) = self.hops.pop_front() {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(NetError::Runaway(MAX_STEPS));
            }
            self.step(hop);
        }
        Ok(())
    }

    // ---- reads ----------------------------------------------------------

    pub fn card(&self, who: &EntityAddress) -> Result<&EntityCard, NetError> {
        self.directory.get(who).ok_or(NetError::UnknownCard(*who))
    }

    pub fn directory(&self) -> &BTreeMap<EntityAddress, EntityCard> {
        &self.directory
    }

    pub fn tree(&self) -> &HostTree {
        &self.tree
    }

    pub fn entity(&self, who: &EntityAddress) -> Option<&LocalEntity> {
        self.tree.local_entity(who)
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    pub fn trade(&self) -> &TradeBook {
        &self.trade
    }

    pub fn decisions(&self) -> &[DecisionRecord] {
        &self.decisions
    }

    pub fn decisions_for(&self, id: &EnvelopeId) -> Vec<&DecisionRecord> {
        self.decisions.iter().filter(|d| d.envelope_id == *id).collect()
    }

    pub fn approvals(&self) -> &BTreeMap<ApprovalId, PendingApproval> {
        &self.approvals
    }

    pub fn pending_approvals(&self) -> Vec<&PendingApproval> {
        self.approvals
            .values()
            .filter(|p| p.resolution == crate::checkpoint::Resolution::Pending)
            .collect()
    }

    pub fn activities(&self) -> &[ActivityRecord] {
        &self.activities
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn trace(&self, id: &EnvelopeId) -> &[TraceEntry] {
        self.traces.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn liveness(&self) -> &[LivenessTransition] {
        &self.liveness
    }

    /// Envelopes handed to a handler, in order.
    pub fn handled(&self) -> &[EnvelopeId] {
        &self.handled
    }

    /// Non-destructive inbox read; only the entity or its owner may read.
    pub fn inbox(
        &self,
        entity: &EntityAddress,
        reader: &EntityAddress,
        since: u64,
    ) -> Result<Vec<MailboxEntry>, NetError> {
        let e = self.tree.local_entity(entity).ok_or(NetError::NotLocal(*entity))?;
        if reader != entity && e.owner.as_ref() != Some(reader) {
            return Err(NetError::Unauthorized {
                reader: *reader,
                entity: *entity,
            });
        }
        Ok(e.mailbox.read_since(since))
    }

    pub fn discover(&self, at: HostUid) -> Result<DiscoveryResult, NetError> {
        Ok(self.tree.discover(at, |a, b| {
            self.links.get(&(a, b)).is_some_and(|l| l.state.is_connected())
        })?)
    }

    pub(crate) fn mint_activity(&mut self) -> ActivityId {
        ActivityId::random(&mut self.rng)
    }
}
