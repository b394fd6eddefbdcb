use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{RoutingError, TrustStore};
use crate::checkpoint::Pipeline;
use crate::handlers::{HandlerBinding, Mailbox};
use crate::identity::{EntityAddress, EntityCard, EntityKind, EntityUid, HostUid, KeyMaterial};

/// An entity hosted locally: its card, keys, behaviour and inbound state.
#[derive(Debug)]
pub struct LocalEntity {
    pub card: EntityCard,
    keys: KeyMaterial,
    pub binding: HandlerBinding,
    pub mailbox: Mailbox,
    pub pipeline: Pipeline,
    /// Designated owner for escalations.
    pub owner: Option<EntityAddress>,
}

impl LocalEntity {
    pub fn new(
        card: EntityCard,
        keys: KeyMaterial,
        binding: HandlerBinding,
        pipeline: Pipeline,
        owner: Option<EntityAddress>,
    ) -> Self {
        Self {
            card,
            keys,
            binding,
            mailbox: Mailbox::default(),
            pipeline,
            owner,
        }
    }

    pub fn keys(&self) -> &KeyMaterial {
        &self.keys
    }

    /// Swap in fresh keys (and the matching card).
    pub fn rekey(&mut self, keys: KeyMaterial) {
        self.card.signing_public = keys.signing_public();
        self.card.encryption_public = keys.encryption_public();
        self.keys = keys;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "route", content = "target", rename_all = "snake_case")]
pub enum RouteDecision {
    Local(EntityUid),
    Child(HostUid),
    Parent,
    Unroutable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryDocument {
    pub host_uid: HostUid,
    pub host_card: EntityCard,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    pub entities: Vec<EntityCard>,
}

/// A topology node: entity registry plus parent/child links. The host itself
/// is addressable as entity `00000000`.
#[derive(Debug)]
pub struct Host {
    pub uid: HostUid,
    pub name: String,
    pub url: Option<String>,
    entities: BTreeMap<EntityUid, LocalEntity>,
    parent: Option<HostUid>,
    children: BTreeSet<HostUid>,
    /// Descendant host -> the child whose subtree contains it.
    subtree_index: BTreeMap<HostUid, HostUid>,
    pub trust: TrustStore,
}

impl Host {
    /// A detached host whose own entity is bound to `host_binding`.
    pub fn new(
        uid: HostUid,
        name: impl Into<String>,
        keys: KeyMaterial,
        host_binding: HandlerBinding,
        host_pipeline: Pipeline,
    ) -> Self {
        let name = name.into();
        let card = EntityCard::new(
            name.clone(),
            EntityAddress::new(uid, EntityUid::HOST),
            EntityKind::Host,
            &keys,
        )
        .expect("host names are validated by the caller")
        .discoverable(true);
        let mut entities = BTreeMap::new();
        entities.insert(
            EntityUid::HOST,
            LocalEntity::new(card, keys, host_binding, host_pipeline, None),
        );
        Self {
            uid,
            name,
            url: None,
            entities,
            parent: None,
            children: BTreeSet::new(),
            subtree_index: BTreeMap::new(),
            trust: TrustStore::default(),
        }
    }

    pub fn card(&self) -> &EntityCard {
        &self.entities[&EntityUid::HOST].card
    }

    pub fn keys(&self) -> &KeyMaterial {
        self.entities[&EntityUid::HOST].keys()
    }

    pub fn parent(&self) -> Option<HostUid> {
        self.parent
    }

    pub fn children(&self) -> &BTreeSet<HostUid> {
        &self.children
    }

    pub fn subtree_index(&self) -> &BTreeMap<HostUid, HostUid> {
        &self.subtree_index
    }

    pub fn register_entity(&mut self, entity: LocalEntity) -> Result<EntityAddress, RoutingError> {
        let addr = entity.card.address;
        if addr.host != self.uid {
            return Err(RoutingError::HostMismatch {
                host: self.uid,
                address: addr,
            });
        }
        if self.entities.contains_key(&addr.entity) {
            return Err(RoutingError::DuplicateEntity(addr));
        }
        self.entities.insert(addr.entity, entity);
        Ok(addr)
    }

    pub fn entity(&self, uid: &EntityUid) -> Option<&LocalEntity> {
        self.entities.get(uid)
    }

    pub fn entity_mut(&mut self, uid: &EntityUid) -> Option<&mut LocalEntity> {
        self.entities.get_mut(uid)
    }

    pub fn entities(&self) -> impl Iterator<Item = &LocalEntity> {
        self.entities.values()
    }

    pub fn resolve_card(&self, addr: &EntityAddress) -> Option<&EntityCard> {
        (addr.host == self.uid)
            .then(|| self.entities.get(&addr.entity).map(|e| &e.card))
            .flatten()
    }

    /// Local, then a child's subtree, then up to the parent.
    pub fn route(&self, dest: &EntityAddress) -> RouteDecision {
        if dest.host == self.uid {
            return RouteDecision::Local(dest.entity);
        }
        if let Some(child) = self.subtree_index.get(&dest.host) {
            return RouteDecision::Child(*child);
        }
        match self.parent {
            Some(_) => RouteDecision::Parent,
            None => RouteDecision::Unroutable(format!("no route to host {}", dest.host)),
        }
    }

    pub fn discovery_document(&self) -> DiscoveryDocument {
        DiscoveryDocument {
            host_uid: self.uid,
            host_card: self.card().clone(),
            url: self.url.clone(),
            entities: self
                .entities
                .values()
                .filter(|e| e.card.discoverable && e.card.address.entity != EntityUid::HOST)
                .map(|e| e.card.clone())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub host: HostUid,
    pub decision: RouteDecision,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryResult {
    pub documents: Vec<DiscoveryDocument>,
    /// Neighbours that were skipped because their link is down.
    pub unreachable: Vec<HostUid>,
}

/// Every host in one overlay, with the tree links between them.
#[derive(Debug, Default)]
pub struct HostTree {
    hosts: BTreeMap<HostUid, Host>,
}

impl HostTree {
    pub fn insert(&mut self, host: Host) -> Result<HostUid, RoutingError> {
        let uid = host.uid;
        if self.hosts.contains_key(&uid) {
            return Err(RoutingError::DuplicateHost(uid));
        }
        self.hosts.insert(uid, host);
        Ok(uid)
    }

    pub fn get(&self, uid: &HostUid) -> Option<&Host> {
        self.hosts.get(uid)
    }

    pub fn get_mut(&mut self, uid: &HostUid) -> Option<&mut Host> {
        self.hosts.get_mut(uid)
    }

    pub fn host(&self, uid: &HostUid) -> Result<&Host, RoutingError> {
        self.hosts.get(uid).ok_or(RoutingError::UnknownHost(*uid))
    }

    pub fn host_mut(&mut self, uid: &HostUid) -> Result<&mut Host, RoutingError> {
        self.hosts.get_mut(uid).ok_or(RoutingError::UnknownHost(*uid))
    }

    pub fn hosts(&self) -> impl Iterator<Item = &Host> {
        self.hosts.values()
    }

    pub fn uids(&self) -> Vec<HostUid> {
        self.hosts.keys().copied().collect()
    }

    pub fn local_entity(&self, addr: &EntityAddress) -> Option<&LocalEntity> {
        self.hosts.get(&addr.host)?.entity(&addr.entity)
    }

    pub fn local_entity_mut(&mut self, addr: &EntityAddress) -> Option<&mut LocalEntity> {
        self.hosts.get_mut(&addr.host)?.entity_mut(&addr.entity)
    }

    /// Make `child` a child of `parent` and push the child's subtree into the
    /// index of every ancestor.
    pub fn attach_child(&mut self, parent: HostUid, child: HostUid) -> Result<(), RoutingError> {
        self.host(&parent)?;
        let c = self.host(&child)?;
        if parent == child || c.subtree_index.contains_key(&parent) {
            return Err(RoutingError::CycleDetected { parent, child });
        }
        if let Some(existing) = c.parent {
            return Err(RoutingError::AlreadyParented { child, parent: existing });
        }
        let mut moved: Vec<HostUid> = c.subtree_index.keys().copied().collect();
        moved.push(child);

        self.host_mut(&child)?.parent = Some(parent);
        let p = self.host_mut(&parent)?;
        p.children.insert(child);
        for d in &moved {
            p.subtree_index.insert(*d, child);
        }
        let mut via = parent;
        let mut up = p.parent;
        while let Some(a) = up {
            let anc = self.host_mut(&a)?;
            for d in &moved {
                anc.subtree_index.insert(*d, via);
            }
            via = a;
            up = anc.parent;
        }
        Ok(())
    }

    /// Follow route decisions from `from` until the destination host or a
    /// dead end. Never revisits a host.
    pub fn trace_route(&self, from: HostUid, dest: &EntityAddress) -> Result<Vec<Hop>, RoutingError> {
        let mut hops = Vec::new();
        let mut seen = BTreeSet::new();
        let mut at = from;
        loop {
            if !seen.insert(at) {
                return Err(RoutingError::Loop(at));
            }
            let host = self.host(&at)?;
            let decision = host.route(dest);
            hops.push(Hop {
                host: at,
                decision: decision.clone(),
            });
            at = match decision {
                RouteDecision::Local(_) | RouteDecision::Unroutable(_) => return Ok(hops),
                RouteDecision::Child(c) => c,
                RouteDecision::Parent => host.parent.expect("Parent implies a parent"),
            };
        }
    }

    /// This host's document plus those of its parent and children, sorted by
    /// host uid. `reachable(a, b)` says whether the link a -> b is up.
    pub fn discover(
        &self,
        at: HostUid,
        reachable: impl Fn(HostUid, HostUid) -> bool,
    ) -> Result<DiscoveryResult, RoutingError> {
        let host = self.host(&at)?;
        let mut documents = vec![host.discovery_document()];
        let mut unreachable = Vec::new();
        for n in host.parent.iter().chain(host.children.iter()) {
            if reachable(at, *n) {
                documents.push(self.host(n)?.discovery_document());
            } else {
                unreachable.push(*n);
            }
        }
        documents.sort_by_key(|d| d.host_uid);
        unreachable.sort();
        Ok(DiscoveryResult {
            documents,
            unreachable,
        })
    }
}
