//! Host registry, tree topology, route dispatch, discovery and trust edges.

mod host;
mod trust;

pub use host::{
    DiscoveryDocument, DiscoveryResult, Hop, Host, HostTree, LocalEntity, RouteDecision,
};
pub use trust::{TrustEdge, TrustStatus, TrustStore};

use crate::identity::{EntityAddress, HostUid};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RoutingError {
    #[error("unknown host {0}")]
    UnknownHost(HostUid),
    #[error("host {0} already exists")]
    DuplicateHost(HostUid),
    #[error("entity {0} is already registered")]
    DuplicateEntity(EntityAddress),
    #[error("address {address} does not belong to host {host}")]
    HostMismatch { host: HostUid, address: EntityAddress },
    #[error("attaching {child} under {parent} would create a cycle")]
    CycleDetected { parent: HostUid, child: HostUid },
    #[error("host {child} already has parent {parent}")]
    AlreadyParented { child: HostUid, parent: HostUid },
    #[error("entity {0} is not local to its host")]
    NotLocal(EntityAddress),
    #[error("routing revisited host {0}")]
    Loop(HostUid),
}

impl RoutingError {
    pub fn code(&self) -> &'static str {
        match self {
            RoutingError::UnknownHost(_) => "UNKNOWN_HOST",
            RoutingError::DuplicateHost(_) => "DUPLICATE_HOST",
            RoutingError::DuplicateEntity(_) => "DUPLICATE_ENTITY",
            RoutingError::HostMismatch { .. } => "HOST_MISMATCH",
            RoutingError::CycleDetected { .. } => "CYCLE_DETECTED",
            RoutingError::AlreadyParented { .. } => "ALREADY_PARENTED",
            RoutingError::NotLocal(_) => "NOT_LOCAL",
            RoutingError::Loop(_) => "ROUTING_LOOP",
        }
    }
}
