//! Contract lifecycle, escrow ledger, metering, receipts and the snapshot
//! hash chain.

mod book;
mod chain;
mod ledger;
mod receipt;
mod types;

pub use book::{capture, ContractRecord, TradeBook, TransitionOutcome};
pub use chain::{verify_chain, verify_chain_bytes, ChainFault, ChainReport, Snapshot};
pub use ledger::{Account, EscrowLedger, LedgerError};
pub use receipt::{cost_digest, verify_receipt, Receipt};
pub use types::*;

use crate::bytes::ContractId;
use crate::identity::EntityAddress;

pub const DEFAULT_REWORK_LIMIT: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TradeError {
    #[error("buyer, seller and arbiter must be distinct")]
    DuplicateRoles,
    #[error("price must be positive")]
    NonPositivePrice,
    #[error("captured card for {role} has address {card}, expected {expected}")]
    CardMismatch {
        role: &'static str,
        card: EntityAddress,
        expected: EntityAddress,
    },
    #[error("unknown contract {0}")]
    UnknownContract(ContractId),
    #[error("contract {contract} already exists")]
    DuplicateContract { contract: ContractId },
    #[error("{action} not allowed in state {state}")]
    WrongState {
        state: ContractState,
        action: &'static str,
    },
    #[error("{actor} may not {action} this contract")]
    NotAuthorized {
        actor: EntityAddress,
        action: &'static str,
    },
    #[error("a delivery is already pending")]
    DeliveryPending,
    #[error(transparent)]
    InsufficientFunds(LedgerError),
    #[error("direct settlement needs an external reference")]
    MissingDirectReference,
    #[error("buyer fraction {0:?} is outside [0, 1]")]
    BadFraction(Fraction),
    #[error("dispute already resolved")]
    AlreadyResolved,
    #[error("signing key does not belong to the contract arbiter")]
    ArbiterKeyMismatch,
    #[error("ledger error: {0}")]
    Ledger(LedgerError),
}

impl TradeError {
    /// Machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            TradeError::DuplicateRoles => "DUPLICATE_ROLES",
            TradeError::NonPositivePrice => "NON_POSITIVE_PRICE",
            TradeError::CardMismatch { .. } => "CARD_MISMATCH",
            TradeError::UnknownContract(_) => "UNKNOWN_CONTRACT",
            TradeError::DuplicateContract { .. } => "DUPLICATE_CONTRACT",
            TradeError::WrongState { .. } => "WRONG_STATE",
            TradeError::NotAuthorized { .. } => "NOT_AUTHORIZED",
            TradeError::DeliveryPending => "DELIVERY_PENDING",
            TradeError::InsufficientFunds(_) => "INSUFFICIENT_FUNDS",
            TradeError::MissingDirectReference => "MISSING_DIRECT_REFERENCE",
            TradeError::BadFraction(_) => "BAD_FRACTION",
            TradeError::AlreadyResolved => "ALREADY_RESOLVED",
            TradeError::ArbiterKeyMismatch => "ARBITER_KEY_MISMATCH",
            TradeError::Ledger(_) => "LEDGER",
        }
    }
}
