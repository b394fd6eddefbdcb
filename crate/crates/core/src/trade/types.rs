use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bytes::{ContractId, DeliveryId, Digest};
use crate::identity::{EntityAddress, EntityCard, Intent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ContractState {
    Draft,
    Pending,
    Active,
    Completing,
    Settling,
    Settled,
    Cancelled,
    Disputed,
}

impl ContractState {
    pub const ALL: [ContractState; 8] = [
        ContractState::Draft,
        ContractState::Pending,
        ContractState::Active,
        ContractState::Completing,
        ContractState::Settling,
        ContractState::Settled,
        ContractState::Cancelled,
        ContractState::Disputed,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            ContractState::Settled | ContractState::Cancelled | ContractState::Disputed
        )
    }
}

impl fmt::Display for ContractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit enum");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FundingMode {
    Escrow,
    Direct,
}

impl FromStr for FundingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "escrow" => Ok(FundingMode::Escrow),
            "direct" => Ok(FundingMode::Direct),
            other => Err(format!("unknown funding mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terms {
    pub description: String,
    pub price_microusd: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostDimension {
    Tokens,
    /// Milli-hours.
    ComputeHours,
    /// Micro-USD.
    Usd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostRecord {
    pub dimension: CostDimension,
    pub quantity: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryVerdict {
    Pending,
    Accepted,
    ReworkRequested,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub delivery_id: DeliveryId,
    pub artifacts: Vec<Digest>,
    pub cost_records: Vec<CostRecord>,
    pub submitted_at: u64,
    pub verdict: DeliveryVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementRef {
    pub mode: FundingMode,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapturedCards {
    pub buyer: EntityCard,
    pub seller: EntityCard,
    pub arbiter: EntityCard,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Approval {
    pub party: EntityAddress,
    pub draft_version: u32,
}

/// A rational in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub numerator: u64,
    pub denominator: u64,
}

impl Fraction {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Self {
            numerator,
            denominator,
        }
    }

    pub fn is_unit_interval(&self) -> bool {
        self.denominator > 0 && self.numerator <= self.denominator
    }

    /// `ceil(amount * n / d)`: rounding goes to the buyer.
    pub fn share_of(&self, amount: u64) -> u64 {
        let n = u128::from(amount) * u128::from(self.numerator);
        let d = u128::from(self.denominator);
        n.div_ceil(d) as u64
    }
}

impl FromStr for Fraction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        let parse = |x: &str| x.trim().parse::<u64>().map_err(|e| format!("{x:?}: {e}"));
        Ok(Fraction::new(parse(n)?, parse(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisputeResolution {
    pub buyer_fraction: Fraction,
    pub buyer_share: u64,
    pub seller_share: u64,
    pub resolved_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisputeRecord {
    pub raised_by: EntityAddress,
    pub from_state: ContractState,
    pub raised_at: u64,
    pub resolution: Option<DisputeResolution>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contract {
    pub contract_id: ContractId,
    pub buyer: EntityAddress,
    pub seller: EntityAddress,
    pub arbiter: EntityAddress,
    pub terms: Terms,
    pub funding_mode: FundingMode,
    pub state: ContractState,
    pub draft_version: u32,
    pub approvals: Vec<Approval>,
    pub rework_count: u32,
    pub rework_limit: u32,
    pub deliveries: Vec<Delivery>,
    pub settlement: Option<SettlementRef>,
    pub dispute: Option<DisputeRecord>,
    pub captured_cards: CapturedCards,
    pub created_at: u64,
}

impl Contract {
    pub fn price(&self) -> u64 {
        self.terms.price_microusd
    }

    pub fn all_cost_records(&self) -> Vec<CostRecord> {
        self.deliveries
            .iter()
            .flat_map(|d| d.cost_records.iter().copied())
            .collect()
    }

    pub fn pending_delivery(&self) -> Option<&Delivery> {
        self.deliveries
            .iter()
            .rev()
            .find(|d| d.verdict == DeliveryVerdict::Pending)
    }

    pub fn is_party(&self, who: &EntityAddress) -> bool {
        *who == self.buyer || *who == self.seller
    }

    pub fn escrowed(&self) -> bool {
        self.funding_mode == FundingMode::Escrow
    }

    /// Whether the buyer's price is currently frozen.
    pub fn funds_frozen(&self) -> bool {
        if !self.escrowed() {
            return false;
        }
        match self.state {
            ContractState::Active | ContractState::Completing | ContractState::Settling => true,
            ContractState::Disputed => self
                .dispute
                .as_ref()
                .is_some_and(|d| d.resolution.is_none()),
            _ => false,
        }
    }
}

/// One transition request. Creation is separate (see `TradeBook::propose`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ContractAction {
    Amend { terms: Terms },
    Approve,
    Activate,
    Complete {
        #[serde(default)]
        artifacts: Vec<Digest>,
        #[serde(default)]
        cost_records: Vec<CostRecord>,
    },
    Rework,
    Accept,
    Settle {
        #[serde(default)]
        direct_reference: Option<String>,
    },
    Cancel,
    Dispute,
    Resolve { buyer_fraction: Fraction },
}

impl ContractAction {
    pub fn intent(&self) -> Intent {
        match self {
            ContractAction::Amend { .. } => Intent::CONTRACT_AMEND,
            ContractAction::Approve => Intent::CONTRACT_APPROVE,
            ContractAction::Activate => Intent::CONTRACT_ACTIVATE,
            ContractAction::Complete { .. } => Intent::CONTRACT_COMPLETE,
            ContractAction::Rework => Intent::CONTRACT_REWORK,
            ContractAction::Accept => Intent::CONTRACT_ACCEPT,
            ContractAction::Settle { .. } => Intent::CONTRACT_SETTLE,
            ContractAction::Cancel => Intent::CONTRACT_CANCEL,
            ContractAction::Dispute => Intent::CONTRACT_DISPUTE,
            ContractAction::Resolve { .. } => Intent::CONTRACT_RESOLVE,
        }
    }
}

pub fn cost_totals(records: &[CostRecord]) -> BTreeMap<CostDimension, u64> {
    let mut totals = BTreeMap::new();
    for r in records {
        let t = totals.entry(r.dimension).or_insert(0u64);
        *t = t.saturating_add(r.quantity);
    }
    totals
}
