//! Explainable seller reputation derived from terminal contracts.

use serde::{Deserialize, Serialize};

use crate::bytes::ContractId;
use crate::identity::EntityAddress;
use crate::trade::{verify_chain, ContractRecord, ContractState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReputationError {
    #[error("contract {0} is in non-terminal state {1}")]
    NotTerminal(ContractId, ContractState),
    #[error("rating {0} outside 1..=5")]
    BadRating(u8),
    #[error("event {event} is about {found}, profile subject is {expected}")]
    MixedSubjects {
        event: ContractId,
        expected: EntityAddress,
        found: EntityAddress,
    },
    #[error("events missing for contributing ids {0:?}")]
    MissingEvents(Vec<ContractId>),
    #[error("recomputed profile differs from the one supplied")]
    Mismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Settled,
    Cancelled,
    Disputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub chain_valid: bool,
    pub receipt_present: bool,
    pub cards_captured: bool,
}

impl Evidence {
    fn count(&self) -> u8 {
        u8::from(self.chain_valid) + u8::from(self.receipt_present) + u8::from(self.cards_captured)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReputationEvent {
    pub contract_id: ContractId,
    pub subject: EntityAddress,
    pub outcome: Outcome,
    pub delivery_count: u32,
    pub rework_count: u32,
    pub rework_limit: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_rating: Option<u8>,
    pub cost_records_present: bool,
    pub evidence: Evidence,
    pub occurred_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Quality,
    Reliability,
    Collaboration,
    Efficiency,
    Integrity,
}

impl Dimension {
    pub const ALL: [Dimension; 5] = [
        Dimension::Quality,
        Dimension::Reliability,
        Dimension::Collaboration,
        Dimension::Efficiency,
        Dimension::Integrity,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationConfig {
    pub half_life_ms: u64,
    /// Pseudo-count in `c = n_eff / (n_eff + k)`.
    pub confidence_k: f64,
    pub prior: f64,
    pub quality_settled: f64,
    pub quality_cancelled: f64,
    pub quality_disputed: f64,
    /// Share of efficiency owed to few delivery iterations; the rest rewards
    /// cost transparency.
    pub efficiency_iteration_weight: f64,
}

pub const DAY_MS: u64 = 86_400_000;

impl Default for ReputationConfig {
    fn default() -> Self {
        Self {
            half_life_ms: 30 * DAY_MS,
            confidence_k: 5.0,
            prior: 0.5,
            quality_settled: 0.8,
            quality_cancelled: 0.5,
            quality_disputed: 0.2,
            efficiency_iteration_weight: 0.5,
        }
    }
}

/// Build the reputation event for the seller of a terminal contract.
pub fn extract_event(
    record: &ContractRecord,
    explicit_rating: Option<u8>,
) -> Result<ReputationEvent, ReputationError> {
    let c = &record.contract;
    let outcome = match c.state {
        ContractState::Settled => Outcome::Settled,
        ContractState::Cancelled => Outcome::Cancelled,
        ContractState::Disputed => Outcome::Disputed,
        other => return Err(ReputationError::NotTerminal(c.contract_id, other)),
    };
    if let Some(r) = explicit_rating {
        if !(1..=5).contains(&r) {
            return Err(ReputationError::BadRating(r));
        }
    }
    let cards = &c.captured_cards;
    Ok(ReputationEvent {
        contract_id: c.contract_id,
        subject: c.seller,
        outcome,
        delivery_count: c.deliveries.len() as u32,
        rework_count: c.rework_count,
        rework_limit: c.rework_limit,
        explicit_rating,
        cost_records_present: c.deliveries.iter().any(|d| !d.cost_records.is_empty()),
        evidence: Evidence {
            chain_valid: verify_chain(&record.chain, &cards.arbiter.signing_public).valid,
            receipt_present: record.receipt.is_some(),
            cards_captured: cards.buyer.address == c.buyer
                && cards.seller.address == c.seller
                && cards.arbiter.address == c.arbiter,
        },
        occurred_at: record.chain.last().map_or(c.created_at, |s| s.recorded_at),
    })
}

/// Per-dimension raw scores in [0, 1], in [`Dimension::ALL`] order.
pub fn score_event(event: &ReputationEvent, config: &ReputationConfig) -> [f64; 5] {
    let quality = match event.explicit_rating {
        Some(r) => f64::from(r) / 5.0,
        None => match event.outcome {
            Outcome::Settled => config.quality_settled,
            Outcome::Cancelled => config.quality_cancelled,
            Outcome::Disputed => config.quality_disputed,
        },
    };
    let reliability = if event.outcome == Outcome::Settled { 1.0 } else { 0.0 };
    let collaboration = if event.rework_limit == 0 {
        if event.rework_count == 0 { 1.0 } else { 0.0 }
    } else {
        (1.0 - f64::from(event.rework_count) / f64::from(event.rework_limit)).max(0.0)
    };
    // No deliveries (e.g. cancelled before work) earns nothing for iterations.
    let iterations = if event.delivery_count == 0 {
        0.0
    } else {
        1.0 / f64::from(event.delivery_count)
    };
    let a = config.efficiency_iteration_weight;
    let efficiency = a * iterations + (1.0 - a) * if event.cost_records_present { 1.0 } else { 0.0 };
    let integrity = f64::from(event.evidence.count()) / 3.0;
    [quality, reliability, collaboration, efficiency, integrity].map(|v| v.clamp(0.0, 1.0))
}

pub fn recency_weight(occurred_at: u64, now: u64, half_life_ms: u64) -> f64 {
    let age = now.saturating_sub(occurred_at) as f64;
    (-age / half_life_ms as f64).exp2()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionScore {
    pub dimension: Dimension,
    pub value: f64,
    pub confidence: f64,
    pub events: Vec<ContractId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationProfile {
    pub subject: EntityAddress,
    pub dimensions: Vec<DimensionScore>,
    pub overall: f64,
    pub computed_at: u64,
}

impl ReputationProfile {
    pub fn value(&self, d: Dimension) -> f64 {
        self.dimensions
            .iter()
            .find(|s| s.dimension == d)
            .map_or(f64::NAN, |s| s.value)
    }

    pub fn confidence(&self) -> f64 {
        self.dimensions.first().map_or(0.0, |d| d.confidence)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationEntry {
    pub event: ContractId,
    pub raw: f64,
    pub weight: f64,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionExplanation {
    pub dimension: Dimension,
    pub entries: Vec<ExplanationEntry>,
    pub weight_sum: f64,
    pub weighted_mean: Option<f64>,
    pub confidence: f64,
    pub value: f64,
}

/// Everything needed to recompute a profile without the events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub subject: EntityAddress,
    pub computed_at: u64,
    pub confidence_k: f64,
    pub prior: f64,
    pub dimensions: Vec<DimensionExplanation>,
    pub overall: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn blend(entries: &[ExplanationEntry], k: f64, prior: f64) -> (f64, Option<f64>, f64, f64) {
    let weight_sum: f64 = entries.iter().map(|e| e.weight).sum();
    let weighted: f64 = entries.iter().map(|e| e.weight * e.raw).sum();
    if entries.is_empty() || weight_sum == 0.0 {
        return (weight_sum, None, 0.0, prior);
    }
    let mean = weighted / weight_sum;
    let c = weight_sum / (weight_sum + k);
    let value = (c * mean + (1.0 - c) * prior).clamp(0.0, 1.0);
    (weight_sum, Some(mean), c, value)
}

fn overall_of(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    (v.iter().sum::<f64>() / v.len() as f64).clamp(0.0, 1.0)
}

fn build_explanation(
    subject: EntityAddress,
    events: &[ReputationEvent],
    now: u64,
    config: &ReputationConfig,
) -> Result<Explanation, ReputationError> {
    if let Some(e) = events.iter().find(|e| e.subject != subject) {
        return Err(ReputationError::MixedSubjects {
            event: e.contract_id,
            expected: subject,
            found: e.subject,
        });
    }
    let scored: Vec<([f64; 5], f64)> = events
        .iter()
        .map(|e| {
            (
                score_event(e, config),
                recency_weight(e.occurred_at, now, config.half_life_ms),
            )
        })
        .collect();
    let dimensions: Vec<DimensionExplanation> = Dimension::ALL
        .iter()
        .enumerate()
        .map(|(j, &dimension)| {
            let entries: Vec<ExplanationEntry> = events
                .iter()
                .zip(&scored)
                .map(|(e, (raw, w))| ExplanationEntry {
                    event: e.contract_id,
                    raw: raw[j],
                    weight: *w,
                    contribution: w * raw[j],
                })
                .collect();
            let (weight_sum, weighted_mean, confidence, value) =
                blend(&entries, config.confidence_k, config.prior);
            DimensionExplanation {
                dimension,
                entries,
                weight_sum,
                weighted_mean,
                confidence,
                value,
            }
        })
        .collect();
    let overall = overall_of(dimensions.iter().map(|d| d.value));
    Ok(Explanation {
        subject,
        computed_at: now,
        confidence_k: config.confidence_k,
        prior: config.prior,
        dimensions,
        overall,
        note: events
            .is_empty()
            .then(|| "no events: every dimension is the prior with zero confidence".to_owned()),
    })
}

/// Rebuild a profile from an explanation report alone, ignoring its
/// precomputed summaries.
pub fn recompute(report: &Explanation) -> ReputationProfile {
    let dimensions: Vec<DimensionScore> = report
        .dimensions
        .iter()
        .map(|d| {
            let (_, _, confidence, value) = blend(&d.entries, report.confidence_k, report.prior);
            DimensionScore {
                dimension: d.dimension,
                value,
                confidence,
                events: d.entries.iter().map(|e| e.event).collect(),
            }
        })
        .collect();
    ReputationProfile {
        subject: report.subject,
        overall: overall_of(dimensions.iter().map(|d| d.value)),
        dimensions,
        computed_at: report.computed_at,
    }
}

pub fn aggregate_profile(
    subject: EntityAddress,
    events: &[ReputationEvent],
    now: u64,
    config: &ReputationConfig,
) -> Result<ReputationProfile, ReputationError> {
    Ok(recompute(&build_explanation(subject, events, now, config)?))
}

/// Explain `profile` from `events`. Fails if any contributing event is
/// missing or if the events do not reproduce the profile.
pub fn explain(
    profile: &ReputationProfile,
    events: &[ReputationEvent],
    config: &ReputationConfig,
) -> Result<Explanation, ReputationError> {
    let mut missing: Vec<ContractId> = profile
        .dimensions
        .iter()
        .flat_map(|d| d.events.iter().copied())
        .filter(|id| !events.iter().any(|e| e.contract_id == *id))
        .collect();
    missing.sort();
    missing.dedup();
    if !missing.is_empty() {
        return Err(ReputationError::MissingEvents(missing));
    }
    let report = build_explanation(profile.subject, events, profile.computed_at, config)?;
    if recompute(&report) != *profile {
        return Err(ReputationError::Mismatch);
    }
    Ok(report)
}
