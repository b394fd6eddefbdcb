use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::chain::Snapshot;
use super::receipt::Receipt;
use super::{
    Approval, CapturedCards, Contract, ContractAction, ContractState, Delivery, DeliveryVerdict,
    DisputeRecord, DisputeResolution, EscrowLedger, FundingMode, SettlementRef, Terms, TradeError,
};
use crate::bytes::{sha256, ContractId, DeliveryId, FixedBytes};
use crate::identity::{EntityAddress, EntityCard, Intent, KeyMaterial};

/// A contract with its audit chain and (once settled) its receipt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractRecord {
    pub contract: Contract,
    pub chain: Vec<Snapshot>,
    pub receipt: Option<Receipt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionOutcome {
    pub contract_id: ContractId,
    pub from: ContractState,
    pub to: ContractState,
    /// `None` when the action was an idempotent no-op (duplicate approval).
    pub snapshot: Option<Snapshot>,
    pub receipt: Option<Receipt>,
}

/// Every contract an arbiter service mediates, plus the shared escrow ledger.
/// Ledger effects and snapshot appends happen together or not at all.
#[derive(Debug, Clone, Default)]
pub struct TradeBook {
    contracts: BTreeMap<ContractId, ContractRecord>,
    pub ledger: EscrowLedger,
}

fn check_arbiter(cards: &CapturedCards, keys: &KeyMaterial) -> Result<(), TradeError> {
    if cards.arbiter.signing_public != keys.signing_public() {
        return Err(TradeError::ArbiterKeyMismatch);
    }
    Ok(())
}

fn delivery_id(contract: &ContractId, index: usize) -> DeliveryId {
    let mut seed = contract.0 .0.to_vec();
    seed.extend_from_slice(&(index as u64).to_be_bytes());
    let digest = sha256(&seed);
    let mut out = [0u8; 16];
    out.copy_from_slice(&digest.0[..16]);
    DeliveryId(FixedBytes(out))
}

impl TradeBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: &ContractId) -> Option<&ContractRecord> {
        self.contracts.get(id)
    }

    pub fn contracts(&self) -> impl Iterator<Item = &ContractRecord> {
        self.contracts.values()
    }

    /// Create a DRAFT contract and its genesis snapshot.
    #[allow(clippy::too_many_arguments)]
    pub fn propose(
        &mut self,
        contract_id: ContractId,
        proposer: EntityAddress,
        cards: CapturedCards,
        terms: Terms,
        funding_mode: FundingMode,
        rework_limit: u32,
        arbiter_keys: &KeyMaterial,
        now: u64,
    ) -> Result<&ContractRecord, TradeError> {
        let (buyer, seller, arbiter) = (
            cards.buyer.address,
            cards.seller.address,
            cards.arbiter.address,
        );
        if buyer == seller || buyer == arbiter || seller == arbiter {
            return Err(TradeError::DuplicateRoles);
        }
        if terms.price_microusd == 0 {
            return Err(TradeError::NonPositivePrice);
        }
        if proposer != buyer && proposer != seller {
            return Err(TradeError::NotAuthorized {
                actor: proposer,
                action: "propose",
            });
        }
        check_arbiter(&cards, arbiter_keys)?;
        if self.contracts.contains_key(&contract_id) {
            return Err(TradeError::DuplicateContract {
                contract: contract_id,
            });
        }
        let contract = Contract {
            contract_id,
            buyer,
            seller,
            arbiter,
            terms,
            funding_mode,
            state: ContractState::Draft,
            draft_version: 1,
            approvals: Vec::new(),
            rework_count: 0,
            rework_limit,
            deliveries: Vec::new(),
            settlement: None,
            dispute: None,
            captured_cards: cards,
            created_at: now,
        };
        let genesis = Snapshot::seal(
            &contract,
            Intent::CONTRACT_PROPOSE,
            proposer,
            None,
            now,
            arbiter_keys,
        );
        let record = ContractRecord {
            contract,
            chain: vec![genesis],
            receipt: None,
        };
        Ok(self.contracts.entry(contract_id).or_insert(record))
    }

    /// Validate and apply one transition. State is checked before the actor's
    /// role, so an out-of-place action always reports `WRONG_STATE`.
    pub fn apply(
        &mut self,
        contract_id: &ContractId,
        actor: EntityAddress,
        action: ContractAction,
        arbiter_keys: &KeyMaterial,
        now: u64,
    ) -> Result<TransitionOutcome, TradeError> {
        let record = self
            .contracts
            .get(contract_id)
            .ok_or(TradeError::UnknownContract(*contract_id))?;
        check_arbiter(&record.contract.captured_cards, arbiter_keys)?;
        let mut next = record.contract.clone();
        let mut ledger = self.ledger.clone();
        let from = next.state;
        let intent = action.intent();

        let changed = step(&mut next, &mut ledger, actor, action, now)?;
        if !changed {
            return Ok(TransitionOutcome {
                contract_id: *contract_id,
                from,
                to: from,
                snapshot: None,
                receipt: None,
            });
        }

        let record = self.contracts.get_mut(contract_id).expect("checked above");
        let snap = Snapshot::seal(
            &next,
            intent,
            actor,
            record.chain.last(),
            now,
            arbiter_keys,
        );
        let receipt = (next.state == ContractState::Settled).then(|| {
            Receipt::issue(
                next.contract_id,
                snap.hash,
                &next.all_cost_records(),
                next.settlement.clone().expect("settled contracts carry a reference"),
                next.arbiter,
                arbiter_keys,
                now,
            )
        });
        record.contract = next;
        record.chain.push(snap.clone());
        if receipt.is_some() {
            record.receipt = receipt.clone();
        }
        self.ledger = ledger;
        Ok(TransitionOutcome {
            contract_id: *contract_id,
            from,
            to: record.contract.state,
            snapshot: Some(snap),
            receipt,
        })
    }
}

fn wrong_state(c: &Contract, action: &'static str) -> TradeError {
    TradeError::WrongState {
        state: c.state,
        action,
    }
}

fn require(ok: bool, actor: EntityAddress, action: &'static str) -> Result<(), TradeError> {
    if ok {
        Ok(())
    } else {
        Err(TradeError::NotAuthorized { actor, action })
    }
}

/// Mutate `c` and `ledger` in place. Returns `false` for an accepted no-op.
fn step(
    c: &mut Contract,
    ledger: &mut EscrowLedger,
    actor: EntityAddress,
    action: ContractAction,
    now: u64,
) -> Result<bool, TradeError> {
    use ContractState as S;
    match action {
        ContractAction::Amend { terms } => {
            if c.state != S::Draft {
                return Err(wrong_state(c, "amend"));
            }
            require(c.is_party(&actor), actor, "amend")?;
            if terms.price_microusd == 0 {
                return Err(TradeError::NonPositivePrice);
            }
            c.terms = terms;
            c.draft_version += 1;
            c.approvals.clear();
        }
        ContractAction::Approve => {
            if c.state != S::Draft {
                return Err(wrong_state(c, "approve"));
            }
            require(c.is_party(&actor), actor, "approve")?;
            let version = c.draft_version;
            if c
                .approvals
                .iter()
                .any(|a| a.party == actor && a.draft_version == version)
            {
                return Ok(false);
            }
            c.approvals.retain(|a| a.draft_version == version);
            c.approvals.push(Approval {
                party: actor,
                draft_version: version,
            });
            let approved = |who: EntityAddress| c.approvals.iter().any(|a| a.party == who);
            if approved(c.buyer) && approved(c.seller) {
                c.state = S::Pending;
            }
        }
        ContractAction::Activate => {
            if c.state != S::Pending {
                return Err(wrong_state(c, "activate"));
            }
            require(actor == c.arbiter, actor, "activate")?;
            if c.escrowed() {
                ledger
                    .freeze(c.buyer, c.price())
                    .map_err(TradeError::InsufficientFunds)?;
            }
            c.state = S::Active;
        }
        ContractAction::Complete {
            artifacts,
            cost_records,
        } => {
            if c.state != S::Active {
                return Err(wrong_state(c, "complete"));
            }
            require(actor == c.seller, actor, "complete")?;
            if c.pending_delivery().is_some() {
                return Err(TradeError::DeliveryPending);
            }
            c.deliveries.push(Delivery {
                delivery_id: delivery_id(&c.contract_id, c.deliveries.len()),
                artifacts,
                cost_records,
                submitted_at: now,
                verdict: DeliveryVerdict::Pending,
            });
            c.state = S::Completing;
        }
        ContractAction::Rework => {
            if c.state != S::Completing {
                return Err(wrong_state(c, "rework"));
            }
            require(actor == c.buyer, actor, "rework")?;
            mark_pending(c, DeliveryVerdict::ReworkRequested);
            c.rework_count += 1;
            if c.rework_count <= c.rework_limit {
                c.state = S::Active;
            } else {
                c.dispute = Some(DisputeRecord {
                    raised_by: actor,
                    from_state: S::Completing,
                    raised_at: now,
                    resolution: None,
                });
                c.state = S::Disputed;
            }
        }
        ContractAction::Accept => {
            if c.state != S::Completing {
                return Err(wrong_state(c, "accept"));
            }
            require(actor == c.buyer, actor, "accept")?;
            mark_pending(c, DeliveryVerdict::Accepted);
            c.state = S::Settling;
        }
        ContractAction::Settle { direct_reference } => {
            if c.state != S::Settling {
                return Err(wrong_state(c, "settle"));
            }
            require(actor == c.arbiter, actor, "settle")?;
            let reference = match c.funding_mode {
                FundingMode::Escrow => {
                    ledger
                        .release(c.buyer, c.seller, c.price())
                        .map_err(TradeError::Ledger)?;
                    format!("escrow-transfer-{}", c.contract_id)
                }
                FundingMode::Direct => match direct_reference {
                    Some(r) if !r.is_empty() => r,
                    _ => return Err(TradeError::MissingDirectReference),
                },
            };
            c.settlement = Some(SettlementRef {
                mode: c.funding_mode,
                reference,
            });
            c.state = S::Settled;
        }
        ContractAction::Cancel => {
            if !matches!(c.state, S::Draft | S::Pending) {
                return Err(wrong_state(c, "cancel"));
            }
            require(c.is_party(&actor) || actor == c.arbiter, actor, "cancel")?;
            c.state = S::Cancelled;
        }
        ContractAction::Dispute => {
            if !matches!(c.state, S::Completing | S::Settling) {
                return Err(wrong_state(c, "dispute"));
            }
            require(c.is_party(&actor), actor, "dispute")?;
            c.dispute = Some(DisputeRecord {
                raised_by: actor,
                from_state: c.state,
                raised_at: now,
                resolution: None,
            });
            c.state = S::Disputed;
        }
        ContractAction::Resolve { buyer_fraction } => {
            if c.state != S::Disputed {
                return Err(wrong_state(c, "resolve"));
            }
            require(actor == c.arbiter, actor, "resolve")?;
            if !buyer_fraction.is_unit_interval() {
                return Err(TradeError::BadFraction(buyer_fraction));
            }
            let price = c.price();
            let (buyer, seller, escrowed) = (c.buyer, c.seller, c.escrowed());
            let dispute = c.dispute.as_mut().expect("DISPUTED carries a dispute record");
            if dispute.resolution.is_some() {
                return Err(TradeError::AlreadyResolved);
            }
            let buyer_share = buyer_fraction.share_of(price);
            let seller_share = price - buyer_share;
            if escrowed {
                ledger
                    .release(buyer, buyer, buyer_share)
                    .and_then(|_| ledger.release(buyer, seller, seller_share))
                    .map_err(TradeError::Ledger)?;
            }
            dispute.resolution = Some(DisputeResolution {
                buyer_fraction,
                buyer_share,
                seller_share,
                resolved_at: now,
            });
        }
    }
    Ok(true)
}

fn mark_pending(c: &mut Contract, verdict: DeliveryVerdict) {
    if let Some(d) = c
        .deliveries
        .iter_mut()
        .rev()
        .find(|d| d.verdict == DeliveryVerdict::Pending)
    {
        d.verdict = verdict;
    }
}

/// Convenience for tests and the CLI: capture cards in role order.
pub fn capture(buyer: &EntityCard, seller: &EntityCard, arbiter: &EntityCard) -> CapturedCards {
    CapturedCards {
        buyer: buyer.clone(),
        seller: seller.clone(),
        arbiter: arbiter.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identity::{EntityKind, EntityUid, HostUid};
    use crate::trade::{
        cost_digest, verify_chain, verify_receipt, CostDimension, CostRecord, Fraction,
    };

    pub(crate) struct Fixture {
        pub book: TradeBook,
        pub buyer: EntityCard,
        pub seller: EntityCard,
        pub arbiter: EntityCard,
        pub arbiter_keys: KeyMaterial,
    }

    fn card(n: u32, kind: EntityKind) -> (EntityCard, KeyMaterial) {
        let keys = KeyMaterial::from_seed(&[n as u8; 32]);
        let addr = EntityAddress::new(HostUid(0xa1), EntityUid(n));
        (EntityCard::new(format!("e{n}"), addr, kind, &keys).unwrap(), keys)
    }

    fn fixture(buyer_funds: u64) -> Fixture {
        let (buyer, _) = card(1, EntityKind::Organization);
        let (seller, _) = card(2, EntityKind::Service);
        let (arbiter, arbiter_keys) = card(3, EntityKind::Arbiter);
        let mut book = TradeBook::new();
        book.ledger.deposit(buyer.address, buyer_funds).unwrap();
        Fixture {
            book,
            buyer,
            seller,
            arbiter,
            arbiter_keys,
        }
    }

    impl Fixture {
        fn propose(&mut self, price: u64, mode: FundingMode) -> Result<ContractId, TradeError> {
            let id = ContractId(FixedBytes([7; 16]));
            self.book.propose(
                id,
                self.buyer.address,
                capture(&self.buyer, &self.seller, &self.arbiter),
                Terms {
                    description: "gpu".into(),
                    price_microusd: price,
                },
                mode,
                3,
                &self.arbiter_keys,
                0,
            )?;
            Ok(id)
        }

        fn act(&mut self, id: ContractId, who: EntityAddress, a: ContractAction) -> Result<TransitionOutcome, TradeError> {
            self.book.apply(&id, who, a, &self.arbiter_keys, 1)
        }

        fn to_active(&mut self, price: u64, mode: FundingMode) -> ContractId {
            let id = self.propose(price, mode).unwrap();
            let (b, s, a) = (self.buyer.address, self.seller.address, self.arbiter.address);
            self.act(id, b, ContractAction::Approve).unwrap();
            self.act(id, s, ContractAction::Approve).unwrap();
            self.act(id, a, ContractAction::Activate).unwrap();
            id
        }

        fn complete(&mut self, id: ContractId) {
            let s = self.seller.address;
            self.act(
                id,
                s,
                ContractAction::Complete {
                    artifacts: vec![],
                    cost_records: vec![],
                },
            )
            .unwrap();
        }

        fn state(&self, id: ContractId) -> ContractState {
            self.book.get(&id).unwrap().contract.state
        }
    }

    #[test]
    fn propose_validates_roles_and_price() {
        let mut f = fixture(0);
        assert_eq!(f.propose(0, FundingMode::Escrow), Err(TradeError::NonPositivePrice));
        f.seller = f.buyer.clone();
        assert_eq!(f.propose(5, FundingMode::Escrow), Err(TradeError::DuplicateRoles));
        let mut f = fixture(0);
        let id = f.propose(5, FundingMode::Escrow).unwrap();
        let r = f.book.get(&id).unwrap();
        assert_eq!(r.contract.state, ContractState::Draft);
        assert_eq!(r.chain.len(), 1);
    }

    #[test]
    fn amend_resets_approvals_and_bumps_version() {
        let mut f = fixture(0);
        let id = f.propose(5, FundingMode::Escrow).unwrap();
        let (b, s) = (f.buyer.address, f.seller.address);
        f.act(id, b, ContractAction::Approve).unwrap();
        let terms = Terms {
            description: "more".into(),
            price_microusd: 6,
        };
        f.act(id, s, ContractAction::Amend { terms: terms.clone() }).unwrap();
        let c = &f.book.get(&id).unwrap().contract;
        assert!(c.approvals.is_empty());
        assert_eq!(c.draft_version, 2);
        f.act(id, s, ContractAction::Amend { terms }).unwrap();
        assert_eq!(f.book.get(&id).unwrap().contract.draft_version, 3);
    }

    #[test]
    fn stale_approval_is_void() {
        let mut f = fixture(0);
        let id = f.propose(5, FundingMode::Escrow).unwrap();
        let (b, s) = (f.buyer.address, f.seller.address);
        f.act(id, b, ContractAction::Approve).unwrap();
        f.act(
            id,
            s,
            ContractAction::Amend {
                terms: Terms {
                    description: "v2".into(),
                    price_microusd: 5,
                },
            },
        )
        .unwrap();
        f.act(id, s, ContractAction::Approve).unwrap();
        assert_eq!(f.state(id), ContractState::Draft);
    }

    #[test]
    fn duplicate_approval_appends_nothing() {
        let mut f = fixture(0);
        let id = f.propose(5, FundingMode::Escrow).unwrap();
        let b = f.buyer.address;
        f.act(id, b, ContractAction::Approve).unwrap();
        let out = f.act(id, b, ContractAction::Approve).unwrap();
        assert!(out.snapshot.is_none());
        assert_eq!(f.book.get(&id).unwrap().chain.len(), 2);
    }

    #[test]
    fn activation_freezes_or_refuses_atomically() {
        let mut f = fixture(10);
        f.to_active(7, FundingMode::Escrow);
        let acct = f.book.ledger.account(&f.buyer.address);
        assert_eq!((acct.available, acct.frozen), (3, 7));

        let mut f = fixture(5);
        let id = f.propose(7, FundingMode::Escrow).unwrap();
        let (b, s, a) = (f.buyer.address, f.seller.address, f.arbiter.address);
        f.act(id, b, ContractAction::Approve).unwrap();
        f.act(id, s, ContractAction::Approve).unwrap();
        let before = f.book.ledger.clone();
        let chain_len = f.book.get(&id).unwrap().chain.len();
        let err = f.act(id, a, ContractAction::Activate).unwrap_err();
        assert_eq!(err.code(), "INSUFFICIENT_FUNDS");
        assert_eq!(f.book.ledger, before);
        assert_eq!(f.state(id), ContractState::Pending);
        assert_eq!(f.book.get(&id).unwrap().chain.len(), chain_len);

        let mut f = fixture(0);
        f.to_active(7, FundingMode::Direct);
        assert_eq!(f.book.ledger.total(), 0);
    }

    #[test]
    fn rework_counter_escalates_past_limit() {
        let mut f = fixture(10);
        let id = f.to_active(7, FundingMode::Escrow);
        let b = f.buyer.address;
        for n in 1..=3 {
            f.complete(id);
            f.act(id, b, ContractAction::Rework).unwrap();
            assert_eq!(f.state(id), ContractState::Active);
            assert_eq!(f.book.get(&id).unwrap().contract.rework_count, n);
        }
        f.complete(id);
        f.act(id, b, ContractAction::Rework).unwrap();
        assert_eq!(f.state(id), ContractState::Disputed);
        assert_eq!(f.book.get(&id).unwrap().contract.rework_count, 4);
        assert_eq!(f.book.ledger.account(&b).frozen, 7);
    }

    #[test]
    fn buyer_cannot_complete() {
        let mut f = fixture(10);
        let id = f.to_active(7, FundingMode::Escrow);
        let b = f.buyer.address;
        let err = f
            .act(
                id,
                b,
                ContractAction::Complete {
                    artifacts: vec![],
                    cost_records: vec![],
                },
            )
            .unwrap_err();
        assert_eq!(err.code(), "NOT_AUTHORIZED");
    }

    #[test]
    fn escrow_settlement_pays_seller_and_issues_receipt() {
        let mut f = fixture(10);
        let id = f.to_active(7, FundingMode::Escrow);
        let (b, s, a) = (f.buyer.address, f.seller.address, f.arbiter.address);
        let costs = vec![
            CostRecord {
                dimension: CostDimension::Usd,
                quantity: 1_500_000,
            },
            CostRecord {
                dimension: CostDimension::ComputeHours,
                quantity: 2_000,
            },
        ];
        f.act(
            id,
            s,
            ContractAction::Complete {
                artifacts: vec![sha256(b"weights")],
                cost_records: costs.clone(),
            },
        )
        .unwrap();
        f.act(id, b, ContractAction::Accept).unwrap();
        let total = f.book.ledger.total();
        let out = f
            .act(id, a, ContractAction::Settle { direct_reference: None })
            .unwrap();
        assert_eq!(f.book.ledger.total(), total);
        assert_eq!(f.book.ledger.account(&s).available, 7);
        assert_eq!(f.book.ledger.account(&b).frozen, 0);
        let receipt = out.receipt.unwrap();
        assert_eq!(receipt.cost_digest, cost_digest(&costs));
        assert!(verify_receipt(&receipt, &f.arbiter, None));
        assert!(verify_receipt(&receipt, &f.arbiter, Some(&costs)));
        assert!(!verify_receipt(&receipt, &f.arbiter, Some(&costs[..1])));
        let again = f.act(id, a, ContractAction::Settle { direct_reference: None });
        assert_eq!(again.unwrap_err().code(), "WRONG_STATE");
        let r = f.book.get(&id).unwrap();
        assert_eq!(r.receipt.as_ref(), Some(&receipt));
        assert_eq!(receipt.final_snapshot_hash, r.chain.last().unwrap().hash);
        assert!(verify_chain(&r.chain, &f.arbiter.signing_public).valid);
    }

    #[test]
    fn direct_settlement_needs_reference() {
        let mut f = fixture(0);
        let id = f.to_active(7, FundingMode::Direct);
        let (b, a) = (f.buyer.address, f.arbiter.address);
        f.complete(id);
        f.act(id, b, ContractAction::Accept).unwrap();
        let err = f
            .act(id, a, ContractAction::Settle { direct_reference: None })
            .unwrap_err();
        assert_eq!(err, TradeError::MissingDirectReference);
        f.act(
            id,
            a,
            ContractAction::Settle {
                direct_reference: Some("wire-123".into()),
            },
        )
        .unwrap();
        let c = &f.book.get(&id).unwrap().contract;
        assert_eq!(
            c.settlement,
            Some(SettlementRef {
                mode: FundingMode::Direct,
                reference: "wire-123".into()
            })
        );
    }

    #[test]
    fn cancel_only_before_activation() {
        let mut f = fixture(10);
        let id = f.propose(7, FundingMode::Escrow).unwrap();
        let b = f.buyer.address;
        f.act(id, b, ContractAction::Cancel).unwrap();
        assert_eq!(f.state(id), ContractState::Cancelled);
        let mut f = fixture(10);
        let id = f.to_active(7, FundingMode::Escrow);
        let err = f.act(id, b, ContractAction::Cancel).unwrap_err();
        assert_eq!(err.code(), "WRONG_STATE");
    }

    #[test]
    fn resolve_splits_frozen_price() {
        let mut f = fixture(8);
        let id = f.to_active(8, FundingMode::Escrow);
        let (b, s, a) = (f.buyer.address, f.seller.address, f.arbiter.address);
        f.complete(id);
        f.act(id, b, ContractAction::Accept).unwrap();
        f.act(id, s, ContractAction::Dispute).unwrap();
        assert_eq!(f.state(id), ContractState::Disputed);
        assert_eq!(f.book.ledger.account(&b).frozen, 8);
        f.act(
            id,
            a,
            ContractAction::Resolve {
                buyer_fraction: Fraction::new(1, 2),
            },
        )
        .unwrap();
        assert_eq!(f.book.ledger.account(&b).available, 4);
        assert_eq!(f.book.ledger.account(&s).available, 4);
        assert_eq!(f.book.ledger.total(), 8);
        let err = f
            .act(
                id,
                a,
                ContractAction::Resolve {
                    buyer_fraction: Fraction::new(1, 1),
                },
            )
            .unwrap_err();
        assert_eq!(err, TradeError::AlreadyResolved);
    }

    #[test]
    fn odd_split_rounds_toward_buyer() {
        let mut f = fixture(7);
        let id = f.to_active(7, FundingMode::Escrow);
        let (b, s, a) = (f.buyer.address, f.seller.address, f.arbiter.address);
        f.complete(id);
        f.act(id, b, ContractAction::Dispute).unwrap();
        let bad = f.act(
            id,
            a,
            ContractAction::Resolve {
                buyer_fraction: Fraction::new(3, 2),
            },
        );
        assert_eq!(bad.unwrap_err().code(), "BAD_FRACTION");
        f.act(
            id,
            a,
            ContractAction::Resolve {
                buyer_fraction: Fraction::new(1, 2),
            },
        )
        .unwrap();
        assert_eq!(f.book.ledger.account(&b).available, 4);
        assert_eq!(f.book.ledger.account(&s).available, 3);
    }

    #[test]
    fn foreign_arbiter_key_is_refused() {
        let mut f = fixture(0);
        f.arbiter_keys = KeyMaterial::from_seed(&[99; 32]);
        assert_eq!(
            f.propose(5, FundingMode::Escrow),
            Err(TradeError::ArbiterKeyMismatch)
        );
    }
}
