use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::identity::EntityAddress;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub available: u64,
    pub frozen: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("{account} has {available} available, needs {needed}")]
    InsufficientFunds {
        account: EntityAddress,
        needed: u64,
        available: u64,
    },
    #[error("{account} has {frozen} frozen, cannot release {needed}")]
    InsufficientFrozen {
        account: EntityAddress,
        needed: u64,
        frozen: u64,
    },
    #[error("balance overflow")]
    Overflow,
}

/// Micro-USD balances. Freeze, release and transfer conserve the total;
/// only [`EscrowLedger::deposit`] mints.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscrowLedger {
    accounts: BTreeMap<EntityAddress, Account>,
}

impl EscrowLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn account(&self, who: &EntityAddress) -> Account {
        self.accounts.get(who).copied().unwrap_or_default()
    }

    pub fn accounts(&self) -> &BTreeMap<EntityAddress, Account> {
        &self.accounts
    }

    pub fn total(&self) -> u128 {
        self.accounts
            .values()
            .map(|a| u128::from(a.available) + u128::from(a.frozen))
            .sum()
    }

    pub fn deposit(&mut self, who: EntityAddress, amount: u64) -> Result<(), LedgerError> {
        let acct = self.accounts.entry(who).or_default();
        acct.available = acct.available.checked_add(amount).ok_or(LedgerError::Overflow)?;
        Ok(())
    }

    pub fn can_freeze(&self, who: &EntityAddress, amount: u64) -> Result<(), LedgerError> {
        let acct = self.account(who);
        if acct.available < amount {
            return Err(LedgerError::InsufficientFunds {
                account: *who,
                needed: amount,
                available: acct.available,
            });
        }
        Ok(())
    }

    /// All-or-nothing: on error the ledger is untouched.
    pub fn freeze(&mut self, who: EntityAddress, amount: u64) -> Result<(), LedgerError> {
        self.can_freeze(&who, amount)?;
        let acct = self.accounts.entry(who).or_default();
        acct.available -= amount;
        acct.frozen += amount;
        Ok(())
    }

    /// Move `amount` out of `from`'s frozen balance into `to`'s available
    /// balance (`to` may equal `from`, which simply unfreezes).
    pub fn release(
        &mut self,
        from: EntityAddress,
        to: EntityAddress,
        amount: u64,
    ) -> Result<(), LedgerError> {
        let src = self.account(&from);
        if src.frozen < amount {
            return Err(LedgerError::InsufficientFrozen {
                account: from,
                needed: amount,
                frozen: src.frozen,
            });
        }
        let dst = self.account(&to);
        let room = if from == to { src.available } else { dst.available };
        room.checked_add(amount).ok_or(LedgerError::Overflow)?;
        self.accounts.entry(from).or_default().frozen -= amount;
        self.accounts.entry(to).or_default().available += amount;
        Ok(())
    }

    pub fn transfer(
        &mut self,
        from: EntityAddress,
        to: EntityAddress,
        amount: u64,
    ) -> Result<(), LedgerError> {
        self.can_freeze(&from, amount)?;
        self.account(&to)
            .available
            .checked_add(amount)
            .ok_or(LedgerError::Overflow)?;
        self.accounts.entry(from).or_default().available -= amount;
        self.accounts.entry(to).or_default().available += amount;
        Ok(())
    }
}
