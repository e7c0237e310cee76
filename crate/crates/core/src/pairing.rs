//! Matching each withdrawal to the deposit that backs it.
//!
//! Deposits are indexed under every pairing handle they expose: their
//! bridge-assigned deposit id when present, and always the hash of the
//! deposit transaction, since some bridges mix strategies. Withdrawals with
//! no in-band handle can still be paired through an externally supplied key
//! map, standing in for bridge query APIs.
//!
//! Absence is data, not failure: a handle that resolves to nothing is strong
//! attack evidence, while a withdrawal with no handle at all flags a bridge
//! design that is hostile to auditing. The two are kept distinct.

use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::event::ChainEvent;
use crate::model::{ChainId, PairKey, TxRef};

/// Result of trying to pair one withdrawal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairOutcome {
    /// The unique backing deposit, verbatim from the input trace.
    Matched(ChainEvent),
    /// A handle was present but resolves to no deposit.
    NoDeposit,
    /// The withdrawal carries no handle and no external entry.
    Unpairable,
}

/// One row of the external-map file: an opaque key some out-of-band source
/// associates with a deposit transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalEntry {
    pub key: String,
    pub deposit_tx: String,
    pub chain: ChainId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("duplicate deposit key {key} (first {first}, then {second})")]
pub struct DuplicateDepositKey {
    pub key: PairKey,
    pub first: TxRef,
    pub second: TxRef,
}

/// Lookup structure over all deposits of a trace. Immutable once built, so
/// audit workers can share it freely.
#[derive(Debug, Clone, Default)]
pub struct DepositIndex {
    by_id: BTreeMap<(String, u64), TxRef>,
    by_hash: BTreeMap<(String, String), TxRef>,
    external: BTreeMap<String, TxRef>,
    deposits: BTreeMap<TxRef, ChainEvent>,
}

impl DepositIndex {
    pub fn len(&self) -> usize {
        self.deposits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deposits.is_empty()
    }

    pub fn deposit(&self, tx: &TxRef) -> Option<&ChainEvent> {
        self.deposits.get(tx)
    }

    pub fn deposits(&self) -> impl Iterator<Item = &ChainEvent> {
        self.deposits.values()
    }

    /// Adds one deposit under every handle it exposes.
    pub fn insert(&mut self, deposit: &ChainEvent) -> Result<(), DuplicateDepositKey> {
        let body = deposit
            .deposit()
            .expect("DepositIndex::insert requires a deposit event");
        if let Some(id) = body.deposit_id {
            let key = (deposit.bridge_id.clone(), id);
            if let Some(first) = self.by_id.get(&key) {
                if first != &deposit.tx {
                    return Err(DuplicateDepositKey {
                        key: PairKey::ById {
                            bridge: deposit.bridge_id.clone(),
                            deposit_id: id,
                        },
                        first: first.clone(),
                        second: deposit.tx.clone(),
                    });
                }
            }
            self.by_id.insert(key, deposit.tx.clone());
        }
        let hash_key = (deposit.bridge_id.clone(), deposit.tx.tx_hash.clone());
        if let Some(first) = self.by_hash.get(&hash_key) {
            if first != &deposit.tx {
                return Err(DuplicateDepositKey {
                    key: PairKey::ByDepositHash {
                        tx_hash: deposit.tx.tx_hash.clone(),
                    },
                    first: first.clone(),
                    second: deposit.tx.clone(),
                });
            }
        }
        self.by_hash.insert(hash_key, deposit.tx.clone());
        self.deposits.insert(deposit.tx.clone(), deposit.clone());
        Ok(())
    }

    /// Resolves external keys against the deposits currently indexed.
    /// Entries naming unknown transactions stay dangling and later look up
    /// as [`PairOutcome::NoDeposit`].
    pub fn load_external(&mut self, entries: &[ExternalEntry]) {
        for entry in entries {
            let hit = self
                .deposits
                .keys()
                .find(|tx| tx.chain == entry.chain && tx.tx_hash == entry.deposit_tx)
                .cloned();
            if let Some(tx) = hit {
                self.external.insert(entry.key.clone(), tx);
            }
        }
    }
}

/// Builds the index for a trace's deposits plus an optional external map.
pub fn build_index(
    deposits: &[&ChainEvent],
    external: &[ExternalEntry],
) -> Result<DepositIndex, DuplicateDepositKey> {
    let mut index = DepositIndex::default();
    for d in deposits {
        index.insert(d)?;
    }
    index.load_external(external);
    Ok(index)
}

/// Resolves a withdrawal's handle against the index. The match is only valid
/// when the deposit belongs to the same bridge as the withdrawal.
pub fn pair_withdrawal(withdrawal: &ChainEvent, index: &DepositIndex) -> PairOutcome {
    let body = match withdrawal.withdrawal() {
        Some(w) => w,
        None => return PairOutcome::Unpairable,
    };
    let key = match &body.pair_ref {
        Some(k) => k,
        None => return PairOutcome::Unpairable,
    };
    let tx = match key {
        PairKey::ById { bridge, deposit_id } => index.by_id.get(&(bridge.clone(), *deposit_id)),
        PairKey::ByDepositHash { tx_hash } => index
            .by_hash
            .get(&(withdrawal.bridge_id.clone(), tx_hash.clone())),
        PairKey::External { key } => index.external.get(key),
    };
    match tx.and_then(|tx| index.deposits.get(tx)) {
        Some(deposit) if deposit.bridge_id == withdrawal.bridge_id => {
            PairOutcome::Matched(deposit.clone())
        }
        _ => PairOutcome::NoDeposit,
    }
}
