//! Brute-force reference auditor for differential testing.
//!
//! Everything here is re-derived from the rulebook with linear scans and
//! inline arithmetic: no deposit index, no redemption ledger type, no shared
//! resolution code. Discrepancies between this and the production path are
//! bugs by definition. Compiled only for tests (feature `testkit`).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigUint;

use crate::audit::{AuditOptions, FeePolicy, FindingCategory};
use crate::config::AuditConfig;
use crate::event::{ChainEvent, EventBody};
use crate::model::{Amount, PairKey, TokenId, TxRef, ZERO_ADDRESS};
use crate::pairing::ExternalEntry;

fn order_tuple(ev: &ChainEvent) -> (i64, &str, u64, u32, &str) {
    (
        ev.block_time,
        ev.tx.chain.as_str(),
        ev.block,
        ev.tx.log_index,
        &ev.tx.tx_hash,
    )
}

fn equivalent(a: &TokenId, b: &TokenId, pairs: &[(TokenId, TokenId)]) -> bool {
    if a == b {
        return true;
    }
    // Breadth-first reachability over the undirected pair graph.
    let mut seen: BTreeSet<&TokenId> = BTreeSet::new();
    let mut queue: Vec<&TokenId> = alloc::vec![a];
    while let Some(t) = queue.pop() {
        if t == b {
            return true;
        }
        if !seen.insert(t) {
            continue;
        }
        for (x, y) in pairs {
            if x == t && !seen.contains(y) {
                queue.push(y);
            }
            if y == t && !seen.contains(x) {
                queue.push(x);
            }
        }
    }
    false
}

fn resolve(
    ev: &ChainEvent,
    all: &[&ChainEvent],
    cfg: &AuditConfig,
) -> Option<Amount> {
    let bridge = cfg.bridge(&ev.bridge_id);
    let (token, claimed, is_deposit) = match &ev.body {
        EventBody::Deposit(d) => (&d.token, d.claimed_amount.clone(), true),
        EventBody::Withdrawal(w) => (&w.token, w.claimed_amount.clone(), false),
        EventBody::Transfer(_) => return None,
    };
    let trusted = bridge.map(|b| b.trusted_claim).unwrap_or(false);
    if trusted {
        if let Some(c) = claimed {
            return Some(c);
        }
    }
    let is_bridge_addr = |addr: &str| -> bool {
        bridge
            .map(|b| b.is_bridge_address(ev.chain(), addr))
            .unwrap_or(false)
    };
    let mut best: Option<(&ChainEvent, u64)> = None;
    for cand in all {
        if !cand.is_transfer()
            || cand.chain() != ev.chain()
            || cand.tx.tx_hash != ev.tx.tx_hash
        {
            continue;
        }
        let t = cand.transfer().unwrap();
        if &t.token != token {
            continue;
        }
        let dir_ok = if is_deposit {
            t.to == ZERO_ADDRESS || is_bridge_addr(&t.to)
        } else {
            t.from == ZERO_ADDRESS || is_bridge_addr(&t.from)
        };
        if !dir_ok {
            continue;
        }
        let dist = (cand.tx.log_index as i64 - ev.tx.log_index as i64).unsigned_abs();
        let better = match best {
            None => true,
            Some((prev, prev_dist)) => {
                dist < prev_dist || (dist == prev_dist && cand.tx.log_index < prev.tx.log_index)
            }
        };
        if better {
            best = Some((cand, dist));
        }
    }
    // Per-bridge explicit offsets take precedence over the nearest rule.
    if let Some(offsets) = bridge.and_then(|b| b.transfer_offsets.as_ref()) {
        for off in offsets {
            let want = ev.tx.log_index as i64 + off;
            for cand in all {
                if cand.is_transfer()
                    && cand.chain() == ev.chain()
                    && cand.tx.tx_hash == ev.tx.tx_hash
                    && cand.tx.log_index as i64 == want
                {
                    let t = cand.transfer().unwrap();
                    let dir_ok = if is_deposit {
                        t.to == ZERO_ADDRESS || is_bridge_addr(&t.to)
                    } else {
                        t.from == ZERO_ADDRESS || is_bridge_addr(&t.from)
                    };
                    if &t.token == token && dir_ok {
                        best = Some((cand, 0));
                    }
                }
            }
            if best.map(|(c, d)| d == 0 && c.tx.log_index as i64 == want).unwrap_or(false) {
                break;
            }
        }
    }
    if let Some((cand, _)) = best {
        let value = cand.transfer().unwrap().value.as_biguint().clone();
        let scaled = match bridge.and_then(|b| b.reflection_scale(token, ev.block)) {
            Some((num, den)) => (value * BigUint::from(num)) / BigUint::from(den),
            None => value,
        };
        return Some(Amount::from_biguint(scaled));
    }
    if is_deposit
        && bridge
            .map(|b| b.treat_missing_transfer_as_zero)
            .unwrap_or(false)
    {
        return Some(Amount::zero());
    }
    None
}

fn max_outflow(inflow: &Amount, policy: &FeePolicy, explicit_fee: Option<&Amount>) -> Amount {
    let i = inflow.as_biguint().clone();
    let fee: BigUint = match policy {
        FeePolicy::Explicit => explicit_fee
            .map(|f| f.as_biguint().clone())
            .unwrap_or_default(),
        FeePolicy::Fixed { amount } => amount.as_biguint().clone(),
        FeePolicy::Proportional { ppm } => {
            (&i * BigUint::from(*ppm)) / BigUint::from(1_000_000u64)
        }
        FeePolicy::Indeterminate => BigUint::default(),
    };
    if fee > i {
        Amount::zero()
    } else {
        Amount::from_biguint(i - fee)
    }
}

/// Audits a trace by checking every withdrawal against every deposit with
/// linear scans, in event order. Returns one `(withdrawal, category)` per
/// audited withdrawal.
pub fn oracle_audit(
    events: &[ChainEvent],
    external: &[ExternalEntry],
    cfg: &AuditConfig,
    options: &AuditOptions,
) -> Vec<(TxRef, FindingCategory)> {
    let mut sorted: Vec<&ChainEvent> = events.iter().collect();
    sorted.sort_by(|a, b| order_tuple(a).cmp(&order_tuple(b)));

    let deposits: Vec<&ChainEvent> = sorted.iter().copied().filter(|e| e.is_deposit()).collect();

    // Bridges with ambiguous deposit keys are skipped wholesale.
    let mut bad_bridges: BTreeSet<String> = BTreeSet::new();
    for (i, a) in deposits.iter().enumerate() {
        for b in &deposits[i + 1..] {
            if a.bridge_id != b.bridge_id || a.tx == b.tx {
                continue;
            }
            let same_id = match (
                a.deposit().unwrap().deposit_id,
                b.deposit().unwrap().deposit_id,
            ) {
                (Some(x), Some(y)) => x == y,
                _ => false,
            };
            if same_id || a.tx.tx_hash == b.tx.tx_hash {
                bad_bridges.insert(a.bridge_id.clone());
            }
        }
    }

    let mut redeemed: Vec<(TxRef, TxRef)> = Vec::new();
    let mut out = Vec::new();

    for w_ev in sorted.iter().filter(|e| e.is_withdrawal()) {
        if bad_bridges.contains(&w_ev.bridge_id) {
            continue;
        }
        let w = w_ev.withdrawal().unwrap();
        let bridge = cfg.bridge(&w_ev.bridge_id);

        let outflow = resolve(w_ev, &sorted, cfg);

        // Pairing by linear scan.
        enum Paired<'a> {
            Hit(&'a ChainEvent),
            Miss,
            NoHandle,
        }
        let paired = match &w.pair_ref {
            None => Paired::NoHandle,
            Some(PairKey::ById { bridge, deposit_id }) => deposits
                .iter()
                .find(|d| {
                    d.bridge_id == *bridge
                        && d.bridge_id == w_ev.bridge_id
                        && d.deposit().unwrap().deposit_id == Some(*deposit_id)
                })
                .map(|d| Paired::Hit(d))
                .unwrap_or(Paired::Miss),
            Some(PairKey::ByDepositHash { tx_hash }) => deposits
                .iter()
                .find(|d| d.bridge_id == w_ev.bridge_id && &d.tx.tx_hash == tx_hash)
                .map(|d| Paired::Hit(d))
                .unwrap_or(Paired::Miss),
            Some(PairKey::External { key }) => external
                .iter()
                .find(|e| &e.key == key)
                .and_then(|e| {
                    deposits.iter().find(|d| {
                        d.tx.chain == e.chain
                            && d.tx.tx_hash == e.deposit_tx
                            && d.bridge_id == w_ev.bridge_id
                    })
                })
                .map(|d| Paired::Hit(d))
                .unwrap_or(Paired::Miss),
        };

        let category = 'cat: {
            if outflow.is_none() {
                break 'cat FindingCategory::Undecodable;
            }
            let dep_ev = match paired {
                Paired::NoHandle => break 'cat FindingCategory::Unpairable,
                Paired::Miss => break 'cat FindingCategory::UnbackedWithdrawal,
                Paired::Hit(d) => d,
            };
            let inflow = match resolve(dep_ev, &sorted, cfg) {
                Some(a) => a,
                None => break 'cat FindingCategory::Undecodable,
            };
            let outflow = outflow.clone().unwrap();
            if !options.skip_double_spend_check {
                if let Some((_, prior)) = redeemed.iter().find(|(d, _)| d == &dep_ev.tx) {
                    if prior != &w_ev.tx {
                        break 'cat FindingCategory::DoubleSpend;
                    }
                }
            }
            let dep = dep_ev.deposit().unwrap();
            let consumed = |cat| {
                (cat, true)
            };
            let (cat, consume) = 'matched: {
                if let Some(dest) = &dep.dest_chain {
                    if dest != w_ev.chain() {
                        break 'matched consumed(FindingCategory::DestinationMismatch);
                    }
                }
                let pairs: &[(TokenId, TokenId)] =
                    bridge.map(|b| b.equivalences.as_slice()).unwrap_or(&[]);
                let mut tok_ok = equivalent(&dep.token, &w.token, pairs);
                if !tok_ok && !options.alert_on_unknown_token {
                    let known = |t: &TokenId| bridge.map(|b| b.knows_token(t)).unwrap_or(false);
                    tok_ok = !known(&dep.token) || !known(&w.token);
                }
                if !tok_ok {
                    break 'matched consumed(FindingCategory::TokenMismatch);
                }
                let policy = bridge
                    .map(|b| b.fee_policy(&dep.token).clone())
                    .unwrap_or(FeePolicy::Indeterminate);
                let max = max_outflow(&inflow, &policy, dep.explicit_fee.as_ref());
                if outflow > max {
                    break 'matched consumed(FindingCategory::AmountExceedsInflow);
                }
                if options.strict_fees
                    && policy.is_determinate()
                    && outflow < max
                    && !inflow.is_zero()
                {
                    break 'matched consumed(FindingCategory::ZeroWithdrawal);
                }
                if outflow.is_zero() && !inflow.is_zero() {
                    break 'matched consumed(FindingCategory::ZeroWithdrawal);
                }
                if dep.recipient.is_none() {
                    break 'matched consumed(FindingCategory::MissingRecipient);
                }
                let test = bridge
                    .map(|b| b.is_test_token(&w.token) || b.is_test_token(&dep.token))
                    .unwrap_or(false);
                if test {
                    break 'matched consumed(FindingCategory::TestToken);
                }
                consumed(FindingCategory::Balanced)
            };
            if consume && !redeemed.iter().any(|(d, _)| d == &dep_ev.tx) {
                redeemed.push((dep_ev.tx.clone(), w_ev.tx.clone()));
            }
            cat
        };
        out.push((w_ev.tx.clone(), category));
    }
    out
}

/// Independent flow total: Σ resolved deposits − Σ resolved withdrawals per
/// (bridge, class representative under one-hop-closed pairs is not enough, so
/// classes are joined by reachability).
pub fn oracle_flow_totals(
    events: &[ChainEvent],
    cfg: &AuditConfig,
) -> BTreeMap<(String, TokenId), num_bigint::BigInt> {
    use num_bigint::BigInt;
    let sorted: Vec<&ChainEvent> = events.iter().collect();
    let mut totals: BTreeMap<(String, TokenId), BigInt> = BTreeMap::new();
    for ev in &sorted {
        let sign: i64 = match &ev.body {
            EventBody::Deposit(_) => 1,
            EventBody::Withdrawal(_) => -1,
            EventBody::Transfer(_) => continue,
        };
        let Some(amount) = resolve(ev, &sorted, cfg) else {
            continue;
        };
        let pairs: Vec<(TokenId, TokenId)> = cfg
            .bridge(&ev.bridge_id)
            .map(|b| b.equivalences.clone())
            .unwrap_or_default();
        // Representative: smallest token reachable from this one.
        let mut members: BTreeSet<TokenId> = BTreeSet::new();
        let mut queue = alloc::vec![ev.token().clone()];
        while let Some(t) = queue.pop() {
            if !members.insert(t.clone()) {
                continue;
            }
            for (x, y) in &pairs {
                if x == &t {
                    queue.push(y.clone());
                }
                if y == &t {
                    queue.push(x.clone());
                }
            }
        }
        let repr = members.into_iter().next().unwrap();
        let entry = totals
            .entry((ev.bridge_id.clone(), repr))
            .or_insert_with(BigInt::default);
        *entry += BigInt::from(amount.as_biguint().clone()) * BigInt::from(sign);
    }
    totals
}
