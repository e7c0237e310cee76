//! The balance invariant and everything hung off it.
//!
//! For every bridge transaction, the tokens flowing out on the destination
//! chain must not exceed the tokens that flowed in on the source chain, less
//! the bridge's costs. Withdrawals are checked one at a time in a fixed
//! priority order and each produces exactly one [`Finding`]; redemption state
//! is tracked so a deposit can back at most one withdrawal.
//!
//! Fees complicate the invariant: they may be explicit in the deposit event,
//! fixed, proportional, or denominated in something the trace cannot price
//! (fiat). In the indeterminate case the rule falls back to "withdrawn must
//! not exceed deposited".

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::{AuditConfig, BridgeConfig};
use crate::event::{
    resolve_amount, AmountUnresolvable, ChainEvent, EventBody, ResolvedAmount,
};
use crate::model::{Amount, ChainId, TokenId, TxRef};
use crate::pairing::{build_index, pair_withdrawal, DuplicateDepositKey, ExternalEntry, PairOutcome};

// ---------------------------------------------------------------------------
// Fees
// ---------------------------------------------------------------------------

/// How a bridge charges for a given token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeePolicy {
    /// Fee is read from the deposit event itself.
    Explicit,
    Fixed { amount: Amount },
    /// Parts-per-million of the inflow, rounded down.
    Proportional { ppm: u64 },
    /// Fee exists but cannot be priced from the trace (e.g. fiat-denominated).
    Indeterminate,
}

impl FeePolicy {
    pub fn indeterminate() -> FeePolicy {
        FeePolicy::Indeterminate
    }

    /// Whether the policy pins an exact expected fee.
    pub fn is_determinate(&self) -> bool {
        !matches!(self, FeePolicy::Indeterminate)
    }
}

/// Largest outflow the invariant allows for a deposit of `inflow`.
///
/// A fee larger than the deposit caps the allowance at zero rather than
/// erroring: a misconfigured fee must not mask an attack check. With an
/// indeterminate fee the allowance is the inflow itself — the withdrawn
/// amount must simply not exceed the deposited amount.
pub fn compute_max_outflow(
    inflow: &Amount,
    policy: &FeePolicy,
    explicit_fee: Option<&Amount>,
) -> Amount {
    match policy {
        FeePolicy::Explicit => match explicit_fee {
            Some(fee) => inflow.saturating_sub(fee),
            None => inflow.clone(),
        },
        FeePolicy::Fixed { amount } => inflow.saturating_sub(amount),
        FeePolicy::Proportional { ppm } => {
            let fee = inflow.mul_div_floor(*ppm, 1_000_000);
            inflow.saturating_sub(&fee)
        }
        FeePolicy::Indeterminate => inflow.clone(),
    }
}

// ---------------------------------------------------------------------------
// Token equivalence
// ---------------------------------------------------------------------------

/// Transitive closure over declared wrapped/native token correspondences.
/// Tokens never mentioned form singleton classes.
#[derive(Debug, Clone, Default)]
pub struct TokenEquivalence {
    class: BTreeMap<TokenId, TokenId>,
}

impl TokenEquivalence {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = &'a (TokenId, TokenId)>) -> Self {
        let mut parent: BTreeMap<TokenId, TokenId> = BTreeMap::new();
        fn root(parent: &BTreeMap<TokenId, TokenId>, mut t: TokenId) -> TokenId {
            while let Some(p) = parent.get(&t) {
                if p == &t {
                    break;
                }
                t = p.clone();
            }
            t
        }
        for (a, b) in pairs {
            parent.entry(a.clone()).or_insert_with(|| a.clone());
            parent.entry(b.clone()).or_insert_with(|| b.clone());
            let ra = root(&parent, a.clone());
            let rb = root(&parent, b.clone());
            if ra != rb {
                // Smaller root wins so representatives are deterministic.
                let (keep, fold) = if ra < rb { (ra, rb) } else { (rb, ra) };
                parent.insert(fold, keep);
            }
        }
        let keys: Vec<TokenId> = parent.keys().cloned().collect();
        let mut class = BTreeMap::new();
        for k in keys {
            let r = root(&parent, k.clone());
            class.insert(k, r);
        }
        TokenEquivalence { class }
    }

    pub fn representative(&self, token: &TokenId) -> TokenId {
        self.class.get(token).cloned().unwrap_or_else(|| token.clone())
    }

    pub fn equivalent(&self, a: &TokenId, b: &TokenId) -> bool {
        a == b || self.representative(a) == self.representative(b)
    }
}

// ---------------------------------------------------------------------------
// Findings
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingCategory {
    Balanced,
    UnbackedWithdrawal,
    DoubleSpend,
    AmountExceedsInflow,
    DestinationMismatch,
    TokenMismatch,
    ZeroWithdrawal,
    MissingRecipient,
    Unpairable,
    Undecodable,
    TestToken,
}

impl FindingCategory {
    pub const ALL: [FindingCategory; 11] = [
        FindingCategory::Balanced,
        FindingCategory::UnbackedWithdrawal,
        FindingCategory::DoubleSpend,
        FindingCategory::AmountExceedsInflow,
        FindingCategory::DestinationMismatch,
        FindingCategory::TokenMismatch,
        FindingCategory::ZeroWithdrawal,
        FindingCategory::MissingRecipient,
        FindingCategory::Unpairable,
        FindingCategory::Undecodable,
        FindingCategory::TestToken,
    ];

    /// Label categories annotate rather than accuse; they do not trip exit
    /// codes or alerts.
    pub fn is_label(&self) -> bool {
        matches!(self, FindingCategory::TestToken)
    }

    pub fn is_violation(&self) -> bool {
        !matches!(self, FindingCategory::Balanced) && !self.is_label()
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FindingCategory::Balanced => "balanced",
            FindingCategory::UnbackedWithdrawal => "unbacked_withdrawal",
            FindingCategory::DoubleSpend => "double_spend",
            FindingCategory::AmountExceedsInflow => "amount_exceeds_inflow",
            FindingCategory::DestinationMismatch => "destination_mismatch",
            FindingCategory::TokenMismatch => "token_mismatch",
            FindingCategory::ZeroWithdrawal => "zero_withdrawal",
            FindingCategory::MissingRecipient => "missing_recipient",
            FindingCategory::Unpairable => "unpairable",
            FindingCategory::Undecodable => "undecodable",
            FindingCategory::TestToken => "test_token",
        }
    }
}

/// One audit verdict for one withdrawal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub category: FindingCategory,
    pub bridge: String,
    pub withdrawal: TxRef,
    pub deposit: Option<TxRef>,
    pub token: TokenId,
    pub recipient: Option<String>,
    pub inflow: Option<Amount>,
    pub outflow: Amount,
    pub max_allowed: Option<Amount>,
    pub note: String,
}

// ---------------------------------------------------------------------------
// Redemption state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("redemption ledger: {message}")]
pub struct LedgerError {
    pub message: String,
}

/// Insert-once map from deposit to its first redeeming withdrawal. The
/// durable implementation lives with the store; this trait is what the audit
/// needs from either.
pub trait RedemptionStore {
    fn redeemer(&self, deposit: &TxRef) -> Result<Option<TxRef>, LedgerError>;

    /// Compare-and-set: records `withdrawal` as the redeemer unless one
    /// exists, returning the prior entry. Idempotent for the same pair.
    fn mark_redeemed(
        &mut self,
        deposit: &TxRef,
        withdrawal: &TxRef,
    ) -> Result<Option<TxRef>, LedgerError>;
}

/// In-memory redemption ledger for batch audits.
#[derive(Debug, Clone, Default)]
pub struct RedemptionLedger {
    map: BTreeMap<TxRef, TxRef>,
}

impl RedemptionLedger {
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TxRef, &TxRef)> {
        self.map.iter()
    }
}

impl RedemptionStore for RedemptionLedger {
    fn redeemer(&self, deposit: &TxRef) -> Result<Option<TxRef>, LedgerError> {
        Ok(self.map.get(deposit).cloned())
    }

    fn mark_redeemed(
        &mut self,
        deposit: &TxRef,
        withdrawal: &TxRef,
    ) -> Result<Option<TxRef>, LedgerError> {
        if let Some(prior) = self.map.get(deposit) {
            return Ok(Some(prior.clone()));
        }
        self.map.insert(deposit.clone(), withdrawal.clone());
        Ok(None)
    }
}

// ---------------------------------------------------------------------------
// The per-withdrawal check
// ---------------------------------------------------------------------------

/// A withdrawal with everything the checks need: its pairing outcome and the
/// resolved amounts of both legs. `inflow` is present iff a deposit matched.
#[derive(Debug, Clone)]
pub struct BridgeTransaction {
    pub withdrawal: ChainEvent,
    pub pairing: PairOutcome,
    pub inflow: Option<Result<ResolvedAmount, AmountUnresolvable>>,
    pub outflow: Result<ResolvedAmount, AmountUnresolvable>,
}

impl BridgeTransaction {
    pub fn deposit(&self) -> Option<&ChainEvent> {
        match &self.pairing {
            PairOutcome::Matched(d) => Some(d),
            _ => None,
        }
    }
}

/// Runtime switches for the audit. `skip_double_spend_check` exists as an
/// ablation hook for scoring experiments and must stay off in production.
#[derive(Debug, Clone)]
pub struct AuditOptions {
    /// Determinate fee policies must be met exactly; shortfalls below the
    /// allowance are flagged too.
    pub strict_fees: bool,
    /// Alert on cross-chain token pairs the config does not know. When off,
    /// unknown pairs are auto-registered as equivalent.
    pub alert_on_unknown_token: bool,
    pub skip_double_spend_check: bool,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            strict_fees: false,
            alert_on_unknown_token: true,
            skip_double_spend_check: false,
        }
    }
}

/// Applies the invariant checks to one withdrawal, in fixed priority order,
/// and returns exactly one finding. Consuming verdicts (balanced or any
/// amount-level violation) mark the deposit redeemed; double-spends never
/// overwrite the ledger — first redeemer wins, matching withdraw-contract
/// semantics.
pub fn audit_withdrawal(
    bt: &BridgeTransaction,
    ledger: &mut dyn RedemptionStore,
    equiv: &TokenEquivalence,
    bridge_cfg: &BridgeConfig,
    options: &AuditOptions,
) -> Result<Finding, LedgerError> {
    let w_event = &bt.withdrawal;
    let w = w_event
        .withdrawal()
        .expect("audit_withdrawal requires a withdrawal event");

    let outflow_amount = match &bt.outflow {
        Ok(r) => r.amount.clone(),
        Err(_) => w.claimed_amount.clone().unwrap_or_else(Amount::zero),
    };

    let mut finding = Finding {
        category: FindingCategory::Balanced,
        bridge: w_event.bridge_id.clone(),
        withdrawal: w_event.tx.clone(),
        deposit: bt.deposit().map(|d| d.tx.clone()),
        token: w.token.clone(),
        recipient: Some(w.recipient.clone()),
        inflow: None,
        outflow: outflow_amount,
        max_allowed: None,
        note: String::new(),
    };

    // (1) Amounts must be resolvable before anything can be verified.
    if let Err(e) = &bt.outflow {
        finding.category = FindingCategory::Undecodable;
        finding.note = format!("withdrawal {e}");
        return Ok(finding);
    }
    if let (PairOutcome::Matched(_), Some(Err(e))) = (&bt.pairing, &bt.inflow) {
        finding.category = FindingCategory::Undecodable;
        finding.note = format!("deposit {e}");
        return Ok(finding);
    }

    // (2)/(3) Pairing outcomes.
    let deposit_event = match &bt.pairing {
        PairOutcome::Unpairable => {
            finding.category = FindingCategory::Unpairable;
            finding.note = "withdrawal carries no pairing handle".to_string();
            return Ok(finding);
        }
        PairOutcome::NoDeposit => {
            finding.category = FindingCategory::UnbackedWithdrawal;
            finding.note = match &w.pair_ref {
                Some(key) => format!("referenced deposit does not exist ({key})"),
                None => "referenced deposit does not exist".to_string(),
            };
            return Ok(finding);
        }
        PairOutcome::Matched(d) => d,
    };
    let inflow = match &bt.inflow {
        Some(Ok(r)) => r.amount.clone(),
        _ => unreachable!("matched pairs resolve inflow before the checks"),
    };
    finding.inflow = Some(inflow.clone());

    // (4) Double spend. A prior redeemer equal to this withdrawal is a
    // replay of our own audit (crash recovery), not a double spend.
    if !options.skip_double_spend_check {
        if let Some(prior) = ledger.redeemer(&deposit_event.tx)? {
            if prior != w_event.tx {
                finding.category = FindingCategory::DoubleSpend;
                finding.note = format!("deposit already redeemed by {prior}");
                return Ok(finding);
            }
        }
    }

    let outflow = finding.outflow.clone();
    let verdict = classify_matched(
        w_event,
        deposit_event,
        &inflow,
        &outflow,
        equiv,
        bridge_cfg,
        options,
        &mut finding,
    );
    finding.category = verdict;

    // Everything from destination checks down consumes the deposit.
    ledger.mark_redeemed(&deposit_event.tx, &w_event.tx)?;
    Ok(finding)
}

/// Checks (5)–(10) for a matched, resolvable pair. Returns the category and
/// fills amount fields on `finding`.
#[allow(clippy::too_many_arguments)]
fn classify_matched(
    w_event: &ChainEvent,
    deposit_event: &ChainEvent,
    inflow: &Amount,
    outflow: &Amount,
    equiv: &TokenEquivalence,
    bridge_cfg: &BridgeConfig,
    options: &AuditOptions,
    finding: &mut Finding,
) -> FindingCategory {
    let w = w_event.withdrawal().expect("withdrawal event");
    let deposit = deposit_event.deposit().expect("deposit event");

    // (5) Destination chain named by the deposit must match.
    if let Some(dest) = &deposit.dest_chain {
        if dest != w_event.chain() {
            finding.note = format!(
                "deposit names destination {dest}, withdrawn on {}",
                w_event.chain()
            );
            return FindingCategory::DestinationMismatch;
        }
    }

    // (6) Tokens must be the same or declared equivalent across chains.
    let mut tokens_ok = equiv.equivalent(&deposit.token, &w.token);
    if !tokens_ok && !options.alert_on_unknown_token {
        let unseen = !bridge_cfg.knows_token(&deposit.token) || !bridge_cfg.knows_token(&w.token);
        tokens_ok = unseen;
    }
    if !tokens_ok {
        finding.note = format!("deposited {} but withdrew {}", deposit.token, w.token);
        return FindingCategory::TokenMismatch;
    }

    // (7) The balance invariant itself.
    let policy = bridge_cfg.fee_policy(&deposit.token);
    let max_allowed = compute_max_outflow(inflow, policy, deposit.explicit_fee.as_ref());
    finding.max_allowed = Some(max_allowed.clone());
    if *outflow > max_allowed {
        finding.note = format!("outflow {outflow} exceeds allowance {max_allowed}");
        return FindingCategory::AmountExceedsInflow;
    }
    if options.strict_fees
        && policy.is_determinate()
        && *outflow < max_allowed
        && !inflow.is_zero()
    {
        finding.note = format!("outflow {outflow} below expected {max_allowed} (strict fee mode)");
        return FindingCategory::ZeroWithdrawal;
    }

    // (8) Nothing withdrawn against a real deposit: not an invariant breach,
    // but flagged as an anomaly.
    if outflow.is_zero() && !inflow.is_zero() {
        finding.note = format!("zero withdrawal against deposit of {inflow}");
        return FindingCategory::ZeroWithdrawal;
    }

    // (9) Deposits that never said who should receive the funds.
    if deposit.recipient.is_none() {
        finding.note = "deposit did not specify a recipient".to_string();
        return FindingCategory::MissingRecipient;
    }

    // (10) Report label; never suppresses the checks above.
    if bridge_cfg.is_test_token(&w.token) || bridge_cfg.is_test_token(&deposit.token) {
        finding.note = "test token".to_string();
        return FindingCategory::TestToken;
    }

    FindingCategory::Balanced
}

// ---------------------------------------------------------------------------
// Whole-trace audit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub deposits: u64,
    pub withdrawals: u64,
    /// Withdrawals that produced a finding (all of them, unless a bridge was
    /// skipped for duplicate deposit keys).
    pub analyzed: u64,
    pub violations: u64,
    pub categories: BTreeMap<FindingCategory, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeFailure {
    pub bridge: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    pub findings: Vec<Finding>,
    pub summary: AuditSummary,
    pub skipped: Vec<BridgeFailure>,
}

/// Groups transfer events by `(chain, tx_hash)` so bridge events can find
/// their same-transaction neighbors.
pub fn adjacent_transfers<'a>(
    sorted: &[&'a ChainEvent],
) -> BTreeMap<(ChainId, String), Vec<&'a ChainEvent>> {
    let mut map: BTreeMap<(ChainId, String), Vec<&ChainEvent>> = BTreeMap::new();
    for ev in sorted {
        if ev.is_transfer() {
            map.entry((ev.chain().clone(), ev.tx.tx_hash.clone()))
                .or_default()
                .push(ev);
        }
    }
    map
}

/// Token equivalence classes per bridge, from configuration.
pub fn bridge_equivalences(cfg: &AuditConfig) -> BTreeMap<String, TokenEquivalence> {
    cfg.bridges
        .iter()
        .map(|b| (b.id.clone(), TokenEquivalence::from_pairs(&b.equivalences)))
        .collect()
}

/// Audits an entire trace: sorts deterministically, builds per-bridge
/// deposit indexes, then folds [`audit_withdrawal`] over withdrawals in
/// event order. A duplicate deposit key is fatal for its bridge only; other
/// bridges still audit.
pub fn audit_trace(
    events: &[ChainEvent],
    external: &[ExternalEntry],
    cfg: &AuditConfig,
    options: &AuditOptions,
) -> AuditReport {
    let mut sorted: Vec<&ChainEvent> = events.iter().collect();
    sorted.sort_by_cached_key(|e| e.order());

    let transfers = adjacent_transfers(&sorted);
    let no_transfers: Vec<&ChainEvent> = Vec::new();

    // Per-bridge deposit indexes; a duplicate key poisons only that bridge.
    let mut deposits_by_bridge: BTreeMap<String, Vec<&ChainEvent>> = BTreeMap::new();
    let mut deposit_count = 0u64;
    for ev in &sorted {
        if ev.is_deposit() {
            deposit_count += 1;
            deposits_by_bridge
                .entry(ev.bridge_id.clone())
                .or_default()
                .push(ev);
        }
    }
    let mut indexes = BTreeMap::new();
    let mut skipped = Vec::new();
    for (bridge, deps) in &deposits_by_bridge {
        match build_index(deps, external) {
            Ok(index) => {
                indexes.insert(bridge.clone(), index);
            }
            Err(e @ DuplicateDepositKey { .. }) => skipped.push(BridgeFailure {
                bridge: bridge.clone(),
                error: e.to_string(),
            }),
        }
    }

    let default_bridge_cfg = BridgeConfig::unknown("");
    let equivalences = bridge_equivalences(cfg);
    let empty_equiv = TokenEquivalence::default();
    let empty_index = crate::pairing::DepositIndex::default();

    let mut ledger = RedemptionLedger::default();
    let mut inflow_memo: BTreeMap<TxRef, Result<ResolvedAmount, AmountUnresolvable>> =
        BTreeMap::new();
    let mut report = AuditReport::default();
    report.summary.deposits = deposit_count;
    for cat in FindingCategory::ALL {
        report.summary.categories.insert(cat, 0);
    }

    for ev in &sorted {
        if !ev.is_withdrawal() {
            continue;
        }
        report.summary.withdrawals += 1;
        if skipped.iter().any(|s| s.bridge == ev.bridge_id) {
            continue;
        }
        let bridge_cfg = cfg.bridge(&ev.bridge_id).unwrap_or(&default_bridge_cfg);
        let equiv = equivalences.get(&ev.bridge_id).unwrap_or(&empty_equiv);
        let index = indexes.get(&ev.bridge_id).unwrap_or(&empty_index);

        let pairing = pair_withdrawal(ev, index);
        let tx_key = (ev.chain().clone(), ev.tx.tx_hash.clone());
        let outflow = resolve_amount(
            ev,
            transfers.get(&tx_key).unwrap_or(&no_transfers),
            bridge_cfg,
        );
        let inflow = match &pairing {
            PairOutcome::Matched(dep) => Some(
                inflow_memo
                    .entry(dep.tx.clone())
                    .or_insert_with(|| {
                        let dep_key = (dep.chain().clone(), dep.tx.tx_hash.clone());
                        resolve_amount(
                            dep,
                            transfers.get(&dep_key).unwrap_or(&no_transfers),
                            bridge_cfg,
                        )
                    })
                    .clone(),
            ),
            _ => None,
        };
        let bt = BridgeTransaction {
            withdrawal: (*ev).clone(),
            pairing,
            inflow,
            outflow,
        };
        let finding = audit_withdrawal(&bt, &mut ledger, equiv, bridge_cfg, options)
            .expect("in-memory ledger is infallible");
        report.summary.analyzed += 1;
        if finding.category.is_violation() {
            report.summary.violations += 1;
        }
        *report
            .summary
            .categories
            .entry(finding.category)
            .or_insert(0) += 1;
        report.findings.push(finding);
    }

    report.skipped = skipped;
    report
}

// ---------------------------------------------------------------------------
// Aggregate flow
// ---------------------------------------------------------------------------

/// Signed base-unit total; crosses the wire as a decimal string.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct SignedAmount(pub BigInt);

impl SignedAmount {
    pub fn is_negative(&self) -> bool {
        self.0 < BigInt::zero()
    }
}

impl core::fmt::Display for SignedAmount {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for SignedAmount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for SignedAmount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse::<BigInt>()
            .map(SignedAmount)
            .map_err(D::Error::custom)
    }
}

/// Cumulative inflow − outflow over time for one bridge and one
/// token-equivalence class. `values[k]` is the running total after all
/// events in buckets `0..=k`, where bucket `k` spans
/// `[start + k*bucket, start + (k+1)*bucket)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSeries {
    pub bridge: String,
    pub token_class: TokenId,
    pub start: i64,
    pub bucket: i64,
    pub values: Vec<SignedAmount>,
}

impl FlowSeries {
    pub fn final_value(&self) -> SignedAmount {
        self.values.last().cloned().unwrap_or_default()
    }
}

/// Builds the aggregate inflow−outflow series per (bridge, token class) in
/// exact integer arithmetic. Balanced traffic keeps a series non-negative,
/// with short positive deviations for withdrawals still pending; unbacked
/// withdrawals drive it negative.
pub fn aggregate_flow(events: &[ChainEvent], cfg: &AuditConfig, bucket_secs: i64) -> Vec<FlowSeries> {
    assert!(bucket_secs > 0, "aggregate_flow requires a positive bucket");

    let mut sorted: Vec<&ChainEvent> = events.iter().collect();
    sorted.sort_by_cached_key(|e| e.order());
    let transfers = adjacent_transfers(&sorted);
    let no_transfers: Vec<&ChainEvent> = Vec::new();

    let equivalences = bridge_equivalences(cfg);
    let empty_equiv = TokenEquivalence::default();
    let default_bridge_cfg = BridgeConfig::unknown("");

    // (bridge, class) → ordered deltas.
    let mut deltas: BTreeMap<(String, TokenId), Vec<(i64, BigInt)>> = BTreeMap::new();
    for ev in &sorted {
        let sign = match &ev.body {
            EventBody::Deposit(_) => 1,
            EventBody::Withdrawal(_) => -1,
            EventBody::Transfer(_) => continue,
        };
        let bridge_cfg = cfg.bridge(&ev.bridge_id).unwrap_or(&default_bridge_cfg);
        let equiv = equivalences.get(&ev.bridge_id).unwrap_or(&empty_equiv);
        let tx_key = (ev.chain().clone(), ev.tx.tx_hash.clone());
        let resolved = match resolve_amount(
            ev,
            transfers.get(&tx_key).unwrap_or(&no_transfers),
            bridge_cfg,
        ) {
            Ok(r) => r,
            Err(_) => continue, // unresolvable legs surface in findings, not flows
        };
        let class = equiv.representative(ev.token());
        let signed = BigInt::from(resolved.amount.as_biguint().clone()) * BigInt::from(sign);
        deltas
            .entry((ev.bridge_id.clone(), class))
            .or_default()
            .push((ev.block_time, signed));
    }

    let mut series = Vec::new();
    for ((bridge, token_class), points) in deltas {
        let start = points.first().map(|(t, _)| *t).unwrap_or(0);
        let end = points.last().map(|(t, _)| *t).unwrap_or(start);
        let n_buckets = ((end - start) / bucket_secs) as usize + 1;
        let mut values = alloc::vec![BigInt::zero(); n_buckets];
        for (t, delta) in &points {
            let idx = ((t - start) / bucket_secs) as usize;
            values[idx] += delta;
        }
        let mut running = BigInt::zero();
        let values = values
            .into_iter()
            .map(|v| {
                running += v;
                SignedAmount(running.clone())
            })
            .collect();
        series.push(FlowSeries {
            bridge,
            token_class,
            start,
            bucket: bucket_secs,
            values,
        });
    }
    series
}
