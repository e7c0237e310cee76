//! Normalized per-chain events and the line format they are exchanged in.
//!
//! Bridges signal deposits and withdrawals with explicit events, but their
//! formats are not standardized; decoding each bridge's native encoding is an
//! adapter concern. This module fixes one canonical schema — UTF-8, one JSON
//! object per line — and every other part of the system reads and writes it.
//!
//! It also answers the second question an auditor has to settle per event:
//! how many tokens actually moved. Claimed amounts are only trusted where
//! configured; otherwise the adjacent token-transfer event (or the
//! internal-transaction record for native coins) is consulted, with direction
//! sanity checks and reflection-token rescaling applied.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::BridgeConfig;
use crate::model::{Amount, ChainId, EventOrder, PairKey, TokenId, TxRef, ZERO_ADDRESS};

/// One normalized record from a chain's event log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainEvent {
    pub tx: TxRef,
    pub block: u64,
    pub block_time: i64,
    pub bridge_id: String,
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventBody {
    Deposit(DepositBody),
    Withdrawal(WithdrawalBody),
    Transfer(TransferBody),
}

/// Inflow leg: the bridge received (or claims to have received) tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepositBody {
    pub deposit_id: Option<u64>,
    pub token: TokenId,
    /// Amount as emitted by the bridge event; only as reliable as the bridge.
    pub claimed_amount: Option<Amount>,
    pub depositor: String,
    pub recipient: Option<String>,
    pub dest_chain: Option<ChainId>,
    pub explicit_fee: Option<Amount>,
}

/// Outflow leg: the bridge released tokens to a recipient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WithdrawalBody {
    /// Handle naming the backing deposit. `None` is legal input; it becomes
    /// an unpairable finding downstream.
    pub pair_ref: Option<PairKey>,
    pub token: TokenId,
    pub claimed_amount: Option<Amount>,
    pub recipient: String,
    pub source_chain: Option<ChainId>,
}

/// A token transfer adjacent to a bridge event, or an internal-transaction
/// record when the token is the chain's native coin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferBody {
    pub token: TokenId,
    pub from: String,
    pub to: String,
    pub value: Amount,
}

impl ChainEvent {
    pub fn chain(&self) -> &ChainId {
        &self.tx.chain
    }

    pub fn order(&self) -> EventOrder {
        EventOrder {
            block_time: self.block_time,
            chain: self.tx.chain.clone(),
            block: self.block,
            log_index: self.tx.log_index,
            tx_hash: self.tx.tx_hash.clone(),
        }
    }

    pub fn is_deposit(&self) -> bool {
        matches!(self.body, EventBody::Deposit(_))
    }

    pub fn is_withdrawal(&self) -> bool {
        matches!(self.body, EventBody::Withdrawal(_))
    }

    pub fn is_transfer(&self) -> bool {
        matches!(self.body, EventBody::Transfer(_))
    }

    pub fn deposit(&self) -> Option<&DepositBody> {
        match &self.body {
            EventBody::Deposit(d) => Some(d),
            _ => None,
        }
    }

    pub fn withdrawal(&self) -> Option<&WithdrawalBody> {
        match &self.body {
            EventBody::Withdrawal(w) => Some(w),
            _ => None,
        }
    }

    pub fn transfer(&self) -> Option<&TransferBody> {
        match &self.body {
            EventBody::Transfer(t) => Some(t),
            _ => None,
        }
    }

    /// Token the event is denominated in.
    pub fn token(&self) -> &TokenId {
        match &self.body {
            EventBody::Deposit(d) => &d.token,
            EventBody::Withdrawal(w) => &w.token,
            EventBody::Transfer(t) => &t.token,
        }
    }
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

/// Flat on-the-wire record. Field order here is the canonical key order of
/// serialized lines; unknown keys in input are ignored.
#[derive(Debug, Default, Serialize, Deserialize)]
struct WireRecord {
    chain: String,
    block: u64,
    block_time: i64,
    tx_hash: String,
    log_index: u32,
    bridge: String,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    deposit_id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    token: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    amount: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    from: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    to: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dest_chain: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fee: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair_by: Option<WirePairBy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    recipient: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    source_chain: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct WirePairBy {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ext: Option<String>,
}

/// A record that could not be decoded. Parsing continues past it.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    pub line: u64,
    pub reason: String,
}

fn lower(s: String) -> String {
    let mut s = s;
    s.make_ascii_lowercase();
    s
}

/// Decodes one log line. `line` is carried into errors for diagnostics.
pub fn parse_event_line(text: &str, line: u64) -> Result<ChainEvent, ParseError> {
    let raw: WireRecord = serde_json::from_str(text).map_err(|e| ParseError {
        line,
        reason: e.to_string(),
    })?;
    wire_to_event(raw).map_err(|reason| ParseError { line, reason })
}

fn req<T>(field: Option<T>, name: &str) -> Result<T, String> {
    field.ok_or_else(|| {
        let mut s = String::from(name);
        s.push_str(" required");
        s
    })
}

fn parse_amount(s: &str, name: &str) -> Result<Amount, String> {
    Amount::from_decimal(s).map_err(|_| {
        let mut msg = String::from(name);
        msg.push_str(": not a base-10 amount: ");
        msg.push_str(s);
        msg
    })
}

fn wire_to_event(raw: WireRecord) -> Result<ChainEvent, String> {
    if raw.chain.is_empty() {
        return Err("chain required".to_string());
    }
    if raw.tx_hash.is_empty() {
        return Err("tx_hash required".to_string());
    }
    if raw.bridge.is_empty() {
        return Err("bridge required".to_string());
    }
    let chain = ChainId::new(lower(raw.chain));
    let tx = TxRef::new(chain.clone(), lower(raw.tx_hash), raw.log_index);
    let token_of = |addr: String| TokenId::new(chain.clone(), addr);

    let body = match raw.kind.as_str() {
        "deposit" => {
            let token = token_of(req(raw.token, "token")?);
            let claimed_amount = raw
                .amount
                .as_deref()
                .map(|s| parse_amount(s, "amount"))
                .transpose()?;
            let explicit_fee = raw
                .fee
                .as_deref()
                .map(|s| parse_amount(s, "fee"))
                .transpose()?;
            EventBody::Deposit(DepositBody {
                deposit_id: raw.deposit_id,
                token,
                claimed_amount,
                depositor: lower(req(raw.from, "from")?),
                recipient: raw.to.map(lower),
                dest_chain: raw.dest_chain.map(|c| ChainId::new(lower(c))),
                explicit_fee,
            })
        }
        "withdrawal" => {
            let token = token_of(req(raw.token, "token")?);
            let claimed_amount = raw
                .amount
                .as_deref()
                .map(|s| parse_amount(s, "amount"))
                .transpose()?;
            let pair_ref = match raw.pair_by {
                None => None,
                Some(p) => Some(match (p.id, p.hash, p.ext) {
                    (Some(id), None, None) => PairKey::ById {
                        bridge: raw.bridge.clone(),
                        deposit_id: id,
                    },
                    (None, Some(h), None) => PairKey::ByDepositHash { tx_hash: lower(h) },
                    (None, None, Some(k)) => PairKey::External { key: k },
                    _ => return Err("pair_by must carry exactly one of id/hash/ext".to_string()),
                }),
            };
            EventBody::Withdrawal(WithdrawalBody {
                pair_ref,
                token,
                claimed_amount,
                recipient: lower(req(raw.recipient, "recipient")?),
                source_chain: raw.source_chain.map(|c| ChainId::new(lower(c))),
            })
        }
        "transfer" => EventBody::Transfer(TransferBody {
            token: token_of(req(raw.token, "token")?),
            from: lower(req(raw.from, "from")?),
            to: lower(req(raw.to, "to")?),
            value: parse_amount(&req(raw.value, "value")?, "value")?,
        }),
        other => {
            let mut msg = String::from("unknown kind: ");
            msg.push_str(other);
            return Err(msg);
        }
    };

    Ok(ChainEvent {
        tx,
        block: raw.block,
        block_time: raw.block_time,
        bridge_id: raw.bridge,
        body,
    })
}

fn event_to_wire(ev: &ChainEvent) -> WireRecord {
    let mut raw = WireRecord {
        chain: ev.tx.chain.as_str().to_string(),
        block: ev.block,
        block_time: ev.block_time,
        tx_hash: ev.tx.tx_hash.clone(),
        log_index: ev.tx.log_index,
        bridge: ev.bridge_id.clone(),
        ..WireRecord::default()
    };
    match &ev.body {
        EventBody::Deposit(d) => {
            raw.kind = "deposit".to_string();
            raw.deposit_id = d.deposit_id;
            raw.token = Some(d.token.address.clone());
            raw.amount = d.claimed_amount.as_ref().map(Amount::to_decimal);
            raw.from = Some(d.depositor.clone());
            raw.to = d.recipient.clone();
            raw.dest_chain = d.dest_chain.as_ref().map(|c| c.as_str().to_string());
            raw.fee = d.explicit_fee.as_ref().map(Amount::to_decimal);
        }
        EventBody::Withdrawal(w) => {
            raw.kind = "withdrawal".to_string();
            raw.token = Some(w.token.address.clone());
            raw.amount = w.claimed_amount.as_ref().map(Amount::to_decimal);
            raw.pair_by = w.pair_ref.as_ref().map(|p| match p {
                PairKey::ById { deposit_id, .. } => WirePairBy {
                    id: Some(*deposit_id),
                    ..WirePairBy::default()
                },
                PairKey::ByDepositHash { tx_hash } => WirePairBy {
                    hash: Some(tx_hash.clone()),
                    ..WirePairBy::default()
                },
                PairKey::External { key } => WirePairBy {
                    ext: Some(key.clone()),
                    ..WirePairBy::default()
                },
            });
            raw.recipient = Some(w.recipient.clone());
            raw.source_chain = w.source_chain.as_ref().map(|c| c.as_str().to_string());
        }
        EventBody::Transfer(t) => {
            raw.kind = "transfer".to_string();
            raw.token = Some(t.token.address.clone());
            raw.from = Some(t.from.clone());
            raw.to = Some(t.to.clone());
            raw.value = Some(t.value.to_decimal());
        }
    }
    raw
}

/// Canonical single-line encoding, without a trailing newline.
pub fn format_event_line(ev: &ChainEvent) -> String {
    serde_json::to_string(&event_to_wire(ev)).expect("event serializes")
}

/// Parses a whole log held in memory. Events come back in file order;
/// malformed records surface as errors without aborting the stream. When
/// `expected_chain` is set, records naming another chain are rejected, and
/// block times must be non-decreasing per chain within the file.
pub fn parse_event_log(
    text: &str,
    expected_chain: Option<&ChainId>,
) -> (Vec<ChainEvent>, Vec<ParseError>) {
    let mut events = Vec::new();
    let mut errors = Vec::new();
    let mut last_time: alloc::collections::BTreeMap<ChainId, i64> =
        alloc::collections::BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_event_line(line, line_no) {
            Ok(ev) => {
                if let Some(expected) = expected_chain {
                    if ev.chain() != expected {
                        errors.push(ParseError {
                            line: line_no,
                            reason: {
                                let mut m = String::from("record belongs to chain ");
                                m.push_str(ev.chain().as_str());
                                m.push_str(", expected ");
                                m.push_str(expected.as_str());
                                m
                            },
                        });
                        continue;
                    }
                }
                let last = last_time.entry(ev.chain().clone()).or_insert(i64::MIN);
                if ev.block_time < *last {
                    errors.push(ParseError {
                        line: line_no,
                        reason: "block_time decreased within chain log".to_string(),
                    });
                    continue;
                }
                *last = ev.block_time;
                events.push(ev);
            }
            Err(e) => errors.push(e),
        }
    }
    (events, errors)
}

// ---------------------------------------------------------------------------
// Amount resolution
// ---------------------------------------------------------------------------

/// Where a resolved amount came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmountSource {
    /// The bridge's own event, trusted by configuration (or the configured
    /// zero fallback when nothing corroborates a deposit).
    BridgeEvent,
    /// The token-transfer event adjacent to the bridge event.
    AdjacentTransfer,
    /// Internal-transaction record; native coins emit no transfer events.
    InternalTransaction,
}

/// The number of tokens an event actually moved, and how that was decided.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedAmount {
    pub amount: Amount,
    pub source: AmountSource,
    /// True when a reflection-token scale was applied to a logged value.
    pub scaled: bool,
}

/// No applicable source for the event's amount. Downstream this becomes an
/// undecodable finding, never a silent zero.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("amount unresolvable: {reason}")]
pub struct AmountUnresolvable {
    pub reason: String,
}

/// Establishes the token amount a deposit or withdrawal moved.
///
/// `adjacent` must list the transfer events from the same transaction,
/// ordered by log index. Resolution order: trusted claimed amount; then the
/// transfer passing the direction sanity check nearest in log index (an
/// explicit per-bridge offset list takes precedence); deposits may fall back
/// to zero when the bridge is configured with
/// `treat_missing_transfer_as_zero`. The direction check requires a deposit's
/// transfer to pay the bridge or the all-zero burn address, and a
/// withdrawal's transfer to come from the bridge or the all-zero mint
/// address.
pub fn resolve_amount(
    event: &ChainEvent,
    adjacent: &[&ChainEvent],
    bridge_cfg: &BridgeConfig,
) -> Result<ResolvedAmount, AmountUnresolvable> {
    let (token, claimed, is_deposit) = match &event.body {
        EventBody::Deposit(d) => (&d.token, d.claimed_amount.as_ref(), true),
        EventBody::Withdrawal(w) => (&w.token, w.claimed_amount.as_ref(), false),
        EventBody::Transfer(_) => {
            return Err(AmountUnresolvable {
                reason: "transfer events are not resolved".to_string(),
            })
        }
    };

    if bridge_cfg.trusted_claim {
        if let Some(amount) = claimed {
            return Ok(ResolvedAmount {
                amount: amount.clone(),
                source: AmountSource::BridgeEvent,
                scaled: false,
            });
        }
    }

    let chain = event.chain();
    let passes_direction = |t: &TransferBody| -> bool {
        if &t.token != token {
            return false;
        }
        if is_deposit {
            t.to == ZERO_ADDRESS || bridge_cfg.is_bridge_address(chain, &t.to)
        } else {
            t.from == ZERO_ADDRESS || bridge_cfg.is_bridge_address(chain, &t.from)
        }
    };

    let candidates: Vec<&ChainEvent> = adjacent
        .iter()
        .copied()
        .filter(|ev| {
            ev.tx.tx_hash == event.tx.tx_hash
                && ev.chain() == chain
                && ev.transfer().map(&passes_direction).unwrap_or(false)
        })
        .collect();

    let chosen = if let Some(offsets) = &bridge_cfg.transfer_offsets {
        let at_offset = offsets.iter().find_map(|off| {
            let want = event.tx.log_index as i64 + off;
            candidates
                .iter()
                .find(|c| c.tx.log_index as i64 == want)
                .copied()
        });
        at_offset.or_else(|| nearest_by_log_index(&candidates, event.tx.log_index))
    } else {
        nearest_by_log_index(&candidates, event.tx.log_index)
    };

    if let Some(transfer_ev) = chosen {
        let t = transfer_ev.transfer().expect("candidates are transfers");
        let source = if t.token.is_native() {
            AmountSource::InternalTransaction
        } else {
            AmountSource::AdjacentTransfer
        };
        let (amount, scaled) = match bridge_cfg.reflection_scale(token, event.block) {
            Some((num, den)) => (t.value.mul_div_floor(num, den), true),
            None => (t.value.clone(), false),
        };
        return Ok(ResolvedAmount {
            amount,
            source,
            scaled,
        });
    }

    // A deposit event nobody corroborated: the configured fallback prices it
    // at zero so the invariant fires on whatever gets withdrawn against it.
    if is_deposit && bridge_cfg.treat_missing_transfer_as_zero {
        return Ok(ResolvedAmount {
            amount: Amount::zero(),
            source: AmountSource::BridgeEvent,
            scaled: false,
        });
    }

    Err(AmountUnresolvable {
        reason: if candidates.is_empty() {
            "no trusted claim and no transfer passing the direction check".to_string()
        } else {
            "no transfer at configured offsets".to_string()
        },
    })
}

fn nearest_by_log_index<'a>(
    candidates: &[&'a ChainEvent],
    anchor: u32,
) -> Option<&'a ChainEvent> {
    candidates
        .iter()
        .min_by_key(|c| {
            let d = (c.tx.log_index as i64 - anchor as i64).unsigned_abs();
            (d, c.tx.log_index)
        })
        .copied()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AuditConfig;

    fn cfg() -> AuditConfig {
        AuditConfig::from_json(
            r#"{
            "chains": [{"name": "eth", "finality_lag": 720}],
            "bridges": [{
                "id": "hop",
                "addresses": {"eth": ["0xb00b"]},
                "treat_missing_transfer_as_zero": true
            }]
        }"#,
        )
        .unwrap()
    }

    fn deposit_line() -> &'static str {
        r#"{"chain":"eth","block":7,"block_time":100,"tx_hash":"0xaa","log_index":1,"bridge":"hop","kind":"deposit","deposit_id":1,"token":"0xt0k","amount":"100","from":"0xuser","to":"0xrecv","dest_chain":"bsc"}"#
    }

    fn transfer(tx_hash: &str, log_index: u32, from: &str, to: &str, value: u64) -> ChainEvent {
        ChainEvent {
            tx: TxRef::new(ChainId::new("eth"), tx_hash, log_index),
            block: 7,
            block_time: 100,
            bridge_id: "hop".to_string(),
            body: EventBody::Transfer(TransferBody {
                token: TokenId::new(ChainId::new("eth"), "0xt0k"),
                from: from.to_string(),
                to: to.to_string(),
                value: Amount::from(value),
            }),
        }
    }

    #[test]
    fn parses_valid_deposit_line() {
        let ev = parse_event_line(deposit_line(), 1).unwrap();
        assert!(ev.is_deposit());
        let d = ev.deposit().unwrap();
        assert_eq!(d.deposit_id, Some(1));
        assert_eq!(d.claimed_amount, Some(Amount::from(100u64)));
        assert_eq!(d.dest_chain, Some(ChainId::new("bsc")));
    }

    #[test]
    fn withdrawal_without_recipient_is_an_error() {
        let line = r#"{"chain":"eth","block":7,"block_time":100,"tx_hash":"0xaa","log_index":1,"bridge":"hop","kind":"withdrawal","token":"0xt0k","amount":"5"}"#;
        let err = parse_event_line(line, 3).unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.reason.contains("recipient required"), "{}", err.reason);
    }

    #[test]
    fn garbage_line_does_not_abort_stream() {
        let mut log = String::new();
        for _ in 0..3 {
            log.push_str(deposit_line());
            log.push('\n');
        }
        log.push_str("{not json}\n");
        let (events, errors) = parse_event_log(&log, None);
        assert_eq!(events.len(), 3);
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].line, 4);
    }

    #[test]
    fn unknown_keys_are_ignored() {
        let line = r#"{"chain":"eth","block":7,"block_time":100,"tx_hash":"0xaa","log_index":1,"bridge":"hop","kind":"transfer","token":"0xt0k","from":"0xa","to":"0xb","value":"9","gas_price":"1","memo":"hi"}"#;
        let ev = parse_event_line(line, 1).unwrap();
        assert_eq!(ev.transfer().unwrap().value, Amount::from(9u64));
    }

    #[test]
    fn chain_mismatch_rejected_when_expected_set() {
        let (events, errors) = parse_event_log(deposit_line(), Some(&ChainId::new("bsc")));
        assert!(events.is_empty());
        assert_eq!(errors.len(), 1);
    }

    #[test]
    fn decreasing_block_time_rejected() {
        let a = parse_event_line(deposit_line(), 1).unwrap();
        let mut b = a.clone();
        b.block_time = 99;
        b.tx.tx_hash = "0xbb".to_string();
        let mut log = format_event_line(&a);
        log.push('\n');
        log.push_str(&format_event_line(&b));
        let (events, errors) = parse_event_log(&log, None);
        assert_eq!(events.len(), 1);
        assert_eq!(errors.len(), 1);
        assert!(errors[0].reason.contains("block_time decreased"));
    }

    #[test]
    fn format_parse_round_trip_is_identity() {
        let ev = parse_event_line(deposit_line(), 1).unwrap();
        let line = format_event_line(&ev);
        let back = parse_event_line(&line, 1).unwrap();
        assert_eq!(ev, back);
        assert_eq!(format_event_line(&back), line);
    }

    #[test]
    fn untrusted_claim_resolves_through_transfer() {
        let cfg = cfg();
        let bridge = cfg.bridge("hop").unwrap();
        let dep = parse_event_line(deposit_line(), 1).unwrap();
        let t = transfer("0xaa", 2, "0xuser", "0xb00b", 100);
        let got = resolve_amount(&dep, &[&t], bridge).unwrap();
        assert_eq!(got.amount, Amount::from(100u64));
        assert_eq!(got.source, AmountSource::AdjacentTransfer);
        assert!(!got.scaled);
    }

    #[test]
    fn missing_transfer_falls_back_to_zero_when_configured() {
        // A deposit that claims 100 with nothing backing it prices at zero,
        // so later withdrawals against it violate the invariant.
        let cfg = cfg();
        let bridge = cfg.bridge("hop").unwrap();
        let dep = parse_event_line(deposit_line(), 1).unwrap();
        let got = resolve_amount(&dep, &[], bridge).unwrap();
        assert_eq!(got.amount, Amount::zero());
        assert_eq!(got.source, AmountSource::BridgeEvent);
    }

    #[test]
    fn missing_transfer_unresolvable_without_fallback() {
        let mut cfg = cfg();
        cfg.bridges[0].treat_missing_transfer_as_zero = false;
        let dep = parse_event_line(deposit_line(), 1).unwrap();
        assert!(resolve_amount(&dep, &[], cfg.bridge("hop").unwrap()).is_err());
    }

    #[test]
    fn direction_check_filters_unrelated_transfer() {
        // Two transfers in the transaction; only the one paying the bridge
        // may back the deposit.
        let cfg = cfg();
        let bridge = cfg.bridge("hop").unwrap();
        let dep = parse_event_line(deposit_line(), 1).unwrap();
        let to_bridge = transfer("0xaa", 3, "0xuser", "0xb00b", 100);
        let to_other = transfer("0xaa", 2, "0xuser", "0xelse", 999);
        let got = resolve_amount(&dep, &[&to_other, &to_bridge], bridge).unwrap();
        assert_eq!(got.amount, Amount::from(100u64));
    }

    #[test]
    fn trusted_claim_wins_over_transfers() {
        let mut cfg = cfg();
        cfg.bridges[0].trusted_claim = true;
        let bridge = cfg.bridge("hop").unwrap();
        let dep = parse_event_line(deposit_line(), 1).unwrap();
        let t = transfer("0xaa", 2, "0xuser", "0xb00b", 42);
        let got = resolve_amount(&dep, &[&t], bridge).unwrap();
        assert_eq!(got.amount, Amount::from(100u64));
        assert_eq!(got.source, AmountSource::BridgeEvent);
    }

    #[test]
    fn reflection_scale_recovers_intended_amount() {
        // Logged 64 at scale 100/64: exact rational arithmetic gives 100.
        let mut cfg = cfg();
        cfg.bridges[0].reflection.push(crate::config::ReflectionRule {
            token: TokenId::new(ChainId::new("eth"), "0xt0k"),
            num: 100,
            den: 64,
            from_block: 0,
            to_block: None,
        });
        let bridge = cfg.bridge("hop").unwrap();
        let dep = parse_event_line(deposit_line(), 1).unwrap();
        let t = transfer("0xaa", 2, "0xuser", "0xb00b", 64);
        let got = resolve_amount(&dep, &[&t], bridge).unwrap();
        assert_eq!(got.amount, Amount::from(100u64));
        assert!(got.scaled);
    }

    #[test]
    fn nearest_log_index_breaks_ties_low() {
        let cfg = cfg();
        let bridge = cfg.bridge("hop").unwrap();
        let dep = parse_event_line(deposit_line(), 1).unwrap(); // log_index 1
        let at0 = transfer("0xaa", 0, "0xuser", "0xb00b", 7);
        let at2 = transfer("0xaa", 2, "0xuser", "0xb00b", 8);
        let got = resolve_amount(&dep, &[&at0, &at2], bridge).unwrap();
        assert_eq!(got.amount, Amount::from(7u64));
    }

    #[test]
    fn explicit_offsets_take_precedence() {
        let mut cfg = cfg();
        cfg.bridges[0].transfer_offsets = Some(alloc::vec![1]);
        let bridge = cfg.bridge("hop").unwrap();
        let dep = parse_event_line(deposit_line(), 1).unwrap();
        let at0 = transfer("0xaa", 0, "0xuser", "0xb00b", 7);
        let at2 = transfer("0xaa", 2, "0xuser", "0xb00b", 8);
        let got = resolve_amount(&dep, &[&at0, &at2], bridge).unwrap();
        assert_eq!(got.amount, Amount::from(8u64));
    }

    #[test]
    fn native_token_resolves_via_internal_transaction() {
        let cfg = cfg();
        let bridge = cfg.bridge("hop").unwrap();
        let line = r#"{"chain":"eth","block":7,"block_time":100,"tx_hash":"0xcc","log_index":1,"bridge":"hop","kind":"deposit","deposit_id":2,"token":"native","from":"0xuser"}"#;
        let dep = parse_event_line(line, 1).unwrap();
        let mut t = transfer("0xcc", 2, "0xuser", "0xb00b", 55);
        if let EventBody::Transfer(body) = &mut t.body {
            body.token = TokenId::native(ChainId::new("eth"));
        }
        let got = resolve_amount(&dep, &[&t], bridge).unwrap();
        assert_eq!(got.source, AmountSource::InternalTransaction);
        assert_eq!(got.amount, Amount::from(55u64));
    }
}
