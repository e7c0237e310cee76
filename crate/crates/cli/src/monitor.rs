//! Live auditing: poll chain sources for newly finalized events, synchronize
//! on the slowest chain's finality, audit incrementally, and emit
//! deduplicated alerts.
//!
//! The monitor separates three roles. Sources track each chain and hand over
//! batches of finalized events (unfinalized blocks may still be reverted, so
//! they never appear here). The audit stage checks each withdrawal once its
//! block time is covered by the sync horizon — the minimum finalized head
//! across all chains — deferring anything newer so an in-flight deposit can
//! never race its withdrawal into a false alert. The store keeps deposits,
//! redemption marks, and alert history durable, which makes a restart from
//! checkpoint equivalent to an uninterrupted run.
//!
//! All time comes from an injected clock; nothing here reads the wall clock
//! directly, so latency behavior is testable in simulated time.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use bridgetally_core::audit::{
    audit_withdrawal, BridgeTransaction, Finding, FindingCategory, LedgerError, RedemptionStore,
    TokenEquivalence,
};
use bridgetally_core::config::{AuditConfig, BridgeConfig};
use bridgetally_core::event::{
    parse_event_line, resolve_amount, AmountUnresolvable, ChainEvent,
};
use bridgetally_core::model::{Amount, ChainId, TxRef};
use bridgetally_core::pairing::{pair_withdrawal, DepositIndex, ExternalEntry, PairOutcome};
use serde::{Deserialize, Serialize};

use crate::store::{ChainCursor, Checkpoint, StoreBackend, StoredResolution};

pub use bridgetally_core::audit::AuditOptions;

// ---------------------------------------------------------------------------
// Clocks
// ---------------------------------------------------------------------------

/// Supplies poll timestamps. `tick` yields the time of the next poll.
pub trait Clock {
    fn tick(&mut self, interval: i64) -> i64;
}

/// Simulated time: each tick advances by the interval, no sleeping.
#[derive(Debug, Clone)]
pub struct SimClock {
    now: i64,
}

impl SimClock {
    pub fn new(start: i64) -> Self {
        SimClock { now: start }
    }
}

impl Clock for SimClock {
    fn tick(&mut self, interval: i64) -> i64 {
        let t = self.now;
        self.now += interval;
        t
    }
}

/// Wall-clock time with sleeping between polls.
#[derive(Debug, Default)]
pub struct WallClock {
    started: bool,
}

impl Clock for WallClock {
    fn tick(&mut self, interval: i64) -> i64 {
        if self.started {
            std::thread::sleep(std::time::Duration::from_secs(interval.max(0) as u64));
        }
        self.started = true;
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0)
    }
}

// ---------------------------------------------------------------------------
// Sources
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, thiserror::Error)]
#[error("chain source: {0}")]
pub struct SourceError(pub String);

/// Events finalized since the last poll, plus how far finality has advanced.
#[derive(Debug, Clone)]
pub struct SourceBatch {
    pub events: Vec<ChainEvent>,
    pub finalized_head_time: i64,
}

/// Provider of finalized events for one chain. Batches are in order,
/// non-overlapping, and block-complete: a transaction's transfer events
/// arrive in the same batch as its bridge event.
pub trait ChainSource: Send {
    fn chain(&self) -> &ChainId;
    fn next_finalized_batch(&mut self, now: i64) -> Result<SourceBatch, SourceError>;
    /// Rewind so that events after `cursor` (exclusive) are delivered again.
    fn seek(&mut self, cursor: Option<&ChainCursor>) -> Result<(), SourceError>;
}

fn past_cursor(ev: &ChainEvent, cursor: Option<&ChainCursor>) -> bool {
    match cursor {
        None => true,
        Some(c) => (ev.block_time, ev.block) > (c.block_time, c.block),
    }
}

/// In-memory feed over a pregenerated trace; finality is modeled by holding
/// events back until `now - finality_lag` reaches their block time.
pub struct SimFeedSource {
    chain: ChainId,
    finality_lag: i64,
    events: Vec<ChainEvent>,
    cursor: usize,
}

impl SimFeedSource {
    pub fn new(chain: ChainId, finality_lag: i64, mut events: Vec<ChainEvent>) -> Self {
        events.sort_by_cached_key(|e| e.order());
        SimFeedSource {
            chain,
            finality_lag,
            events,
            cursor: 0,
        }
    }
}

impl ChainSource for SimFeedSource {
    fn chain(&self) -> &ChainId {
        &self.chain
    }

    fn next_finalized_batch(&mut self, now: i64) -> Result<SourceBatch, SourceError> {
        let head = now - self.finality_lag;
        let mut events = Vec::new();
        while self.cursor < self.events.len() && self.events[self.cursor].block_time <= head {
            events.push(self.events[self.cursor].clone());
            self.cursor += 1;
        }
        Ok(SourceBatch {
            events,
            finalized_head_time: head,
        })
    }

    fn seek(&mut self, cursor: Option<&ChainCursor>) -> Result<(), SourceError> {
        self.cursor = self
            .events
            .iter()
            .position(|e| past_cursor(e, cursor))
            .unwrap_or(self.events.len());
        Ok(())
    }
}

/// Tails a chain's event-log file, releasing records as they finalize.
/// Records must be ordered by block time (a format invariant); the read
/// offset only advances past records that were actually delivered.
pub struct FileTailSource {
    chain: ChainId,
    finality_lag: i64,
    path: PathBuf,
    offset: u64,
    resume: Option<ChainCursor>,
    pub parse_errors: u64,
}

impl FileTailSource {
    pub fn new(chain: ChainId, finality_lag: i64, path: &Path) -> Self {
        FileTailSource {
            chain,
            finality_lag,
            path: path.to_path_buf(),
            offset: 0,
            resume: None,
            parse_errors: 0,
        }
    }
}

impl ChainSource for FileTailSource {
    fn chain(&self) -> &ChainId {
        &self.chain
    }

    fn next_finalized_batch(&mut self, now: i64) -> Result<SourceBatch, SourceError> {
        let head = now - self.finality_lag;
        let text = match std::fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Ok(SourceBatch {
                    events: Vec::new(),
                    finalized_head_time: head,
                })
            }
            Err(e) => return Err(SourceError(e.to_string())),
        };
        let mut events = Vec::new();
        let mut at = self.offset as usize;
        if at > text.len() {
            return Err(SourceError("log file shrank".to_string()));
        }
        while at < text.len() {
            let rest = &text[at..];
            let Some(nl) = rest.find('\n') else {
                break; // partial line still being written
            };
            let line = &rest[..nl];
            let consumed = nl + 1;
            if line.trim().is_empty() {
                at += consumed;
                continue;
            }
            match parse_event_line(line, 0) {
                Err(e) => {
                    log::warn!("{}: skipping record: {e}", self.path.display());
                    self.parse_errors += 1;
                    at += consumed;
                }
                Ok(ev) => {
                    if ev.chain() != &self.chain {
                        log::warn!(
                            "{}: record for chain {} in {} log",
                            self.path.display(),
                            ev.chain(),
                            self.chain
                        );
                        self.parse_errors += 1;
                        at += consumed;
                        continue;
                    }
                    if !past_cursor(&ev, self.resume.as_ref()) {
                        at += consumed; // already processed before the restart
                        continue;
                    }
                    self.resume = None;
                    if ev.block_time > head {
                        break; // not finalized yet; re-read next poll
                    }
                    events.push(ev);
                    at += consumed;
                }
            }
        }
        self.offset = at as u64;
        Ok(SourceBatch {
            events,
            finalized_head_time: head,
        })
    }

    fn seek(&mut self, cursor: Option<&ChainCursor>) -> Result<(), SourceError> {
        self.offset = 0;
        self.resume = cursor.copied();
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Alerts and sinks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertAmounts {
    pub inflow: Option<Amount>,
    pub outflow: Amount,
    pub max_allowed: Option<Amount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub batch_id: u64,
    pub category: FindingCategory,
    pub bridge: String,
    pub withdrawal: TxRef,
    pub deposit: Option<TxRef>,
    pub amounts: AlertAmounts,
    pub note: String,
    pub emitted_at: i64,
}

impl Alert {
    pub fn from_finding(finding: &Finding, batch_id: u64, emitted_at: i64) -> Alert {
        Alert {
            batch_id,
            category: finding.category,
            bridge: finding.bridge.clone(),
            withdrawal: finding.withdrawal.clone(),
            deposit: finding.deposit.clone(),
            amounts: AlertAmounts {
                inflow: finding.inflow.clone(),
                outflow: finding.outflow.clone(),
                max_allowed: finding.max_allowed.clone(),
            },
            note: finding.note.clone(),
            emitted_at,
        }
    }
}

pub trait AlertSink {
    fn emit(&mut self, alert: &Alert) -> io::Result<()>;
}

/// Appends one JSON alert record per line, flushed per alert.
pub struct NdjsonSink {
    out: BufWriter<File>,
}

impl NdjsonSink {
    pub fn open(path: &Path) -> io::Result<Self> {
        Ok(NdjsonSink {
            out: BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?),
        })
    }
}

impl AlertSink for NdjsonSink {
    fn emit(&mut self, alert: &Alert) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, alert)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

/// Writes each alert as an HTTP-POST-shaped record file into an outbox
/// directory; actual delivery is someone else's job.
pub struct OutboxSink {
    dir: PathBuf,
    seq: u64,
}

impl OutboxSink {
    pub fn open(dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let seq = std::fs::read_dir(dir)?.count() as u64;
        Ok(OutboxSink {
            dir: dir.to_path_buf(),
            seq,
        })
    }
}

impl AlertSink for OutboxSink {
    fn emit(&mut self, alert: &Alert) -> io::Result<()> {
        self.seq += 1;
        let name = format!("{:08}_{}.json", self.seq, alert.category.as_str());
        let body = serde_json::json!({
            "method": "POST",
            "path": "/alerts",
            "headers": {"content-type": "application/json"},
            "body": alert,
        });
        let tmp = self.dir.join(format!(".{name}.tmp"));
        std::fs::write(&tmp, serde_json::to_vec_pretty(&body)?)?;
        std::fs::rename(tmp, self.dir.join(name))
    }
}

/// Test sink collecting alerts in memory.
#[derive(Default)]
pub struct CollectSink(pub Vec<Alert>);

impl AlertSink for CollectSink {
    fn emit(&mut self, alert: &Alert) -> io::Result<()> {
        self.0.push(alert.clone());
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// The monitor
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PollReport {
    pub now: i64,
    pub horizon: i64,
    pub events_seen: u64,
    pub withdrawals_audited: u64,
    pub alerts_emitted: u64,
    pub deferred: u64,
}

struct StoreLedger<'a, S: StoreBackend>(&'a mut S);

impl<S: StoreBackend> RedemptionStore for StoreLedger<'_, S> {
    fn redeemer(&self, deposit: &TxRef) -> Result<Option<TxRef>, LedgerError> {
        Ok(self.0.redeemer_of(deposit))
    }

    fn mark_redeemed(
        &mut self,
        deposit: &TxRef,
        withdrawal: &TxRef,
    ) -> Result<Option<TxRef>, LedgerError> {
        self.0
            .mark_redeemed(deposit, withdrawal)
            .map_err(|e| LedgerError {
                message: e.to_string(),
            })
    }
}

pub struct Monitor<S: StoreBackend> {
    cfg: AuditConfig,
    options: AuditOptions,
    store: S,
    sources: Vec<Box<dyn ChainSource>>,
    sink: Box<dyn AlertSink>,
    external: Vec<ExternalEntry>,
    /// Poll sources on separate threads; outputs are identical either way
    /// because batches are merged in a fixed order.
    pub threaded: bool,

    index: DepositIndex,
    equivalences: BTreeMap<String, TokenEquivalence>,
    deferred: Vec<ChainEvent>,
    pending_transfers: BTreeMap<(ChainId, String), Vec<ChainEvent>>,
    watermarks: BTreeMap<String, ChainCursor>,
    last_heads: BTreeMap<String, i64>,
    horizon: i64,
    batch_counter: u64,
}

impl<S: StoreBackend> Monitor<S> {
    pub fn open(
        cfg: AuditConfig,
        options: AuditOptions,
        store: S,
        sources: Vec<Box<dyn ChainSource>>,
        sink: Box<dyn AlertSink>,
        external: Vec<ExternalEntry>,
    ) -> io::Result<Monitor<S>> {
        let equivalences = bridgetally_core::audit::bridge_equivalences(&cfg);
        let mut monitor = Monitor {
            cfg,
            options,
            store,
            sources,
            sink,
            external,
            threaded: false,
            index: DepositIndex::default(),
            equivalences,
            deferred: Vec::new(),
            pending_transfers: BTreeMap::new(),
            watermarks: BTreeMap::new(),
            last_heads: BTreeMap::new(),
            horizon: i64::MIN,
            batch_counter: 0,
        };
        monitor.reset_from_checkpoint()?;
        Ok(monitor)
    }

    pub fn store(&self) -> &S {
        &self.store
    }

    pub fn batch_counter(&self) -> u64 {
        self.batch_counter
    }

    /// Reloads derived state from the checkpoint and store; also the recovery
    /// path after a failed poll.
    fn reset_from_checkpoint(&mut self) -> io::Result<()> {
        let cp = self.store.load_checkpoint()?.unwrap_or_default();
        self.batch_counter = cp.batch_counter;
        self.watermarks = cp.chains.clone();
        for source in &mut self.sources {
            let cursor = self.watermarks.get(source.chain().as_str());
            source
                .seek(cursor)
                .map_err(|e| io::Error::new(io::ErrorKind::Other, e.to_string()))?;
        }
        self.deferred.clear();
        self.pending_transfers.clear();
        self.index = DepositIndex::default();
        for deposit in self.store.deposits() {
            if let Err(e) = self.index.insert(&deposit) {
                log::warn!("store replay: {e}; keeping first deposit");
            }
        }
        self.index.load_external(&self.external);
        Ok(())
    }

    fn bridge_cfg(&self, bridge_id: &str) -> BridgeConfig {
        self.cfg
            .bridge(bridge_id)
            .cloned()
            .unwrap_or_else(|| BridgeConfig::unknown(bridge_id))
    }

    /// One polling round: ingest newly finalized events from every source,
    /// advance the sync horizon, audit every withdrawal the horizon covers,
    /// emit alerts for violations, and checkpoint.
    pub fn poll_once(&mut self, now: i64) -> io::Result<PollReport> {
        let mut report = PollReport {
            now,
            ..PollReport::default()
        };

        // 1. Collect batches (optionally polling sources in parallel).
        let results: Vec<Result<SourceBatch, SourceError>> = if self.threaded {
            std::thread::scope(|scope| {
                let handles: Vec<_> = self
                    .sources
                    .iter_mut()
                    .map(|source| scope.spawn(move || source.next_finalized_batch(now)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| {
                        h.join()
                            .unwrap_or_else(|_| Err(SourceError("source panicked".to_string())))
                    })
                    .collect()
            })
        } else {
            self.sources
                .iter_mut()
                .map(|source| source.next_finalized_batch(now))
                .collect()
        };

        let mut delivered: Vec<ChainEvent> = Vec::new();
        for (source, result) in self.sources.iter().zip(results) {
            match result {
                Ok(batch) => {
                    let head = self
                        .last_heads
                        .entry(source.chain().as_str().to_string())
                        .or_insert(i64::MIN);
                    *head = (*head).max(batch.finalized_head_time);
                    delivered.extend(batch.events);
                }
                Err(e) => {
                    // Skip this source's round; the horizon holds at its
                    // last head so nothing downstream races ahead of it.
                    log::warn!("source {}: {e}", source.chain());
                }
            }
        }
        delivered.sort_by_cached_key(|e| e.order());
        report.events_seen = delivered.len() as u64;

        // 2. Transfers first so same-transaction resolution sees them.
        for ev in delivered.iter().filter(|e| e.is_transfer()) {
            self.pending_transfers
                .entry((ev.chain().clone(), ev.tx.tx_hash.clone()))
                .or_default()
                .push(ev.clone());
        }

        // 3. Deposits: resolve inflow now and persist it with the event.
        let no_transfers: Vec<ChainEvent> = Vec::new();
        for ev in delivered.iter().filter(|e| e.is_deposit()) {
            let bridge_cfg = self.bridge_cfg(&ev.bridge_id);
            let key = (ev.chain().clone(), ev.tx.tx_hash.clone());
            let adjacent: Vec<&ChainEvent> = self
                .pending_transfers
                .get(&key)
                .unwrap_or(&no_transfers)
                .iter()
                .collect();
            let resolution =
                StoredResolution::from_result(&resolve_amount(ev, &adjacent, &bridge_cfg));
            self.store
                .put_deposit(ev, Some(&resolution), ev.block_time)?;
            if let Err(e) = self.index.insert(ev) {
                log::warn!("duplicate deposit key: {e}; keeping first");
            }
        }
        if !self.external.is_empty() {
            self.index.load_external(&self.external);
        }

        // 4. Horizon: minimum finalized head over all monitored chains,
        // never moving backwards.
        let candidate = self
            .sources
            .iter()
            .map(|s| {
                self.last_heads
                    .get(s.chain().as_str())
                    .copied()
                    .unwrap_or(i64::MIN)
            })
            .min()
            .unwrap_or(i64::MIN);
        self.horizon = self.horizon.max(candidate);
        report.horizon = self.horizon;

        // 5. Split withdrawals into auditable-now and deferred.
        let mut queue: Vec<ChainEvent> = std::mem::take(&mut self.deferred);
        queue.extend(delivered.iter().filter(|e| e.is_withdrawal()).cloned());
        queue.sort_by_cached_key(|e| e.order());
        let (eligible, deferred): (Vec<_>, Vec<_>) = queue
            .into_iter()
            .partition(|e| e.block_time <= self.horizon);
        self.deferred = deferred;
        report.deferred = self.deferred.len() as u64;

        // 6. Audit in event order; alerts for violations, deduplicated
        // against the store so restarts never re-alert.
        let mut audited_positions: BTreeMap<String, ChainCursor> = BTreeMap::new();
        for w in &eligible {
            let finding = self.audit_one(w)?;
            report.withdrawals_audited += 1;
            let pos = audited_positions
                .entry(w.chain().as_str().to_string())
                .or_default();
            if (w.block_time, w.block) > (pos.block_time, pos.block) {
                *pos = ChainCursor {
                    block: w.block,
                    block_time: w.block_time,
                };
            }
            if finding.category != FindingCategory::Balanced {
                self.store.record_finding(&finding, now)?;
            }
            if finding.category.is_violation()
                && !self.store.alert_seen(&finding.withdrawal, finding.category)
            {
                if report.alerts_emitted == 0 {
                    self.batch_counter += 1;
                }
                let alert = Alert::from_finding(&finding, self.batch_counter, now);
                self.sink.emit(&alert)?;
                self.store
                    .record_alert(&finding.withdrawal, finding.category, self.batch_counter)?;
                report.alerts_emitted += 1;
            }
        }

        // 7. Advance watermarks over everything fully processed.
        for ev in &delivered {
            if ev.block_time > self.horizon {
                continue;
            }
            let wm = self
                .watermarks
                .entry(ev.chain().as_str().to_string())
                .or_default();
            let pos = ChainCursor {
                block: ev.block,
                block_time: ev.block_time,
            };
            if (pos.block_time, pos.block) > (wm.block_time, wm.block) {
                *wm = pos;
            }
        }
        for (chain, pos) in audited_positions {
            let wm = self.watermarks.entry(chain).or_default();
            if (pos.block_time, pos.block) > (wm.block_time, wm.block) {
                *wm = pos;
            }
        }

        // 8. Transfers at or below the horizon have served their purpose.
        let horizon = self.horizon;
        self.pending_transfers
            .retain(|_, evs| evs.iter().any(|e| e.block_time > horizon));

        // 9. Age out hot storage and checkpoint the round.
        self.store
            .evict_to_cold(now, self.cfg.monitor.hot_window)?;
        let cp = Checkpoint {
            chains: self.watermarks.clone(),
            ledger_digest: self.store.ledger_digest(),
            batch_counter: self.batch_counter,
        };
        self.store.write_checkpoint(&cp)?;
        Ok(report)
    }

    fn audit_one(&mut self, w: &ChainEvent) -> io::Result<Finding> {
        let bridge_cfg = self.bridge_cfg(&w.bridge_id);
        let empty_equiv = TokenEquivalence::default();
        let equiv = self.equivalences.get(&w.bridge_id).unwrap_or(&empty_equiv);

        let pairing = pair_withdrawal(w, &self.index);
        let no_transfers: Vec<ChainEvent> = Vec::new();
        let key = (w.chain().clone(), w.tx.tx_hash.clone());
        let adjacent: Vec<&ChainEvent> = self
            .pending_transfers
            .get(&key)
            .unwrap_or(&no_transfers)
            .iter()
            .collect();
        let outflow = resolve_amount(w, &adjacent, &bridge_cfg);
        let inflow = match &pairing {
            PairOutcome::Matched(dep) => Some(
                self.store
                    .deposit_resolution(&dep.tx)
                    .map(|r| r.to_result())
                    .unwrap_or_else(|| {
                        Err(AmountUnresolvable {
                            reason: "deposit resolution missing from store".to_string(),
                        })
                    }),
            ),
            _ => None,
        };
        let bt = BridgeTransaction {
            withdrawal: w.clone(),
            pairing,
            inflow,
            outflow,
        };
        audit_withdrawal(
            &bt,
            &mut StoreLedger(&mut self.store),
            equiv,
            &bridge_cfg,
            &self.options,
        )
        .map_err(|e| io::Error::new(io::ErrorKind::Other, e.to_string()))
    }

    /// Polls until `max_polls` rounds have run (0 = until `stop`), advancing
    /// time through the injected clock. Panics and poll failures are
    /// contained: the round is dropped and state reloads from the checkpoint,
    /// so the next poll retries it.
    pub fn run(
        &mut self,
        clock: &mut dyn Clock,
        interval: i64,
        max_polls: u64,
        stop: Option<&AtomicBool>,
    ) -> Vec<PollReport> {
        let mut reports = Vec::new();
        let mut polls = 0u64;
        loop {
            if max_polls != 0 && polls >= max_polls {
                break;
            }
            if let Some(flag) = stop {
                if flag.load(Ordering::Relaxed) {
                    break;
                }
            }
            let now = clock.tick(interval);
            let outcome = catch_unwind(AssertUnwindSafe(|| self.poll_once(now)));
            match outcome {
                Ok(Ok(report)) => reports.push(report),
                Ok(Err(e)) => {
                    log::error!("poll at {now} failed: {e}; retrying from checkpoint");
                    if let Err(e) = self.reset_from_checkpoint() {
                        log::error!("recovery failed: {e}");
                    }
                }
                Err(_) => {
                    log::error!("poll at {now} panicked; retrying from checkpoint");
                    if let Err(e) = self.reset_from_checkpoint() {
                        log::error!("recovery failed: {e}");
                    }
                }
            }
            polls += 1;
        }
        reports
    }
}
