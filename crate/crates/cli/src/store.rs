//! Embedded two-tier persistent store for live mode.
//!
//! Layout: a directory holding `hot.log`, `cold.log`, and `checkpoint.json`.
//! The logs are append-only sequences of length-prefixed JSON records;
//! recent records live in the hot log and migrate to the cold log once they
//! age past the hot window. State is rebuilt by replaying cold then hot, so
//! killing the process at any point loses nothing that was flushed.
//!
//! Checkpoints are whole-file atomic replaces written after each audit
//! batch; together with idempotent replay they make restart equivalent to an
//! uninterrupted run.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use bridgetally_core::audit::{Finding, FindingCategory};
use bridgetally_core::event::{
    format_event_line, parse_event_line, AmountUnresolvable, ChainEvent, ResolvedAmount,
};
use bridgetally_core::model::TxRef;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Hot,
    Cold,
}

/// Outcome of resolving a deposit's amount, persisted with the deposit so
/// restarts do not depend on transfer events still being in memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum StoredResolution {
    Resolved { amount: ResolvedAmount },
    Unresolvable { reason: String },
}

impl StoredResolution {
    pub fn from_result(res: &Result<ResolvedAmount, AmountUnresolvable>) -> Self {
        match res {
            Ok(amount) => StoredResolution::Resolved {
                amount: amount.clone(),
            },
            Err(e) => StoredResolution::Unresolvable {
                reason: e.reason.clone(),
            },
        }
    }

    pub fn to_result(&self) -> Result<ResolvedAmount, AmountUnresolvable> {
        match self {
            StoredResolution::Resolved { amount } => Ok(amount.clone()),
            StoredResolution::Unresolvable { reason } => Err(AmountUnresolvable {
                reason: reason.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Payload {
    Deposit {
        line: String,
        resolution: Option<StoredResolution>,
    },
    Redeemed {
        deposit: TxRef,
        withdrawal: TxRef,
    },
    Alerted {
        withdrawal: TxRef,
        category: FindingCategory,
        batch_id: u64,
    },
    Finding {
        finding: Finding,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoreRecord {
    key: String,
    written_at: i64,
    payload: Payload,
}

/// Per-chain resume point plus a digest of the redemption ledger.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub chains: BTreeMap<String, ChainCursor>,
    pub ledger_digest: String,
    pub batch_counter: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainCursor {
    pub block: u64,
    pub block_time: i64,
}

/// The storage contract live mode needs. Pluggable so a server-backed
/// implementation can replace the embedded one.
pub trait StoreBackend {
    fn put_deposit(
        &mut self,
        event: &ChainEvent,
        resolution: Option<&StoredResolution>,
        now: i64,
    ) -> io::Result<()>;
    fn deposit_event(&self, tx: &TxRef) -> Option<ChainEvent>;
    fn deposit_resolution(&self, tx: &TxRef) -> Option<StoredResolution>;
    fn deposits(&self) -> Vec<ChainEvent>;
    fn redeemer_of(&self, deposit: &TxRef) -> Option<TxRef>;
    /// Durable compare-and-set; flushed before it returns.
    fn mark_redeemed(&mut self, deposit: &TxRef, withdrawal: &TxRef)
        -> io::Result<Option<TxRef>>;
    fn alert_seen(&self, withdrawal: &TxRef, category: FindingCategory) -> bool;
    fn record_alert(
        &mut self,
        withdrawal: &TxRef,
        category: FindingCategory,
        batch_id: u64,
    ) -> io::Result<()>;
    fn record_finding(&mut self, finding: &Finding, now: i64) -> io::Result<()>;
    fn evict_to_cold(&mut self, now: i64, hot_window: i64) -> io::Result<usize>;
    fn write_checkpoint(&mut self, cp: &Checkpoint) -> io::Result<()>;
    fn load_checkpoint(&self) -> io::Result<Option<Checkpoint>>;
    fn ledger_digest(&self) -> String;
}

struct DepositEntry {
    event: ChainEvent,
    resolution: Option<StoredResolution>,
    tier: Tier,
}

/// File-backed store. Single logical writer; readers go through the
/// in-memory index, which always reflects flushed state.
pub struct LogStore {
    dir: PathBuf,
    hot: BufWriter<File>,
    cold: BufWriter<File>,
    hot_records: Vec<StoreRecord>,
    deposits: BTreeMap<TxRef, DepositEntry>,
    redeemed: BTreeMap<TxRef, TxRef>,
    alerted: BTreeMap<(TxRef, FindingCategory), u64>,
    findings_seen: BTreeSet<(TxRef, FindingCategory)>,
}

fn append_record(w: &mut BufWriter<File>, record: &StoreRecord) -> io::Result<()> {
    let body = serde_json::to_vec(record)?;
    w.write_all(&(body.len() as u32).to_le_bytes())?;
    w.write_all(&body)?;
    w.flush()
}

fn read_records(path: &Path) -> io::Result<Vec<StoreRecord>> {
    let mut records = Vec::new();
    let mut bytes = Vec::new();
    match File::open(path) {
        Ok(mut f) => {
            f.read_to_end(&mut bytes)?;
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(records),
        Err(e) => return Err(e),
    }
    let mut at = 0usize;
    while at + 4 <= bytes.len() {
        let len = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
        at += 4;
        if at + len > bytes.len() {
            // Torn tail from a crash mid-append; everything before it is good.
            break;
        }
        match serde_json::from_slice::<StoreRecord>(&bytes[at..at + len]) {
            Ok(r) => records.push(r),
            Err(e) => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}: corrupt record: {e}", path.display()),
                ))
            }
        }
        at += len;
    }
    Ok(records)
}

fn deposit_key(tx: &TxRef) -> String {
    format!("dep:{tx}")
}

fn finding_key(withdrawal: &TxRef, category: FindingCategory) -> String {
    format!("fnd:{withdrawal}:{}", category.as_str())
}

impl LogStore {
    pub fn open(dir: &Path) -> io::Result<LogStore> {
        std::fs::create_dir_all(dir)?;
        let hot_path = dir.join("hot.log");
        let cold_path = dir.join("cold.log");
        let cold_records = read_records(&cold_path)?;
        let hot_records = read_records(&hot_path)?;

        let mut store = LogStore {
            dir: dir.to_path_buf(),
            hot: BufWriter::new(OpenOptions::new().create(true).append(true).open(&hot_path)?),
            cold: BufWriter::new(
                OpenOptions::new().create(true).append(true).open(&cold_path)?,
            ),
            hot_records: Vec::new(),
            deposits: BTreeMap::new(),
            redeemed: BTreeMap::new(),
            alerted: BTreeMap::new(),
            findings_seen: BTreeSet::new(),
        };
        for r in cold_records {
            store.apply(&r, Tier::Cold);
        }
        for r in hot_records {
            store.apply(&r, Tier::Hot);
            store.hot_records.push(r);
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn apply(&mut self, record: &StoreRecord, tier: Tier) {
        match &record.payload {
            Payload::Deposit { line, resolution } => {
                if let Ok(event) = parse_event_line(line, 0) {
                    self.deposits.insert(
                        event.tx.clone(),
                        DepositEntry {
                            event,
                            resolution: resolution.clone(),
                            tier,
                        },
                    );
                }
            }
            Payload::Redeemed {
                deposit,
                withdrawal,
            } => {
                self.redeemed
                    .entry(deposit.clone())
                    .or_insert_with(|| withdrawal.clone());
            }
            Payload::Alerted {
                withdrawal,
                category,
                batch_id,
            } => {
                self.alerted
                    .insert((withdrawal.clone(), *category), *batch_id);
            }
            Payload::Finding { finding } => {
                self.findings_seen
                    .insert((finding.withdrawal.clone(), finding.category));
            }
        }
    }

    fn append_hot(&mut self, record: StoreRecord) -> io::Result<()> {
        append_record(&mut self.hot, &record)?;
        self.apply(&record, Tier::Hot);
        self.hot_records.push(record);
        Ok(())
    }
}

impl StoreBackend for LogStore {
    fn put_deposit(
        &mut self,
        event: &ChainEvent,
        resolution: Option<&StoredResolution>,
        now: i64,
    ) -> io::Result<()> {
        // Replays after restart hit this with identical content; skip.
        if self.deposits.contains_key(&event.tx) {
            return Ok(());
        }
        self.append_hot(StoreRecord {
            key: deposit_key(&event.tx),
            written_at: now,
            payload: Payload::Deposit {
                line: format_event_line(event),
                resolution: resolution.cloned(),
            },
        })
    }

    fn deposit_event(&self, tx: &TxRef) -> Option<ChainEvent> {
        // Tier placement is transparent to lookups.
        self.deposits.get(tx).map(|e| e.event.clone())
    }

    fn deposit_resolution(&self, tx: &TxRef) -> Option<StoredResolution> {
        self.deposits.get(tx).and_then(|e| e.resolution.clone())
    }

    fn deposits(&self) -> Vec<ChainEvent> {
        self.deposits.values().map(|e| e.event.clone()).collect()
    }

    fn redeemer_of(&self, deposit: &TxRef) -> Option<TxRef> {
        self.redeemed.get(deposit).cloned()
    }

    fn mark_redeemed(
        &mut self,
        deposit: &TxRef,
        withdrawal: &TxRef,
    ) -> io::Result<Option<TxRef>> {
        if let Some(prior) = self.redeemed.get(deposit) {
            return Ok(Some(prior.clone()));
        }
        self.append_hot(StoreRecord {
            key: format!("red:{deposit}"),
            written_at: 0,
            payload: Payload::Redeemed {
                deposit: deposit.clone(),
                withdrawal: withdrawal.clone(),
            },
        })?;
        Ok(None)
    }

    fn alert_seen(&self, withdrawal: &TxRef, category: FindingCategory) -> bool {
        self.alerted.contains_key(&(withdrawal.clone(), category))
    }

    fn record_alert(
        &mut self,
        withdrawal: &TxRef,
        category: FindingCategory,
        batch_id: u64,
    ) -> io::Result<()> {
        if self.alert_seen(withdrawal, category) {
            return Ok(());
        }
        self.append_hot(StoreRecord {
            key: format!("alr:{withdrawal}:{}", category.as_str()),
            written_at: 0,
            payload: Payload::Alerted {
                withdrawal: withdrawal.clone(),
                category,
                batch_id,
            },
        })
    }

    fn record_finding(&mut self, finding: &Finding, now: i64) -> io::Result<()> {
        let key = (finding.withdrawal.clone(), finding.category);
        if self.findings_seen.contains(&key) {
            return Ok(());
        }
        self.append_hot(StoreRecord {
            key: finding_key(&finding.withdrawal, finding.category),
            written_at: now,
            payload: Payload::Finding {
                finding: finding.clone(),
            },
        })
    }

    fn evict_to_cold(&mut self, now: i64, hot_window: i64) -> io::Result<usize> {
        assert!(hot_window > 0, "hot window must be positive");
        let cutoff = now - hot_window;
        let needs_move = self
            .hot_records
            .iter()
            .any(|r| matches!(r.payload, Payload::Deposit { .. } | Payload::Finding { .. })
                && r.written_at < cutoff);
        if !needs_move {
            return Ok(0);
        }
        let mut keep = Vec::new();
        let mut moved = 0usize;
        for record in std::mem::take(&mut self.hot_records) {
            let evict = matches!(
                record.payload,
                Payload::Deposit { .. } | Payload::Finding { .. }
            ) && record.written_at < cutoff;
            if evict {
                // Cold first: a crash between the two writes leaves the key
                // readable (cold copy) and the hot copy harmlessly shadowed
                // on replay.
                append_record(&mut self.cold, &record)?;
                if let Payload::Deposit { .. } = &record.payload {
                    if let Some(entry) = self
                        .deposits
                        .values_mut()
                        .find(|e| deposit_key(&e.event.tx) == record.key)
                    {
                        entry.tier = Tier::Cold;
                    }
                }
                moved += 1;
            } else {
                keep.push(record);
            }
        }
        self.cold.flush()?;
        self.cold.get_ref().sync_data()?;

        // Rewrite the hot log without the migrated records, atomically.
        let tmp = self.dir.join("hot.log.tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            for record in &keep {
                append_record(&mut w, record)?;
            }
            w.flush()?;
            w.get_ref().sync_data()?;
        }
        std::fs::rename(&tmp, self.dir.join("hot.log"))?;
        self.hot = BufWriter::new(
            OpenOptions::new()
                .append(true)
                .open(self.dir.join("hot.log"))?,
        );
        self.hot_records = keep;
        Ok(moved)
    }

    fn write_checkpoint(&mut self, cp: &Checkpoint) -> io::Result<()> {
        let tmp = self.dir.join("checkpoint.json.tmp");
        {
            let mut f = BufWriter::new(File::create(&tmp)?);
            serde_json::to_writer_pretty(&mut f, cp)?;
            f.flush()?;
            f.get_ref().sync_data()?;
        }
        std::fs::rename(tmp, self.dir.join("checkpoint.json"))
    }

    fn load_checkpoint(&self) -> io::Result<Option<Checkpoint>> {
        match std::fs::read_to_string(self.dir.join("checkpoint.json")) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn ledger_digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (d, w) in &self.redeemed {
            hasher.update(d.to_string().as_bytes());
            hasher.update(b"->");
            hasher.update(w.to_string().as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bridgetally_core::event::parse_event_line;

    fn deposit_at(n: u64, written_at: i64) -> (ChainEvent, i64) {
        let line = format!(
            r#"{{"chain":"eth","block":{n},"block_time":{n},"tx_hash":"0xd{n:04x}","log_index":0,"bridge":"b","kind":"deposit","deposit_id":{n},"token":"0xt","amount":"5","from":"0xu"}}"#
        );
        (parse_event_line(&line, 1).unwrap(), written_at)
    }

    #[test]
    fn put_then_get_returns_identical_event() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = LogStore::open(dir.path()).unwrap();
        let (ev, _) = deposit_at(1, 100);
        store.put_deposit(&ev, None, 100).unwrap();
        assert_eq!(store.deposit_event(&ev.tx), Some(ev));
    }

    #[test]
    fn get_unknown_is_none() {
        let dir = tempfile::tempdir().unwrap();
        let store = LogStore::open(dir.path()).unwrap();
        let tx = TxRef::new(
            bridgetally_core::model::ChainId::new("eth"),
            "0xmissing",
            0,
        );
        assert_eq!(store.deposit_event(&tx), None);
    }

    #[test]
    fn reopen_rebuilds_state() {
        let dir = tempfile::tempdir().unwrap();
        let (ev, _) = deposit_at(1, 100);
        let w = TxRef::new(bridgetally_core::model::ChainId::new("sol"), "0xw", 0);
        {
            let mut store = LogStore::open(dir.path()).unwrap();
            store.put_deposit(&ev, None, 100).unwrap();
            assert_eq!(store.mark_redeemed(&ev.tx, &w).unwrap(), None);
        }
        let store = LogStore::open(dir.path()).unwrap();
        assert_eq!(store.deposit_event(&ev.tx), Some(ev.clone()));
        assert_eq!(store.redeemer_of(&ev.tx), Some(w));
    }

    #[test]
    fn mark_redeemed_is_compare_and_set() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = LogStore::open(dir.path()).unwrap();
        let (ev, _) = deposit_at(1, 100);
        let w1 = TxRef::new(bridgetally_core::model::ChainId::new("sol"), "0xw1", 0);
        let w2 = TxRef::new(bridgetally_core::model::ChainId::new("sol"), "0xw2", 0);
        assert_eq!(store.mark_redeemed(&ev.tx, &w1).unwrap(), None);
        assert_eq!(store.mark_redeemed(&ev.tx, &w2).unwrap(), Some(w1.clone()));
        // Same pair again: idempotent, first entry unchanged.
        assert_eq!(store.mark_redeemed(&ev.tx, &w1).unwrap(), Some(w1));
    }

    #[test]
    fn eviction_moves_old_records_and_lookups_survive() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = LogStore::open(dir.path()).unwrap();
        let day = 86_400i64;
        let now = 200 * day;
        let (old, _) = deposit_at(1, now - 91 * day);
        let (fresh, _) = deposit_at(2, now - 89 * day);
        store.put_deposit(&old, None, now - 91 * day).unwrap();
        store.put_deposit(&fresh, None, now - 89 * day).unwrap();
        let moved = store.evict_to_cold(now, 90 * day).unwrap();
        assert_eq!(moved, 1);
        // Tier transparency.
        assert_eq!(store.deposit_event(&old.tx), Some(old.clone()));
        assert_eq!(store.deposit_event(&fresh.tx), Some(fresh.clone()));
        // Found via the cold tier after a cold reopen too.
        let store = LogStore::open(dir.path()).unwrap();
        assert_eq!(store.deposit_event(&old.tx), Some(old));
        assert_eq!(store.deposit_event(&fresh.tx), Some(fresh));
    }

    #[test]
    fn eviction_count_matches_timestamp_filter() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = LogStore::open(dir.path()).unwrap();
        let window = 1000i64;
        let now = 10_000i64;
        let mut expected = 0usize;
        for n in 0..1000u64 {
            let written = (n as i64) * 10;
            if written < now - window {
                expected += 1;
            }
            let (ev, _) = deposit_at(n, written);
            store.put_deposit(&ev, None, written).unwrap();
        }
        assert_eq!(store.evict_to_cold(now, window).unwrap(), expected);
        // Second eviction is a no-op.
        assert_eq!(store.evict_to_cold(now, window).unwrap(), 0);
    }

    #[test]
    fn checkpoint_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = LogStore::open(dir.path()).unwrap();
        let mut cp = Checkpoint::default();
        cp.chains.insert(
            "eth".to_string(),
            ChainCursor {
                block: 7,
                block_time: 700,
            },
        );
        cp.batch_counter = 3;
        cp.ledger_digest = store.ledger_digest();
        store.write_checkpoint(&cp).unwrap();
        assert_eq!(store.load_checkpoint().unwrap(), Some(cp));
    }

    #[test]
    fn alert_dedup_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let w = TxRef::new(bridgetally_core::model::ChainId::new("sol"), "0xw", 0);
        {
            let mut store = LogStore::open(dir.path()).unwrap();
            assert!(!store.alert_seen(&w, FindingCategory::DoubleSpend));
            store
                .record_alert(&w, FindingCategory::DoubleSpend, 1)
                .unwrap();
        }
        let store = LogStore::open(dir.path()).unwrap();
        assert!(store.alert_seen(&w, FindingCategory::DoubleSpend));
        assert!(!store.alert_seen(&w, FindingCategory::Unpairable));
    }
}
