//! Deterministic synthetic multi-chain traces: benign bridge traffic plus
//! injected attacks with ground-truth labels.
//!
//! The generator emits the same on-disk format the parser reads, so the full
//! pipeline — parsing, pairing, resolution, auditing — gets exercised end to
//! end. Benign flow deposits carry a corroborating transfer and withdraw a
//! fee-consistent amount after the source chain's finality lag; edge cases
//! (pending deposits, reflection tokens, zero-amount withdrawals) appear at
//! configured rates. The same seed always produces byte-identical traces.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use bridgetally_core::audit::{compute_max_outflow, FeePolicy, Finding, FindingCategory};
use bridgetally_core::config::{
    AuditConfig, BridgeConfig, ChainSpec, MonitorConfig, PairingStrategy, ReflectionRule, TokenFee,
};
use bridgetally_core::event::{
    ChainEvent, DepositBody, EventBody, TransferBody, WithdrawalBody,
};
use bridgetally_core::model::{Amount, ChainId, PairKey, TokenId, ZERO_ADDRESS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SENTINEL_HASH: &str =
    "0x0101010101010101010101010101010101010101010101010101010101010101";

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(default = "default_start_time")]
    pub start_time: i64,
    pub chains: Vec<ChainSpec>,
    pub bridges: Vec<ScenarioBridge>,
    /// Benign bridge transactions per simulated hour.
    pub traffic_per_hour: u64,
    pub duration_secs: i64,
    #[serde(default)]
    pub injections: Vec<Injection>,
    /// Per-mille of deposits left unwithdrawn (user delays their withdrawal).
    #[serde(default)]
    pub pending_permille: u32,
    /// Per-mille of withdrawals that move zero tokens.
    #[serde(default)]
    pub zero_withdrawal_permille: u32,
}

fn default_start_time() -> i64 {
    1_700_000_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioBridge {
    pub id: String,
    pub pairing: PairingStrategy,
    #[serde(default)]
    pub trusted_claim: bool,
    pub routes: Vec<Route>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Route {
    pub src_chain: String,
    pub dst_chain: String,
    pub src_token: String,
    pub dst_token: String,
    #[serde(default = "FeePolicy::indeterminate")]
    pub fee: FeePolicy,
    /// Reflection scale (num, den) applied to source-side transfer values.
    #[serde(default)]
    pub reflection: Option<(u64, u64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Injection {
    pub kind: AttackKind,
    pub count: u32,
    /// Injection window in seconds relative to the scenario start.
    pub from_sec: i64,
    pub to_sec: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// Deposit event claims an amount but nothing was transferred.
    FakeDeposit,
    /// Withdrawal referencing a deposit that does not exist.
    UnbackedWithdrawal,
    /// Second withdrawal referencing an already-redeemed deposit.
    Replay,
    /// Withdrawal exceeding its matched deposit.
    AmountMismatch,
    /// Withdrawal on a chain other than the deposit's named destination.
    WrongDestination,
}

impl AttackKind {
    pub const ALL: [AttackKind; 5] = [
        AttackKind::FakeDeposit,
        AttackKind::UnbackedWithdrawal,
        AttackKind::Replay,
        AttackKind::AmountMismatch,
        AttackKind::WrongDestination,
    ];

    /// Finding category the auditor must produce for this attack.
    pub fn expected_category(&self) -> FindingCategory {
        match self {
            AttackKind::FakeDeposit => FindingCategory::AmountExceedsInflow,
            AttackKind::UnbackedWithdrawal => FindingCategory::UnbackedWithdrawal,
            AttackKind::Replay => FindingCategory::DoubleSpend,
            AttackKind::AmountMismatch => FindingCategory::AmountExceedsInflow,
            AttackKind::WrongDestination => FindingCategory::DestinationMismatch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario needs at least one chain and one bridge with a route")]
    Empty,
    #[error("route references unknown chain {0:?}")]
    UnknownChain(String),
    #[error("duration too short for chain finality lags")]
    DurationTooShort,
    #[error("fake_deposit injection requires a bridge with trusted_claim=false")]
    FakeDepositNeedsUntrusted,
    #[error("replay injection needs benign traffic before its window")]
    ReplayNeedsTraffic,
    #[error("bad config: {0}")]
    BadConfig(String),
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub withdrawal_tx: String,
    pub chain: ChainId,
    pub category: FindingCategory,
}

#[derive(Debug, Clone)]
pub struct GeneratedTrace {
    pub logs: BTreeMap<ChainId, Vec<ChainEvent>>,
    pub ground_truth: Vec<GroundTruthEntry>,
    pub audit_config: AuditConfig,
}

impl GeneratedTrace {
    pub fn all_events(&self) -> Vec<ChainEvent> {
        self.logs.values().flatten().cloned().collect()
    }

    /// Writes `<chain>.ndjson` per chain plus `ground_truth.ndjson` and
    /// `config.json` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> io::Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (chain, events) in &self.logs {
            let path = dir.join(format!("{chain}.ndjson"));
            crate::logio::write_event_log(&path, events)?;
            written.push(path);
        }
        let gt = dir.join("ground_truth.ndjson");
        crate::logio::write_ndjson(&gt, &self.ground_truth)?;
        written.push(gt);
        let cfg = dir.join("config.json");
        std::fs::write(&cfg, self.audit_config.to_json_pretty())?;
        written.push(cfg);
        Ok(written)
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

struct DepositPlan {
    plan: u64,
    bridge: usize,
    route: usize,
    time: i64,
    deposit_id: Option<u64>,
    claim: Amount,
    /// None models a fake deposit: the event exists, the tokens do not.
    transfer_value: Option<Amount>,
    recipient: Option<String>,
    explicit_fee: Option<Amount>,
}

enum PlanPair {
    ById(u64),
    ByHashOf(u64),
    Sentinel,
    MissingId(u64),
}

struct WithdrawalPlan {
    bridge: usize,
    route: usize,
    time: i64,
    /// Destination chain; attacks may land it elsewhere.
    chain: ChainId,
    token: String,
    pair: PlanPair,
    amount: Amount,
    recipient: String,
    ground_truth: Option<FindingCategory>,
}

struct Synth {
    rng: ChaCha8Rng,
}

impl Synth {
    fn address(&mut self) -> String {
        format!(
            "0x{:032x}{:08x}",
            self.rng.random::<u128>(),
            self.rng.random::<u32>()
        )
    }
}

fn bridge_address(seed: u64, bridge: &str, chain: &str) -> String {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(b"bridge-addr");
    h.update(bridge.as_bytes());
    h.update(chain.as_bytes());
    let digest = hex::encode(h.finalize());
    format!("0x{}", &digest[..40])
}

fn tx_hash(seed: u64, chain: &str, index: u64) -> String {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(b"tx");
    h.update(chain.as_bytes());
    h.update(index.to_le_bytes());
    format!("0x{}", hex::encode(h.finalize()))
}

/// Audit configuration matching a scenario: the config the auditor needs to
/// check the traces this scenario generates.
pub fn audit_config_for(scenario: &ScenarioConfig) -> AuditConfig {
    let mut bridges = Vec::new();
    for sb in &scenario.bridges {
        let mut addresses: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for chain in &scenario.chains {
            addresses.insert(
                chain.name.as_str().to_string(),
                vec![bridge_address(scenario.seed, &sb.id, chain.name.as_str())],
            );
        }
        let mut fees = Vec::new();
        let mut equivalences = Vec::new();
        let mut reflection = Vec::new();
        for route in &sb.routes {
            let src = TokenId::new(ChainId::new(&*route.src_chain), &*route.src_token);
            let dst = TokenId::new(ChainId::new(&*route.dst_chain), &*route.dst_token);
            fees.push(TokenFee {
                token: src.clone(),
                policy: route.fee.clone(),
            });
            equivalences.push((src.clone(), dst));
            if let Some((num, den)) = route.reflection {
                reflection.push(ReflectionRule {
                    token: src,
                    num,
                    den,
                    from_block: 0,
                    to_block: None,
                });
            }
        }
        bridges.push(BridgeConfig {
            id: sb.id.clone(),
            trusted_claim: sb.trusted_claim,
            treat_missing_transfer_as_zero: !sb.trusted_claim,
            addresses,
            fee_default: FeePolicy::Indeterminate,
            fees,
            equivalences,
            reflection,
            test_tokens: Vec::new(),
            transfer_offsets: None,
            pairing: vec![sb.pairing],
        });
    }
    AuditConfig {
        chains: scenario.chains.clone(),
        bridges,
        monitor: MonitorConfig::default(),
    }
}

pub fn generate(scenario: &ScenarioConfig) -> Result<GeneratedTrace, ScenarioError> {
    if scenario.chains.is_empty()
        || scenario.bridges.is_empty()
        || scenario.bridges.iter().any(|b| b.routes.is_empty())
    {
        return Err(ScenarioError::Empty);
    }
    let chain_lag: BTreeMap<&str, i64> = scenario
        .chains
        .iter()
        .map(|c| (c.name.as_str(), c.finality_lag))
        .collect();
    for bridge in &scenario.bridges {
        for route in &bridge.routes {
            for chain in [&route.src_chain, &route.dst_chain] {
                if !chain_lag.contains_key(chain.as_str()) {
                    return Err(ScenarioError::UnknownChain(chain.clone()));
                }
            }
        }
    }
    let max_lag = scenario.chains.iter().map(|c| c.finality_lag).max().unwrap_or(0);
    let delay_window = scenario.duration_secs / 5;
    if delay_window <= max_lag + 2 {
        return Err(ScenarioError::DurationTooShort);
    }
    let audit_config = audit_config_for(scenario);
    audit_config
        .validate()
        .map_err(|e| ScenarioError::BadConfig(e.to_string()))?;

    let mut synth = Synth {
        rng: ChaCha8Rng::seed_from_u64(scenario.seed),
    };
    let mut deposit_plans: Vec<DepositPlan> = Vec::new();
    let mut withdrawal_plans: Vec<WithdrawalPlan> = Vec::new();
    let mut next_plan: u64 = 0;
    let mut deposit_counters: Vec<u64> = vec![0; scenario.bridges.len()];
    // (deposit plan idx, withdrawal plan idx) of completed benign pairs.
    let mut benign_pairs: Vec<(usize, usize)> = Vec::new();

    let n_benign = scenario.traffic_per_hour * scenario.duration_secs as u64 / 3600;
    let dep_window = scenario.duration_secs - delay_window;

    let plan_benign = |synth: &mut Synth,
                           deposit_plans: &mut Vec<DepositPlan>,
                           withdrawal_plans: &mut Vec<WithdrawalPlan>,
                           next_plan: &mut u64,
                           deposit_counters: &mut Vec<u64>,
                           time: i64,
                           zero_amount: bool,
                           pending: bool|
     -> (usize, Option<usize>) {
        let b = synth.rng.random_range(0..scenario.bridges.len());
        let sb = &scenario.bridges[b];
        let r = synth.rng.random_range(0..sb.routes.len());
        let route = &sb.routes[r];
        let base = Amount::from(synth.rng.random_range(1u64..=1_000_000_000_000_000));
        let (claim, transfer_value) = match route.reflection {
            Some((num, den)) => {
                // Emit the raw logged value; the intended amount is its
                // exact rational rescale, which the claim also carries.
                let value = base.clone();
                (value.mul_div_floor(num, den), value)
            }
            None => {
                let intended = match &route.fee {
                    FeePolicy::Fixed { amount } => &base + amount,
                    _ => base,
                };
                (intended.clone(), intended)
            }
        };
        let explicit_fee = match &route.fee {
            FeePolicy::Explicit => {
                let cap = claim.as_biguint() / num_bigint::BigUint::from(10u32);
                let cap_u64 = u64::try_from(&cap).unwrap_or(u64::MAX);
                Some(Amount::from(synth.rng.random_range(0..=cap_u64)))
            }
            _ => None,
        };
        let deposit_id = match sb.pairing {
            PairingStrategy::Id => {
                deposit_counters[b] += 1;
                Some(deposit_counters[b])
            }
            _ => None,
        };
        let recipient = synth.address();
        let dep_plan_idx = deposit_plans.len();
        let dep_plan_id = *next_plan;
        *next_plan += 1;
        deposit_plans.push(DepositPlan {
            plan: dep_plan_id,
            bridge: b,
            route: r,
            time,
            deposit_id,
            claim: claim.clone(),
            transfer_value: Some(transfer_value),
            recipient: Some(recipient.clone()),
            explicit_fee: explicit_fee.clone(),
        });
        if pending {
            return (dep_plan_idx, None);
        }
        let src_lag = chain_lag[route.src_chain.as_str()];
        let delay = src_lag + 1 + synth.rng.random_range(0..(delay_window - src_lag - 1));
        let wd_time = time + delay;
        let amount = if zero_amount {
            Amount::zero()
        } else {
            compute_max_outflow(&claim, &route.fee, explicit_fee.as_ref())
        };
        let pair = match deposit_id {
            Some(id) => PlanPair::ById(id),
            None => PlanPair::ByHashOf(dep_plan_id),
        };
        let wd_plan_idx = withdrawal_plans.len();
        withdrawal_plans.push(WithdrawalPlan {
            bridge: b,
            route: r,
            time: wd_time,
            chain: ChainId::new(&*route.dst_chain),
            token: route.dst_token.clone(),
            pair,
            amount,
            recipient,
            ground_truth: None,
        });
        (dep_plan_idx, Some(wd_plan_idx))
    };

    for _ in 0..n_benign {
        let time = scenario.start_time + synth.rng.random_range(0..dep_window.max(1));
        let pending = synth.rng.random_range(0..1000) < scenario.pending_permille;
        let zero = !pending && synth.rng.random_range(0..1000) < scenario.zero_withdrawal_permille;
        let (d, w) = plan_benign(
            &mut synth,
            &mut deposit_plans,
            &mut withdrawal_plans,
            &mut next_plan,
            &mut deposit_counters,
            time,
            zero,
            pending,
        );
        if let Some(w) = w {
            if !withdrawal_plans[w].amount.is_zero() {
                benign_pairs.push((d, w));
            }
        }
    }

    // Injections, in declaration order.
    for injection in &scenario.injections {
        for _ in 0..injection.count {
            let span = (injection.to_sec - injection.from_sec).max(1);
            let inj_time =
                scenario.start_time + injection.from_sec + synth.rng.random_range(0..span);
            match injection.kind {
                AttackKind::FakeDeposit => {
                    let candidates: Vec<usize> = scenario
                        .bridges
                        .iter()
                        .enumerate()
                        .filter(|(_, b)| !b.trusted_claim)
                        .map(|(i, _)| i)
                        .collect();
                    if candidates.is_empty() {
                        return Err(ScenarioError::FakeDepositNeedsUntrusted);
                    }
                    let b = candidates[synth.rng.random_range(0..candidates.len())];
                    let sb = &scenario.bridges[b];
                    let r = synth.rng.random_range(0..sb.routes.len());
                    let route = &sb.routes[r];
                    let claim =
                        Amount::from(synth.rng.random_range(1u64..=1_000_000_000_000_000));
                    let deposit_id = match sb.pairing {
                        PairingStrategy::Id => {
                            deposit_counters[b] += 1;
                            Some(deposit_counters[b])
                        }
                        _ => None,
                    };
                    let recipient = synth.address();
                    let dep_plan_id = next_plan;
                    next_plan += 1;
                    deposit_plans.push(DepositPlan {
                        plan: dep_plan_id,
                        bridge: b,
                        route: r,
                        time: inj_time,
                        deposit_id,
                        claim: claim.clone(),
                        transfer_value: None,
                        recipient: Some(recipient.clone()),
                        explicit_fee: None,
                    });
                    let src_lag = chain_lag[route.src_chain.as_str()];
                    withdrawal_plans.push(WithdrawalPlan {
                        bridge: b,
                        route: r,
                        time: inj_time + src_lag + 1 + synth.rng.random_range(0..60),
                        chain: ChainId::new(&*route.dst_chain),
                        token: route.dst_token.clone(),
                        pair: match deposit_id {
                            Some(id) => PlanPair::ById(id),
                            None => PlanPair::ByHashOf(dep_plan_id),
                        },
                        amount: claim,
                        recipient,
                        ground_truth: Some(AttackKind::FakeDeposit.expected_category()),
                    });
                }
                AttackKind::UnbackedWithdrawal => {
                    let b = synth.rng.random_range(0..scenario.bridges.len());
                    let sb = &scenario.bridges[b];
                    let r = synth.rng.random_range(0..sb.routes.len());
                    let route = &sb.routes[r];
                    let pair = match sb.pairing {
                        PairingStrategy::Id => {
                            PlanPair::MissingId(1_000_000_000 + synth.rng.random::<u32>() as u64)
                        }
                        _ => PlanPair::Sentinel,
                    };
                    withdrawal_plans.push(WithdrawalPlan {
                        bridge: b,
                        route: r,
                        time: inj_time,
                        chain: ChainId::new(&*route.dst_chain),
                        token: route.dst_token.clone(),
                        pair,
                        amount: Amount::from(
                            synth.rng.random_range(1u64..=1_000_000_000_000_000),
                        ),
                        recipient: synth.address(),
                        ground_truth: Some(AttackKind::UnbackedWithdrawal.expected_category()),
                    });
                }
                AttackKind::Replay => {
                    let candidates: Vec<&(usize, usize)> = benign_pairs
                        .iter()
                        .filter(|(_, w)| withdrawal_plans[*w].time < inj_time)
                        .collect();
                    let &(d, w) = match candidates.is_empty() {
                        false => candidates[synth.rng.random_range(0..candidates.len())],
                        true => {
                            // No benign pair settled before the window; replay
                            // the earliest one just after it settles.
                            benign_pairs
                                .iter()
                                .min_by_key(|(_, w)| withdrawal_plans[*w].time)
                                .ok_or(ScenarioError::ReplayNeedsTraffic)?
                        }
                    };
                    let original = &withdrawal_plans[w];
                    let time = inj_time.max(original.time + 1);
                    let dep = &deposit_plans[d];
                    withdrawal_plans.push(WithdrawalPlan {
                        bridge: original.bridge,
                        route: original.route,
                        time,
                        chain: original.chain.clone(),
                        token: original.token.clone(),
                        pair: match dep.deposit_id {
                            Some(id) => PlanPair::ById(id),
                            None => PlanPair::ByHashOf(dep.plan),
                        },
                        amount: original.amount.clone(),
                        recipient: original.recipient.clone(),
                        ground_truth: Some(AttackKind::Replay.expected_category()),
                    });
                }
                AttackKind::AmountMismatch | AttackKind::WrongDestination => {
                    plan_benign(
                        &mut synth,
                        &mut deposit_plans,
                        &mut withdrawal_plans,
                        &mut next_plan,
                        &mut deposit_counters,
                        inj_time,
                        false,
                        false,
                    );
                    let w = withdrawal_plans.len() - 1;
                    let plan = &mut withdrawal_plans[w];
                    match injection.kind {
                        AttackKind::AmountMismatch => {
                            let extra = Amount::from(synth.rng.random_range(1u64..=1_000_000));
                            plan.amount = &plan.amount + &extra;
                            plan.ground_truth =
                                Some(AttackKind::AmountMismatch.expected_category());
                        }
                        AttackKind::WrongDestination => {
                            let route = &scenario.bridges[plan.bridge].routes[plan.route];
                            plan.chain = ChainId::new(&*route.src_chain);
                            plan.token = route.src_token.clone();
                            plan.ground_truth =
                                Some(AttackKind::WrongDestination.expected_category());
                        }
                        _ => unreachable!(),
                    }
                }
            }
        }
    }

    Ok(materialize(
        scenario,
        audit_config,
        deposit_plans,
        withdrawal_plans,
    ))
}

enum TxPlan {
    Deposit(usize),
    Withdrawal(usize),
}

fn materialize(
    scenario: &ScenarioConfig,
    audit_config: AuditConfig,
    deposits: Vec<DepositPlan>,
    withdrawals: Vec<WithdrawalPlan>,
) -> GeneratedTrace {
    // Group planned transactions per chain and order them in time; ties
    // break on planning sequence so generation is reproducible.
    let mut per_chain: BTreeMap<ChainId, Vec<(i64, u64, TxPlan)>> = BTreeMap::new();
    let mut seq = 0u64;
    for (i, d) in deposits.iter().enumerate() {
        let route = &scenario.bridges[d.bridge].routes[d.route];
        per_chain
            .entry(ChainId::new(&*route.src_chain))
            .or_default()
            .push((d.time, seq, TxPlan::Deposit(i)));
        seq += 1;
    }
    for (i, w) in withdrawals.iter().enumerate() {
        per_chain
            .entry(w.chain.clone())
            .or_default()
            .push((w.time, seq, TxPlan::Withdrawal(i)));
        seq += 1;
    }
    for chain in &scenario.chains {
        per_chain.entry(chain.name.clone()).or_default();
    }

    // First pass assigns hashes so withdrawals can reference deposit hashes.
    let mut deposit_hash: BTreeMap<u64, String> = BTreeMap::new();
    for (chain, txs) in per_chain.iter_mut() {
        txs.sort_by_key(|(t, s, _)| (*t, *s));
        for (idx, (_, _, plan)) in txs.iter().enumerate() {
            if let TxPlan::Deposit(i) = plan {
                deposit_hash.insert(
                    deposits[*i].plan,
                    tx_hash(scenario.seed, chain.as_str(), idx as u64),
                );
            }
        }
    }

    let mut logs: BTreeMap<ChainId, Vec<ChainEvent>> = BTreeMap::new();
    let mut ground_truth = Vec::new();
    for (chain, txs) in &per_chain {
        let mut events = Vec::new();
        for (idx, (time, _, plan)) in txs.iter().enumerate() {
            let block = idx as u64 + 1;
            let hash = tx_hash(scenario.seed, chain.as_str(), idx as u64);
            match plan {
                TxPlan::Deposit(i) => {
                    let d = &deposits[*i];
                    let sb = &scenario.bridges[d.bridge];
                    let route = &sb.routes[d.route];
                    let token = TokenId::new(chain.clone(), &*route.src_token);
                    events.push(ChainEvent {
                        tx: bridgetally_core::model::TxRef::new(chain.clone(), &*hash, 0),
                        block,
                        block_time: *time,
                        bridge_id: sb.id.clone(),
                        body: EventBody::Deposit(DepositBody {
                            deposit_id: d.deposit_id,
                            token: token.clone(),
                            claimed_amount: Some(d.claim.clone()),
                            depositor: format!("0x{:040x}", d.plan + 1),
                            recipient: d.recipient.clone(),
                            dest_chain: Some(ChainId::new(&*route.dst_chain)),
                            explicit_fee: d.explicit_fee.clone(),
                        }),
                    });
                    if let Some(value) = &d.transfer_value {
                        events.push(ChainEvent {
                            tx: bridgetally_core::model::TxRef::new(chain.clone(), &*hash, 1),
                            block,
                            block_time: *time,
                            bridge_id: sb.id.clone(),
                            body: EventBody::Transfer(TransferBody {
                                token,
                                from: format!("0x{:040x}", d.plan + 1),
                                to: bridge_address(scenario.seed, &sb.id, chain.as_str()),
                                value: value.clone(),
                            }),
                        });
                    }
                }
                TxPlan::Withdrawal(i) => {
                    let w = &withdrawals[*i];
                    let sb = &scenario.bridges[w.bridge];
                    let token = TokenId::new(chain.clone(), &*w.token);
                    let pair_ref = match &w.pair {
                        PlanPair::ById(id) => Some(PairKey::ById {
                            bridge: sb.id.clone(),
                            deposit_id: *id,
                        }),
                        PlanPair::MissingId(id) => Some(PairKey::ById {
                            bridge: sb.id.clone(),
                            deposit_id: *id,
                        }),
                        PlanPair::ByHashOf(plan) => Some(PairKey::ByDepositHash {
                            tx_hash: deposit_hash[plan].clone(),
                        }),
                        PlanPair::Sentinel => Some(PairKey::ByDepositHash {
                            tx_hash: SENTINEL_HASH.to_string(),
                        }),
                    };
                    events.push(ChainEvent {
                        tx: bridgetally_core::model::TxRef::new(chain.clone(), &*hash, 0),
                        block,
                        block_time: *time,
                        bridge_id: sb.id.clone(),
                        body: EventBody::Withdrawal(WithdrawalBody {
                            pair_ref,
                            token: token.clone(),
                            claimed_amount: Some(w.amount.clone()),
                            recipient: w.recipient.clone(),
                            source_chain: Some(ChainId::new(
                                &*sb.routes[w.route].src_chain,
                            )),
                        }),
                    });
                    events.push(ChainEvent {
                        tx: bridgetally_core::model::TxRef::new(chain.clone(), &*hash, 1),
                        block,
                        block_time: *time,
                        bridge_id: sb.id.clone(),
                        body: EventBody::Transfer(TransferBody {
                            token,
                            from: ZERO_ADDRESS.to_string(),
                            to: w.recipient.clone(),
                            value: w.amount.clone(),
                        }),
                    });
                    if let Some(category) = w.ground_truth {
                        ground_truth.push(GroundTruthEntry {
                            withdrawal_tx: hash.clone(),
                            chain: chain.clone(),
                            category,
                        });
                    }
                }
            }
        }
        logs.insert(chain.clone(), events);
    }

    GeneratedTrace {
        logs,
        ground_truth,
        audit_config,
    }
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScoreOptions {
    /// Exclude zero-amount-withdrawal anomalies from false-positive
    /// accounting (scenarios that generate them as benign edge cases).
    pub zero_withdrawal_benign: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCell {
    pub expected: FindingCategory,
    pub found: FindingCategory,
    pub count: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScoreReport {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub confusion: Vec<ConfusionCell>,
    pub fp_examples: Vec<GroundTruthEntry>,
    pub fn_examples: Vec<GroundTruthEntry>,
}

impl ScoreReport {
    pub fn perfect(&self) -> bool {
        self.false_positives == 0 && self.false_negatives == 0
    }
}

/// Exact set comparison on `(chain, tx_hash, category)` between audit
/// findings and ground truth.
pub fn score(
    findings: &[Finding],
    ground_truth: &[GroundTruthEntry],
    options: &ScoreOptions,
) -> ScoreReport {
    let truth: BTreeMap<(String, String), FindingCategory> = ground_truth
        .iter()
        .map(|g| {
            (
                (g.chain.as_str().to_string(), g.withdrawal_tx.clone()),
                g.category,
            )
        })
        .collect();
    let mut report = ScoreReport::default();
    let mut confusion: BTreeMap<(FindingCategory, FindingCategory), u64> = BTreeMap::new();
    let mut matched: std::collections::BTreeSet<(String, String)> = Default::default();

    for f in findings {
        if !f.category.is_violation() {
            continue;
        }
        if options.zero_withdrawal_benign && f.category == FindingCategory::ZeroWithdrawal {
            continue;
        }
        let key = (
            f.withdrawal.chain.as_str().to_string(),
            f.withdrawal.tx_hash.clone(),
        );
        match truth.get(&key) {
            Some(expected) if *expected == f.category => {
                report.true_positives += 1;
                matched.insert(key);
            }
            Some(expected) => {
                report.false_positives += 1;
                *confusion.entry((*expected, f.category)).or_insert(0) += 1;
                report.fp_examples.push(GroundTruthEntry {
                    withdrawal_tx: key.1.clone(),
                    chain: ChainId::new(&*key.0),
                    category: f.category,
                });
            }
            None => {
                report.false_positives += 1;
                report.fp_examples.push(GroundTruthEntry {
                    withdrawal_tx: key.1.clone(),
                    chain: ChainId::new(&*key.0),
                    category: f.category,
                });
            }
        }
    }
    for (key, expected) in &truth {
        if options.zero_withdrawal_benign && *expected == FindingCategory::ZeroWithdrawal {
            continue;
        }
        if !matched.contains(key) {
            report.false_negatives += 1;
            report.fn_examples.push(GroundTruthEntry {
                withdrawal_tx: key.1.clone(),
                chain: ChainId::new(&*key.0),
                category: *expected,
            });
        }
    }
    report.confusion = confusion
        .into_iter()
        .map(|((expected, found), count)| ConfusionCell {
            expected,
            found,
            count,
        })
        .collect();
    report
}
