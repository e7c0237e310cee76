//! Announce-then-execute withdrawal protocol.
//!
//! Splitting a bridge's withdrawal into an announce step and an execute step
//! creates room for an approver to audit the announced transaction against
//! source-chain state before any funds move. The approver validates the same
//! conditions as the live auditor; a violating withdrawal is rejected instead
//! of executed.
//!
//! [`SimBridge`] is a deterministic in-memory bridge used to exercise the
//! protocol: it locks tokens on a source chain, mints on a destination chain,
//! and can disable its own verification to model key compromise, leaving the
//! approver as the only line of defense.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audit::{
    audit_withdrawal, AuditOptions, BridgeTransaction, FeePolicy, Finding, FindingCategory,
    LedgerError, RedemptionStore, TokenEquivalence,
};
use crate::config::BridgeConfig;
use crate::event::{
    AmountSource, ChainEvent, DepositBody, EventBody, ResolvedAmount, WithdrawalBody,
};
use crate::model::{Amount, ChainId, PairKey, TokenId, TxRef};
use crate::pairing::PairOutcome;

pub type TicketId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TicketState {
    Announced,
    Approved,
    Rejected,
    Executed,
}

/// Signed claim that a deposit happened and may be withdrawn. The signature
/// is simulated by a shared-secret tag; the relaying and verification
/// machinery is a black box to this protocol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WithdrawalReceipt {
    pub deposit_id: u64,
    pub token: String,
    pub amount: Amount,
    pub recipient: String,
    pub sig_tag: u64,
}

/// Lifecycle record of one announced withdrawal.
///
/// Legal transitions: Announced → Approved → Executed, and Announced →
/// Rejected. Nothing reaches Executed without passing the approver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WithdrawalTicket {
    pub id: TicketId,
    pub receipt: WithdrawalReceipt,
    pub state: TicketState,
    pub decided_by: Option<String>,
    pub reason: Option<Finding>,
    pub note: String,
    /// Abstract work counter (announce + approve steps); a stand-in for gas.
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("illegal transition: ticket {ticket} is {state:?}, cannot {action}")]
pub struct TransitionError {
    pub ticket: TicketId,
    pub state: TicketState,
    pub action: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Approve,
    Reject(Finding),
}

/// Decides the fate of announced withdrawals.
pub trait Approver {
    fn id(&self) -> &str;
    fn decide(&self, ticket: &WithdrawalTicket, bridge: &SimBridge) -> Decision;
}

/// Approves everything. Exists to show the protocol adds no attack surface:
/// with the bridge's own checks on, this behaves exactly like the unmodified
/// bridge.
#[derive(Debug, Default)]
pub struct NaiveApprover;

impl Approver for NaiveApprover {
    fn id(&self) -> &str {
        "naive"
    }

    fn decide(&self, _ticket: &WithdrawalTicket, _bridge: &SimBridge) -> Decision {
        Decision::Approve
    }
}

/// Runs the audit engine against the bridge's source-chain state and rejects
/// exactly when the audit yields a violation category.
#[derive(Debug, Default)]
pub struct AuditingApprover {
    pub options: AuditOptions,
}

impl Approver for AuditingApprover {
    fn id(&self) -> &str {
        "auditing"
    }

    fn decide(&self, ticket: &WithdrawalTicket, bridge: &SimBridge) -> Decision {
        let bt = bridge.transaction_view(ticket);
        let equiv = TokenEquivalence::from_pairs(&[(
            TokenId::new(bridge.source_chain.clone(), ticket.receipt.token.clone()),
            TokenId::new(bridge.dest_chain.clone(), ticket.receipt.token.clone()),
        )]);
        let mut ledger = PeekLedger {
            redeemed: &bridge.redeemed,
        };
        let finding = audit_withdrawal(
            &bt,
            &mut ledger,
            &equiv,
            &bridge.audit_cfg,
            &self.options,
        )
        .expect("peek ledger is infallible");
        if finding.category.is_violation() {
            Decision::Reject(finding)
        } else {
            Decision::Approve
        }
    }
}

/// Read-only view over the bridge's redemption history; marks made by the
/// audit are discarded because redemption only becomes real on execution.
struct PeekLedger<'a> {
    redeemed: &'a BTreeMap<u64, TicketId>,
}

impl PeekLedger<'_> {
    fn lookup(&self, deposit: &TxRef) -> Option<TxRef> {
        let id = deposit_id_of_ref(deposit)?;
        self.redeemed.get(&id).map(|t| withdrawal_ref(*t))
    }
}

impl RedemptionStore for PeekLedger<'_> {
    fn redeemer(&self, deposit: &TxRef) -> Result<Option<TxRef>, LedgerError> {
        Ok(self.lookup(deposit))
    }

    fn mark_redeemed(
        &mut self,
        deposit: &TxRef,
        _withdrawal: &TxRef,
    ) -> Result<Option<TxRef>, LedgerError> {
        Ok(self.lookup(deposit))
    }
}

fn deposit_ref(chain: &ChainId, id: u64) -> TxRef {
    TxRef::new(chain.clone(), format!("0xdep{id:016x}"), 0)
}

fn deposit_id_of_ref(tx: &TxRef) -> Option<u64> {
    let hex = tx.tx_hash.strip_prefix("0xdep")?;
    u64::from_str_radix(hex, 16).ok()
}

fn withdrawal_ref(ticket: TicketId) -> TxRef {
    TxRef::new(ChainId::new("dst"), format!("0xtkt{ticket:016x}"), 0)
}

/// One recorded deposit on the simulated source chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimDeposit {
    pub id: u64,
    pub token: String,
    pub amount: Amount,
    pub recipient: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LegacyOutcome {
    Executed,
    Rejected(String),
}

/// Deterministic in-memory token bridge between one source and one
/// destination chain.
#[derive(Debug, Clone)]
pub struct SimBridge {
    secret: u64,
    /// The original implementation's own verification (signature check and
    /// replay protection). Disabled to model compromised keys and bypassed
    /// verification.
    pub checks_enabled: bool,
    pub source_chain: ChainId,
    pub dest_chain: ChainId,
    next_deposit_id: u64,
    next_ticket_id: u64,
    deposits: BTreeMap<u64, SimDeposit>,
    redeemed: BTreeMap<u64, TicketId>,
    locked: BTreeMap<String, Amount>,
    minted: BTreeMap<String, Amount>,
    tickets: Vec<WithdrawalTicket>,
    audit_cfg: BridgeConfig,
}

impl SimBridge {
    pub fn new(secret: u64, checks_enabled: bool) -> Self {
        let audit_cfg = BridgeConfig {
            id: "sim".to_string(),
            trusted_claim: true,
            treat_missing_transfer_as_zero: false,
            addresses: BTreeMap::new(),
            fee_default: FeePolicy::Indeterminate,
            fees: Vec::new(),
            equivalences: Vec::new(),
            reflection: Vec::new(),
            test_tokens: Vec::new(),
            transfer_offsets: None,
            pairing: Vec::new(),
        };
        SimBridge {
            secret,
            checks_enabled,
            source_chain: ChainId::new("src"),
            dest_chain: ChainId::new("dst"),
            next_deposit_id: 1,
            next_ticket_id: 1,
            deposits: BTreeMap::new(),
            redeemed: BTreeMap::new(),
            locked: BTreeMap::new(),
            minted: BTreeMap::new(),
            tickets: Vec::new(),
            audit_cfg,
        }
    }

    fn tag(&self, deposit_id: u64, token: &str, amount: &Amount, recipient: &str) -> u64 {
        // FNV-style mix; a stand-in for receipt signatures, not cryptography.
        let mut h = 0xcbf2_9ce4_8422_2325u64 ^ self.secret;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(&deposit_id.to_le_bytes());
        eat(token.as_bytes());
        eat(amount.to_decimal().as_bytes());
        eat(recipient.as_bytes());
        h
    }

    /// Locks tokens on the source chain and records the deposit.
    pub fn deposit(&mut self, token: &str, amount: Amount, recipient: &str) -> u64 {
        let id = self.next_deposit_id;
        self.next_deposit_id += 1;
        let slot = self.locked.entry(token.to_string()).or_insert_with(Amount::zero);
        *slot = &*slot + &amount;
        self.deposits.insert(
            id,
            SimDeposit {
                id,
                token: token.to_string(),
                amount,
                recipient: recipient.to_string(),
            },
        );
        id
    }

    /// Produces a correctly tagged receipt, as an honest relayer would.
    pub fn sign_receipt(
        &self,
        deposit_id: u64,
        token: &str,
        amount: Amount,
        recipient: &str,
    ) -> WithdrawalReceipt {
        WithdrawalReceipt {
            sig_tag: self.tag(deposit_id, token, &amount, recipient),
            deposit_id,
            token: token.to_string(),
            amount,
            recipient: recipient.to_string(),
        }
    }

    fn receipt_tag_ok(&self, receipt: &WithdrawalReceipt) -> bool {
        receipt.sig_tag
            == self.tag(
                receipt.deposit_id,
                &receipt.token,
                &receipt.amount,
                &receipt.recipient,
            )
    }

    pub fn ticket(&self, id: TicketId) -> Option<&WithdrawalTicket> {
        self.tickets.iter().find(|t| t.id == id)
    }

    pub fn tickets(&self) -> &[WithdrawalTicket] {
        &self.tickets
    }

    pub fn locked_total(&self, token: &str) -> Amount {
        self.locked.get(token).cloned().unwrap_or_else(Amount::zero)
    }

    pub fn minted_total(&self, token: &str) -> Amount {
        self.minted.get(token).cloned().unwrap_or_else(Amount::zero)
    }

    /// Collateralization: destination mints never exceed source locks.
    pub fn collateral_ok(&self) -> bool {
        self.minted
            .iter()
            .all(|(token, minted)| minted <= &self.locked_total(token))
    }

    /// Verifies and announces a withdrawal; no funds move. With checks on,
    /// receipts failing the tag check are rejected here; malformed receipts
    /// are rejected with an undecodable reason.
    pub fn announce_withdraw(&mut self, receipt: WithdrawalReceipt) -> WithdrawalTicket {
        let id = self.next_ticket_id;
        self.next_ticket_id += 1;
        let mut ticket = WithdrawalTicket {
            id,
            receipt,
            state: TicketState::Announced,
            decided_by: None,
            reason: None,
            note: String::new(),
            steps: 2,
        };
        if ticket.receipt.token.is_empty() || ticket.receipt.recipient.is_empty() {
            ticket.state = TicketState::Rejected;
            ticket.decided_by = Some("announce".to_string());
            let mut reason = self.finding_for(&ticket, FindingCategory::Undecodable);
            reason.note = "malformed receipt".to_string();
            ticket.reason = Some(reason);
        } else if self.checks_enabled && !self.receipt_tag_ok(&ticket.receipt) {
            ticket.state = TicketState::Rejected;
            ticket.decided_by = Some("announce".to_string());
            ticket.note = "signature verification failed".to_string();
        }
        self.tickets.push(ticket.clone());
        ticket
    }

    fn finding_for(&self, ticket: &WithdrawalTicket, category: FindingCategory) -> Finding {
        Finding {
            category,
            bridge: self.audit_cfg.id.clone(),
            withdrawal: withdrawal_ref(ticket.id),
            deposit: None,
            token: TokenId::new(self.dest_chain.clone(), ticket.receipt.token.clone()),
            recipient: Some(ticket.receipt.recipient.clone()),
            inflow: None,
            outflow: ticket.receipt.amount.clone(),
            max_allowed: None,
            note: String::new(),
        }
    }

    /// Audit view of an announced ticket against current source-chain state.
    fn transaction_view(&self, ticket: &WithdrawalTicket) -> BridgeTransaction {
        let r = &ticket.receipt;
        let withdrawal = ChainEvent {
            tx: withdrawal_ref(ticket.id),
            block: ticket.id,
            block_time: ticket.id as i64,
            bridge_id: self.audit_cfg.id.clone(),
            body: EventBody::Withdrawal(WithdrawalBody {
                pair_ref: Some(PairKey::ById {
                    bridge: self.audit_cfg.id.clone(),
                    deposit_id: r.deposit_id,
                }),
                token: TokenId::new(self.dest_chain.clone(), r.token.clone()),
                claimed_amount: Some(r.amount.clone()),
                recipient: r.recipient.clone(),
                source_chain: Some(self.source_chain.clone()),
            }),
        };
        let pairing = match self.deposits.get(&r.deposit_id) {
            Some(dep) => PairOutcome::Matched(ChainEvent {
                tx: deposit_ref(&self.source_chain, dep.id),
                block: dep.id,
                block_time: dep.id as i64,
                bridge_id: self.audit_cfg.id.clone(),
                body: EventBody::Deposit(DepositBody {
                    deposit_id: Some(dep.id),
                    token: TokenId::new(self.source_chain.clone(), dep.token.clone()),
                    claimed_amount: Some(dep.amount.clone()),
                    depositor: "0xdepositor".to_string(),
                    recipient: Some(dep.recipient.clone()),
                    dest_chain: Some(self.dest_chain.clone()),
                    explicit_fee: None,
                }),
            }),
            None => PairOutcome::NoDeposit,
        };
        let inflow = match &pairing {
            PairOutcome::Matched(dep) => {
                let amount = dep
                    .deposit()
                    .and_then(|d| d.claimed_amount.clone())
                    .unwrap_or_else(Amount::zero);
                Some(Ok(ResolvedAmount {
                    amount,
                    source: AmountSource::BridgeEvent,
                    scaled: false,
                }))
            }
            _ => None,
        };
        BridgeTransaction {
            withdrawal,
            pairing,
            inflow,
            outflow: Ok(ResolvedAmount {
                amount: r.amount.clone(),
                source: AmountSource::BridgeEvent,
                scaled: false,
            }),
        }
    }

    fn execute(&mut self, ticket_idx: usize) {
        let (deposit_id, token, amount, ticket_id) = {
            let t = &self.tickets[ticket_idx];
            (
                t.receipt.deposit_id,
                t.receipt.token.clone(),
                t.receipt.amount.clone(),
                t.id,
            )
        };
        let slot = self.minted.entry(token).or_insert_with(Amount::zero);
        *slot = &*slot + &amount;
        // First redeemer wins; replays that slip through never overwrite.
        self.redeemed.entry(deposit_id).or_insert(ticket_id);
        let t = &mut self.tickets[ticket_idx];
        t.state = TicketState::Executed;
        t.steps += 1;
    }

    /// Lets the approver decide an announced ticket; approval executes it,
    /// rejection records the finding. Funds never move on rejection.
    pub fn approve_withdraw(
        &mut self,
        ticket_id: TicketId,
        approver: &dyn Approver,
    ) -> Result<WithdrawalTicket, TransitionError> {
        let idx = self
            .tickets
            .iter()
            .position(|t| t.id == ticket_id)
            .ok_or(TransitionError {
                ticket: ticket_id,
                state: TicketState::Rejected,
                action: "approve a nonexistent ticket",
            })?;
        if self.tickets[idx].state != TicketState::Announced {
            return Err(TransitionError {
                ticket: ticket_id,
                state: self.tickets[idx].state,
                action: "approve",
            });
        }
        self.tickets[idx].steps += 3;
        let decision = approver.decide(&self.tickets[idx], self);
        match decision {
            Decision::Approve => {
                self.tickets[idx].state = TicketState::Approved;
                self.tickets[idx].decided_by = Some(approver.id().to_string());
                // The original implementation's replay protection sits in the
                // execute path; it still applies when checks are on.
                if self.checks_enabled
                    && self
                        .redeemed
                        .contains_key(&self.tickets[idx].receipt.deposit_id)
                {
                    self.tickets[idx].state = TicketState::Rejected;
                    self.tickets[idx].note = "already withdrawn".to_string();
                } else {
                    self.execute(idx);
                }
            }
            Decision::Reject(finding) => {
                self.tickets[idx].state = TicketState::Rejected;
                self.tickets[idx].decided_by = Some(approver.id().to_string());
                self.tickets[idx].reason = Some(finding);
            }
        }
        Ok(self.tickets[idx].clone())
    }

    /// The unmodified single-call withdrawal path, for comparing against the
    /// announce-then-execute split.
    pub fn legacy_withdraw(&mut self, receipt: WithdrawalReceipt) -> LegacyOutcome {
        if self.checks_enabled && !self.receipt_tag_ok(&receipt) {
            return LegacyOutcome::Rejected("signature verification failed".to_string());
        }
        if self.checks_enabled && self.redeemed.contains_key(&receipt.deposit_id) {
            return LegacyOutcome::Rejected("already withdrawn".to_string());
        }
        let ticket = WithdrawalTicket {
            id: self.next_ticket_id,
            receipt,
            state: TicketState::Announced,
            decided_by: None,
            reason: None,
            note: String::new(),
            steps: 0,
        };
        self.next_ticket_id += 1;
        self.tickets.push(ticket);
        self.execute(self.tickets.len() - 1);
        LegacyOutcome::Executed
    }
}

// ---------------------------------------------------------------------------
// Correctness experiment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Benign,
    OverWithdraw,
    Unbacked,
    DoubleSpend,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TicketOutcome {
    pub position: u32,
    pub kind: ExperimentKind,
    pub ticket: TicketId,
    pub state: TicketState,
    pub category: Option<FindingCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub total: u32,
    pub executed: u32,
    pub rejected: u32,
    pub rejected_categories: BTreeMap<FindingCategory, u32>,
    pub total_steps: u64,
    pub outcomes: Vec<TicketOutcome>,
}

/// Runs paired deposit/withdrawal transactions through the protocol with the
/// bridge's own checks disabled (modeling key compromise) and the auditing
/// approver as the only defense. `malicious` tickets are placed at
/// seed-derived random positions; outcomes are independent of placement.
pub fn run_correctness_experiment(
    seed: u64,
    n_total: u32,
    malicious: &[ExperimentKind],
) -> ExperimentReport {
    assert!(
        malicious.len() as u32 <= n_total,
        "more malicious slots than transactions"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignment = place_malicious(&mut rng, n_total, malicious);

    let mut bridge = SimBridge::new(seed ^ 0xa77e, false);
    let approver = AuditingApprover::default();
    let tokens = ["0xaaa0", "0xbbb1", "0xccc2"];
    let mut executed_benign: Vec<(u64, Amount)> = Vec::new();
    let mut outcomes = Vec::new();

    for pos in 0..n_total {
        let kind = assignment
            .get(&pos)
            .copied()
            .unwrap_or(ExperimentKind::Benign);
        let token = tokens[rng.random_range(0..tokens.len())];
        let recipient = format!("0x{:040x}", rng.random::<u64>());
        let amount = Amount::from(rng.random_range(1u64..=1_000_000_000_000));

        let receipt = match kind {
            ExperimentKind::Benign => {
                let id = bridge.deposit(token, amount.clone(), &recipient);
                executed_benign.push((id, amount.clone()));
                bridge.sign_receipt(id, token, amount, &recipient)
            }
            ExperimentKind::OverWithdraw => {
                let id = bridge.deposit(token, amount.clone(), &recipient);
                let extra = Amount::from(rng.random_range(1u64..=1_000_000));
                bridge.sign_receipt(id, token, &amount + &extra, &recipient)
            }
            ExperimentKind::Unbacked => {
                bridge.sign_receipt(1_000_000_000 + pos as u64, token, amount, &recipient)
            }
            ExperimentKind::DoubleSpend => {
                let (id, orig_amount) =
                    executed_benign[rng.random_range(0..executed_benign.len())].clone();
                let dep = bridge.deposits.get(&id).expect("benign deposit exists");
                let token = dep.token.clone();
                let recipient = dep.recipient.clone();
                bridge.sign_receipt(id, &token, orig_amount, &recipient)
            }
        };

        let ticket = bridge.announce_withdraw(receipt);
        let decided = bridge
            .approve_withdraw(ticket.id, &approver)
            .expect("announced tickets are approvable");
        outcomes.push(TicketOutcome {
            position: pos,
            kind,
            ticket: decided.id,
            state: decided.state,
            category: decided.reason.as_ref().map(|f| f.category),
        });
    }

    let mut report = ExperimentReport {
        seed,
        total: n_total,
        executed: 0,
        rejected: 0,
        rejected_categories: BTreeMap::new(),
        total_steps: bridge.tickets().iter().map(|t| t.steps as u64).sum(),
        outcomes,
    };
    for o in &report.outcomes {
        match o.state {
            TicketState::Executed => report.executed += 1,
            TicketState::Rejected => {
                report.rejected += 1;
                if let Some(cat) = o.category {
                    *report.rejected_categories.entry(cat).or_insert(0) += 1;
                }
            }
            _ => {}
        }
    }
    report
}

/// Chooses distinct random positions for the malicious tickets. A
/// double-spend must land after at least one benign ticket so it has a
/// redeemed deposit to replay; draws violating that are retried.
fn place_malicious(
    rng: &mut ChaCha8Rng,
    n_total: u32,
    malicious: &[ExperimentKind],
) -> BTreeMap<u32, ExperimentKind> {
    loop {
        let mut positions: Vec<u32> = Vec::new();
        while positions.len() < malicious.len() {
            let p = rng.random_range(0..n_total);
            if !positions.contains(&p) {
                positions.push(p);
            }
        }
        let assignment: BTreeMap<u32, ExperimentKind> =
            positions.iter().copied().zip(malicious.iter().copied()).collect();
        let ok = assignment.iter().all(|(pos, kind)| {
            *kind != ExperimentKind::DoubleSpend
                || (0..*pos).any(|p| !assignment.contains_key(&p))
        });
        if ok {
            return assignment;
        }
    }
}
