//! Deployment configuration: the chains being watched and, per bridge, the
//! knobs that drive amount resolution and the invariant checks.
//!
//! Bridges differ in how much their own events can be trusted, how fees are
//! charged, and which wrapped tokens correspond across chains; all of that is
//! data, not code, so new bridges are onboarded by configuration.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::audit::FeePolicy;
use crate::model::{ChainId, TokenId};

/// One monitored chain and the time it needs before a block counts as final.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainSpec {
    pub name: ChainId,
    /// Seconds behind the wall clock at which blocks are considered final.
    pub finality_lag: i64,
}

/// Per-bridge audit parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BridgeConfig {
    pub id: String,
    /// Whether amounts claimed in the bridge's own events are trusted.
    /// Untrusted bridges are resolved through adjacent transfer events.
    #[serde(default)]
    pub trusted_claim: bool,
    /// When the bridge event is untrusted and no transfer corroborates a
    /// deposit, treat the inflow as zero instead of rejecting the trace.
    /// This is how deposit-contract bugs surface as accounting violations.
    #[serde(default)]
    pub treat_missing_transfer_as_zero: bool,
    /// Bridge-controlled addresses, keyed by chain name.
    #[serde(default)]
    pub addresses: BTreeMap<String, Vec<String>>,
    /// Fee policy applied when no per-token override matches.
    #[serde(default = "FeePolicy::indeterminate")]
    pub fee_default: FeePolicy,
    #[serde(default)]
    pub fees: Vec<TokenFee>,
    /// Wrapped/native correspondences across chains; symmetric, and closed
    /// transitively when classes are built.
    #[serde(default)]
    pub equivalences: Vec<(TokenId, TokenId)>,
    #[serde(default)]
    pub reflection: Vec<ReflectionRule>,
    #[serde(default)]
    pub test_tokens: Vec<TokenId>,
    /// Explicit log-index offsets (relative to the bridge event) to try first
    /// when several transfer events in one transaction pass the direction
    /// check.
    #[serde(default)]
    pub transfer_offsets: Option<Vec<i64>>,
    /// Pairing handles this bridge emits, in preference order. Deposits are
    /// always indexed under every handle they expose; this order drives
    /// generators and documentation.
    #[serde(default)]
    pub pairing: Vec<PairingStrategy>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenFee {
    pub token: TokenId,
    pub policy: FeePolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingStrategy {
    Id,
    Hash,
    External,
}

/// Exact rational scale recovering the intended amount of a reflection token
/// from the value its transfer event logs, valid for a block range.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReflectionRule {
    pub token: TokenId,
    pub num: u64,
    pub den: u64,
    #[serde(default)]
    pub from_block: u64,
    #[serde(default)]
    pub to_block: Option<u64>,
}

/// Live-monitor settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonitorConfig {
    #[serde(default = "default_poll_interval")]
    pub poll_interval: i64,
    /// Seconds of history the hot storage tier keeps before eviction.
    #[serde(default = "default_hot_window")]
    pub hot_window: i64,
    /// Alert on cross-chain token pairs the configuration does not know;
    /// when false, unknown pairs are treated as equivalent instead.
    #[serde(default = "default_true")]
    pub alert_on_unknown_token: bool,
    #[serde(default)]
    pub sink: SinkConfig,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            poll_interval: default_poll_interval(),
            hot_window: default_hot_window(),
            alert_on_unknown_token: true,
            sink: SinkConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SinkConfig {
    /// Line-delimited JSON alert records appended to a file.
    Ndjson { path: String },
    /// One HTTP-POST-shaped record file per alert, written to a directory.
    Outbox { dir: String },
}

impl Default for SinkConfig {
    fn default() -> Self {
        SinkConfig::Ndjson {
            path: "alerts.ndjson".to_string(),
        }
    }
}

fn default_poll_interval() -> i64 {
    60
}

fn default_hot_window() -> i64 {
    90 * 86_400
}

fn default_true() -> bool {
    true
}

/// Whole-deployment configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditConfig {
    pub chains: Vec<ChainSpec>,
    pub bridges: Vec<BridgeConfig>,
    #[serde(default)]
    pub monitor: MonitorConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Json(String),
    #[error("chain name must be non-empty and unique: {0:?}")]
    BadChain(String),
    #[error("chain {0:?}: finality_lag must be >= 0")]
    NegativeFinality(String),
    #[error("bridge id must be non-empty and unique: {0:?}")]
    BadBridge(String),
    #[error("bridge {bridge:?}: proportional fee ppm {ppm} out of range [0, 1000000)")]
    BadPpm { bridge: String, ppm: u64 },
    #[error("bridge {bridge:?}: reflection rule with zero denominator")]
    ZeroDenominator { bridge: String },
}

impl BridgeConfig {
    /// Conservative parameters for bridges the configuration does not list:
    /// nothing is trusted, so their withdrawals surface as undecodable
    /// rather than silently passing.
    pub fn unknown(id: &str) -> BridgeConfig {
        BridgeConfig {
            id: id.to_string(),
            trusted_claim: false,
            treat_missing_transfer_as_zero: false,
            addresses: BTreeMap::new(),
            fee_default: FeePolicy::Indeterminate,
            fees: Vec::new(),
            equivalences: Vec::new(),
            reflection: Vec::new(),
            test_tokens: Vec::new(),
            transfer_offsets: None,
            pairing: Vec::new(),
        }
    }

    pub fn is_bridge_address(&self, chain: &ChainId, addr: &str) -> bool {
        self.addresses
            .get(chain.as_str())
            .map(|list| list.iter().any(|a| a == addr))
            .unwrap_or(false)
    }

    /// Fee policy for deposits of `token`: per-token override, else the
    /// bridge default.
    pub fn fee_policy(&self, token: &TokenId) -> &FeePolicy {
        self.fees
            .iter()
            .find(|f| &f.token == token)
            .map(|f| &f.policy)
            .unwrap_or(&self.fee_default)
    }

    /// Reflection scale for `token` at `block`, first matching rule wins.
    pub fn reflection_scale(&self, token: &TokenId, block: u64) -> Option<(u64, u64)> {
        self.reflection
            .iter()
            .find(|r| {
                &r.token == token
                    && block >= r.from_block
                    && r.to_block.map(|hi| block <= hi).unwrap_or(true)
            })
            .map(|r| (r.num, r.den))
    }

    pub fn is_test_token(&self, token: &TokenId) -> bool {
        self.test_tokens.iter().any(|t| t == token)
    }

    /// Whether the configuration mentions this token at all.
    pub fn knows_token(&self, token: &TokenId) -> bool {
        self.fees.iter().any(|f| &f.token == token)
            || self.test_tokens.iter().any(|t| t == token)
            || self.reflection.iter().any(|r| &r.token == token)
            || self
                .equivalences
                .iter()
                .any(|(a, b)| a == token || b == token)
    }
}

impl AuditConfig {
    pub fn bridge(&self, id: &str) -> Option<&BridgeConfig> {
        self.bridges.iter().find(|b| b.id == id)
    }

    pub fn finality_lag(&self, chain: &ChainId) -> Option<i64> {
        self.chains
            .iter()
            .find(|c| &c.name == chain)
            .map(|c| c.finality_lag)
    }

    pub fn from_json(text: &str) -> Result<AuditConfig, ConfigError> {
        let mut cfg: AuditConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
        cfg.normalize();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Lowercases addresses so lookups match normalized events.
    pub fn normalize(&mut self) {
        for bridge in &mut self.bridges {
            for list in bridge.addresses.values_mut() {
                for a in list.iter_mut() {
                    a.make_ascii_lowercase();
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut seen_chains = BTreeMap::new();
        for c in &self.chains {
            if c.name.as_str().is_empty() || seen_chains.insert(c.name.clone(), ()).is_some() {
                return Err(ConfigError::BadChain(c.name.as_str().to_string()));
            }
            if c.finality_lag < 0 {
                return Err(ConfigError::NegativeFinality(c.name.as_str().to_string()));
            }
        }
        let mut seen_bridges = BTreeMap::new();
        for b in &self.bridges {
            if b.id.is_empty() || seen_bridges.insert(b.id.clone(), ()).is_some() {
                return Err(ConfigError::BadBridge(b.id.clone()));
            }
            let mut policies: Vec<&FeePolicy> = Vec::new();
            policies.push(&b.fee_default);
            policies.extend(b.fees.iter().map(|f| &f.policy));
            for p in policies {
                if let FeePolicy::Proportional { ppm } = p {
                    if *ppm >= 1_000_000 {
                        return Err(ConfigError::BadPpm {
                            bridge: b.id.clone(),
                            ppm: *ppm,
                        });
                    }
                }
            }
            if b.reflection.iter().any(|r| r.den == 0) {
                return Err(ConfigError::ZeroDenominator {
                    bridge: b.id.clone(),
                });
            }
        }
        Ok(())
    }
}
