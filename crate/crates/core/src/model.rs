//! Identifiers and exact amount arithmetic shared by every other module.
//!
//! Amounts are arbitrary-precision non-negative integers in the token's base
//! units. Token decimals are display metadata only; doing arithmetic in
//! floating point would be lossy for 18-decimal tokens, so none happens here.

use alloc::string::{String, ToString};

use core::cmp::Ordering;
use core::fmt;
use core::ops::Add;
use core::str::FromStr;

use num_bigint::BigUint;
use num_traits::Zero;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Reserved token address for native coins, which have no transfer events of
/// their own and are modeled through internal-transaction records.
pub const NATIVE_TOKEN: &str = "native";

/// The all-zero EVM address, used both as a burn target on deposit and a mint
/// source on withdrawal.
pub const ZERO_ADDRESS: &str = "0x0000000000000000000000000000000000000000";

/// Chain identifier: a short lowercase name such as `eth` or `bsc`.
///
/// Per-chain finality lag lives in [`crate::config::ChainSpec`]; the
/// identifier itself is pure identity so it can be embedded in event keys.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChainId(pub String);

impl ChainId {
    pub fn new(name: impl Into<String>) -> Self {
        ChainId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ChainId {
    fn from(s: &str) -> Self {
        ChainId(s.to_string())
    }
}

/// Non-negative token amount in base units.
///
/// Arithmetic never wraps or truncates; subtraction that would go negative is
/// a checked operation so callers must treat underflow as a violation
/// condition rather than clamping silently.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(BigUint);

impl Amount {
    pub fn zero() -> Self {
        Amount(BigUint::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// `self - rhs`, or `None` on underflow. Never panics.
    pub fn checked_sub(&self, rhs: &Amount) -> Option<Amount> {
        if self.0 >= rhs.0 {
            Some(Amount(&self.0 - &rhs.0))
        } else {
            None
        }
    }

    /// `self - rhs`, clamped to zero on underflow.
    pub fn saturating_sub(&self, rhs: &Amount) -> Amount {
        self.checked_sub(rhs).unwrap_or_else(Amount::zero)
    }

    /// Floor of `self * num / den`. Used for proportional fees and
    /// reflection-token rescaling, which are defined with exact rational
    /// arithmetic rounded down.
    pub fn mul_div_floor(&self, num: u64, den: u64) -> Amount {
        assert!(den != 0, "mul_div_floor: zero denominator");
        Amount((&self.0 * BigUint::from(num)) / BigUint::from(den))
    }

    pub fn as_biguint(&self) -> &BigUint {
        &self.0
    }

    pub fn from_biguint(v: BigUint) -> Self {
        Amount(v)
    }

    /// Canonical base-10 rendering, no leading zeros.
    pub fn to_decimal(&self) -> String {
        self.0.to_string()
    }

    /// Parses a base-10 digit string. Signs, whitespace, and empty strings
    /// are rejected.
    pub fn from_decimal(s: &str) -> Result<Amount, AmountParseError> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(AmountParseError {
                input: s.to_string(),
            });
        }
        BigUint::from_str(s)
            .map(Amount)
            .map_err(|_| AmountParseError {
                input: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not a base-10 amount: {input:?}")]
pub struct AmountParseError {
    pub input: String,
}

impl From<u64> for Amount {
    fn from(v: u64) -> Self {
        Amount(BigUint::from(v))
    }
}

impl From<u128> for Amount {
    fn from(v: u128) -> Self {
        Amount(BigUint::from(v))
    }
}

impl Add<&Amount> for &Amount {
    type Output = Amount;

    fn add(self, rhs: &Amount) -> Amount {
        Amount(&self.0 + &rhs.0)
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal())
    }
}

// Amounts cross the wire as decimal strings: JSON numbers cannot carry
// 256-bit values exactly.
impl Serialize for Amount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_decimal())
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Amount::from_decimal(&s).map_err(D::Error::custom)
    }
}

/// Token identity: `(chain, address)`. The address is a lowercase hex string
/// or the reserved literal [`NATIVE_TOKEN`]. Symbols and behavioral flags
/// (reflection, test token) are configuration, not identity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenId {
    pub chain: ChainId,
    pub address: String,
}

impl TokenId {
    pub fn new(chain: impl Into<ChainId>, address: impl Into<String>) -> Self {
        let mut address = address.into();
        address.make_ascii_lowercase();
        TokenId {
            chain: chain.into(),
            address,
        }
    }

    pub fn native(chain: impl Into<ChainId>) -> Self {
        TokenId::new(chain, NATIVE_TOKEN)
    }

    pub fn is_native(&self) -> bool {
        self.address == NATIVE_TOKEN
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.chain, self.address)
    }
}

/// Position of one event within a trace: `(chain, tx_hash, log_index)`.
///
/// Hashes are opaque identifiers here; nothing in the auditor verifies them
/// cryptographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TxRef {
    pub chain: ChainId,
    pub tx_hash: String,
    pub log_index: u32,
}

impl TxRef {
    pub fn new(chain: impl Into<ChainId>, tx_hash: impl Into<String>, log_index: u32) -> Self {
        let mut tx_hash = tx_hash.into();
        tx_hash.make_ascii_lowercase();
        TxRef {
            chain: chain.into(),
            tx_hash,
            log_index,
        }
    }
}

impl fmt::Display for TxRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}#{}", self.tx_hash, self.chain, self.log_index)
    }
}

/// Handle a withdrawal uses to name its backing deposit.
///
/// Bridges either copy a per-deposit counter into the withdrawal, reference
/// the hash of the deposit transaction, or expose nothing in-band, in which
/// case an externally supplied key map fills the gap.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PairKey {
    ById { bridge: String, deposit_id: u64 },
    ByDepositHash { tx_hash: String },
    External { key: String },
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairKey::ById { bridge, deposit_id } => write!(f, "id {deposit_id} ({bridge})"),
            PairKey::ByDepositHash { tx_hash } => write!(f, "deposit hash {tx_hash}"),
            PairKey::External { key } => write!(f, "external key {key:?}"),
        }
    }
}

/// Sort key giving a strict total order over all events in a trace, so audit
/// results are a pure function of trace contents.
///
/// Block time leads so cross-chain interleaving is reproducible; ties break
/// by chain name, block number, and log index. The transaction hash closes
/// the order: log indexes are block-scoped, so `(chain, tx_hash, log_index)`
/// uniqueness makes the full key unique.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventOrder {
    pub block_time: i64,
    pub chain: ChainId,
    pub block: u64,
    pub log_index: u32,
    pub tx_hash: String,
}

impl EventOrder {
    pub fn cmp_key(&self) -> (i64, &str, u64, u32, &str) {
        (
            self.block_time,
            self.chain.as_str(),
            self.block,
            self.log_index,
            &self.tx_hash,
        )
    }
}

/// Compares two order keys; exposed so callers can sort without cloning.
pub fn order_cmp(a: &EventOrder, b: &EventOrder) -> Ordering {
    a.cmp_key().cmp(&b.cmp_key())
}
