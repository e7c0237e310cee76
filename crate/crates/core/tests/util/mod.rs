//! Builders shared by the integration tests.

use bridgetally_core::config::AuditConfig;
use bridgetally_core::event::{
    ChainEvent, DepositBody, EventBody, TransferBody, WithdrawalBody,
};
use bridgetally_core::model::{Amount, ChainId, PairKey, TokenId, TxRef};

pub fn test_config() -> AuditConfig {
    AuditConfig::from_json(
        r#"{
        "chains": [{"name": "c1", "finality_lag": 10}, {"name": "c2", "finality_lag": 3}],
        "bridges": [{
            "id": "br",
            "trusted_claim": true,
            "addresses": {"c1": ["0xbridge1"], "c2": ["0xbridge2"]},
            "equivalences": [[{"chain": "c1", "address": "0xtok"}, {"chain": "c2", "address": "0xwtok"}]]
        }]
    }"#,
    )
    .unwrap()
}

pub fn deposit(
    chain: &str,
    t: i64,
    hash: &str,
    id: Option<u64>,
    token: &str,
    amount: u64,
    recipient: Option<&str>,
    dest: Option<&str>,
) -> ChainEvent {
    ChainEvent {
        tx: TxRef::new(ChainId::new(chain), hash, 0),
        block: t as u64,
        block_time: t,
        bridge_id: "br".to_string(),
        body: EventBody::Deposit(DepositBody {
            deposit_id: id,
            token: TokenId::new(ChainId::new(chain), token),
            claimed_amount: Some(Amount::from(amount)),
            depositor: "0xuser".to_string(),
            recipient: recipient.map(str::to_string),
            dest_chain: dest.map(ChainId::new),
            explicit_fee: None,
        }),
    }
}

pub fn withdrawal(
    chain: &str,
    t: i64,
    hash: &str,
    pair: Option<PairKey>,
    token: &str,
    amount: u64,
) -> ChainEvent {
    ChainEvent {
        tx: TxRef::new(ChainId::new(chain), hash, 0),
        block: t as u64,
        block_time: t,
        bridge_id: "br".to_string(),
        body: EventBody::Withdrawal(WithdrawalBody {
            pair_ref: pair,
            token: TokenId::new(ChainId::new(chain), token),
            claimed_amount: Some(Amount::from(amount)),
            recipient: "0xrecv".to_string(),
            source_chain: None,
        }),
    }
}

pub fn transfer(
    chain: &str,
    t: i64,
    hash: &str,
    log_index: u32,
    token: &str,
    from: &str,
    to: &str,
    value: u64,
) -> ChainEvent {
    ChainEvent {
        tx: TxRef::new(ChainId::new(chain), hash, log_index),
        block: t as u64,
        block_time: t,
        bridge_id: "br".to_string(),
        body: EventBody::Transfer(TransferBody {
            token: TokenId::new(ChainId::new(chain), token),
            from: from.to_string(),
            to: to.to_string(),
            value: Amount::from(value),
        }),
    }
}

pub fn by_id(id: u64) -> PairKey {
    PairKey::ById {
        bridge: "br".to_string(),
        deposit_id: id,
    }
}

pub fn by_hash(hash: &str) -> PairKey {
    PairKey::ByDepositHash {
        tx_hash: hash.to_string(),
    }
}
