//! Shared scenario builders for the integration tests.

use bridgetally::sim::{
    AttackKind, Injection, Route, ScenarioBridge, ScenarioConfig,
};
use bridgetally_core::audit::FeePolicy;
use bridgetally_core::config::{ChainSpec, PairingStrategy};
use bridgetally_core::model::ChainId;

pub const START: i64 = 1_700_000_000;

/// Two chains, one untrusted bridge paired by deposit id.
pub fn base_scenario(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        start_time: START,
        chains: vec![
            ChainSpec {
                name: ChainId::new("src"),
                finality_lag: 120,
            },
            ChainSpec {
                name: ChainId::new("dst"),
                finality_lag: 30,
            },
        ],
        bridges: vec![ScenarioBridge {
            id: "hop".to_string(),
            pairing: PairingStrategy::Id,
            trusted_claim: false,
            routes: vec![Route {
                src_chain: "src".to_string(),
                dst_chain: "dst".to_string(),
                src_token: "0xaaaa".to_string(),
                dst_token: "0xwwww".to_string(),
                fee: FeePolicy::Proportional { ppm: 1000 },
                reflection: None,
            }],
        }],
        traffic_per_hour: 60,
        duration_secs: 7200,
        injections: vec![],
        pending_permille: 30,
        zero_withdrawal_permille: 0,
    }
}

/// Desk-scale stand-in for a large retrospective corpus: three chains, two
/// bridges, mixed fee policies, a reflection-token route, pending deposits.
/// 1,000 transactions per simulated hour over 100 hours = 100,000 pairs.
#[allow(dead_code)]
pub fn scale_scenario(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        seed,
        start_time: START,
        chains: vec![
            ChainSpec {
                name: ChainId::new("eth"),
                finality_lag: 720,
            },
            ChainSpec {
                name: ChainId::new("bsc"),
                finality_lag: 3,
            },
            ChainSpec {
                name: ChainId::new("sol"),
                finality_lag: 13,
            },
        ],
        bridges: vec![
            ScenarioBridge {
                id: "hop".to_string(),
                pairing: PairingStrategy::Id,
                trusted_claim: false,
                routes: vec![
                    Route {
                        src_chain: "eth".to_string(),
                        dst_chain: "bsc".to_string(),
                        src_token: "0xaaaa".to_string(),
                        dst_token: "0xwaaa".to_string(),
                        fee: FeePolicy::Proportional { ppm: 500 },
                        reflection: None,
                    },
                    Route {
                        src_chain: "eth".to_string(),
                        dst_chain: "sol".to_string(),
                        src_token: "0xbbbb".to_string(),
                        dst_token: "0xwbbb".to_string(),
                        fee: FeePolicy::Explicit,
                        reflection: None,
                    },
                    Route {
                        src_chain: "eth".to_string(),
                        dst_chain: "bsc".to_string(),
                        src_token: "0xreef".to_string(),
                        dst_token: "0xwree".to_string(),
                        fee: FeePolicy::Indeterminate,
                        reflection: Some((100, 64)),
                    },
                ],
            },
            ScenarioBridge {
                id: "skip".to_string(),
                pairing: PairingStrategy::Hash,
                trusted_claim: true,
                routes: vec![Route {
                    src_chain: "bsc".to_string(),
                    dst_chain: "sol".to_string(),
                    src_token: "0xcccc".to_string(),
                    dst_token: "0xwccc".to_string(),
                    fee: FeePolicy::Fixed {
                        amount: bridgetally_core::model::Amount::from(1000u64),
                    },
                    reflection: None,
                }],
            },
        ],
        traffic_per_hour: 1000,
        duration_secs: 360_000,
        injections: vec![],
        pending_permille: 30,
        zero_withdrawal_permille: 0,
    }
}

/// The live-monitoring drill: benign traffic plus one double-spend, one
/// unbacked withdrawal, and one amounts-do-not-match attack, in windows far
/// enough apart to land in separate polls.
pub fn live_attack_scenario(seed: u64) -> ScenarioConfig {
    let mut scenario = base_scenario(seed);
    scenario.injections = vec![
        Injection {
            kind: AttackKind::Replay,
            count: 1,
            from_sec: 1800,
            to_sec: 2400,
        },
        Injection {
            kind: AttackKind::UnbackedWithdrawal,
            count: 1,
            from_sec: 3600,
            to_sec: 4200,
        },
        Injection {
            kind: AttackKind::AmountMismatch,
            count: 1,
            from_sec: 5400,
            to_sec: 6000,
        },
    ];
    scenario
}
