//! Property tests over the arithmetic, ordering, and format contracts.

mod util;

use bridgetally_core::audit::{
    aggregate_flow, compute_max_outflow, FeePolicy,
};
use bridgetally_core::event::{
    format_event_line, parse_event_line, parse_event_log, resolve_amount, AmountSource,
    ChainEvent, EventBody,
};
use bridgetally_core::model::{Amount, ChainId, PairKey, TokenId, ZERO_ADDRESS};
use bridgetally_core::pairing::{build_index, pair_withdrawal};
use bridgetally_core::testkit::oracle_flow_totals;
use num_bigint::BigUint;
use proptest::prelude::*;

fn arb_amount() -> impl Strategy<Value = Amount> {
    // Up to 256 bits, the EVM word size the arithmetic must cover exactly.
    prop::collection::vec(any::<u8>(), 1..=32)
        .prop_map(|bytes| Amount::from_biguint(BigUint::from_bytes_be(&bytes)))
}

proptest! {
    #[test]
    fn add_sub_round_trips(a in arb_amount(), b in arb_amount()) {
        let sum = &a + &b;
        prop_assert_eq!(sum.checked_sub(&b), Some(a.clone()));
        prop_assert_eq!(sum.checked_sub(&a), Some(b.clone()));
    }

    #[test]
    fn checked_sub_underflows_exactly_when_smaller(a in arb_amount(), b in arb_amount()) {
        prop_assert_eq!(a.checked_sub(&b).is_none(), a < b);
    }

    #[test]
    fn decimal_serde_round_trips(a in arb_amount()) {
        let s = a.to_decimal();
        prop_assert_eq!(Amount::from_decimal(&s).unwrap(), a);
    }

    #[test]
    fn max_outflow_never_exceeds_inflow(
        inflow in arb_amount(),
        ppm in 0u64..1_000_000,
        fee in arb_amount(),
        which in 0u8..4,
    ) {
        let policy = match which {
            0 => FeePolicy::Indeterminate,
            1 => FeePolicy::Explicit,
            2 => FeePolicy::Fixed { amount: fee.clone() },
            _ => FeePolicy::Proportional { ppm },
        };
        let max = compute_max_outflow(&inflow, &policy, Some(&fee));
        prop_assert!(max <= inflow);
    }
}

// ----------------------------------------------------------------------
// Event order: sorting any permutation of a trace yields the same sequence.
// ----------------------------------------------------------------------

fn arb_trace_events() -> impl Strategy<Value = Vec<ChainEvent>> {
    let one = (0usize..40, 0i64..5, prop::bool::ANY, 0u32..3);
    prop::collection::vec(one, 1..25).prop_map(|specs| {
        specs
            .into_iter()
            .enumerate()
            .map(|(i, (hash_salt, t, on_c2, log))| {
                let chain = if on_c2 { "c2" } else { "c1" };
                // Hash unique per event; times and blocks collide on purpose.
                let hash = format!("0x{:02x}{:04x}", hash_salt, i);
                util::transfer(chain, t, &hash, log, "0xtok", "0xa", "0xb", 1)
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn event_order_is_permutation_invariant(events in arb_trace_events().prop_shuffle()) {
        let mut once = events.clone();
        once.sort_by_cached_key(|e| e.order());
        let mut twice = events;
        twice.reverse();
        twice.sort_by_cached_key(|e| e.order());
        prop_assert_eq!(once, twice);
    }
}

// ----------------------------------------------------------------------
// Wire format: write∘parse is the identity on canonical logs.
// ----------------------------------------------------------------------

fn arb_wire_event() -> impl Strategy<Value = ChainEvent> {
    let kind = 0u8..3;
    (
        kind,
        0u64..9999,
        0i64..100_000,
        any::<u32>(),
        prop::option::of(0u64..50),
        prop::option::of(0u64..1_000_000u64),
        prop::option::of(prop_oneof![Just("c1"), Just("c2")]),
        0u8..4,
    )
        .prop_map(
            |(kind, salt, t, log, dep_id, amount, dest, pair_kind)| {
                let hash = format!("0x{salt:08x}");
                match kind {
                    0 => {
                        let mut ev = util::deposit(
                            "c1",
                            t,
                            &hash,
                            dep_id,
                            "0xtok",
                            amount.unwrap_or(0),
                            dest.map(|_| "0xrecv"),
                            dest,
                        );
                        ev.tx.log_index = log;
                        if amount.is_none() {
                            if let EventBody::Deposit(d) = &mut ev.body {
                                d.claimed_amount = None;
                            }
                        }
                        ev
                    }
                    1 => {
                        let pair = match pair_kind {
                            0 => None,
                            1 => Some(util::by_id(dep_id.unwrap_or(1))),
                            2 => Some(util::by_hash("0xdead")),
                            _ => Some(PairKey::External { key: "k".into() }),
                        };
                        let mut ev =
                            util::withdrawal("c2", t, &hash, pair, "0xwtok", amount.unwrap_or(0));
                        ev.tx.log_index = log;
                        ev
                    }
                    _ => {
                        let mut ev = util::transfer(
                            "c1",
                            t,
                            &hash,
                            log,
                            "0xtok",
                            "0xa",
                            "0xb",
                            amount.unwrap_or(0),
                        );
                        ev.tx.log_index = log;
                        ev
                    }
                }
            },
        )
}

proptest! {
    #[test]
    fn format_round_trip_is_byte_identical(ev in arb_wire_event()) {
        let line = format_event_line(&ev);
        let back = parse_event_line(&line, 1).unwrap();
        prop_assert_eq!(&back, &ev);
        prop_assert_eq!(format_event_line(&back), line);
    }

    #[test]
    fn log_round_trip_preserves_bytes(events in prop::collection::vec(arb_wire_event(), 0..20)) {
        // Make per-chain block times non-decreasing (a format invariant).
        let mut events = events;
        events.sort_by_cached_key(|e| e.order());
        let mut text = String::new();
        for ev in &events {
            text.push_str(&format_event_line(ev));
            text.push('\n');
        }
        let (parsed, errors) = parse_event_log(&text, None);
        prop_assert!(errors.is_empty(), "{errors:?}");
        let mut round = String::new();
        for ev in &parsed {
            round.push_str(&format_event_line(ev));
            round.push('\n');
        }
        prop_assert_eq!(round, text);
    }
}

// ----------------------------------------------------------------------
// Resolution: the direction sanity check is sound.
// ----------------------------------------------------------------------

proptest! {
    #[test]
    fn selected_transfer_always_passes_direction_check(
        transfers in prop::collection::vec((0u32..6, 0u8..3, 1u64..1000), 0..6)
    ) {
        let cfg = util::test_config();
        let bridge = cfg.bridge("br").unwrap();
        let mut dep = util::deposit("c1", 5, "0xd", Some(1), "0xtok", 100, Some("0xr"), Some("c2"));
        dep.tx.log_index = 3;
        // Force the transfer route.
        let mut cfg2 = cfg.clone();
        cfg2.bridges[0].trusted_claim = false;
        let bridge2 = cfg2.bridge("br").unwrap();

        let events: Vec<_> = transfers
            .iter()
            .enumerate()
            .map(|(i, (log, dst_kind, value))| {
                let to = match dst_kind {
                    0 => "0xbridge1",
                    1 => ZERO_ADDRESS,
                    _ => "0xsomeoneelse",
                };
                let mut t = util::transfer("c1", 5, "0xd", *log, "0xtok", "0xuser", to, *value + i as u64);
                t.tx.log_index = *log;
                t
            })
            .collect();
        let refs: Vec<&ChainEvent> = events.iter().collect();

        match resolve_amount(&dep, &refs, bridge2) {
            Ok(r) if r.source == AmountSource::AdjacentTransfer => {
                let passing: Vec<&ChainEvent> = refs
                    .iter()
                    .copied()
                    .filter(|e| {
                        let t = e.transfer().unwrap();
                        t.to == ZERO_ADDRESS || bridge.is_bridge_address(&ChainId::new("c1"), &t.to)
                    })
                    .collect();
                prop_assert!(
                    passing.iter().any(|e| e.transfer().unwrap().value == r.amount),
                    "selected amount must come from a direction-checked transfer"
                );
            }
            Ok(_) | Err(_) => {}
        }
    }
}

// ----------------------------------------------------------------------
// Pairing: permutation of the deposit input never changes outcomes.
// ----------------------------------------------------------------------

proptest! {
    #[test]
    fn pairing_is_order_independent(
        ids in prop::collection::btree_set(0u64..30, 1..8),
        probe in 0u64..30,
    ) {
        let deposits: Vec<ChainEvent> = ids
            .iter()
            .map(|id| util::deposit("c1", 1, &format!("0xd{id}"), Some(*id), "0xtok", 5, Some("0xr"), None))
            .collect();
        let w = util::withdrawal("c2", 2, "0xw", Some(util::by_id(probe)), "0xwtok", 5);
        let forward: Vec<&ChainEvent> = deposits.iter().collect();
        let mut backward = forward.clone();
        backward.reverse();
        let a = pair_withdrawal(&w, &build_index(&forward, &[]).unwrap());
        let b = pair_withdrawal(&w, &build_index(&backward, &[]).unwrap());
        prop_assert_eq!(a, b);
    }
}

// ----------------------------------------------------------------------
// Aggregate flow conservation against the independent totals.
// ----------------------------------------------------------------------

proptest! {
    #[test]
    fn flow_final_values_match_independent_totals(
        pairs in prop::collection::vec((1u64..1000, 0i64..500, prop::bool::ANY), 1..20),
        bucket in 1i64..60,
    ) {
        let cfg = util::test_config();
        let mut events = Vec::new();
        for (i, (amount, t, withdrawn)) in pairs.iter().enumerate() {
            let dhash = format!("0xd{i:04x}");
            events.push(util::deposit("c1", *t, &dhash, Some(i as u64), "0xtok", *amount, Some("0xr"), Some("c2")));
            if *withdrawn {
                let whash = format!("0xw{i:04x}");
                events.push(util::withdrawal("c2", t + 30, &whash, Some(util::by_id(i as u64)), "0xwtok", *amount));
            }
        }
        let series = aggregate_flow(&events, &cfg, bucket);
        let expected = oracle_flow_totals(&events, &cfg);
        prop_assert_eq!(series.len(), expected.len());
        for s in &series {
            let key = (s.bridge.clone(), s.token_class.clone());
            let want = expected.get(&key).expect("series key exists in oracle");
            prop_assert_eq!(&s.final_value().0, want);
            // Balanced traffic never dips negative.
            prop_assert!(s.values.iter().all(|v| !v.is_negative()));
        }
    }
}
