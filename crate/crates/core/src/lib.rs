//! Accounting primitives for cross-chain token bridges.
//!
//! A bridge transaction is a composite of a deposit on a source chain and a
//! withdrawal on a destination chain. Every benign composite upholds the
//! balance invariant: the tokens released by the withdrawal must not exceed
//! the tokens received by the deposit, less any fee the bridge charges.
//!
//! This crate carries the pure logic:
//!
//! * [`model`] — identifiers, base-unit amounts, deterministic event order.
//! * [`event`] — normalized per-chain events and the newline-delimited JSON
//!   wire format they travel in.
//! * [`config`] — deployment configuration (chains, bridges, fee policies,
//!   token equivalences).
//! * [`pairing`] — matching withdrawals to the deposits that back them.
//! * [`audit`] — the invariant checks, violation taxonomy, and aggregate
//!   flow series.
//! * [`ate`] — the announce-then-execute withdrawal protocol with a
//!   pluggable approver.
//!
//! Everything here is `no_std`-compatible (with `alloc`) so the audit logic
//! can run inside constrained approver environments; file formats on disk,
//! persistent storage, and the live monitor live in the companion crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod ate;
pub mod audit;
pub mod config;
pub mod event;
pub mod model;
pub mod pairing;
#[cfg(feature = "testkit")]
pub mod testkit;
