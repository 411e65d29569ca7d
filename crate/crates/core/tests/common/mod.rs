//! Scenario builders shared by the integration suites.

#![allow(dead_code)]

use std::collections::HashMap;

use causal_hybrid::metrics;
use causal_hybrid::netsim::config::{Latency, LinkConfig, NetConfig};
use causal_hybrid::netsim::scenario::{self, AppSend, RandomSpec};
use causal_hybrid::netsim::{self, RunResult, Scenario, TraceEvent};
use causal_hybrid::oracle::MsgKey;
use causal_hybrid::{EngineKind, ProcessId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn link(a: u64, b: u64, t: u64) -> LinkConfig {
    LinkConfig {
        from: ProcessId(a),
        to: ProcessId(b),
        latency: Latency::fixed(t),
        symmetric: true,
    }
}

/// Loss-free network with a default latency and per-pair overrides.
pub fn fixed_net(default: u64, links: Vec<LinkConfig>) -> NetConfig {
    NetConfig {
        latency: Latency::fixed(default),
        links,
        timer_period: 100_000,
        ..NetConfig::default()
    }
}

pub fn script(name: &str, n: u64, net: NetConfig, sends: Vec<AppSend>) -> Scenario {
    Scenario {
        name: name.into(),
        engine: None,
        processes: (0..n).map(ProcessId).collect(),
        net,
        sends,
    }
}

fn last_delivery(s: &Scenario, e: EngineKind) -> u64 {
    let r = netsim::run(s, e).expect("valid scenario");
    r.trace
        .iter()
        .filter(|r| r.event == TraceEvent::D)
        .map(|r| r.tick)
        .max()
        .unwrap_or(0)
}

/// Loss-free traffic in rounds: every round starts only after the previous
/// one has been fully delivered under both unicast engines, so each round's
/// causal-sends see the same history regardless of engine.
pub fn phased(seed: u64, n: u64, phases: usize) -> Scenario {
    let mut s = scenario::random(&RandomSpec {
        seed,
        n,
        messages: 0,
        fixed_links: true,
        ..RandomSpec::default()
    });
    s.name = format!("phased-{seed}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = 0;
    for _ in 0..phases {
        let k = rng.random_range(1..=2 * n);
        for _ in 0..k {
            let src = rng.random_range(0..n);
            let mut dst = rng.random_range(0..n - 1);
            if dst >= src {
                dst += 1;
            }
            s.sends.push(AppSend::new(t, src, &[dst], ""));
        }
        t = last_delivery(&s, EngineKind::Basic).max(last_delivery(&s, EngineKind::SpsOptimal)) + 1;
    }
    s
}

/// First network-send tick per (message, destination).
pub fn send_ticks(r: &RunResult) -> HashMap<(MsgKey, ProcessId), u64> {
    metrics::timings(&r.trace)
        .into_iter()
        .filter_map(|m| Some(((m.key, m.dst), m.s_tick?)))
        .collect()
}

/// Network-send tick of the message tagged by the `index`-th send of `s`.
pub fn s_tick_of(s: &Scenario, r: &RunResult, index: usize) -> u64 {
    let a = &s.sends[index];
    let src = a.src.0;
    let mid = 1 + s.sends[..index].iter().filter(|b| b.src.0 == src).count() as u64;
    send_ticks(r)[&((a.src, mid), a.dsts[0])]
}

/// Unflagged second message to the same receiver: the basic engine flags
/// `m2` because `m1` is still unacked, so `j` must wait for a permit before
/// forwarding anything, while the optimal engine leaves `m2` unflagged.
pub fn improvement_same_receiver() -> (Scenario, usize) {
    let (i, j, k) = (0, 1, 2);
    let s = script(
        "improve-same-receiver",
        3,
        fixed_net(100, vec![]),
        vec![
            AppSend::new(0, i, &[j], "m1"),
            AppSend::new(1, i, &[j], "m2"),
            AppSend::new(150, j, &[k], "x"),
        ],
    );
    (s, 2)
}

/// Early permit: `x` to `j` follows a slow `y` to `j` and a fast `z` to `k`.
/// The optimal engine permits `x` once every message before it to another
/// receiver is acked, long before `y`'s ack returns over the slow link.
pub fn improvement_early_permit() -> (Scenario, usize) {
    let (i, j, k) = (0, 1, 2);
    let s = script(
        "improve-early-permit",
        3,
        fixed_net(100, vec![link(i, k, 10), link(i, j, 500)]),
        vec![
            AppSend::new(0, i, &[j], "y"),
            AppSend::new(1, i, &[k], "z"),
            AppSend::new(2, i, &[j], "x"),
            AppSend::new(600, j, &[k], "w"),
        ],
    );
    (s, 3)
}

/// Permit from the receiver itself: `i` got `y1` from `j` and sends `m`
/// back to `j`. The basic engine waits for `j`'s permit, which in turn waits
/// on `j`'s slow message to `a`; the optimal engine sends at once.
pub fn improvement_own_receiver() -> (Scenario, usize) {
    let (i, j, a) = (0, 1, 2);
    let s = script(
        "improve-own-receiver",
        3,
        fixed_net(100, vec![link(j, a, 1000), link(i, j, 10)]),
        vec![
            AppSend::new(0, j, &[a], "y0"),
            AppSend::new(1, j, &[i], "y1"),
            AppSend::new(50, i, &[j], "m"),
        ],
    );
    (s, 2)
}
