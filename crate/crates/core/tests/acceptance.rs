//! End-to-end acceptance suite. Each check prints one `PASS`/`FAIL` line;
//! the test fails if any check fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::io::Write;
use std::time::Instant;

use causal_hybrid::metrics;
use causal_hybrid::netsim::config::Latency;
use causal_hybrid::netsim::scenario::{self, fig2_ids, starvation_ids, RandomSpec};
use causal_hybrid::netsim::{self, Outcome, RunResult, TraceEvent};
use causal_hybrid::oracle;
use causal_hybrid::sliding::{IdxSlidingMap, SlidingArray, SlidingError, SlidingMap};
use causal_hybrid::{EngineKind, Occupancy, ProcessId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Check = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + Sync + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const UNICAST_SAFE: [EngineKind; 3] = [
    EngineKind::Basic,
    EngineKind::SpsOptimal,
    EngineKind::Multicast,
];

/// Fault-model run parameters for one seed.
fn fault_spec(seed: u64, engine: EngineKind) -> RandomSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    RandomSpec {
        seed,
        n: rng.random_range(2..=10),
        messages: rng.random_range(500..=5000),
        loss: rng.random_range(0.0..=0.2),
        dup: rng.random_range(0.0..=0.1),
        jitter: rng.random_range(200..=1000),
        multicast: engine == EngineKind::Multicast,
        ..RandomSpec::default()
    }
}

struct FaultRun {
    engine: EngineKind,
    seed: u64,
    result: RunResult,
    verdict: oracle::Verdict,
}

fn fault_runs() -> Vec<FaultRun> {
    let jobs: Vec<(EngineKind, u64)> = UNICAST_SAFE
        .iter()
        .flat_map(|&e| (0..100).map(move |s| (e, s)))
        .collect();
    jobs.into_par_iter()
        .map(|(engine, seed)| {
            let s = scenario::random(&fault_spec(seed, engine));
            let result = netsim::run_checked(&s, engine).expect("valid scenario");
            let verdict = oracle::check(&result.trace).expect("well-formed trace");
            FaultRun {
                engine,
                seed,
                result,
                verdict,
            }
        })
        .collect()
}

fn causal_safety(runs: &[FaultRun]) -> Check {
    let mut violations = 0;
    let mut anomalies = 0;
    for r in runs {
        if !r.verdict.violations.is_empty() || r.result.stats.anomalies > 0 {
            eprintln!(
                "  {} seed {}: {} violation(s), {} anomalies",
                r.engine,
                r.seed,
                r.verdict.violations.len(),
                r.result.stats.anomalies
            );
        }
        violations += r.verdict.violations.len();
        anomalies += r.result.stats.anomalies;
    }
    ensure(violations == 0 && anomalies == 0, || {
        format!("{violations} violation(s), {anomalies} anomalies")
    })?;
    let lost: u64 = runs.iter().map(|r| r.result.stats.lost).sum();
    let dup: u64 = runs.iter().map(|r| r.result.stats.duplicated).sum();
    Ok(format!(
        "{} runs, 0 violations ({lost} copies lost, {dup} duplicated)",
        runs.len()
    ))
}

fn liveness(runs: &[FaultRun]) -> Check {
    let stuck: Vec<String> = runs
        .iter()
        .filter(|r| {
            r.result.outcome != Outcome::Quiescent
                || !r.verdict.undelivered.is_empty()
                || r.result
                    .residual
                    .iter()
                    .any(|(_, o)| *o != Occupancy::default())
        })
        .map(|r| format!("{}#{}", r.engine, r.seed))
        .collect();
    ensure(stuck.is_empty(), || format!("not quiescent: {stuck:?}"))?;
    let last = runs.iter().map(|r| r.result.end_tick).max().unwrap_or(0);
    Ok(format!(
        "{} runs quiescent with empty buffers, latest at tick {last}",
        runs.len()
    ))
}

fn metadata_constant() -> Check {
    let jobs: Vec<(EngineKind, u64, usize)> = UNICAST_SAFE
        .iter()
        .flat_map(|&e| {
            [4u64, 8, 16, 32]
                .into_iter()
                .flat_map(move |n| [200usize, 3000].map(|m| (e, n, m)))
        })
        .collect();
    let sizes: Vec<(String, BTreeSet<usize>)> = jobs
        .into_par_iter()
        .map(|(e, n, messages)| {
            let s = scenario::random(&RandomSpec {
                seed: n * 31 + messages as u64,
                n,
                messages,
                loss: 0.1,
                dup: 0.05,
                jitter: 300,
                multicast: e == EngineKind::Multicast,
                ..RandomSpec::default()
            });
            let r = netsim::run(&s, e).expect("valid scenario");
            (
                format!("{e} n={n} m={messages}"),
                r.stats.msg_metadata_sizes,
            )
        })
        .collect();
    let all: BTreeSet<usize> = sizes.iter().flat_map(|(_, s)| s.iter().copied()).collect();
    ensure(all.len() == 1, || format!("sizes differ: {sizes:?}"))?;
    Ok(format!(
        "MSG metadata is {} bytes in all {} runs",
        all.first().unwrap(),
        sizes.len()
    ))
}

fn sliding_steps_per_op(kind: &str, ops: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(ops as u64);
    match kind {
        "sliding_array" => {
            let mut a = SlidingArray::new();
            for k in 0..ops {
                if a.size() < 64 && rng.random_bool(0.55) || a.is_empty() {
                    a.add(k);
                } else {
                    a.remove().unwrap();
                }
            }
            a.steps() as f64 / ops as f64
        }
        "sliding_map" => {
            let mut m = SlidingMap::new();
            let mut live = VecDeque::new();
            for k in 0..ops as u64 {
                if live.len() < 64 && rng.random_bool(0.55) || live.is_empty() {
                    m.add(k).unwrap();
                    live.push_back(k);
                } else {
                    let at = rng.random_range(0..live.len().min(8));
                    let key = live.remove(at).unwrap();
                    m.remove(&key);
                }
            }
            m.steps() as f64 / ops as f64
        }
        _ => {
            let mut m = IdxSlidingMap::new();
            let mut live = VecDeque::new();
            for k in 0..ops as u64 {
                if live.len() < 64 && rng.random_bool(0.55) || live.is_empty() {
                    m.add(k).unwrap();
                    live.push_back(k);
                } else {
                    let at = rng.random_range(0..live.len().min(8));
                    let key = live.remove(at).unwrap();
                    m.remove(&key);
                }
            }
            m.steps() as f64 / ops as f64
        }
    }
}

fn engine_steps_per_event(engine: EngineKind, messages: usize) -> f64 {
    let s = scenario::random(&RandomSpec {
        seed: 11,
        n: 4,
        messages,
        jitter: 200,
        ..RandomSpec::default()
    });
    let r = netsim::run(&s, engine).expect("valid scenario");
    assert_eq!(r.outcome, Outcome::Quiescent);
    r.stats.steps as f64 / r.stats.wire_events as f64
}

fn amortized_constant() -> Check {
    const SIZES: [usize; 3] = [1_000, 10_000, 100_000];
    let subjects = [
        "sliding_array",
        "sliding_map",
        "idx_sliding_map",
        "basic",
        "sps_optimal",
    ];
    let rows: Vec<(&str, Vec<f64>)> = subjects
        .par_iter()
        .map(|&name| {
            let v = SIZES
                .iter()
                .map(|&n| match name {
                    "basic" => engine_steps_per_event(EngineKind::Basic, n),
                    "sps_optimal" => engine_steps_per_event(EngineKind::SpsOptimal, n),
                    _ => sliding_steps_per_op(name, n),
                })
                .collect();
            (name, v)
        })
        .collect();
    let mut notes = Vec::new();
    for (name, v) in &rows {
        let base = v[0];
        let flat = v.iter().all(|x| (x - base).abs() <= 0.2 * base);
        let shown = v
            .iter()
            .map(|x| format!("{x:.2}"))
            .collect::<Vec<_>>()
            .join("/");
        ensure(flat, || format!("{name} not flat: {shown}"))?;
        notes.push(format!("{name} {shown}"));
    }
    Ok(notes.join(", "))
}

/// Arrival tick of the last control message of `event` from `src` to `dst`
/// sent at or before `by`.
fn last_control_arrival(
    r: &RunResult,
    s: &netsim::Scenario,
    event: TraceEvent,
    src: u64,
    dst: u64,
    mid: Option<u64>,
    by: u64,
) -> Option<u64> {
    let lat = s.net.link_latency(ProcessId(src), ProcessId(dst));
    assert_eq!(lat.min, lat.max, "fixed latency expected");
    r.trace
        .iter()
        .filter(|t| t.event == event && t.process.0 == src && t.peer.0 == dst)
        .filter(|t| mid.is_none_or(|m| t.mid == m))
        .map(|t| t.tick + lat.min)
        .filter(|&a| a <= by)
        .max()
}

fn fig2_reproduction() -> Check {
    use fig2_ids::{I, J, K};
    let s = scenario::fig2();
    let m_index = s.sends.iter().position(|a| a.tag == "m").unwrap();
    let run = |e| netsim::run(&s, e).expect("valid scenario");
    let (basic, opt, cykas) = (
        run(EngineKind::Basic),
        run(EngineKind::SpsOptimal),
        run(EngineKind::Cykas),
    );
    for (e, r) in [("basic", &basic), ("sps_optimal", &opt), ("cykas", &cykas)] {
        ensure(oracle::check(&r.trace).unwrap().ok(), || {
            format!("{e} trace not causal")
        })?;
    }
    let c = s.sends[m_index].tick;
    let res = |r: &RunResult| common::s_tick_of(&s, r, m_index) - c;
    let (rb, ro, rc) = (res(&basic), res(&opt), res(&cykas));
    ensure(rc > rb && rb > 0 && ro <= rb, || {
        format!("residency basic {rb}, sps {ro}, cykas {rc}")
    })?;

    let s_basic = common::s_tick_of(&s, &basic, m_index);
    // a is j's second message, b is k's second message
    let permit_a = last_control_arrival(&basic, &s, TraceEvent::Permit, J, I, Some(2), s_basic);
    let permit_b = last_control_arrival(&basic, &s, TraceEvent::Permit, K, I, Some(2), s_basic);
    ensure(
        permit_a.is_some() && permit_b.is_some() && permit_a.max(permit_b) == Some(s_basic),
        || {
            format!(
                "basic sent m at {s_basic}; permits for a/b arrive at {permit_a:?}/{permit_b:?}"
            )
        },
    )?;

    let s_cykas = common::s_tick_of(&s, &cykas, m_index);
    let c_index = s.sends.iter().position(|a| a.tag == "c").unwrap();
    let c_sent = common::s_tick_of(&s, &cykas, c_index);
    let yct = last_control_arrival(&cykas, &s, TraceEvent::Yct, K, I, None, s_cykas);
    let yct_sent = yct.map(|a| a - s.net.link_latency(ProcessId(K), ProcessId(I)).min);
    ensure(yct == Some(s_cykas) && yct_sent > Some(c_sent), || {
        format!("cykas sent m at {s_cykas}; last YCT from k arrives {yct:?}, c sent at {c_sent}")
    })?;
    Ok(format!(
        "residency of m: cykas {rc} > basic {rb} >= sps_optimal {ro}; basic released by a's permit at {s_basic}, cykas by c's YCT at {s_cykas}"
    ))
}

fn cykas_starvation() -> Check {
    use starvation_ids::*;
    let s = scenario::cykas_starvation();
    let m_index = s.sends.iter().position(|a| a.src.0 == I).unwrap();
    assert_eq!(s.sends[m_index].tick, M_TICK);
    let period = s.net.timer_period;
    let rtt = s.max_rtt();
    let sent = |e| {
        let r = netsim::run(&s, e).expect("valid scenario");
        let key = ((ProcessId(I), 1), ProcessId(Z));
        common::send_ticks(&r).get(&key).copied()
    };
    let basic = sent(EngineKind::Basic).ok_or("basic never sent m")?;
    let cykas = sent(EngineKind::Cykas);
    let basic_res = basic - M_TICK;
    ensure(basic_res <= 3 * rtt, || {
        format!("basic residency {basic_res} > 3 x {rtt}")
    })?;
    let cykas_res = cykas.map(|t| t - M_TICK);
    ensure(cykas_res.is_none_or(|r| r > 50 * period), || {
        format!("cykas sent m after {cykas_res:?}, within 50 x {period}")
    })?;
    Ok(format!(
        "basic sends m after {basic_res} (<= 3 x rtt {rtt}); cykas after {} (> 50 x period {period})",
        cykas_res.map_or("never".into(), |r| r.to_string())
    ))
}

fn multicast_necessity() -> Check {
    let s = scenario::multicast_counterexample();
    let mut notes = Vec::new();
    for e in EngineKind::ALL {
        let r = netsim::run(&s, e).expect("valid scenario");
        let causal = oracle::check(&r.trace).unwrap().causal_violations();
        if e == EngineKind::Multicast {
            ensure(causal == 0, || {
                format!("multicast engine has {causal} violation(s)")
            })?;
        } else {
            ensure(causal >= 1, || {
                format!("{e} over unicasts shows no violation")
            })?;
        }
        notes.push(format!("{e} {causal}"));
    }
    Ok(format!("causal violations: {}", notes.join(", ")))
}

fn sps_dominance() -> Check {
    let outcomes: Vec<Result<(u64, u64, u64), String>> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let s = common::phased(seed, 2 + seed % 9, 40);
            let rb = netsim::run(&s, EngineKind::Basic).expect("valid scenario");
            let ro = netsim::run(&s, EngineKind::SpsOptimal).expect("valid scenario");
            let hb_b = oracle::stamp_trace(&rb.trace).unwrap().relation();
            let hb_o = oracle::stamp_trace(&ro.trace).unwrap().relation();
            ensure(hb_b == hb_o, || {
                format!("seed {seed}: scripts diverged in happens-before")
            })?;
            let tb = common::send_ticks(&rb);
            let (mut better, mut same) = (0, 0);
            for (k, &to) in &common::send_ticks(&ro) {
                let t = tb[k];
                ensure(to <= t, || {
                    format!("seed {seed}: {k:?} sent at {to} vs {t}")
                })?;
                if to < t {
                    better += 1;
                } else {
                    same += 1;
                }
            }
            Ok((better, same, tb.len() as u64))
        })
        .collect();
    let (mut better, mut same) = (0, 0);
    for o in outcomes {
        let (b, s, _) = o?;
        better += b;
        same += s;
    }
    let mut notes = Vec::new();
    for (name, (s, idx)) in [
        ("same-receiver", common::improvement_same_receiver()),
        ("early-permit", common::improvement_early_permit()),
        ("own-receiver", common::improvement_own_receiver()),
    ] {
        let rb = netsim::run(&s, EngineKind::Basic).expect("valid scenario");
        let ro = netsim::run(&s, EngineKind::SpsOptimal).expect("valid scenario");
        ensure(
            oracle::check(&rb.trace).unwrap().ok() && oracle::check(&ro.trace).unwrap().ok(),
            || format!("{name}: trace not causal"),
        )?;
        let (tb, to) = (
            common::s_tick_of(&s, &rb, idx),
            common::s_tick_of(&s, &ro, idx),
        );
        ensure(to < tb, || {
            format!("{name}: no strict improvement ({to} vs {tb})")
        })?;
        notes.push(format!("{name} {tb}->{to}"));
    }
    Ok(format!(
        "50 phased runs: {better} earlier, {same} equal, 0 later; strict: {}",
        notes.join(", ")
    ))
}

fn oracle_self_check() -> Check {
    let results: Vec<Result<usize, String>> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let engine = EngineKind::ALL[seed as usize % EngineKind::ALL.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lossy = engine != EngineKind::Cykas;
            let s = scenario::random(&RandomSpec {
                seed,
                n: rng.random_range(2..=6),
                messages: rng.random_range(20..=200),
                loss: if lossy { 0.1 } else { 0.0 },
                dup: if lossy { 0.05 } else { 0.0 },
                jitter: 300,
                multicast: engine == EngineKind::Multicast,
                ..RandomSpec::default()
            });
            let r = netsim::run(&s, engine).expect("valid scenario");
            let fast = oracle::stamp_trace(&r.trace)
                .map_err(|e| e.to_string())?
                .relation();
            let slow = oracle::brute_force_hb(&r.trace).map_err(|e| e.to_string())?;
            ensure(fast == slow, || {
                format!("seed {seed} ({engine}): relations differ")
            })?;
            Ok(fast.len())
        })
        .collect();
    let mut pairs = 0;
    for r in results {
        pairs += r?;
    }
    Ok(format!("100 traces agree ({pairs} ordered pairs)"))
}

fn sliding_array_matches_deque(ops: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut a = SlidingArray::new();
    let (mut q, mut first) = (VecDeque::new(), 0u64);
    for op in 0..ops {
        let next = first + q.len() as u64;
        match rng.random_range(0..10) {
            0..=3 => {
                let v: u32 = rng.random();
                ensure(a.add(v) == next, || format!("op {op}: add index"))?;
                q.push_back(v);
            }
            4..=6 => {
                let got = a.remove().ok();
                let want = q.pop_front();
                ensure(got == want, || {
                    format!("op {op}: remove {got:?} vs {want:?}")
                })?;
                if want.is_some() {
                    first += 1;
                }
                if want.is_none() {
                    ensure(a.remove() == Err(SlidingError::Empty), || {
                        format!("op {op}: empty error")
                    })?;
                }
            }
            _ => {
                let i = rng.random_range(first.saturating_sub(3)..next + 3);
                let want = i.checked_sub(first).and_then(|o| q.get(o as usize));
                ensure(a.get(i) == want, || format!("op {op}: get({i})"))?;
                if let Some(v) = a.get_mut(i) {
                    *v ^= 1;
                    q[(i - first) as usize] ^= 1;
                }
            }
        }
        ensure(
            a.first() == first && a.next() == first + q.len() as u64,
            || format!("op {op}: window"),
        )?;
        ensure(a.peek() == q.front(), || format!("op {op}: peek"))?;
        if op % 997 == 0 {
            let got: Vec<_> = a.iter().map(|(i, v)| (i, *v)).collect();
            let want: Vec<_> = q
                .iter()
                .enumerate()
                .map(|(k, v)| (first + k as u64, *v))
                .collect();
            ensure(got == want, || format!("op {op}: iter"))?;
        }
    }
    Ok(())
}

/// Reference model for both maps: index order in a `BTreeMap`.
#[derive(Default)]
struct MapModel {
    by_index: BTreeMap<u64, u64>,
    by_key: HashMap<u64, u64>,
    next: u64,
}

impl MapModel {
    fn add(&mut self, key: u64) -> Result<u64, SlidingError> {
        if let Some(&index) = self.by_key.get(&key) {
            return Err(SlidingError::DuplicateKey { index });
        }
        let i = self.next;
        self.next += 1;
        self.by_index.insert(i, key);
        self.by_key.insert(key, i);
        Ok(i)
    }

    fn remove(&mut self, key: u64) -> Option<u64> {
        let i = self.by_key.remove(&key)?;
        self.by_index.remove(&i);
        Some(i)
    }

    fn first(&self) -> u64 {
        self.by_index.keys().next().copied().unwrap_or(self.next)
    }

    /// Mostly the oldest live keys, sometimes a random or absent one.
    fn pick(&self, rng: &mut ChaCha8Rng) -> u64 {
        if self.by_index.is_empty() || rng.random_bool(0.05) {
            return rng.random_range(0..1 << 20);
        }
        let skip = rng.random_range(0..self.by_index.len().min(4));
        *self.by_index.values().nth(skip).unwrap()
    }
}

fn sliding_map_matches_btree(ops: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut m = SlidingMap::new();
    let mut model = MapModel::default();
    for op in 0..ops {
        if rng.random_bool(0.5) {
            let key = if rng.random_bool(0.05) {
                model.pick(&mut rng)
            } else {
                rng.random_range(0..1 << 20)
            };
            ensure(m.add(key) == model.add(key), || {
                format!("op {op}: add {key}")
            })?;
        } else {
            let key = model.pick(&mut rng);
            ensure(m.remove(&key) == model.remove(key), || {
                format!("op {op}: remove {key}")
            })?;
        }
        let probe = model.pick(&mut rng);
        ensure(m.index(&probe) == model.by_key.get(&probe).copied(), || {
            format!("op {op}: index")
        })?;
        ensure(
            m.contains(&probe) == model.by_key.contains_key(&probe),
            || format!("op {op}: contains"),
        )?;
        ensure(m.first() == model.first() && m.next() == model.next, || {
            format!(
                "op {op}: window [{}, {}) vs [{}, {})",
                m.first(),
                m.next(),
                model.first(),
                model.next
            )
        })?;
        ensure(m.len() == model.by_key.len(), || format!("op {op}: len"))?;
        if op % 997 == 0 {
            let want: Vec<_> = model.by_index.iter().map(|(&i, &k)| (i, k)).collect();
            ensure(m.iter_ordered() == want, || format!("op {op}: order"))?;
        }
    }
    Ok(())
}

fn idx_sliding_map_matches_btree(ops: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut m = IdxSlidingMap::new();
    let mut model = MapModel::default();
    for op in 0..ops {
        if rng.random_bool(0.5) {
            let key = if rng.random_bool(0.05) {
                model.pick(&mut rng)
            } else {
                rng.random_range(0..1 << 20)
            };
            ensure(m.add(key) == model.add(key), || {
                format!("op {op}: add {key}")
            })?;
        } else {
            let key = model.pick(&mut rng);
            ensure(m.remove(&key) == model.remove(key), || {
                format!("op {op}: remove {key}")
            })?;
        }
        let probe = model.pick(&mut rng);
        ensure(m.index(&probe) == model.by_key.get(&probe).copied(), || {
            format!("op {op}: index")
        })?;
        let i = rng.random_range(model.first().saturating_sub(2)..model.next + 2);
        ensure(m.get(i) == model.by_index.get(&i), || {
            format!("op {op}: get({i})")
        })?;
        ensure(m.peek() == model.by_index.values().next(), || {
            format!("op {op}: peek")
        })?;
        ensure(m.first() == model.first() && m.next() == model.next, || {
            format!("op {op}: window")
        })?;
        ensure(m.len() == model.by_key.len(), || format!("op {op}: len"))?;
        if op % 997 == 0 {
            let got: Vec<_> = m.iter().map(|(i, &k)| (i, k)).collect();
            let want: Vec<_> = model.by_index.iter().map(|(&i, &k)| (i, k)).collect();
            ensure(got == want, || format!("op {op}: iter"))?;
        }
    }
    Ok(())
}

fn structures_match_oracles() -> Check {
    const OPS: usize = 100_000;
    sliding_array_matches_deque(OPS).map_err(|e| format!("SlidingArray: {e}"))?;
    sliding_map_matches_btree(OPS).map_err(|e| format!("SlidingMap: {e}"))?;
    idx_sliding_map_matches_btree(OPS).map_err(|e| format!("IdxSlidingMap: {e}"))?;
    Ok(format!(
        "{OPS} operations on each structure match VecDeque/BTreeMap"
    ))
}

fn mf_characterization() -> Check {
    const LATENCY: u64 = 100;
    let s = scenario::pair_load(2000, 1, LATENCY);
    let rtt = s.max_rtt();
    assert_eq!(s.net.latency, Latency::fixed(LATENCY));
    let run = |e| {
        let r = netsim::run(&s, e).expect("valid scenario");
        assert_eq!(r.outcome, Outcome::Quiescent);
        metrics::analyze(e.name(), &r)
    };
    let (mf, basic) = (run(EngineKind::Mf), run(EngineKind::Basic));
    let in_transit = mf.overall_max_in_transit();
    ensure(in_transit == 1, || {
        format!("mf max in-transit {in_transit}")
    })?;
    let tm = mf.throughput().ok_or("mf delivered too little")?;
    let ideal = 1.0 / rtt as f64;
    ensure((tm - ideal).abs() <= 0.1 * ideal, || {
        format!("mf throughput {tm:.5} vs 1/rtt {ideal:.5}")
    })?;
    let tb = basic.throughput().ok_or("basic delivered too little")?;
    ensure(tb >= 5.0 * tm, || {
        format!("basic throughput {tb:.5} < 5 x {tm:.5}")
    })?;
    Ok(format!(
        "mf in-transit {in_transit}, throughput {tm:.5}/tick (1/rtt = {ideal:.5}); basic {tb:.5}/tick ({:.0}x)",
        tb / tm
    ))
}

#[test]
fn acceptance() {
    let started = Instant::now();
    let runs = fault_runs();
    let checks: Vec<Criterion> = vec![
        (
            "causal safety under faults",
            Box::new(|| causal_safety(&runs)),
        ),
        ("liveness and quiescence", Box::new(|| liveness(&runs))),
        ("constant message metadata", Box::new(metadata_constant)),
        ("amortized constant steps", Box::new(amortized_constant)),
        ("fig2 residency ordering", Box::new(fig2_reproduction)),
        ("cykas starvation", Box::new(cykas_starvation)),
        ("multicast necessity", Box::new(multicast_necessity)),
        ("sps_optimal dominance", Box::new(sps_dominance)),
        ("oracle self-check", Box::new(oracle_self_check)),
        (
            "sliding structures vs oracles",
            Box::new(structures_match_oracles),
        ),
        ("mf characterization", Box::new(mf_characterization)),
    ];
    let results: Vec<Check> = checks.par_iter().map(|(_, f)| f()).collect();
    // Written to the raw handle so the report shows even when output is captured.
    let mut report = String::from("\n");
    let mut failed = 0;
    for (n, ((name, _), r)) in checks.iter().zip(&results).enumerate() {
        let line = match r {
            Ok(detail) => format!("PASS criterion {}: {name}: {detail}\n", n + 1),
            Err(why) => {
                failed += 1;
                format!("FAIL criterion {}: {name}: {why}\n", n + 1)
            }
        };
        report.push_str(&line);
    }
    report.push_str(&format!(
        "acceptance finished in {:.1}s\n",
        started.elapsed().as_secs_f64()
    ));
    std::io::stdout()
        .lock()
        .write_all(report.as_bytes())
        .expect("stdout");
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
