//! Scenario descriptions: process set, network configuration and a script of
//! timed causal-sends. Loaded from TOML files or generated by name.
//!
//! ```toml
//! name = "two"
//! engine = "basic"
//! processes = [0, 1]
//!
//! [net]
//! seed = 1
//! latency = { min = 100, mean = 100, max = 100 }
//!
//! [[send]]
//! tick = 0
//! src = 0
//! dst = [1]
//! tag = "hello"
//! ```

use std::collections::HashSet;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, Latency, LinkConfig, NetConfig};
use crate::engine::EngineKind;
use crate::wire::ProcessId;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing scenario: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("unknown built-in scenario {0:?}")]
    UnknownBuiltin(String),
    #[error("bad parameter {0:?}")]
    BadParam(String),
    #[error("scenario declares no processes")]
    NoProcesses,
    #[error("process {0} declared twice")]
    DuplicateProcess(ProcessId),
    #[error("send #{index} names undeclared process {process}")]
    UnknownProcess { index: usize, process: ProcessId },
    #[error("send #{index} has no destinations")]
    NoDestinations { index: usize },
    #[error("send #{index} sends to its own source")]
    SelfSend { index: usize },
    #[error("send #{index} names destination {process} twice")]
    RepeatedDestination { index: usize, process: ProcessId },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// One scripted causal-send.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppSend {
    pub tick: u64,
    pub src: ProcessId,
    #[serde(rename = "dst")]
    pub dsts: Vec<ProcessId>,
    /// Opaque payload tag.
    #[serde(default)]
    pub tag: String,
}

impl AppSend {
    pub fn new(tick: u64, src: u64, dsts: &[u64], tag: &str) -> Self {
        Self {
            tick,
            src: ProcessId(src),
            dsts: dsts.iter().map(|d| ProcessId(*d)).collect(),
            tag: tag.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Engine used when the caller does not pick one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<EngineKind>,
    pub processes: Vec<ProcessId>,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default, rename = "send")]
    pub sends: Vec<AppSend>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Resolves a built-in name (see [`BUILTINS`]) or else reads a file.
    pub fn load(name_or_path: &str) -> Result<Self, ScenarioError> {
        match builtin(name_or_path) {
            Err(ScenarioError::UnknownBuiltin(_)) => Self::from_file(Path::new(name_or_path)),
            r => r,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.processes.is_empty() {
            return Err(ScenarioError::NoProcesses);
        }
        let mut declared = HashSet::new();
        for p in &self.processes {
            if !declared.insert(*p) {
                return Err(ScenarioError::DuplicateProcess(*p));
            }
        }
        self.net.validate(&self.processes)?;
        for (index, a) in self.sends.iter().enumerate() {
            for p in std::iter::once(&a.src).chain(&a.dsts) {
                if !declared.contains(p) {
                    return Err(ScenarioError::UnknownProcess { index, process: *p });
                }
            }
            if a.dsts.is_empty() {
                return Err(ScenarioError::NoDestinations { index });
            }
            if a.dsts.contains(&a.src) {
                return Err(ScenarioError::SelfSend { index });
            }
            let mut seen = HashSet::new();
            for d in &a.dsts {
                if !seen.insert(d) {
                    return Err(ScenarioError::RepeatedDestination { index, process: *d });
                }
            }
        }
        Ok(())
    }

    /// Largest mean round-trip time between any two processes.
    pub fn max_rtt(&self) -> u64 {
        self.net.max_rtt(&self.processes)
    }
}

/// Built-in scenario names with a one-line description.
pub const BUILTINS: &[(&str, &str)] = &[
    ("fig2", "three senders into i; a concurrent eager send delays m under cykas"),
    ("cykas_starvation", "two processes keep eager-sending to i while i has m queued"),
    ("multicast_counterexample", "i multicasts to j and k; j forwards to k over a fast path"),
    (
        "random:seed=S,n=N,messages=M[,loss=P,dup=P,jitter=T,spacing=T,multicast=0|1,fixed_links=0|1]",
        "random traffic under the fault model",
    ),
    ("pair_load:messages=M,interval=T,latency=T", "one sender streaming to one receiver"),
    ("pipeline:n=N,messages=M,interval=T,latency=T", "chain where each process streams to the next"),
];

fn ids(n: u64) -> Vec<ProcessId> {
    (0..n).map(ProcessId).collect()
}

fn link(a: u64, b: u64, t: u64) -> LinkConfig {
    LinkConfig {
        from: ProcessId(a),
        to: ProcessId(b),
        latency: Latency::fixed(t),
        symmetric: true,
    }
}

/// Process ids used by [`fig2`].
pub mod fig2_ids {
    pub const I: u64 = 0;
    pub const J: u64 = 1;
    pub const K: u64 = 2;
    pub const X: u64 = 3;
    pub const Y: u64 = 4;
    pub const W: u64 = 5;
}

/// `j` and `k` each eager-send to `i` (`a` and `b`) while an earlier send to
/// a slow peer is unacked; `i` causal-sends `m` to `x` after delivering both.
/// `k` later eager-sends `c` to `i`, arriving before the YCT for `a`.
pub fn fig2() -> Scenario {
    use fig2_ids::*;
    Scenario {
        name: "fig2".into(),
        engine: None,
        processes: ids(6),
        net: NetConfig {
            latency: Latency::fixed(100),
            links: vec![
                link(J, X, 300),
                link(K, Y, 200),
                link(J, I, 100),
                link(K, I, 50),
                link(K, W, 400),
                link(I, X, 100),
            ],
            timer_period: 10_000,
            ..NetConfig::default()
        },
        sends: vec![
            AppSend::new(0, J, &[X], "a0"),
            AppSend::new(0, K, &[Y], "b0"),
            AppSend::new(10, J, &[I], "a"),
            AppSend::new(10, K, &[I], "b"),
            AppSend::new(120, I, &[X], "m"),
            AppSend::new(450, K, &[W], "b1"),
            AppSend::new(500, K, &[I], "c"),
        ],
    }
}

/// Process ids used by [`cykas_starvation`]; slow peers are `SLOW..SLOW + 4`.
pub mod starvation_ids {
    pub const I: u64 = 0;
    pub const J: u64 = 1;
    pub const K: u64 = 2;
    pub const Z: u64 = 3;
    pub const SLOW: u64 = 4;
    /// Tick at which `i` causal-sends `m`.
    pub const M_TICK: u64 = 1050;
}

/// `j` and `k` alternately send to a rotating slow peer and then to `i`, so
/// every message to `i` is an eager send. `i` causal-sends `m` to `z` after
/// delivering some of them.
pub fn cykas_starvation() -> Scenario {
    use starvation_ids::*;
    let mut links = Vec::new();
    for s in SLOW..SLOW + 4 {
        links.push(link(J, s, 1000));
        links.push(link(K, s, 1000));
    }
    links.push(link(J, I, 50));
    links.push(link(K, I, 50));
    let mut sends = Vec::new();
    for r in 0..100u64 {
        let t = 600 * r;
        let slow = SLOW + r % 4;
        sends.push(AppSend::new(t, J, &[slow], "slow"));
        sends.push(AppSend::new(t + 1, J, &[I], "eager"));
        sends.push(AppSend::new(t + 300, K, &[slow], "slow"));
        sends.push(AppSend::new(t + 301, K, &[I], "eager"));
    }
    sends.push(AppSend::new(M_TICK, I, &[Z], "m"));
    sends.sort_by_key(|a| a.tick);
    Scenario {
        name: "cykas_starvation".into(),
        engine: None,
        processes: ids(SLOW + 4),
        net: NetConfig {
            latency: Latency::fixed(100),
            links,
            ..NetConfig::default()
        },
        sends,
    }
}

/// `i` (0) sends `m` to `{j, k}`; `j` (1) delivers it quickly and sends `m3`
/// to `k` (2) over a fast link, while `m`'s copy to `k` is slow.
pub fn multicast_counterexample() -> Scenario {
    Scenario {
        name: "multicast_counterexample".into(),
        engine: None,
        processes: ids(3),
        net: NetConfig {
            latency: Latency::fixed(10),
            links: vec![link(0, 2, 1000)],
            ..NetConfig::default()
        },
        sends: vec![
            AppSend::new(0, 0, &[1, 2], "m"),
            AppSend::new(50, 1, &[2], "m3"),
        ],
    }
}

/// Parameters of a random scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSpec {
    pub seed: u64,
    pub n: u64,
    pub messages: usize,
    pub loss: f64,
    pub dup: f64,
    pub jitter: u64,
    /// Mean gap between consecutive sends.
    pub spacing: u64,
    /// Draw destination sets of up to three processes.
    pub multicast: bool,
    pub latency: Latency,
    /// Give every directed link its own constant latency drawn from
    /// `[latency.min, latency.max]` instead of per-copy draws.
    pub fixed_links: bool,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n: 4,
            messages: 1000,
            loss: 0.0,
            dup: 0.0,
            jitter: 0,
            spacing: 20,
            multicast: false,
            latency: Latency {
                min: 20,
                mean: 100,
                max: 200,
            },
            fixed_links: false,
        }
    }
}

pub fn random(spec: &RandomSpec) -> Scenario {
    assert!(spec.n >= 2, "random scenarios need two processes");
    // separate stream from the network's link generators
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_5c1e_0000_0000);
    let mut t = 0;
    let mut sends = Vec::with_capacity(spec.messages);
    for _ in 0..spec.messages {
        t += rng.random_range(0..=2 * spec.spacing);
        let src = rng.random_range(0..spec.n);
        let k = if spec.multicast {
            rng.random_range(1..=3.min(spec.n as usize - 1))
        } else {
            1
        };
        let dsts = index::sample(&mut rng, spec.n as usize - 1, k)
            .into_iter()
            .map(|d| {
                let d = d as u64;
                ProcessId(if d >= src { d + 1 } else { d })
            })
            .collect();
        sends.push(AppSend {
            tick: t,
            src: ProcessId(src),
            dsts,
            tag: String::new(),
        });
    }
    let mut links = Vec::new();
    if spec.fixed_links {
        for a in 0..spec.n {
            for b in 0..spec.n {
                if a != b {
                    let t = rng.random_range(spec.latency.min..=spec.latency.max);
                    links.push(LinkConfig {
                        from: ProcessId(a),
                        to: ProcessId(b),
                        latency: Latency::fixed(t),
                        symmetric: false,
                    });
                }
            }
        }
    }
    Scenario {
        name: format!("random-{}", spec.seed),
        engine: None,
        processes: ids(spec.n),
        net: NetConfig {
            seed: spec.seed,
            latency: spec.latency,
            links,
            loss_prob: spec.loss,
            dup_prob: spec.dup,
            reorder_jitter: spec.jitter,
            ..NetConfig::default()
        },
        sends,
    }
}

/// Process 0 sends `messages` messages to process 1, one every `interval`.
pub fn pair_load(messages: u64, interval: u64, latency: u64) -> Scenario {
    Scenario {
        name: "pair_load".into(),
        engine: None,
        processes: ids(2),
        net: NetConfig {
            latency: Latency::fixed(latency),
            timer_period: 100 * latency,
            ..NetConfig::default()
        },
        sends: (0..messages)
            .map(|k| AppSend::new(k * interval, 0, &[1], ""))
            .collect(),
    }
}

/// Each process `p < n - 1` sends `messages` messages to `p + 1`.
pub fn pipeline(n: u64, messages: u64, interval: u64, latency: u64) -> Scenario {
    let mut sends = Vec::new();
    for k in 0..messages {
        for p in 0..n - 1 {
            sends.push(AppSend::new(k * interval + p, p, &[p + 1], ""));
        }
    }
    Scenario {
        name: "pipeline".into(),
        engine: None,
        processes: ids(n),
        net: NetConfig {
            latency: Latency::fixed(latency),
            timer_period: 100 * latency,
            ..NetConfig::default()
        },
        sends,
    }
}

fn params(name: &str, text: &str) -> Result<Vec<(String, String)>, ScenarioError> {
    text.split(',')
        .filter(|kv| !kv.is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| ScenarioError::BadParam(format!("{name}: {kv}")))
        })
        .collect()
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ScenarioError> {
    v.parse()
        .map_err(|_| ScenarioError::BadParam(format!("{key}={v}")))
}

/// Resolves a built-in scenario by name, with `name:key=value,...` parameters
/// where applicable.
pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    let (base, rest) = name.split_once(':').unwrap_or((name, ""));
    let kv = params(base, rest)?;
    let s = match base {
        "fig2" | "cykas_starvation" | "multicast_counterexample" if !kv.is_empty() => {
            return Err(ScenarioError::BadParam(name.to_string()))
        }
        "fig2" => fig2(),
        "cykas_starvation" => cykas_starvation(),
        "multicast_counterexample" => multicast_counterexample(),
        "random" => {
            let mut spec = RandomSpec::default();
            for (k, v) in &kv {
                match k.as_str() {
                    "seed" => spec.seed = num(k, v)?,
                    "n" => spec.n = num(k, v)?,
                    "messages" => spec.messages = num(k, v)?,
                    "loss" => spec.loss = num(k, v)?,
                    "dup" => spec.dup = num(k, v)?,
                    "jitter" => spec.jitter = num(k, v)?,
                    "spacing" => spec.spacing = num(k, v)?,
                    "multicast" => spec.multicast = num::<u8>(k, v)? != 0,
                    "fixed_links" => spec.fixed_links = num::<u8>(k, v)? != 0,
                    _ => return Err(ScenarioError::BadParam(k.clone())),
                }
            }
            if spec.n < 2 {
                return Err(ScenarioError::BadParam(format!("n={}", spec.n)));
            }
            random(&spec)
        }
        "pair_load" | "pipeline" => {
            let (mut n, mut messages, mut interval, mut latency) = (4u64, 500u64, 10u64, 100u64);
            for (k, v) in &kv {
                match k.as_str() {
                    "n" if base == "pipeline" => n = num(k, v)?,
                    "messages" => messages = num(k, v)?,
                    "interval" => interval = num(k, v)?,
                    "latency" => latency = num(k, v)?,
                    _ => return Err(ScenarioError::BadParam(k.clone())),
                }
            }
            if base == "pipeline" {
                if n < 2 {
                    return Err(ScenarioError::BadParam(format!("n={n}")));
                }
                pipeline(n, messages, interval, latency)
            } else {
                pair_load(messages, interval, latency)
            }
        }
        _ => return Err(ScenarioError::UnknownBuiltin(name.to_string())),
    };
    s.validate()?;
    Ok(s)
}
