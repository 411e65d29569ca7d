//! `causal-sim`: runs scenarios through a causal delivery engine, checks the
//! trace with the happens-before oracle and writes trace, verdict and
//! metrics files.

mod plot;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use causal_hybrid::metrics::{self, RunMetrics};
use causal_hybrid::netsim::scenario::BUILTINS;
use causal_hybrid::netsim::{self, Outcome, RunResult, Scenario};
use causal_hybrid::oracle::{self, Verdict};
use causal_hybrid::EngineKind;
use clap::{Parser, Subcommand};
use rayon::prelude::*;

const EXIT_VIOLATION: u8 = 1;
const EXIT_LIVENESS: u8 = 2;
const EXIT_CONFIG: u8 = 64;

#[derive(Parser)]
#[command(
    name = "causal-sim",
    version,
    about = "Causal delivery protocol simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Built-in scenario name or path to a TOML scenario file.
    scenario: String,
    /// Output directory.
    #[arg(long, env = "CAUSAL_SIM_OUT", default_value = "causal-sim-out")]
    out: PathBuf,
    /// Override the network seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the tick limit.
    #[arg(long)]
    tick_limit: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario under one engine.
    Run {
        #[command(flatten)]
        common: Common,
        /// Engine; defaults to the scenario's, else basic.
        #[arg(long)]
        engine: Option<EngineKind>,
    },
    /// Run one scenario under several engines side by side.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated engines.
        #[arg(long, value_delimiter = ',', required = true)]
        engines: Vec<EngineKind>,
    },
    /// List built-in scenarios.
    ListScenarios,
}

/// Problems with the user's input, reported with exit code 64.
#[derive(Debug)]
struct ConfigFailure(anyhow::Error);

fn load(common: &Common) -> Result<Scenario, ConfigFailure> {
    let mut s = Scenario::load(&common.scenario)
        .with_context(|| format!("loading scenario {:?}", common.scenario))
        .map_err(ConfigFailure)?;
    if let Some(seed) = common.seed {
        s.net.seed = seed;
    }
    if let Some(t) = common.tick_limit {
        s.net.tick_limit = t;
    }
    s.validate()
        .context("invalid scenario")
        .map_err(ConfigFailure)?;
    Ok(s)
}

struct Report {
    engine: EngineKind,
    result: RunResult,
    verdict: Verdict,
    metrics: RunMetrics,
}

impl Report {
    fn exit_code(&self) -> u8 {
        if !self.verdict.violations.is_empty() {
            EXIT_VIOLATION
        } else if self.result.outcome == Outcome::TickLimit || !self.verdict.undelivered.is_empty()
        {
            EXIT_LIVENESS
        } else {
            0
        }
    }

    fn summary(&self) -> String {
        let m = &self.metrics;
        let mean = |f: fn(&metrics::MessageTiming) -> Option<u64>| {
            let v: Vec<u64> = m.messages.iter().filter_map(f).collect();
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<u64>() as f64 / v.len() as f64
            }
        };
        format!(
            "{}: {} at tick {}, {} violation(s), {} undelivered, {}/{} delivered, mean residency {:.1}, mean latency {:.1}",
            self.engine,
            match self.result.outcome {
                Outcome::Quiescent => "quiescent",
                Outcome::TickLimit => "tick limit reached",
            },
            self.result.end_tick,
            self.verdict.violations.len(),
            self.verdict.undelivered.len(),
            m.delivered(),
            m.messages.len(),
            mean(metrics::MessageTiming::residency),
            mean(metrics::MessageTiming::latency),
        )
    }
}

fn execute(s: &Scenario, engine: EngineKind) -> Result<Report> {
    if engine == EngineKind::Cykas && (s.net.loss_prob > 0.0 || s.net.dup_prob > 0.0) {
        eprintln!("warning: cykas assumes a reliable network; loss/duplication will break it");
    }
    let result = netsim::run(s, engine)?;
    let verdict = oracle::check(&result.trace)?;
    let metrics = metrics::analyze(&format!("{}-{}", s.name, engine), &result);
    Ok(Report {
        engine,
        result,
        verdict,
        metrics,
    })
}

fn write_outputs(dir: &Path, r: &Report) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("trace.tsv"), r.result.trace.to_text())?;
    fs::write(dir.join("verdict.txt"), r.verdict.to_text())?;
    let f = fs::File::create(dir.join("metrics.csv"))?;
    r.metrics.write_csv(f)?;
    Ok(())
}

fn cmd_run(common: &Common, engine: Option<EngineKind>) -> Result<u8> {
    let s = match load(common) {
        Ok(s) => s,
        Err(ConfigFailure(e)) => {
            eprintln!("error: {e:#}");
            return Ok(EXIT_CONFIG);
        }
    };
    let engine = engine.or(s.engine).unwrap_or(EngineKind::Basic);
    let r = execute(&s, engine)?;
    write_outputs(&common.out, &r)?;
    println!("{}", r.summary());
    for v in r.verdict.violations.iter().take(10) {
        println!("  {v}");
    }
    Ok(r.exit_code())
}

fn cmd_compare(common: &Common, engines: &[EngineKind]) -> Result<u8> {
    let s = match load(common) {
        Ok(s) => s,
        Err(ConfigFailure(e)) => {
            eprintln!("error: {e:#}");
            return Ok(EXIT_CONFIG);
        }
    };
    let mut engines = engines.to_vec();
    let mut seen = Vec::new();
    engines.retain(|e| {
        let fresh = !seen.contains(e);
        seen.push(*e);
        fresh
    });
    let reports: Vec<Report> = engines
        .par_iter()
        .map(|e| execute(&s, *e))
        .collect::<Result<_>>()?;
    for r in &reports {
        write_outputs(&common.out.join(r.engine.name()), r)?;
        println!("{}", r.summary());
    }
    write_compare_csv(&common.out.join("compare.csv"), &reports)?;
    let names: Vec<String> = reports.iter().map(|r| r.engine.to_string()).collect();
    let stat = |f: fn(&metrics::MessageTiming) -> Option<u64>, max: bool| {
        reports
            .iter()
            .map(|r| {
                let v: Vec<u64> = r.metrics.messages.iter().filter_map(f).collect();
                match (max, v.is_empty()) {
                    (_, true) => 0.0,
                    (true, false) => *v.iter().max().unwrap() as f64,
                    (false, false) => v.iter().sum::<u64>() as f64 / v.len() as f64,
                }
            })
            .collect()
    };
    let chart = plot::Chart {
        title: &format!(
            "{}: send-buffer residency and delivery latency (ticks)",
            s.name
        ),
        engines: &names,
        series: vec![
            (
                "mean residency",
                stat(metrics::MessageTiming::residency, false),
            ),
            (
                "max residency",
                stat(metrics::MessageTiming::residency, true),
            ),
            ("mean latency", stat(metrics::MessageTiming::latency, false)),
            ("max latency", stat(metrics::MessageTiming::latency, true)),
        ],
    };
    fs::write(common.out.join("plot.svg"), chart.to_svg())?;
    let codes: Vec<u8> = reports.iter().map(Report::exit_code).collect();
    Ok(if codes.contains(&EXIT_VIOLATION) {
        EXIT_VIOLATION
    } else {
        codes.into_iter().max().unwrap_or(0)
    })
}

/// One row per (sender, mid, destination) with per-engine columns.
fn write_compare_csv(path: &Path, reports: &[Report]) -> Result<()> {
    type Key = (u64, u64, u64);
    type Row = (u64, Vec<[Option<u64>; 4]>);
    let mut rows: BTreeMap<Key, Row> = BTreeMap::new();
    for (e, r) in reports.iter().enumerate() {
        for m in &r.metrics.messages {
            let entry = rows
                .entry((m.key.0 .0, m.key.1, m.dst.0))
                .or_insert_with(|| (m.c_tick, vec![[None; 4]; reports.len()]));
            entry.1[e] = [m.s_tick, m.d_tick, m.residency(), m.latency()];
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "src".to_string(),
        "mid".into(),
        "dst".into(),
        "c_tick".into(),
    ];
    for r in reports {
        for col in ["s_tick", "d_tick", "residency", "latency"] {
            header.push(format!("{}_{col}", r.engine));
        }
    }
    w.write_record(&header)?;
    let cell = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    for ((src, mid, dst), (c, per)) in rows {
        let mut rec = vec![
            src.to_string(),
            mid.to_string(),
            dst.to_string(),
            c.to_string(),
        ];
        for cols in per {
            rec.extend(cols.into_iter().map(cell));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run { common, engine } => cmd_run(common, *engine),
        Cmd::Compare { common, engines } => cmd_compare(common, engines),
        Cmd::ListScenarios => {
            for (name, about) in BUILTINS {
                println!("{name}\n    {about}");
            }
            Ok(0)
        }
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
