use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causal-sim"))
        .env_remove("CAUSAL_SIM_OUT")
        .args(args)
        .output()
        .expect("spawn causal-sim")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn fig2_runs_clean_and_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sim(&[
        "run",
        "fig2",
        "--engine",
        "basic",
        "--out",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("metrics.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("residency"));
    assert_eq!(
        fs::read_to_string(tmp.path().join("verdict.txt")).unwrap(),
        "ok\n"
    );
    assert!(tmp.path().join("trace.tsv").exists());
}

#[test]
fn violation_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sim(&[
        "run",
        "multicast_counterexample",
        "--engine",
        "basic",
        "--out",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(code(&o), 1);
    let verdict = fs::read_to_string(tmp.path().join("verdict.txt")).unwrap();
    assert!(verdict.starts_with("causal\t"), "{verdict}");
}

#[test]
fn multicast_engine_passes_counterexample() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sim(&[
        "run",
        "multicast_counterexample",
        "--engine",
        "multicast",
        "--out",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(code(&o), 0);
}

#[test]
fn lossy_random_run_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sim(&[
        "run",
        "random:seed=7,n=5,messages=2000,loss=0.1",
        "--engine",
        "sps_optimal",
        "--out",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn config_errors_exit_64() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\nprocesses = [0, 1]\nbogus = 3\n").unwrap();
    let out = out_arg(&tmp.path().join("o"));
    assert_eq!(
        code(&sim(&["run", bad.to_str().unwrap(), "--out", &out])),
        64
    );
    assert_eq!(code(&sim(&["run", "no_such_file.toml", "--out", &out])), 64);
    assert_eq!(code(&sim(&["run", "random:n=zz", "--out", &out])), 64);
}

#[test]
fn tick_limit_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sim(&[
        "run",
        "cykas_starvation",
        "--engine",
        "cykas",
        "--tick-limit",
        "5000",
        "--out",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn compare_writes_side_by_side_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sim(&[
        "compare",
        "fig2",
        "--engines",
        "basic,cykas",
        "--out",
        &out_arg(tmp.path()),
    ]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(tmp.path().join("compare.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(
        header.contains("basic_s_tick") && header.contains("cykas_s_tick"),
        "{header}"
    );
    let svg = fs::read_to_string(tmp.path().join("plot.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(tmp.path().join("basic/metrics.csv").exists());
    assert!(tmp.path().join("cykas/trace.tsv").exists());
}

#[test]
fn list_scenarios_names_builtins() {
    let o = sim(&["list-scenarios"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for name in [
        "fig2",
        "cykas_starvation",
        "multicast_counterexample",
        "random:",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let scenario = "random:seed=3,n=4,messages=300,loss=0.1,dup=0.1,jitter=200";
    for dir in [&a, &b] {
        assert_eq!(
            code(&sim(&[
                "run",
                scenario,
                "--engine",
                "basic",
                "--out",
                &out_arg(dir.path())
            ])),
            0
        );
    }
    for f in ["trace.tsv", "metrics.csv", "verdict.txt"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_causal-sim"))
        .env("CAUSAL_SIM_OUT", tmp.path())
        .args(["run", "fig2"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("verdict.txt").exists());
}
