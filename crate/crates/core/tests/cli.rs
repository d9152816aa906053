use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sspi-lab")).args(args).output().unwrap()
}

fn cli_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sspi-lab")).args(args).env(key, value).output().unwrap()
}

fn gen(dir: &Path, family: &str, seed: &str) {
    let out = cli(&["gen", "--family", family, "--values", "two-point", "--count", "2", "--seed", seed, "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    gen(a.path(), "random-graph(4,1.0)", "3");
    gen(b.path(), "random-graph(4,1.0)", "3");
    for k in 0..2 {
        let name = format!("instance-{k}.json");
        let x = std::fs::read(a.path().join(&name)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(&name)).unwrap());
    }
    let bad = cli(&["gen", "--family", "clique(4)", "--out", a.path().to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn run_writes_csv_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "bipartite(2,2,1.0)", "1");
    let inst = dir.path().join("instance-0.json");
    let csv = dir.path().join("r.csv");
    let trace = dir.path().join("t.json");
    let args = [
        "run", "--policy", "bipartite", "--instance", inst.to_str().unwrap(), "--trials", "5000", "--seed", "4",
        "--adversary", "exhaustive", "--out", csv.to_str().unwrap(), "--trace", trace.to_str().unwrap(),
    ];
    let out = cli(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("policy,instance,adversary,trials,e_alg,e_opt,ratio,ci,worst_order,seed\n"));
    assert!(text.lines().nth(1).unwrap().starts_with("bipartite,instance-0,exhaustive,5000,"));
    let events = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(events.lines().count(), 2);

    // same seed, same bytes
    let again = dir.path().join("r2.csv");
    let mut args2 = args;
    args2[12] = again.to_str().unwrap();
    assert!(cli(&args2).status.success());
    assert_eq!(text, std::fs::read_to_string(&again).unwrap());
}

#[test]
fn exact_and_worst_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "single-choice(3)", "2");
    let inst = dir.path().join("instance-0.json");
    let out = cli(&["exact", "--policy", "single-choice", "--instance", inst.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[pass]"));
    let random = cli(&["exact", "--policy", "single-choice", "--instance", inst.to_str().unwrap(), "--adversary", "random"]);
    assert_eq!(random.status.code(), Some(2));

    gen(dir.path(), "random-graph(3,1.0)", "2");
    let csv = dir.path().join("w.csv");
    let out = cli(&["worst", "--policy", "edge-matching", "--instance", inst.to_str().unwrap(), "--trials", "3000", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    // exhaustive plus six heuristics
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 8);
}

#[test]
fn uncleared_bound_exits_nonzero() {
    // ratio near the bound of 2: 2000 trials leave too wide an interval
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "single-choice(3)", "2");
    let inst = dir.path().join("instance-0.json");
    let args = ["run", "--policy", "single-choice", "--instance", inst.to_str().unwrap(), "--trials", "2000", "--adversary", "exhaustive"];
    let out = cli(&args);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("[FAIL]"));
    // a single trial never clears a bound
    let one = cli(&["run", "--policy", "single-choice", "--instance", inst.to_str().unwrap(), "--trials", "1"]);
    assert_eq!(one.status.code(), Some(1));
}

#[test]
fn verify_reports_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("v.csv");
    let out = cli(&["verify", "--suite", "greedy-quality", "--trials", "500", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("suite,check,samples,violations,statistic,threshold,passed\n"));
    assert_eq!(text.lines().count(), 3);
    assert_eq!(cli(&["verify", "--suite", "nope"]).status.code(), Some(2));
}

#[test]
fn thread_cap_is_validated_and_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "random-graph(4,0.75)", "9");
    let inst = dir.path().join("instance-0.json");
    let args = ["run", "--policy", "edge-matching", "--instance", inst.to_str().unwrap(), "--trials", "3000", "--seed", "2"];
    let one = cli_env(&args, "SSPI_LAB_THREADS", "1");
    let four = cli_env(&args, "SSPI_LAB_THREADS", "4");
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
    let bad = cli_env(&args, "SSPI_LAB_THREADS", "zero");
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("SSPI_LAB_THREADS"));
}

#[test]
fn unknown_adversary_is_rejected() {
    let out = cli(&["run", "--policy", "bipartite", "--instance", "missing.json", "--adversary", "greedy"]);
    assert_eq!(out.status.code(), Some(2));
}
