use std::path::Path;
use std::process::{Command, Output};

fn ringmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringmix")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn sweep(store: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--seed", "9", "sweep-lengths", "--n", "24", "--store", store.to_str().unwrap()];
    args.extend_from_slice(extra);
    ringmix(&args)
}

fn jsonl(store: &Path, threads: &str) -> String {
    let o = ringmix(&[
        "--seed", "9", "--threads", threads, "--format", "jsonl", "sweep-lengths", "--n", "24", "--store",
        store.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    stdout(&o)
}

#[test]
fn build_reports_canonical_form() {
    let o = ringmix(&["build", "--instance", "n=30 edges=17-2,5-25"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["canonical"], "n=30 k=2 hubs=2,5,17,25 match=0:2,1:3");
    assert_eq!(v["lengths"], serde_json::json!([15, -10]));
}

#[test]
fn mix_reports_each_target() {
    let o = ringmix(&["mix", "--instance", "n=30 edges=2-17,5-25", "--eps", "0.5,0.25,0.1", "--starts", "all"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["t_mix"], serde_json::json!([[0.5, 17], [0.25, 34], [0.1, 52]]));
}

#[test]
fn profile_is_written_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("profile.csv");
    let o = ringmix(&[
        "--out", path.to_str().unwrap(), "mix", "--instance", "n=12 k=1 seed=3", "--tmax", "20",
        "--record-every", "5",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,d");
    assert!(lines[1].starts_with("0,"));
    // evolution stops at the eps target, which is always recorded
    let last = format!("{},", v["last_t"]);
    assert!(lines.last().unwrap().starts_with(&last));
    assert_eq!(v["t_mix"][0][1], v["last_t"]);
}

#[test]
fn bad_input_exits_with_2() {
    assert_eq!(ringmix(&["--p", "0.2", "--q", "0.5", "mix", "--instance", "n=30 k=1 seed=1"]).status.code(), Some(2));
    assert_eq!(ringmix(&["spread", "--n", "1000", "--k", "2", "--prime-only"]).status.code(), Some(2));
    assert_eq!(ringmix(&["build", "--instance", "n=10 edges=1-1"]).status.code(), Some(2));
}

#[test]
fn unmixed_campaign_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s.jsonl");
    let o = ringmix(&[
        "exponent", "--k", "1", "--ns", "40,80,160", "--instances", "5", "--t-max", "3", "--store",
        store.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn heatmap_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = sweep(&dir.path().join("s.jsonl"), &[]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y,tmix"));
    assert_eq!(lines.count(), 12 * 12);
}

#[test]
fn resumed_sweep_matches_uninterrupted() {
    let dir = tempfile::tempdir().unwrap();
    let full = jsonl(&dir.path().join("full.jsonl"), "1");

    let part = dir.path().join("part.jsonl");
    assert!(sweep(&part, &["--limit", "50"]).status.success());
    assert_eq!(std::fs::read_to_string(&part).unwrap().lines().count(), 50);
    assert_eq!(jsonl(&part, "1"), full);

    assert_eq!(jsonl(&dir.path().join("threads.jsonl"), "2"), full);
}

#[test]
fn torn_tail_is_dropped_and_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s.jsonl");
    let full = jsonl(&store, "1");
    let text = std::fs::read_to_string(&store).unwrap();
    let cut = text.len() - 40;
    std::fs::write(&store, &text[..cut]).unwrap();
    let o = sweep(&store, &["--format", "jsonl"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("dropped corrupted trailing line"));
    assert_eq!(stdout(&o), full);
}

#[test]
fn foreign_schema_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s.jsonl");
    jsonl(&store, "1");
    let text = std::fs::read_to_string(&store).unwrap().replacen("\"schema\":1", "\"schema\":99", 1);
    std::fs::write(&store, text).unwrap();
    assert_eq!(sweep(&store, &[]).status.code(), Some(2));
}
