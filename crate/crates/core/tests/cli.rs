use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tracefuzz::campaign::{read_summary, report, VerdictRecord, ORACLE_FUNCTIONAL};
use tracefuzz::oracle::VerdictKind;
use tracefuzz::reference::{BUNDLED_CORPUS, DEFECTS_ALL};

const EXE: &str = env!("CARGO_BIN_EXE_tracefuzz");

fn run(args: &[&str]) -> Output {
    Command::new(EXE).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn corpus_lines() -> usize {
    BUNDLED_CORPUS
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .count()
}

/// A campaign directory with an ingested store and a config file.
fn setup(extra: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("corpus.jsonl"), BUNDLED_CORPUS).unwrap();
    fs::write(d.join("defects.txt"), DEFECTS_ALL).unwrap();
    let store = d.join("store.tfs");
    let o = run(&["ingest", d.join("corpus.jsonl").to_str().unwrap(), "--store", store.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let mut conf = String::from("store_path = store.tfs\ntiming_reps = 3\n");
    for b in ["ref", "fast", "buggy"] {
        conf.push_str(&format!(
            "target.{b} = {{self}} serve-ref --backend {b} --defects-file defects.txt --latency-us 0\n"
        ));
    }
    conf.push_str(extra);
    let cfg = d.join("campaign.conf");
    fs::write(&cfg, conf).unwrap();
    (dir, cfg)
}

fn functional_verdicts(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join("verdicts.jsonl"))
        .unwrap()
        .lines()
        .filter(|l| serde_json::from_str::<VerdictRecord>(l).unwrap().oracle == ORACLE_FUNCTIONAL)
        .map(String::from)
        .collect()
}

#[test]
fn ingest_counts_and_dedups() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    fs::write(&trace, BUNDLED_CORPUS).unwrap();
    let store = dir.path().join("s.tfs");
    let args = ["ingest", trace.to_str().unwrap(), "--store", store.to_str().unwrap()];
    let n = corpus_lines();

    let first = run(&args);
    assert!(first.status.success());
    assert!(stdout(&first).contains(&format!("entries_added={n} duplicates_skipped=0")), "{}", stdout(&first));
    let second = run(&args);
    assert!(second.status.success());
    assert!(stdout(&second).contains(&format!("entries_added=0 duplicates_skipped={n}")));

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let o = run(&["ingest", empty.to_str().unwrap(), "--store", store.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{\"api\":\"f\"}\nnot json\n").unwrap();
    let o = run(&["ingest", bad.to_str().unwrap(), "--store", store.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.jsonl:2:"));
}

#[test]
fn filtered_fuzz_replay_and_report() {
    let (dir, cfg) = setup("per_api_mutants = 40\napi_filter = rt.pool1d\n");
    let out = dir.path().join("out");
    let o = run(&["fuzz", "--config", cfg.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0 | 1)), "{o:?}");
    let tcs = fs::read_to_string(out.join("testcases.jsonl")).unwrap();
    assert_eq!(tcs.lines().count(), 40);

    let summary = read_summary(&out).unwrap();
    assert_eq!(summary.campaign_seed, 42);
    assert_eq!(summary.testcases, 40);
    assert_eq!(summary.apis_covered, 1);
    let rep = report(&out).unwrap();
    assert_eq!(rep.counts, summary.counts);
    assert_eq!(rep.per_api, summary.per_api);
    assert_eq!(o.status.code() == Some(1), summary.has_bugs());

    let text = stdout(&run(&["report", out.to_str().unwrap()]));
    assert!(text.contains("rt.pool1d"));

    let wrong = rep
        .findings
        .iter()
        .find(|f| f.verdict == VerdictKind::WrongComputation)
        .expect("stride-2 seeds reach the +1.0 defect");
    let tc = out.join(&wrong.testcase_ref);
    let o = run(&["replay", tc.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("functional: WrongComputation"), "{}", stdout(&o));
}

#[test]
fn campaigns_are_deterministic_across_runs_and_jobs() {
    let (dir, cfg) = setup("per_api_mutants = 6\n");
    let cfg = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (out, jobs) in [(&a, "1"), (&b, "1"), (&c, "4")] {
        let o = run(&["fuzz", "--config", cfg, "--output-dir", out.to_str().unwrap(), "--jobs", jobs]);
        assert!(matches!(o.status.code(), Some(0 | 1)), "{o:?}");
    }
    let tcs = |d: &Path| fs::read(d.join("testcases.jsonl")).unwrap();
    assert_eq!(tcs(&a), tcs(&b));
    assert_eq!(tcs(&a), tcs(&c));
    assert_eq!(functional_verdicts(&a), functional_verdicts(&b));
    assert_eq!(functional_verdicts(&a), functional_verdicts(&c));
    assert_eq!(tcs(&a).iter().filter(|&&b| b == b'\n').count(), 6 * 7);

    let o = run(&["fuzz", "--config", cfg, "--output-dir", a.to_str().unwrap(), "--seed", "7"]);
    assert!(matches!(o.status.code(), Some(0 | 1)));
    assert_ne!(tcs(&a), tcs(&b));
}

#[test]
fn operational_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["report", dir.path().to_str().unwrap()]).status.code(), Some(2));

    let (dir, cfg) = setup("per_api_mutants = 1\n");
    fs::remove_file(dir.path().join("store.tfs")).unwrap();
    assert_eq!(run(&["fuzz", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    let o = run(&["fuzz", "--config", cfg.to_str().unwrap(), "--set", "nonsense=1"]);
    assert_eq!(o.status.code(), Some(2));
}
