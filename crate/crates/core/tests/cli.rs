//! End-to-end tests of the `pels` and `pelsc` command lines.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pels::report::SimReport;
use pels::trace::{parse_trace, TraceRecord};

fn pels() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pels"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A `pelsc` symlink to the built binary inside `dir`.
#[cfg(unix)]
fn pelsc(dir: &Path) -> Command {
    let link = dir.join("pelsc");
    std::os::unix::fs::symlink(env!("CARGO_BIN_EXE_pels"), &link).unwrap();
    Command::new(link)
}

#[test]
fn run_writes_trace_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, report) = (dir.path().join("t.jsonl"), dir.path().join("r.json"));
    let out = pels()
        .arg("run")
        .arg(scenario("sequenced_action.json"))
        .arg("--trace")
        .arg(&trace)
        .arg("--report")
        .arg(&report)
        .arg("--check")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let records = parse_trace(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert!(matches!(records.first(), Some(TraceRecord::Header { .. })));
    assert!(matches!(records.last(), Some(TraceRecord::End { .. })));
    assert!(records
        .iter()
        .any(|r| matches!(r, TraceRecord::Complete { latency: 7, .. })));

    let report = SimReport::from_json(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report.links[0].latencies, [7]);
    assert_eq!(report.trace_digest, pels::trace::digest(&records));
}

#[test]
fn trace_level_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let count = |level: &str| {
        let trace = dir.path().join(format!("{level}.jsonl"));
        let out = pels()
            .env("PELS_TRACE_LEVEL", level)
            .arg("run")
            .arg(scenario("sequenced_action.json"))
            .arg("--trace")
            .arg(&trace)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        std::fs::read_to_string(&trace).unwrap().lines().count()
    };
    let (off, grants, full) = (count("off"), count("grants"), count("full"));
    assert_eq!(off, 2);
    assert!(off < grants && grants < full, "{off} {grants} {full}");

    let out = pels()
        .env("PELS_TRACE_LEVEL", "verbose")
        .arg("run")
        .arg(scenario("sequenced_action.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compare_reports_ratios() {
    let out = pels()
        .arg("compare")
        .arg(scenario("threshold_pels.json"))
        .arg(scenario("threshold_baseline.json"))
        .args(["--freq-a", "55", "--freq-b", "55", "--json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["memory_activity_ratio"].as_f64().unwrap() >= 3.7);
    assert_eq!(v["pels"]["shared_fetches"], 0);
    assert!(v["power"].as_str().unwrap().contains("not simulated"));
}

#[test]
fn compare_refuses_different_stimuli() {
    let out = pels()
        .arg("compare")
        .arg(scenario("threshold_pels.json"))
        .arg(scenario("baseline_sequenced.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("stimul"), "{}", stderr(&out));
}

#[test]
fn failed_check_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("instant_action.json")).unwrap();
    let path = dir.path().join("wrong.json");
    std::fs::write(&path, text.replace("\"latency\": 2", "\"latency\": 3")).unwrap();
    let out = pels().arg("run").arg(&path).arg("--check").output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}{}", stdout(&out), stderr(&out));
}

#[test]
fn bad_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{ "name": "bad", "links": [{ "mask": [0], "base": "0x1001", "program": "wait 1" }] }"#,
    )
    .unwrap();
    let out = pels().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!stderr(&out).is_empty());

    let out = pels().arg("run").arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bus_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("unmapped.json");
    std::fs::write(
        &path,
        r#"{ "name": "unmapped",
             "links": [{ "mask": [0], "base": "0x2000", "program": "set 0, 1" }],
             "stimuli": [{ "cycle": 0, "line": 0, "level": true }] }"#,
    )
    .unwrap();
    let out = pels().arg("run").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}{}", stdout(&out), stderr(&out));
}

#[test]
fn sweep_prints_a_table() {
    let out = pels()
        .args(["sweep", "--links", "1..2", "--scm-lines", "4"])
        .arg(scenario("sweep.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().filter(|l| l.contains(" pass ")).count(), 2);
}

#[cfg(unix)]
#[test]
fn pelsc_builds_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("p.pels");
    let bin = dir.path().join("p.bin");
    std::fs::write(&src, "top: toggle 0x4, 0x1\nwait 3\nloop 9, top\n").unwrap();

    let out = pelsc(dir.path())
        .arg("build")
        .arg(&src)
        .arg("-o")
        .arg(&bin)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(std::fs::read(&bin).unwrap().len(), 18);

    let out = Command::new(dir.path().join("pelsc"))
        .arg("dump")
        .arg(&bin)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(
        text.contains("toggle 0x4, 0x1") && text.contains("loop 9, L0"),
        "{text}"
    );

    // the simulator subcommands are not part of the assembler front end
    let out = Command::new(dir.path().join("pelsc"))
        .arg("run")
        .arg(scenario("empty.json"))
        .output()
        .unwrap();
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn build_rejects_oversized_programs() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("long.pels");
    std::fs::write(&src, "wait 1\n".repeat(5)).unwrap();
    let out = pels()
        .arg("build")
        .arg(&src)
        .arg("-o")
        .arg(dir.path().join("x.bin"))
        .args(["--scm-lines", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("E301"));
}

#[test]
fn build_points_at_the_offending_line() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("bad.pels");
    std::fs::write(&src, "wait 1\njif eq, 0, nowhere\n").unwrap();
    let out = pels()
        .arg("build")
        .arg(&src)
        .arg("-o")
        .arg(dir.path().join("x.bin"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("E201") && err.contains("2:"), "{err}");
}
