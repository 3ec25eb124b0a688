use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tsch-roam"))
}

#[test]
fn list_names_every_experiment() {
    let out = bin().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["handover-sync", "handover-nosync", "handover-300ms", "scale-100"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn run_writes_artifacts_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["run", "handover-sync", "--seed", "2", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let packets = std::fs::read_to_string(dir.path().join("packets.csv")).unwrap();
    assert!(packets.starts_with("seq,direction,sent_at_s,recv_at_s,rtt_s,lost,bbr_set,dup_count\n"));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let metrics: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(metrics, ["loss_rate", "mean_rtt_s", "p99_rtt_s", "max_outage_s", "dup_ratio"]);
    let echo = std::fs::read_to_string(dir.path().join("scenario.ini")).unwrap();
    assert!(echo.contains("seed = 2"));
}

#[test]
fn failed_assertion_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // Routers 80 m apart leave a coverage hole, so requests are lost.
    let out = bin()
        .args(["run", "handover-sync", "--override", "bbr.2.position_m=80", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL loss_rate"));
}

#[test]
fn config_errors_exit_two_and_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.ini");
    std::fs::write(&file, "[scenario]\nname = x\nhorizon_s = abc\n").unwrap();
    let out = bin().arg("run").arg(&file).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = bin().args(["run", "no-such-experiment"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["run", "scale-100", "--override", "traffic.period_s=0.5"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scenario_file_without_checks_passes() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("tiny.ini");
    std::fs::write(&file, "[scenario]\nname = tiny\nhorizon_s = 5\n\n[bbr.1]\nposition_m = 0\n").unwrap();
    let out = bin().arg("run").arg(&file).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let packets = std::fs::read_to_string(dir.path().join("o/packets.csv")).unwrap();
    assert_eq!(packets.lines().count(), 1);
    let summary = std::fs::read_to_string(dir.path().join("o/summary.csv")).unwrap();
    assert_eq!(summary, "metric,value\n");
}
