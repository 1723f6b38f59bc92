use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rda_core::adversary::Passive;
use rda_core::workload::ScriptedWorkload;
use rda_core::{run, Event, ExperimentConfig, Handle, InterfaceCall, Params, PartyId, PayloadKind, ScheduleBuilder};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rda-lab")).args(args).output().unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_CHURN: &str = r#"
[params]
k1 = [1, 2]
k2 = 5
lifetime = 150

[schedule]
generator = "churn"
initial = 5
warmup_target = 50
batch = 5
stay = 10
rounds = 150

[run]
seeds = 3
"#;

#[test]
fn missing_config_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.csv");
    let o = lab(&["simulate", s(&dir.path().join("nope.toml")), "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.toml"));
    assert!(!out.exists());
}

#[test]
fn bad_config_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SMALL_CHURN.replace("seeds = 3", "seeds = 3\nadversary = \"nobody\"")).unwrap();
    let out = dir.path().join("out.csv");
    let o = lab(&["simulate", s(&cfg), "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown adversary"));
    assert!(!out.exists());
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SMALL_CHURN).unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(lab(&["simulate", s(&cfg), "--out", s(&a), "--seed", "9"]).status.success());
    let threads = Command::new(env!("CARGO_BIN_EXE_rda-lab"))
        .args(["simulate", s(&cfg), "--out", s(&b), "--seed", "9"])
        .env("RDA_LAB_THREADS", "1")
        .output()
        .unwrap();
    assert!(threads.status.success());
    let (a, b) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "Time_Step,Corruption_Rows_1,Corruption_Rows_2,Connections_Rows_1,Connections_Rows_2"
    );
    assert_eq!(text.lines().count(), 152);
}

#[test]
fn benchmark_config_has_eight_series_columns() {
    let cfg = rda_lab::config::RunConfig::load(&configs().join("churn_benchmark.toml")).unwrap().0;
    assert_eq!(cfg.params.k1, vec![1, 5, 10, 25]);
    assert_eq!(2 * cfg.params.k1.len(), 8);
}

#[test]
fn strict_rejects_inadmissible_schedules() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let text = SMALL_CHURN.replace("rounds = 150\n", "rounds = 150\nadmissibility = { n = 1000, overlap = 16 }\n");
    std::fs::write(&cfg, text).unwrap();
    let warned = lab(&["simulate", s(&cfg)]);
    assert!(warned.status.success());
    assert!(String::from_utf8_lossy(&warned.stderr).contains("not admissible"));
    assert!(!lab(&["simulate", s(&cfg), "--strict"]).status.success());
}

#[test]
fn engine_run_logs_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, log) = (dir.path().join("m.csv"), dir.path().join("run.jsonl"));
    let o = lab(&["simulate", s(&configs().join("small_engine.toml")), "--out", s(&csv), "--log", s(&log)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(rda_lab::map_path(&csv).exists());
    let v = lab(&["verify", "--log", s(&log)]);
    let stdout = String::from_utf8_lossy(&v.stdout);
    assert!(v.status.success(), "{stdout}");
    assert!(stdout.contains("rda robustness: PASS") && stdout.contains("subnet robustness: PASS"));

    let again = dir.path().join("again.jsonl");
    let o = lab(&["simulate", s(&configs().join("small_engine.toml")), "--out", s(&csv), "--log", s(&again)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&log).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn empty_log_passes_vacuously() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.jsonl");
    std::fs::write(&log, "").unwrap();
    let v = lab(&["verify", "--log", s(&log), "--beta", "0.1"]);
    assert!(v.status.success());
    assert_eq!(String::from_utf8_lossy(&v.stdout).matches("PASS").count(), 2);
}

#[test]
fn corrupt_log_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("bad.jsonl");
    std::fs::write(&log, "{not json\n").unwrap();
    let v = lab(&["verify", "--log", s(&log)]);
    assert_eq!(v.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&v.stderr).contains("parsing log"));
}

#[test]
fn dropping_an_obligated_response_fails() {
    let params = Params::new(1, 1, 1, 7, 2, 12).unwrap();
    let mut b = ScheduleBuilder::new();
    for p in 1..=3 {
        b.initial(PartyId(p), true);
    }
    let cfg = ExperimentConfig::new(params, b.build().unwrap());
    let h = Handle(b"h".to_vec());
    let x = rda_core::types::make_test_predicate(cfg.predicate_seed).expected(&h, 1);
    let mut w = ScriptedWorkload::new()
        .at(1, PartyId(1), InterfaceCall::Store { h: h.clone(), i: 1, x })
        .at(3, PartyId(2), InterfaceCall::Get { h, i: 1 });
    let log = run(&cfg, &mut Passive, &mut w).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (good, bad) = (dir.path().join("good.jsonl"), dir.path().join("bad.jsonl"));
    std::fs::write(&good, log.to_jsonl()).unwrap();
    assert!(lab(&["verify", "--log", s(&good)]).status.success());

    let kept: Vec<String> = log
        .records()
        .iter()
        .filter(|r| !matches!(&r.event, Event::Send(e) if e.payload.kind() == PayloadKind::GetRsp))
        .map(|r| serde_json::to_string(r).unwrap())
        .collect();
    assert!(kept.len() < log.records().len());
    std::fs::write(&bad, kept.join("\n") + "\n").unwrap();
    let v = lab(&["verify", "--log", s(&bad)]);
    let stdout = String::from_utf8_lossy(&v.stdout);
    assert_eq!(v.status.code(), Some(1), "{stdout}");
    assert!(stdout.contains("rda robustness: FAIL") && stdout.contains("get by p2 at 3"), "{stdout}");
}

#[test]
fn estimate_writes_the_tradeoff_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("est.csv");
    let o = lab(&["estimate", "--N", "5000", "--beta", "0.1", "--k2-range", "90..=110", "--out", s(&out)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let row = text.lines().find(|l| l.starts_with("100,")).unwrap();
    assert!(row.starts_with("100,7,"));
    let k1s: Vec<u32> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(k1s.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn estimate_reports_caps_and_empty_ranges() {
    let capped = lab(&["estimate", "--N", "1e7", "--beta", "0.1", "--eps-target", "1", "--k2-range", "10", "--k1-max", "50"]);
    assert!(capped.status.success());
    assert!(String::from_utf8_lossy(&capped.stderr).contains("capped at 50"));
    assert!(String::from_utf8_lossy(&capped.stdout).contains("10,50,"));

    let empty = lab(&["estimate", "--N", "100", "--beta", "0.1", "--k2-range", "50..=60"]);
    assert!(empty.status.success());
    assert!(String::from_utf8_lossy(&empty.stderr).contains("no feasible"));
    assert_eq!(String::from_utf8_lossy(&empty.stdout).lines().count(), 1);
}
