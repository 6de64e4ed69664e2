use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_macromine"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn calendar(dir: &TempDir) -> PathBuf {
    let fx = dir.path().join("fx");
    let o = run(&["fixtures", "--builtin", "calendar", "--out", s(&fx)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    fx
}

fn mine(fx: &Path, out: &Path, extra: &[&str]) -> Output {
    let traces = fx.join("traces");
    let script = fx.join("calendar_script.json");
    let mut args = vec!["mine", s(&traces), "--script", s(&script), "--out", s(out)];
    args.extend_from_slice(extra);
    run(&args)
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn mine_emits_the_reminder_macro() {
    let dir = TempDir::new().unwrap();
    let fx = calendar(&dir);
    let out = dir.path().join("out");
    assert!(mine(&fx, &out, &[]).status.success());
    let file = out.join("macros/com-example-calendar-0000-create-a-reminder.json");
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(file).unwrap()).unwrap();
    assert_eq!(m["description"], "create a reminder");
    assert_eq!(m["actions"].as_array().unwrap().len(), 5);
    assert_eq!(m["parameters"][0]["description"], "title");
    assert_eq!(m["parameters"][1]["element_id"], 5);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["macros"], 5);
}

#[test]
fn mining_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let fx = calendar(&dir);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(mine(&fx, &a, &["--seed", "7"]).status.success());
    assert!(mine(&fx, &b, &["--seed", "7"]).status.success());
    assert_eq!(dir_bytes(&a.join("macros")), dir_bytes(&b.join("macros")));
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
}

#[test]
fn mined_macros_replay() {
    let dir = TempDir::new().unwrap();
    let fx = calendar(&dir);
    let out = dir.path().join("out");
    assert!(mine(&fx, &out, &[]).status.success());
    let macros = out.join("macros");
    let report = json(&run(&["replay", s(&macros), "--app", s(&fx.join("calendar_app.json"))]));
    assert_eq!(report["success_rate"], 1.0);
    let report = json(&run(&["replay", s(&macros), "--app", s(&fx.join("calendar_app_no_onboarding.json"))]));
    assert_eq!(report["success_rate"], 1.0);
    let first = &report["reports"][0]["steps"];
    assert_eq!(first[0]["outcome"]["status"], "skipped");
    assert_eq!(first[1]["outcome"]["status"], "skipped");
    let with_params = json(&run(&[
        "replay",
        s(&macros.join("com-example-calendar-0000-create-a-reminder.json")),
        "--app",
        s(&fx.join("calendar_app.json")),
        "--param",
        "title=buy milk",
        "--param",
        "date=Monday",
    ]));
    assert_eq!(with_params["reports"][0]["parameters"][0]["entered"], true);
}

#[test]
fn fixtures_crawl_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let fx = calendar(&dir);
    let app = fx.join("calendar_app.json");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["fixtures", "--app", s(&app), "--n", "20", "--seed", "3", "--out", s(out)]);
        assert!(o.status.success());
    }
    let files = dir_bytes(&a);
    assert_eq!(files.len(), 20);
    assert_eq!(files, dir_bytes(&b));
    let stats = json(&run(&["stats", s(&a)]));
    assert_eq!(stats[0]["traces"], 20);
    let dot = run(&["export-graph", s(&a)]);
    assert!(String::from_utf8_lossy(&dot.stdout).starts_with("digraph"));
}

#[test]
fn eval_scores_and_baselines() {
    let dir = TempDir::new().unwrap();
    let fx = calendar(&dir);
    let input = dir.path().join("pairs.json");
    fs::write(
        &input,
        r#"[{"trace_id": "calendar-reminder", "ground_truth": "create a reminder", "extracted": ["create a reminder", "set the reminder time"]},
            {"trace_id": "other", "ground_truth": "add a reminder", "extracted": ["open settings"]}]"#,
    )
    .unwrap();
    let r = json(&run(&["eval", s(&input), "--repeats", "5"]));
    assert_eq!(r["pairs"][0]["rouge_l"], 1.0);
    assert_eq!(r["std_rouge_l"], 0.0);
    let rt = json(&run(&["eval", s(&input), "--baseline", "random-trace", "--seed", "1"]));
    // swapped sets: "open settings" vs "create a reminder" shares nothing
    assert_eq!(rt["pairs"][0]["rouge_l"], 0.0);

    let single = dir.path().join("single.json");
    fs::write(
        &single,
        r#"[{"trace_id": "calendar-reminder", "ground_truth": "create a reminder", "extracted": ["create a reminder"]}]"#,
    )
    .unwrap();
    let mined = json(&run(&["eval", s(&single)]));
    let et = json(&run(&["eval", s(&single), "--baseline", "element-text", "--traces", s(&fx.join("traces"))]));
    assert!(et["mean_rouge_l"].as_f64().unwrap() < mined["mean_rouge_l"].as_f64().unwrap());
    assert!(et["mean_meteor"].as_f64().unwrap() < mined["mean_meteor"].as_f64().unwrap());
}

#[test]
fn config_file_sets_seed_and_script() {
    let dir = TempDir::new().unwrap();
    let fx = calendar(&dir);
    let cfg = dir.path().join("config.toml");
    fs::write(
        &cfg,
        format!("seed = 11\ndedup_threshold = 0.8\nbackend = \"scripted\"\nscript = {:?}\n", s(&fx.join("calendar_script.json"))),
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["--config", s(&cfg), "mine", s(&fx.join("traces")), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 11);
    assert_eq!(report["config"]["dedup_threshold"], 0.8);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = TempDir::new().unwrap();
    let fx = calendar(&dir);
    let out = dir.path().join("out");
    // no traces
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = run(&["mine", s(&empty), "--script", s(&fx.join("calendar_script.json")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    // missing app definition
    let o = run(&["replay", s(&fx.join("traces")), "--app", s(&dir.path().join("nope.json"))]);
    assert_eq!(o.status.code(), Some(2));
    // zero crawl length
    let o = run(&["fixtures", "--app", s(&fx.join("calendar_app.json")), "--max-steps", "0", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    // bad threshold
    let o = mine(&fx, &out, &["--threshold", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
    // script without the needed prompts
    let script = dir.path().join("script.json");
    fs::write(&script, "{}").unwrap();
    let o = run(&["mine", s(&fx.join("traces")), "--script", s(&script), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    // unreachable live backend
    let cfg = dir.path().join("live.toml");
    fs::write(&cfg, "backend = \"live\"\n[live]\nbase_url = \"http://127.0.0.1:9\"\nmodel = \"m\"\ntimeout_secs = 2\n").unwrap();
    let o = run(&["--config", s(&cfg), "mine", s(&fx.join("traces")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
}
