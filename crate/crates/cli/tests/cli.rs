use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn mlo_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlo-sim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    assert!(
        o.status.success(),
        "exit {:?}: {}",
        o.status,
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn preset_sweep_prints_csv() {
    let out = stdout(&mlo_sim(&[
        "preset",
        "fig2",
        "--load-grid",
        "0.1,0.5",
        "--seeds",
        "1",
        "--duration",
        "0.05",
    ]));
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("scheme,bss,load_bps,seed,delay_p50_us"));
    assert!(lines[0].ends_with("occ_4,starvation_frac,drops,saturated"));
    assert_eq!(lines.len(), 1 + 3 * 2);
    assert!(lines[1].starts_with("SL,A,100000000,1,"));
}

#[test]
fn sequential_and_parallel_output_match() {
    let args = [
        "preset",
        "fig4",
        "--load-grid",
        "1.0",
        "--seeds",
        "1,2",
        "--duration",
        "0.05",
    ];
    let par = stdout(&mlo_sim(&args));
    let mut seq_args = args.to_vec();
    seq_args.push("--sequential");
    assert_eq!(par, stdout(&mlo_sim(&seq_args)));
}

#[test]
fn run_writes_results_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let o = mlo_sim(&[
        "run",
        &scenario("fig2-str-emlmr_2.toml"),
        "--seed",
        "4",
        "--seed",
        "5",
        "--duration",
        "0.1",
        "--format",
        "json",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    stdout(&o);
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("results.json")).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["scheme"], "STR-EMLMR:2");
    assert_eq!(rows[1]["seed"], 5);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report-seed4.json")).unwrap())
            .unwrap();
    assert_eq!(report["seed"], 4);
    assert_eq!(report["scenario"]["duration_s"], 0.1);
    assert_eq!(report["scenario"]["bss"][0]["mode"], "STR-EMLMR:2");
}

#[test]
fn sweep_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(
        &spec,
        "preset = \"fig5\"\nloads_bps = [2.5e9]\nseeds = [7]\nduration_s = 0.05\n",
    )
    .unwrap();
    let out = stdout(&mlo_sim(&["sweep", spec.to_str().unwrap()]));
    // Five schemes of four BSSs each.
    assert_eq!(out.lines().count(), 1 + 5 * 4);
    assert!(out
        .lines()
        .any(|l| l.starts_with("STR-EMLMR:1+1,D,2500000000,7,")));
}

#[test]
fn validation_failure_exits_nonzero_with_paths() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let mut text = fs::read_to_string(scenario("fig4-str-emlmr_2.toml")).unwrap();
    text = text.replacen("channels = [3, 4]", "channels = [3, 8]", 1);
    fs::write(&bad, text).unwrap();
    let o = mlo_sim(&["run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bss[2] (C).channels[1]"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn malformed_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\nchannels = \"one\"\n").unwrap();
    let o = mlo_sim(&["run", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let o = mlo_sim(&["preset", "fig3"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("fig3"));
}

#[test]
fn emit_writes_loadable_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&mlo_sim(&[
        "preset",
        "fig5",
        "--emit",
        dir.path().to_str().unwrap(),
    ]));
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        vec![
            "fig5-emlsr_2.toml",
            "fig5-sl.toml",
            "fig5-str-emlmr_1_1.toml",
            "fig5-str-emlmr_2.toml",
            "fig5-str-emlmr_5.toml",
            "fig5-sweep.toml",
        ]
    );
    for n in &names {
        assert_eq!(
            fs::read_to_string(dir.path().join(n)).unwrap(),
            fs::read_to_string(scenario(n)).unwrap(),
            "{n} differs from the checked-in copy"
        );
    }
}
