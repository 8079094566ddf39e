use std::path::Path;
use std::process::{Command, Output};

fn pedwarn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pedwarn")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_then_run_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.json");
    std::fs::write(&params, r#"{"blocks_x": 2, "blocks_y": 2, "duration": 90}"#).unwrap();
    let city = dir.path().join("city");
    let out = pedwarn(&["gen", "--params", s(&params), "--seed", "4", "--out", s(&city)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(city.join("scenario.json").exists() && city.join("trace.csv").exists());

    // Paths inside the config are relative to the config file.
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"scenario": "city/scenario.json", "trace": "city/trace.csv", "algorithms": [0, 3], "th_ad": [40], "seeds": [1], "out": "results"}"#,
    )
    .unwrap();
    let out = pedwarn(&["run", "--config", s(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let results = dir.path().join("results");
    for f in ["report.json", "danger_s1.csv", "alerts_a0_th40_s1.csv", "alerts_a3_th40_s1.csv", "decel_a3_th40.csv"] {
        assert!(results.join(f).exists(), "missing {f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(results.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 2);
    assert!(report["cells"][0]["aggregate"]["alerts_per_vehicle"]["ci95_halfwidth"].is_null());
    assert_eq!(report["config"]["th_ps"], 10.0);

    // Command-line overrides replace config values.
    let over = dir.path().join("over");
    let out = pedwarn(&["run", "--config", s(&cfg), "--out", s(&over), "--algorithms", "1", "--th-ad", "70,40", "--seeds", "2,1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(over.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seeds"], serde_json::json!([1, 2]));
    assert_eq!(report["config"]["th_ad"], serde_json::json!([40.0, 70.0]));
    assert!(over.join("alerts_a1_th70_s2.csv").exists());
}

#[test]
fn errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"synthetic": {}, "seeds": []}"#).unwrap();
    let out = pedwarn(&["run", "--config", s(&cfg), "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seeds"));

    std::fs::write(&cfg, r#"{"scenario": "missing.json", "trace": "missing.csv"}"#).unwrap();
    let out = pedwarn(&["run", "--config", s(&cfg), "--out", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));

    let out = pedwarn(&["run", "--config", s(&dir.path().join("nope.json"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));

    let out = pedwarn(&["run", "--config", s(&cfg), "--algorithms", "7"]);
    assert!(!out.status.success());
}

#[test]
fn tracktests_and_calibrate_print_tables() {
    let out = pedwarn(&["replicate-tracktests"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.matches("PASS").count(), 4);

    let out = pedwarn(&["calibrate", "--reaction", "0", "--speed", "10", "--decel", "5", "--ped-speed", "1"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "th_ad_min_m = 10.000\nth_ps_min_m = 2.000\n");
    let out = pedwarn(&["calibrate", "--ped-speed", "0"]);
    assert!(!out.status.success());
}
