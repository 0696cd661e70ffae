use std::path::Path;
use std::process::{Command, Output};

fn bivtail(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bivtail")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn synth_file(dir: &Path, n: usize) -> String {
    let path = dir.join("traces.csv");
    let o = bivtail(&["synth", "--out", path.to_str().unwrap(), "--synth.n_total", &n.to_string()]);
    assert!(o.status.success(), "{}", stderr(&o));
    path.to_str().unwrap().to_string()
}

#[test]
fn synth_writes_the_trace_schema() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.json");
    let out = dir.path().join("t.csv");
    let o = bivtail(&[
        "synth",
        "--out",
        out.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--synth.n_total",
        "5000",
        "--seed",
        "4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,rx1_dbm,rx2_dbm"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "0");
    // 17 significant digits: one before the point, sixteen after.
    let mantissa = row[1].trim_start_matches('-').split('e').next().unwrap();
    assert_eq!(mantissa.len(), 18, "{}", row[1]);
    assert_eq!(text.lines().count(), 5001);
    let t: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(truth).unwrap()).unwrap();
    assert_eq!(t["seed"], 4);
}

#[test]
fn report_runs_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth_file(dir.path(), 1_000_000);
    let out = dir.path().join("out");
    let o = bivtail(&["report", "--input", &input, "--align.M", "100", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&out);
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["stages_completed"].as_array().unwrap().len(), 11);
    assert!(r["failure"].is_null());
    let alpha = r["logistic"]["mle"]["alpha"].as_f64().unwrap();
    assert!((alpha - 0.7).abs() < 0.05, "{alpha}");
    for name in ["mrl_rx1", "stability_rx1", "pp_rx2", "qq_rx1", "frechet_cdf_rx2", "r_omega", "uniformity", "cdf_surface"] {
        let p = out.join("plots").join(format!("{name}.csv"));
        assert!(p.exists(), "missing {name}");
    }
    let surface = std::fs::read_to_string(out.join("plots/cdf_surface.csv")).unwrap();
    assert!(surface.starts_with("x_dbm,y_dbm,empirical,logistic,poisson,gaussian\n"));
    assert_eq!(surface.lines().count(), 1 + 50 * 50);
}

#[test]
fn subcommands_run_only_what_they_need() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = bivtail(&[
        "fit-bgpd",
        "--method",
        "logistic",
        "--synth",
        "--synth.n_total",
        "300000",
        "--align.M",
        "100",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = report(&out);
    let stages: Vec<&str> = r["stages_completed"].as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect();
    assert_eq!(stages, ["decluster", "threshold", "fit-ugpd", "align", "frechet", "fit-bgpd-logistic"]);
    assert!(r["poisson"].is_null());

    let o = bivtail(&["baseline", "--synth", "--synth.n_total", "20000", "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(report(&out)["stages_completed"], serde_json::json!(["baseline"]));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 7\n[decluster]\nmg = 3\n").unwrap();
    let out = dir.path().join("out");
    let o = bivtail(&[
        "decluster",
        "--synth",
        "--config",
        cfg.to_str().unwrap(),
        "--synth.n_total",
        "20000",
        "--set",
        "thresholds.screen_quantile=0.2",
        "--decluster.mg_set",
        "2,4",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let c = &report(&out)["config"];
    assert_eq!(c["seed"], 7);
    assert_eq!(c["decluster"]["mg"], 3);
    assert_eq!(c["decluster"]["mg_set"], serde_json::json!([2, 4]));
    assert_eq!(c["thresholds"]["screen_quantile"], 0.2);
}

#[test]
fn failures_name_the_stage_and_keep_the_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = bivtail(&[
        "fit-ugpd",
        "--synth",
        "--synth.n_total",
        "100000",
        "--thresholds.u_x",
        "-1e6",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("stage `fit-ugpd` failed"), "{}", stderr(&o));
    let r = report(&out);
    assert_eq!(r["failure"]["stage"], "fit-ugpd");
    assert_eq!(r["stages_completed"], serde_json::json!(["decluster", "threshold"]));
}

#[test]
fn bad_configuration_fails_at_config() {
    let o = bivtail(&["report", "--synth", "--align.M", "0"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("stage `config` failed"), "{}", stderr(&o));
    let o = bivtail(&["report", "--synth", "--set", "align.window=3"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("stage `config` failed"), "{}", stderr(&o));
}

#[test]
fn malformed_input_fails_at_ingest_with_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "t,rx1_dbm,rx2_dbm\n0,-10,-20\n1,oops,-21\n").unwrap();
    let o = bivtail(&["threshold", "--input", input.to_str().unwrap(), "--out-dir", dir.path().join("o").to_str().unwrap()]);
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("stage `ingest` failed") && e.contains("line 3"), "{e}");
}

#[test]
fn input_or_synth_is_required() {
    let o = bivtail(&["validate"]);
    assert!(!o.status.success());
    let o = bivtail(&["validate", "--synth", "--input", "x.csv"]);
    assert!(!o.status.success());
}
