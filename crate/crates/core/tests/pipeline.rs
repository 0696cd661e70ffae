use bivtail::config::Config;
use bivtail::io::{read_traces, write_traces};
use bivtail::pipeline::{run_pipeline, synth_from_config, PipelineRun, Stage};

fn synthetic_config() -> Config {
    let mut cfg = Config::default();
    cfg.align.m = cfg.synth.window;
    cfg
}

fn run_all(cfg: &Config) -> PipelineRun {
    let s = synth_from_config(cfg).unwrap();
    run_pipeline(cfg, &s.x, &s.y, &Stage::ALL, "synth", Some(s.truth)).unwrap()
}

#[test]
fn recovers_the_generating_model() {
    let cfg = synthetic_config();
    let run = run_all(&cfg);
    let r = &run.report;
    assert_eq!(r.stages_completed.len(), Stage::ALL.len());
    assert!(r.failure.is_none());

    let th = r.threshold.as_ref().unwrap();
    assert!((th.rx1.u.unwrap() - cfg.synth.u_x).abs() < 0.5, "{:?}", th.rx1.u);
    assert!((th.rx2.u.unwrap() - cfg.synth.u_y).abs() < 0.5, "{:?}", th.rx2.u);
    let ugpd = r.ugpd.as_ref().unwrap();
    assert!((ugpd.rx1.params.xi - cfg.synth.xi_x).abs() < 0.05, "{}", ugpd.rx1.params.xi);
    assert!((ugpd.rx2.params.xi - cfg.synth.xi_y).abs() < 0.05, "{}", ugpd.rx2.params.xi);

    let lg = r.logistic.as_ref().unwrap();
    assert!((lg.mle.alpha - cfg.synth.alpha).abs() < 0.05, "{}", lg.mle.alpha);
    assert!((lg.from_rho.as_ref().unwrap().alpha - cfg.synth.alpha).abs() < 0.05);

    let v = r.validation.as_ref().unwrap();
    assert!(v.uniformity.pass);
    assert!(v.h_l_mean_check.pass && v.h_pp_raw_mean_check.pass);
    assert_eq!(v.h_pp_symmetrized_mean, 0.5);

    let c = r.comparison.as_ref().unwrap();
    assert!(c.rmse_logistic * 10.0 <= c.rmse_gaussian, "{c:?}");
    assert!(c.rmse_poisson * 10.0 <= c.rmse_gaussian, "{c:?}");

    let names: Vec<&str> = run.plots.iter().map(|p| p.name.as_str()).collect();
    for want in ["mrl_rx1", "stability_rx2", "pp_rx1", "qq_rx2", "r_omega", "r0_profile", "uniformity", "angular_density", "cdf_surface"] {
        assert!(names.contains(&want), "missing {want}: {names:?}");
    }
}

#[test]
fn same_seed_gives_identical_report() {
    let mut cfg = synthetic_config();
    cfg.synth.n_total = 200_000;
    let a = run_all(&cfg).report.to_json();
    let b = run_all(&cfg).report.to_json();
    assert_eq!(a, b);
    cfg.seed += 1;
    assert_ne!(a, run_all(&cfg).report.to_json());
}

#[test]
fn synthetic_traces_round_trip_through_csv() {
    let mut cfg = synthetic_config();
    cfg.synth.n_total = 50_000;
    let s = synth_from_config(&cfg).unwrap();
    let mut buf = Vec::new();
    write_traces(&mut buf, &s.x, &s.y).unwrap();
    let (x, y) = read_traces(buf.as_slice(), cfg.resolution).unwrap();
    assert_eq!(x, s.x);
    assert_eq!(y, s.y);
}

#[test]
fn no_joint_fades_means_no_pairs() {
    let mut cfg = synthetic_config();
    cfg.synth.n_total = 200_000;
    cfg.synth.tail_fraction = 0.0;
    cfg.thresholds.u_x = Some(cfg.synth.u_x);
    cfg.thresholds.u_y = Some(cfg.synth.u_y);
    let s = synth_from_config(&cfg).unwrap();
    assert!(s.truth.joint_windows.is_empty());
    let err = run_pipeline(&cfg, &s.x, &s.y, &[Stage::Align], "synth", None).unwrap_err();
    assert_eq!(err.stage(), "align");
    let joint = err.partial.report.joint.as_ref().unwrap();
    assert_eq!(joint.pairs, 0);
    assert_eq!(err.partial.report.stages_completed, ["decluster", "threshold", "fit-ugpd"]);
}

#[test]
fn partial_report_names_the_failing_stage() {
    let mut cfg = synthetic_config();
    cfg.synth.n_total = 100_000;
    // Below every sample: nothing to fit.
    cfg.thresholds.u_x = Some(-1e6);
    let s = synth_from_config(&cfg).unwrap();
    let err = run_pipeline(&cfg, &s.x, &s.y, &[Stage::Ugpd], "synth", None).unwrap_err();
    assert_eq!(err.stage(), "fit-ugpd");
    let f = err.partial.report.failure.as_ref().unwrap();
    assert_eq!(f.stage, "fit-ugpd");
    assert!(err.partial.report.threshold.is_some());
}

#[test]
fn baseline_alone_skips_the_tail_stages() {
    let mut cfg = synthetic_config();
    cfg.synth.n_total = 20_000;
    let s = synth_from_config(&cfg).unwrap();
    let run = run_pipeline(&cfg, &s.x, &s.y, &[Stage::Baseline], "synth", None).unwrap();
    assert_eq!(run.report.stages_completed, ["baseline"]);
    assert!(run.report.baseline.is_some());
    assert!(run.report.threshold.is_none());
}
