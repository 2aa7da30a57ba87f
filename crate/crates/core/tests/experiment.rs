use std::path::{Path, PathBuf};

use rcm_core::experiment::{isotropic_profile, run, ExperimentConfig, ExperimentKind, Report};
use rcm_core::resample::ResLog;
use rcm_core::Error;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rcm-exp-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn config(json: serde_json::Value, out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(&json.to_string()).unwrap();
    cfg.output_dir = out.to_path_buf();
    cfg
}

fn read(dir: &Path, report: &Report) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = report
        .files
        .iter()
        .map(|f| (f.clone(), std::fs::read(dir.join(f)).unwrap()))
        .collect();
    files.sort();
    files
}

fn header(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

fn profile_file(dir: &Path) -> PathBuf {
    let path = dir.join("profile.json");
    std::fs::write(&path, isotropic_profile().to_json().unwrap()).unwrap();
    path
}

#[test]
fn configs_are_validated() {
    let bad = [
        r#"{"params": {"p": 1.5, "q": 1}}"#,
        r#"{"params": {"p": 0.3, "q": 1}, "seeds": []}"#,
        r#"{"params": {"p": 0.3, "q": 1}, "jobs": 0}"#,
        r#"{"params": {"p": 0.3, "q": 1}, "resample": {"n": 4}}"#,
        r#"{"params": {"p": 0.3, "q": 1}, "scaling": {"n_grid": [12]}}"#,
        r#"{"params": {"p": 0.3, "q": 1}, "wulff": {"k_min": 5, "k_max": 5}}"#,
        r#"{"params": {"p": 0.3, "q": 1}, "invariance": {"alpha": 1.0}}"#,
        r#"{"params": {"p": 0.3, "q": 1}, "colour": "blue"}"#,
        r#"{"params": {"p": 0.3, "q": 1}, "sampling": {"window_factor": 1.0}}"#,
        r#"not json"#,
    ];
    for text in bad {
        assert!(
            matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))),
            "accepted {text}"
        );
    }
    let cfg = ExperimentConfig::from_json(r#"{"params": {"p": 0.3, "q": 2}}"#).unwrap();
    assert_eq!(cfg.seeds, vec![1]);
    let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
    assert_eq!(back, cfg);
    assert!(matches!(
        ExperimentConfig::load(Path::new("/nonexistent/cfg.json")),
        Err(Error::Config(_))
    ));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        let kind = cfg
            .experiment
            .expect("shipped configs name their experiment");
        assert_eq!(path.file_stem().unwrap().to_str().unwrap(), kind.name());
        seen += 1;
    }
    assert_eq!(seen, 5);
}

#[test]
fn overrides_and_kind_mismatch() {
    let cfg = ExperimentConfig::from_json(
        r#"{"experiment": "wulff", "params": {"p": 0.3, "q": 1}, "seeds": [4, 5]}"#,
    )
    .unwrap();
    let o = cfg
        .clone()
        .with_overrides(Some(9), Some("elsewhere".into()), Some(2));
    assert_eq!(
        (o.seeds.clone(), o.output_dir.clone(), o.jobs),
        (vec![9], PathBuf::from("elsewhere"), Some(2))
    );
    assert_eq!(cfg.clone().with_overrides(None, None, None), cfg);
    assert!(matches!(
        run(ExperimentKind::Hypotheses, &cfg),
        Err(Error::Config(_))
    ));
    let zero = cfg.with_overrides(None, None, Some(0));
    assert!(matches!(
        run(ExperimentKind::Wulff, &zero),
        Err(Error::Config(_))
    ));
}

#[test]
fn hypotheses_run_is_reproducible() {
    let dir = scratch("hyp");
    let json = serde_json::json!({
        "params": {"p": 0.3, "q": 1},
        "seeds": [3],
        "hypotheses": {"k_max": 5, "decay_trials": 4000, "energy_samples": 4, "fkg_samples": 2000}
    });
    let cfg = config(json, &dir.join("a"));
    let a = run(ExperimentKind::Hypotheses, &cfg).unwrap();
    assert!(a.passed(), "{:?}", a.checks);
    assert_eq!(a.checks.len(), 3);
    assert!(
        a.files.contains(&"hypotheses.csv".to_string())
            && a.files.contains(&"hypotheses_report.json".to_string())
    );
    assert!(header(&dir.join("a"), "hypotheses.csv").starts_with("seed,version,"));
    let again = run(
        ExperimentKind::Hypotheses,
        &cfg.clone()
            .with_overrides(None, Some(dir.join("b")), Some(2)),
    )
    .unwrap();
    assert_eq!(read(&dir.join("a"), &a), read(&dir.join("b"), &again));
    let report: Report =
        serde_json::from_slice(&std::fs::read(dir.join("a/hypotheses_report.json")).unwrap())
            .unwrap();
    assert_eq!(report, a);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn wulff_run_writes_profile_and_uses_cache() {
    let dir = scratch("wulff");
    let json = serde_json::json!({
        "params": {"p": 0.3, "q": 1},
        "seeds": [2],
        "wulff": {"k_min": 1, "k_max": 4, "trials": 3000, "cache_dir": dir.join("cache")}
    });
    let cfg = config(json, &dir.join("a"));
    let a = run(ExperimentKind::Wulff, &cfg).unwrap();
    assert!(a.check("seed 2 unit area").unwrap().pass);
    assert!(a.check("seed 2 planted gd").unwrap().pass);
    assert!(a.check("seed 2 planted centre").unwrap().pass);
    assert!(a.files.contains(&"wulff_symmetry.csv".to_string()));
    assert!(std::fs::read_dir(dir.join("cache")).unwrap().count() > 0);
    let b = run(
        ExperimentKind::Wulff,
        &cfg.clone().with_overrides(None, Some(dir.join("b")), None),
    )
    .unwrap();
    assert_eq!(read(&dir.join("a"), &a), read(&dir.join("b"), &b));
    std::fs::remove_dir_all(&dir).unwrap();
}

fn invariance_json(dir: &Path, identity: bool) -> serde_json::Value {
    serde_json::json!({
        "params": {"p": 0.45, "q": 1},
        "resample": {"n": 8},
        "seeds": [1],
        "sampling": {"window": 16},
        "wulff": {"profile": profile_file(dir)},
        "invariance": {"samples": 60, "j": 1, "identity": identity, "negative_control": !identity, "rule": "circuit", "control": "drop_all"}
    })
}

#[test]
fn identity_invariance_run() {
    let dir = scratch("inv");
    let cfg = config(invariance_json(&dir, true), &dir.join("a"));
    let a = run(ExperimentKind::Invariance, &cfg).unwrap();
    for stat in ["area", "mlr", "mfl", "sw_x"] {
        let c = a.check(&format!("seed 1 ks {stat}")).unwrap();
        assert_eq!(c.value, 1.0);
    }
    assert!(a.passed(), "{:?}", a.checks);
    assert_eq!(
        header(&dir.join("a"), "invariance_samples.csv"),
        "seed,version,sample,phase,acted,area,mlr,mfl,sw_x"
    );
    let log = ResLog::read_jsonl(
        &std::fs::read_to_string(dir.join("a/invariance_reslog.jsonl")).unwrap(),
    )
    .unwrap();
    assert!(log.records.iter().all(|r| !r.acted));
    let b = run(
        ExperimentKind::Invariance,
        &cfg.clone()
            .with_overrides(None, Some(dir.join("b")), Some(1)),
    )
    .unwrap();
    assert_eq!(read(&dir.join("a"), &a), read(&dir.join("b"), &b));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn acting_invariance_run_keeps_identities() {
    let dir = scratch("inv-act");
    let cfg = config(invariance_json(&dir, false), &dir.join("a"));
    let a = run(ExperimentKind::Invariance, &cfg).unwrap();
    assert!(a.check("seed 1 psi events").unwrap().pass);
    assert!(a.check("seed 1 splice identity").unwrap().pass);
    let log = ResLog::read_jsonl(
        &std::fs::read_to_string(dir.join("a/invariance_reslog.jsonl")).unwrap(),
    )
    .unwrap();
    for r in log.records.iter().filter(|r| r.acted) {
        assert_eq!(
            (r.events_ok, r.splice_ok, r.exterior_ok),
            (Some(true), Some(true), Some(true))
        );
    }
    let mut wrong = cfg.clone();
    wrong.invariance.j = 99;
    assert!(run(ExperimentKind::Invariance, &wrong).is_err());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn scaling_and_regeneration_runs() {
    let dir = scratch("scale");
    let json = serde_json::json!({
        "params": {"p": 0.4, "q": 1},
        "seeds": [1],
        "wulff": {"profile": profile_file(&dir)},
        "sampling": {"method": "mcmc", "mcmc_sweeps": 20, "mcmc_spacing": 2, "mcmc_chains": 2},
        "scaling": {"n_grid": [8, 10], "samples": 8},
        "regeneration": {"n_grid": [8, 10], "samples": 8}
    });
    let cfg = config(json, &dir.join("s"));
    let s = run(ExperimentKind::Scaling, &cfg).unwrap();
    assert!(s.checks.iter().all(|c| !c.gating));
    assert!(!s.incomplete);
    for f in [
        "scaling_samples.csv",
        "scaling_summary.csv",
        "scaling_fits.csv",
    ] {
        assert!(s.files.contains(&f.to_string()));
    }
    assert!(header(&dir.join("s"), "scaling_summary.csv").contains("n,stat,median,q25,q75"));
    let again = run(
        ExperimentKind::Scaling,
        &cfg.clone().with_overrides(None, Some(dir.join("t")), None),
    )
    .unwrap();
    assert_eq!(read(&dir.join("s"), &s), read(&dir.join("t"), &again));

    let r = run(
        ExperimentKind::Regeneration,
        &cfg.clone().with_overrides(None, Some(dir.join("r")), None),
    )
    .unwrap();
    assert!(r.check("seed 1 convex fixture theta_max").unwrap().pass);
    assert!(r.files.contains(&"regeneration_tail.csv".to_string()));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn supercritical_runs_carry_a_note() {
    let dir = scratch("crit");
    let json = serde_json::json!({
        "params": {"p": 0.6, "q": 1},
        "hypotheses": {"k_max": 3, "decay_trials": 200, "energy_samples": 2, "fkg_samples": 200}
    });
    let r = run(ExperimentKind::Hypotheses, &config(json, &dir)).unwrap();
    assert!(r.notes.iter().any(|n| n.contains("p_c")));
    std::fs::remove_dir_all(&dir).unwrap();
}
