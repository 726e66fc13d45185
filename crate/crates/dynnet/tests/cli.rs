use std::path::Path;
use std::process::Command;

use dynnet::commands::{self, verdict_label};
use dynnet::config::{ExperimentConfig, Stop};
use dynnet::core::snapshot::NodeRow;
use dynnet::core::{ModelConfig, ModelParams, Snapshot, SocialIndexDistribution, Version};
use dynnet::io::{read_snapshot, write_snapshot, SnapshotMeta, SCHEMA};
use serde_json::Value;

const MODEL: [&str; 10] = ["--lambda", "1", "--mu", "0.2", "--beta", "0.8", "--alpha", "1", "--s", "const:1"];

fn dynnet(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dynnet")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap())
}

fn with_model(sub: &str, extra: &[&str]) -> Vec<String> {
    let mut v = vec![sub.to_owned()];
    v.extend(MODEL.iter().map(|s| s.to_string()));
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run(sub: &str, extra: &[&str]) -> (i32, String) {
    let args = with_model(sub, extra);
    dynnet(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn golden_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden"))
}

/// Compares `got` with the golden file, rewriting it when `DYNNET_BLESS` is set.
fn check_golden(name: &str, got: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("DYNNET_BLESS").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, got).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden {name}"));
    assert_eq!(got, want, "{name}");
}

fn tiny_snapshot() -> (Snapshot, SnapshotMeta) {
    let nodes = vec![
        NodeRow { id: 0, age: 2.5, social_index: 1.0, degree: 0 },
        NodeRow { id: 3, age: 0.125, social_index: 0.1, degree: 0 },
        NodeRow { id: 7, age: 1.0 / 3.0, social_index: 3.0, degree: 0 },
    ];
    let snap = Snapshot::from_parts(4.75, nodes, [(3, 0), (0, 3), (7, 7), (0, 7)]);
    let meta = SnapshotMeta {
        schema: SCHEMA,
        model: ModelConfig {
            params: ModelParams::new(1.0, 0.2, 1.0, 0.8, Version::P),
            social_index: SocialIndexDistribution::two_point(0.1, 3.0, 0.25),
        },
        seed: 7,
        stream: 2,
        discards: 1,
        clock: 4.75,
        events: 12,
        nodes: 3,
        edge_copies: 4,
    };
    (snap, meta)
}

#[test]
fn snapshot_files_match_golden() {
    let dir = tempfile::tempdir().unwrap();
    let (snap, meta) = tiny_snapshot();
    write_snapshot(dir.path(), "tiny", &snap, &meta).unwrap();
    for f in ["tiny_nodes.csv", "tiny_edges.csv", "tiny.json"] {
        check_golden(f, &std::fs::read_to_string(dir.path().join(f)).unwrap());
    }
}

#[test]
fn snapshot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (snap, meta) = tiny_snapshot();
    write_snapshot(dir.path(), "t", &snap, &meta).unwrap();
    let (back, m) = read_snapshot(dir.path(), "t").unwrap();
    assert_eq!(back, snap);
    assert_eq!(m, meta);

    let mut cfg = ExperimentConfig::new(
        ModelParams::new(1.3, 0.25, 0.9, 0.4, Version::U),
        SocialIndexDistribution::exponential(1.7),
    );
    cfg.stop = Stop::Population(500);
    cfg.replicas = 2;
    cfg.seed = 11;
    cfg.out = Some(dir.path().join("sim"));
    let report = commands::simulate(&cfg).unwrap();
    for r in 0..2 {
        let (s, m) = read_snapshot(&dir.path().join("sim"), &format!("replica_{r:03}")).unwrap();
        assert_eq!(s.nodes.len(), 500);
        assert_eq!(m.discards, report.replicas[r].discards);
        let mut recomputed = s.clone();
        recomputed.recompute_degrees();
        assert_eq!(recomputed, s);
    }
}

#[test]
fn seeded_simulation_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, _) = run("simulate", &["--version", "P", "--stop-n", "25", "--seed", "3", "--out", out]);
    assert_eq!(code, 0);
    for f in ["replica_000_nodes.csv", "replica_000_edges.csv"] {
        check_golden(&format!("seed3_{f}"), &std::fs::read_to_string(dir.path().join(f)).unwrap());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for d in [&a, &b] {
        let (code, stdout) = run(
            "simulate",
            &["--stop-n", "2000", "--seed", "7", "--replicas", "16", "--out", d.path().to_str().unwrap()],
        );
        assert_eq!(code, 0);
        outputs.push(stdout.replace(d.path().to_str().unwrap(), "OUT"));
    }
    assert_eq!(outputs[0], outputs[1]);
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 16 * 3 + 1);
    for n in names {
        let x = std::fs::read(a.path().join(&n)).unwrap();
        let y = std::fs::read(b.path().join(&n)).unwrap();
        if n == "report.json" {
            let norm = |v: Vec<u8>, d: &Path| String::from_utf8(v).unwrap().replace(d.to_str().unwrap(), "OUT");
            assert_eq!(norm(x, a.path()), norm(y, b.path()));
        } else {
            assert_eq!(x, y, "{n:?}");
        }
    }
    let report: Value = serde_json::from_str(&outputs[0]).unwrap();
    assert_eq!(report["schema"], 1);
    assert_eq!(report["replicas"].as_array().unwrap().len(), 16);
    for key in ["components", "assortativity", "degree_hist", "age_ks", "self_loop_copies", "multi_edge_extras"] {
        assert!(!report["replicas"][0]["stats"][key].is_null(), "{key}");
    }
}

#[test]
fn simulate_example_mean_degree() {
    let (code, stdout) = run("simulate", &["--stop-n", "20000", "--seed", "7"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    let m = v["pooled"]["mean_degree"].as_f64().unwrap();
    assert!((m - 1.0).abs() < 0.03, "{m}");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(
        &path,
        r#"{"lambda":1,"mu":0.2,"alpha":5,"beta":0.8,"version":"U","social_index":{"kind":"constant","s":1}}"#,
    )
    .unwrap();
    let (code, stdout) = dynnet(&["phase", "--config", path.to_str().unwrap(), "--alpha", "0"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["config"]["alpha"], 0.0);
    assert_eq!(v["critical"]["verdict"], "no_giant");
    assert_eq!(v["rho_kappa"], 0.0);
}

#[test]
fn exit_codes() {
    let (code, stdout) = dynnet(&["theory", "--lambda", "1"]);
    assert_eq!(code, 2);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["error"]["class"], "invalid_config");
    assert_eq!(v["schema"], 1);

    assert_eq!(run("theory", &["--s", "bogus:1"]).0, 2);
    assert_eq!(run("theory", &["--mu", "2"]).0, 2);

    let (code, stdout) = run("rho", &["--alpha", "1.2", "--max-iterations", "2"]);
    assert_eq!(code, 3);
    assert!(stdout.contains("non_convergence"));

    let (code, stdout) = dynnet(&[
        "simulate",
        "--lambda",
        "1",
        "--mu",
        "0.95",
        "--beta",
        "0.1",
        "--alpha",
        "1",
        "--s",
        "const:1",
        "--stop-n",
        "1000",
        "--max-restarts",
        "1",
        "--seed",
        "1",
    ]);
    assert_eq!(code, 4);
    assert!(stdout.contains("too_many_restarts"));
}

#[test]
fn theory_examples() {
    let (code, stdout) = run("theory", &[]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["U"], v["P"]);
    let mass = v["U"]["pmf_mass"].as_f64().unwrap();
    assert!(mass > 1.0 - 1e-6 && mass <= 1.0 + 1e-9, "{mass}");

    // U-version sign against the threshold, on both sides of it
    for s in ["two:1,2,0.5", "two:1,13.0710678,0.8", "exp:1"] {
        let (code, stdout) = run("theory", &["--lambda", "1", "--mu", "0.5", "--beta", "0.5", "--s", s]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&stdout).unwrap();
        let ratio = v["moment_ratio"].as_f64().unwrap();
        let thr = v["assortativity_threshold"].as_f64().unwrap();
        let rho = v["U"]["edge"]["correlation"].as_f64().unwrap();
        assert_eq!(rho > 0.0, ratio < thr, "{s}: {rho} {ratio} {thr}");
    }
}

#[test]
fn heavy_tails_are_refused_not_guessed() {
    let (code, stdout) = run("theory", &["--s", "pareto:2.5,1"]);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&stdout).unwrap();
    assert!(v["moments"][2].is_null());
    assert!(v["U"]["edge"].is_null());
    assert!(!v["U"]["refused"].as_array().unwrap().is_empty());
    assert!(v["U"]["mean_degree"].is_number());
}

#[test]
fn phase_sweep_flips_once() {
    let (code, stdout) = run("phase", &["--sweep", "alpha:0.1:2:20"]);
    assert_eq!(code, 0);
    let mut rdr = csv::Reader::from_reader(stdout.as_bytes());
    let verdicts: Vec<String> =
        rdr.records().map(|r| r.unwrap()[3].to_owned()).filter(|v| v != "near_critical").collect();
    let flips = verdicts.windows(2).filter(|w| w[0] != w[1]).count();
    assert_eq!(flips, 1, "{verdicts:?}");
    assert_eq!(verdicts.first().unwrap(), "no_giant");
    assert_eq!(verdicts.last().unwrap(), "giant");
}

#[test]
fn phase_report_consistency() {
    let cfg =
        ExperimentConfig::new(ModelParams::new(1.0, 0.2, 0.0, 0.8, Version::U), SocialIndexDistribution::constant(1.0));
    let r = commands::phase(&cfg).unwrap();
    assert_eq!(verdict_label(&r.critical.verdict), "no_giant");
    assert_eq!(r.rho_kappa, 0.0);
}

#[test]
fn compare_full_stack() {
    let mut cfg =
        ExperimentConfig::new(ModelParams::new(1.0, 0.2, 1.0, 0.8, Version::U), SocialIndexDistribution::constant(1.0));
    cfg.stop = Stop::Population(20_000);
    cfg.replicas = 16;
    cfg.seed = 2024;
    let report = commands::compare(&cfg).unwrap();
    for row in &report.rows {
        assert!(row.stderr.is_finite() && row.theory_tolerance.is_finite(), "{row:?}");
        assert!(row.z.abs() < 4.0, "{row:?}");
    }
    let names: Vec<&str> = report.rows.iter().map(|r| r.quantity.as_str()).collect();
    assert_eq!(names, ["mean_degree", "degree_variance", "degree_correlation", "largest_fraction"]);
}

#[test]
fn sweep_writes_cells_and_merges_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg =
        ExperimentConfig::new(ModelParams::new(1.0, 0.2, 1.0, 0.8, Version::U), SocialIndexDistribution::constant(1.0));
    cfg.stop = Stop::Population(1000);
    cfg.replicas = 3;
    cfg.sweep = Some("alpha:0.5:1.5:3".parse().unwrap());
    cfg.out = Some(dir.path().to_owned());
    let rows = commands::sweep(&cfg).unwrap();
    assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), [0.5, 1.0, 1.5]);
    for i in 0..3 {
        assert!(dir.path().join(format!("cells/cell_{i:03}.json")).exists());
    }
    let again = commands::sweep(&cfg).unwrap();
    assert_eq!(rows, again);
    let csv_text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(csv_text.starts_with("param,value,replicas,mean_degree"));
}
