use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const G1: &str = "a b 1\nb c 2\nb c 5\nc d 6\n";

fn tempora(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tempora"))
        .args(args)
        .env_remove("TEMPORA_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// CSV body rows: comment lines and the column header dropped.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn closeness_of_g1() {
    let dir = TempDir::new().unwrap();
    let g1 = write(&dir, "g1.edges", G1);
    let out = tempora(&[
        "centrality",
        "--measure",
        "temporal-closeness",
        "--delta",
        "2",
        "--input",
        s(&g1),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("# config: "));
    assert!(text.contains("# unreachable_distance: 4"));
    let d = rows(&text).into_iter().find(|r| r[0] == "d").unwrap();
    assert_eq!(d[1].parse::<f64>().unwrap(), 1.0 / 7.0);
}

#[test]
fn stats_of_g1() {
    let dir = TempDir::new().unwrap();
    let g1 = write(&dir, "g1.edges", G1);
    let out = tempora(&["stats", "-i", s(&g1), "--format", "json"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["result"]["nodes"], 4);
    assert_eq!(doc["result"]["temporal_edges"], 4);
    assert_eq!(doc["result"]["static_edges"], 3);
    assert_eq!(doc["provenance"]["command"], "stats");
    assert!(doc["provenance"]["generated_unix"].is_u64());
}

#[test]
fn every_subcommand_documents_defaults() {
    for cmd in [
        "stats",
        "centrality",
        "paths",
        "debruijn",
        "order-select",
        "train",
        "evaluate",
        "benchmark",
        "approx-betweenness",
        "export-embeddings",
        "synth",
    ] {
        let out = tempora(&[cmd, "--help"]);
        assert!(out.status.success(), "{cmd}");
        let help = stdout(&out);
        assert!(help.contains("[default: "), "{cmd} help shows no defaults");
        assert!(help.contains("--seed"), "{cmd} help lacks --seed");
    }
}

fn assert_usage_error(out: &Output) {
    assert_eq!(out.status.code(), Some(2), "{}", stderr(out));
    let err = stderr(out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[usage]: "), "{err}");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let g1 = write(&dir, "g1.edges", G1);
    assert_usage_error(&tempora(&["stats", "-i", s(&g1), "--no-such-flag"]));
    assert_usage_error(&tempora(&[
        "stats",
        "-i",
        s(&dir.path().join("missing.edges")),
    ]));
    assert_usage_error(&tempora(&["stats"]));
    assert_usage_error(&tempora(&["frobnicate"]));
    assert_usage_error(&tempora(&["train", "-i", s(&g1), "--synth", "memoryless"]));
    assert_usage_error(&tempora(&["centrality", "-i", s(&g1), "--delta=0"]));
    assert_usage_error(&tempora(&[
        "approx-betweenness",
        "-i",
        s(&g1),
        "--samples",
        "many",
    ]));
    let bad = write(&dir, "bad.json", r#"{"no_such_key": 1}"#);
    assert_usage_error(&tempora(&["stats", "-i", s(&g1), "--config", s(&bad)]));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let broken = write(&dir, "broken.edges", "a b 1\na b later\n");
    let out = tempora(&["stats", "-i", s(&broken)]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error[runtime]: line 2"), "{err}");
}

#[test]
fn config_file_fills_unset_flags_only() {
    let dir = TempDir::new().unwrap();
    let g1 = write(&dir, "g1.edges", G1);
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{"measure": "temporal-closeness", "delta": 2, "deterministic-headers": true}"#,
    );
    let from_file = tempora(&["centrality", "-i", s(&g1), "--config", s(&cfg)]);
    let from_flags = tempora(&[
        "centrality",
        "-i",
        s(&g1),
        "--measure",
        "temporal-closeness",
        "--delta",
        "2",
        "--deterministic-headers",
    ]);
    assert!(from_file.status.success(), "{}", stderr(&from_file));
    assert_eq!(rows(&stdout(&from_file)), rows(&stdout(&from_flags)));

    let overridden = tempora(&[
        "centrality",
        "-i",
        s(&g1),
        "--config",
        s(&cfg),
        "--delta",
        "1",
    ]);
    let text = stdout(&overridden);
    assert!(text.contains("\"delta\":1.0"), "{text}");
    assert!(text.contains("# measure: temporal-closeness"));
}

#[test]
fn seed_falls_back_to_environment() {
    let run = |env_seed: Option<&str>, args: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_tempora"));
        cmd.args([
            "synth",
            "--nodes",
            "10",
            "--edges",
            "50",
            "--deterministic-headers",
        ])
        .args(args)
        .env_remove("TEMPORA_SEED");
        if let Some(v) = env_seed {
            cmd.env("TEMPORA_SEED", v);
        }
        let out = cmd.output().unwrap();
        assert!(out.status.success());
        rows(&stdout(&out))
    };
    let env7 = run(Some("7"), &[]);
    assert_eq!(env7, run(None, &["--seed", "7"]));
    assert_ne!(env7, run(None, &[]));
    assert_eq!(
        run(Some("7"), &["--seed", "1"]),
        run(None, &["--seed", "1"])
    );
}

#[test]
fn artifacts_are_byte_identical_under_fixed_seed() {
    let dir = TempDir::new().unwrap();
    let graph = dir.path().join("g.edges");
    let out = tempora(&[
        "synth",
        "--nodes",
        "15",
        "--edges",
        "300",
        "--seed",
        "2",
        "-o",
        s(&graph),
    ]);
    assert!(out.status.success());
    // fixed artifact paths, since they are part of the echoed config
    let ckpt = dir.path().join("model.json");
    let pred = dir.path().join("pred.csv");
    let train = |jobs: &str| {
        let out = tempora(&[
            "train",
            "-i",
            s(&graph),
            "--epochs",
            "30",
            "--jobs",
            jobs,
            "--seed",
            "3",
            "--deterministic-headers",
            "--checkpoint",
            s(&ckpt),
            "--predictions",
            s(&pred),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        (
            fs::read(&ckpt).unwrap(),
            fs::read(&pred).unwrap(),
            out.stdout,
        )
    };
    let a = train("1");
    let again = train("1");
    assert_eq!(a, again);

    // --jobs is echoed into provenance, everything else must agree
    let b = train("3");
    let weights = |bytes: &[u8]| {
        let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
        v.as_object_mut().unwrap().remove("provenance");
        v
    };
    assert_eq!(weights(&a.0), weights(&b.0));
    let body = |bytes: &[u8]| {
        let text = String::from_utf8(bytes.to_vec()).unwrap();
        text.lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(body(&a.1), body(&b.1));
    assert_eq!(body(&a.2), body(&b.2));
}

#[test]
fn exported_embeddings_have_eight_columns() {
    let dir = TempDir::new().unwrap();
    let graph = dir.path().join("g.edges");
    let ckpt = dir.path().join("m.json");
    assert!(
        tempora(&["synth", "--nodes", "12", "--edges", "300", "-o", s(&graph)])
            .status
            .success()
    );
    let out = tempora(&[
        "train",
        "-i",
        s(&graph),
        "--epochs",
        "5",
        "--checkpoint",
        s(&ckpt),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = tempora(&[
        "export-embeddings",
        "-i",
        s(&graph),
        "--checkpoint",
        s(&ckpt),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "node,e0,e1,e2,e3,e4,e5,e6,e7");
    let body = rows(&text);
    assert!(!body.is_empty());
    assert!(body
        .iter()
        .all(|r| r.len() == 9 && r[1..].iter().all(|x| x.parse::<f64>().is_ok())));
}

#[test]
fn evaluate_flags_one_best_row_per_model() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.json");
    let out = tempora(&[
        "evaluate",
        "--synth",
        "planted-order2",
        "--nodes",
        "20",
        "--edges",
        "400",
        "--measure",
        "temporal-betweenness",
        "--runs",
        "2",
        "--epochs",
        "10",
        "--lr-grid",
        "0.1,0.01,0.001",
        "-o",
        s(&report),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(report).unwrap()).unwrap();
    let summary = doc["result"]["summary"].as_array().unwrap();
    assert_eq!(summary.len(), 6);
    for model in ["dbgnn", "gcn"] {
        let best = summary
            .iter()
            .filter(|r| r["model"] == model && r["best"] == true)
            .count();
        assert_eq!(best, 1, "{model}");
    }
    assert_eq!(doc["provenance"]["config"]["lr_grid"][2], 0.001);
    let table = stdout(&out);
    assert!(table.contains("spearman") && table.contains('*'));
}

#[test]
fn paths_and_debruijn_exports() {
    let dir = TempDir::new().unwrap();
    let g1 = write(&dir, "g1.edges", G1);
    let out = tempora(&["paths", "-i", s(&g1), "--delta", "10", "-k", "2"]);
    assert!(out.status.success());
    let counts = rows(&stdout(&out));
    let total: u64 = counts.iter().map(|r| r[1].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 4);

    let out = tempora(&[
        "paths",
        "-i",
        s(&g1),
        "--delta",
        "2",
        "-k",
        "3",
        "--explicit",
    ]);
    let text = stdout(&out);
    assert!(text.contains("node_seq,timestamps"));
    assert!(text.contains("a|b|c,1|2"));

    let bip = dir.path().join("bip.csv");
    let out = tempora(&[
        "debruijn",
        "-i",
        s(&g1),
        "--delta",
        "2",
        "--order",
        "2",
        "--bipartite",
        s(&bip),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("src_seq,dst_seq,weight"));
    assert!(fs::read_to_string(bip)
        .unwrap()
        .contains("ho_seq,first_order_node"));
}

#[test]
fn order_select_reports_json() {
    let dir = TempDir::new().unwrap();
    let graph = dir.path().join("g.edges");
    assert!(tempora(&[
        "synth",
        "--nodes",
        "20",
        "--edges",
        "20000",
        "--out-degree",
        "3",
        "-o",
        s(&graph),
    ])
    .status
    .success());
    let out = tempora(&["order-select", "-i", s(&graph), "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["result"]["optimal_order"], 2);
}
