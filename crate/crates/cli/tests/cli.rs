//! Runs the built binary against the core fixtures.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn absynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_absynth"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(rel: &str) -> String {
    fixtures().join(rel).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_reports_undefined_identifiers() {
    let bad = absynth(&["validate", &fixture("listing1.cf")]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(stdout(&bad).lines().any(|l| l.starts_with("UndefinedId")));
    let good = absynth(&["validate", &fixture("listing3.cf")]);
    assert_eq!(good.status.code(), Some(0));
}

#[test]
fn cost_of_f0_on_the_lattice() {
    let out = absynth(&[
        "cost",
        &fixture("f0.cf"),
        "--op",
        "hardsigmoid",
        "--domain",
        "deeppoly",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let total = report["total"].as_f64().unwrap();
    assert!((total - 0.0230).abs() < 1e-3, "total {total}");
}

#[test]
fn cost_with_explicit_elements() {
    let dir = tempfile::tempdir().unwrap();
    let elems = dir.path().join("elems.json");
    let json = r#"[{"domain": "deeppoly", "n": 1,
        "shapes": [{"l": -4, "u": 4, "L": {"c": -4}, "U": {"c": 4}}]}]"#;
    std::fs::write(&elems, json).unwrap();
    let out = absynth(&[
        "cost",
        &fixture("f0.cf"),
        "--op",
        "hardsigmoid",
        "--elements",
        elems.to_str().unwrap(),
    ]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stderr));
    });
    assert!((report["total"].as_f64().unwrap() - 0.014241).abs() < 1e-5);
}

#[test]
fn falsify_exit_codes() {
    let sound = absynth(&[
        "falsify",
        &fixture("listing3.cf"),
        "--op",
        "hardsigmoid",
        "--budget",
        "300",
    ]);
    assert_eq!(sound.status.code(), Some(0));
    assert_eq!(stdout(&sound).trim(), "[]");
    let unsound = absynth(&[
        "falsify",
        &fixture("f0.cf"),
        "--op",
        "hardsigmoid",
        "--budget",
        "300",
    ]);
    assert_eq!(unsound.status.code(), Some(3));
    let cexs: Vec<serde_json::Value> = serde_json::from_str(&stdout(&unsound)).unwrap();
    assert!(!cexs.is_empty());
}

#[test]
fn synthesize_from_corpus() {
    let run = || {
        absynth(&[
            "synthesize",
            "--provider",
            &format!("corpus:{}", fixture("hs")),
            "--op",
            "hardsigmoid",
            "--budget",
            "400",
        ])
    };
    let out = run();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["result"], true);
    let listing3 = std::fs::read_to_string(fixtures().join("listing3.cf")).unwrap();
    assert_eq!(last["code"].as_str().unwrap().trim(), listing3.trim());
    assert_eq!(stdout(&run()), text);
}

#[test]
fn synthesize_config_file_and_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[synthesis]\nmax_rounds = 1\ncandidates_per_round = 2\n").unwrap();
    let out = absynth(&[
        "synthesize",
        "--provider",
        &format!("corpus:{}", fixture("hs")),
        "--op",
        "hardsigmoid",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let lines: Vec<&str> = std::str::from_utf8(&out.stdout).unwrap().lines().collect();
    assert_eq!(lines.len(), 2);
    let round: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(round["candidates"].as_array().unwrap().len(), 2);
}

#[test]
fn certify_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net.json");
    let queries = dir.path().join("q.json");
    std::fs::write(
        &net,
        r#"{"input_dim": 2, "layers": [{"type": "affine", "weights": [[1, 0], [0, 1]], "bias": [0, 0]},
            {"type": "activation", "op": "relu"}]}"#,
    )
    .unwrap();
    std::fs::write(
        &queries,
        r#"[{"id": "a", "input": [1, 0], "epsilon": 0.1, "true_label": 0},
            {"id": "b", "input": [0.6, 0.4], "epsilon": 0.2, "true_label": 0}]"#,
    )
    .unwrap();
    // An empty override directory leaves the reference transformers in place.
    let overrides = dir.path().join("t");
    std::fs::create_dir(&overrides).unwrap();
    for domain in ["deeppoly", "interval", "deepz"] {
        let out = absynth(&[
            "certify",
            "--net",
            net.to_str().unwrap(),
            "--queries",
            queries.to_str().unwrap(),
            "--domain",
            domain,
            "--transformers",
            overrides.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{domain}");
        let text = stdout(&out);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "query-id,certified,min-margin");
        assert!(lines[1].starts_with("a,true,"), "{domain}: {}", lines[1]);
        assert!(lines[2].starts_with("b,false,"), "{domain}: {}", lines[2]);
    }
}

#[test]
fn usage_and_file_errors() {
    assert_eq!(absynth(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        absynth(&["cost", &fixture("f0.cf"), "--op", "swish"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        absynth(&[
            "cost",
            &fixture("f0.cf"),
            "--op",
            "hardsigmoid",
            "--domain",
            "interval"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        absynth(&["validate", "/definitely/missing.cf"]).status.code(),
        Some(2)
    );
    assert_eq!(
        absynth(&["synthesize", "--provider", "carrier-pigeon", "--op", "relu"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(absynth(&["--help"]).status.code(), Some(0));
}
