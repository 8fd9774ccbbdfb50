use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn chansim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chansim"))
        .current_dir(dir)
        .env("CHANSIM_THREADS", "2")
        .args(args)
        .output()
        .expect("spawn chansim")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let o = chansim(
        p,
        &[
            "gen-channel",
            "--dim",
            "2",
            "--seed",
            "5",
            "--out",
            "ch.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        json(&p.join("ch.json"))["kraus"].as_array().unwrap().len(),
        4
    );

    let o = chansim(
        p,
        &[
            "decompose",
            "--in",
            "ch.json",
            "--epsilon",
            "0.05",
            "--seed",
            "1",
            "--out",
            "dec.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dec = json(&p.join("dec.json"));
    assert!(dec["converged"].as_bool().unwrap());
    let dt = dec["achieved_dt"].as_f64().unwrap();
    assert!((dec["diamond_bound"].as_f64().unwrap() - 2.0 * dt).abs() < 1e-15);
    let probs: f64 = dec["probabilities"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .sum();
    assert!((probs - 1.0).abs() < 1e-12);

    let manifest = json(&p.join("dec.json.manifest.json"));
    assert_eq!(manifest["command"], "decompose");
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["exit_status"], 0);
    assert_eq!(manifest["budgets"]["restarts"], 20);

    let o = chansim(
        p,
        &[
            "synth",
            "--in",
            "dec.json",
            "--out",
            "circ.json",
            "--listing",
            "circ.txt",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let circ = json(&p.join("circ.json"));
    assert!(circ["choi_residual"].as_f64().unwrap() < 1e-9);
    assert_eq!(circ["circuits"].as_array().unwrap().len(), 2);
    assert!(std::fs::read_to_string(p.join("circ.txt"))
        .unwrap()
        .contains("measure a"));

    let o = chansim(
        p,
        &[
            "verify",
            "--channel",
            "ch.json",
            "--in",
            "dec.json",
            "--epsilon",
            "0.05",
            "--out",
            "v.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&p.join("v.json"));
    assert!((v["achieved_dt"].as_f64().unwrap() - dt).abs() < 1e-12);

    let o = chansim(
        p,
        &[
            "sample", "--in", "dec.json", "--shots", "500", "--seed", "4", "--state", "zero",
            "--out", "s.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&p.join("s.json"));
    assert_eq!(s["dit_draws"], 500);
}

#[test]
fn decomposition_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    chansim(
        p,
        &[
            "gen-channel",
            "--dim",
            "2",
            "--seed",
            "9",
            "--out",
            "ch.json",
        ],
    );
    for out in ["a.json", "b.json"] {
        let o = chansim(
            p,
            &[
                "decompose",
                "--in",
                "ch.json",
                "--seed",
                "3",
                "--restarts",
                "4",
                "--out",
                out,
            ],
        );
        assert_eq!(code(&o), 0);
    }
    let (a, b) = (json(&p.join("a.json")), json(&p.join("b.json")));
    assert_eq!(a["params"], b["params"]);
    assert_eq!(a["achieved_dt"], b["achieved_dt"]);
}

#[test]
fn empty_input_is_invalid_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("empty.json"), "").unwrap();
    let o = chansim(p, &["decompose", "--in", "empty.json", "--out", "out.json"]);
    assert_eq!(code(&o), 2);
    assert!(!p.join("out.json").exists());
}

#[test]
fn malformed_channel_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("bad.json"),
        r#"{"dim":2,"kraus":[[[[0.5,0],[0,0]],[[0,0],[0.5,0]]]]}"#,
    )
    .unwrap();
    let o = chansim(p, &["decompose", "--in", "bad.json", "--out", "out.json"]);
    assert_eq!(code(&o), 2);
    assert!(!p.join("out.json").exists());
}

#[test]
fn missing_input_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = chansim(
        dir.path(),
        &["decompose", "--in", "absent.json", "--out", "out.json"],
    );
    assert_eq!(code(&o), 3);
}

#[test]
fn usage_errors_are_invalid_input() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&chansim(dir.path(), &["decompose"])), 2);
    assert_eq!(code(&chansim(dir.path(), &["info", "--dim", "1"])), 2);
    assert_eq!(
        code(&chansim(
            dir.path(),
            &["info", "--dim", "3", "--epsilon", "1.5"]
        )),
        2
    );
    assert_eq!(
        code(&chansim(
            dir.path(),
            &[
                "gen-channel",
                "--dim",
                "3",
                "--env-dim",
                "5",
                "--out",
                "x.json"
            ]
        )),
        2
    );
}

#[test]
fn exhausted_budget_still_writes_result() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    chansim(
        p,
        &[
            "gen-channel",
            "--dim",
            "3",
            "--seed",
            "2",
            "--out",
            "ch.json",
        ],
    );
    let o = chansim(
        p,
        &[
            "decompose",
            "--in",
            "ch.json",
            "--epsilon",
            "1e-9",
            "--restarts",
            "1",
            "--iters",
            "5",
            "--out",
            "dec.json",
        ],
    );
    assert_eq!(code(&o), 1);
    assert!(!json(&p.join("dec.json"))["converged"].as_bool().unwrap());
}

#[test]
fn info_reports_qutrit_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = chansim(dir.path(), &["info", "--dim", "3", "--json"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["kappa"], 3);
    assert_eq!(v["parameters"], 92);
    assert_eq!(v["census"]["givens"], 15);
    assert_eq!(v["census"]["controlled_swaps"], 10);
}

#[test]
fn reference_example_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(&chansim(p, &["reference", "--out-dir", "ref"])), 0);
    // Printed to four decimals, so the default tolerance rejects it.
    let o = chansim(
        p,
        &[
            "verify",
            "--channel",
            "ref/target.json",
            "--in",
            "ref/mixture.json",
        ],
    );
    assert_eq!(code(&o), 2);
    let o = chansim(
        p,
        &[
            "verify",
            "--channel",
            "ref/target.json",
            "--in",
            "ref/mixture.json",
            "--tol",
            "1e-3",
            "--out",
            "v.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dt = json(&p.join("v.json"))["achieved_dt"].as_f64().unwrap();
    assert!((dt - 0.046).abs() < 5e-3, "{dt}");
}

#[test]
fn dimension_mismatch_is_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    chansim(
        p,
        &[
            "gen-channel",
            "--dim",
            "2",
            "--seed",
            "1",
            "--out",
            "ch.json",
        ],
    );
    chansim(p, &["reference", "--out-dir", "ref"]);
    let o = chansim(
        p,
        &["verify", "--channel", "ch.json", "--in", "ref/mixture.json"],
    );
    assert_eq!(code(&o), 2);
}
