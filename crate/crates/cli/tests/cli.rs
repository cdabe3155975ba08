use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bpbeta(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bpbeta"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// Data lines of an output CSV, without the config comment.
fn csv_lines(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    assert!(
        text.starts_with("# config {"),
        "missing config echo in {}",
        path.display()
    );
    text.lines().skip(1).map(str::to_string).collect()
}

const DEMO: &str = r#"{"variables":[{"name":"x1","lower":0,"upper":1},{"name":"x2","lower":0,"upper":1}],
"equations":[{"name":"e","y":0,"terms":[{"var":"x1","coeff":1},{"var":"x2","coeff":-1}]}]}"#;

const INFEASIBLE: &str = r#"{"variables":[{"name":"x1","lower":0,"upper":1},{"name":"x2","lower":0,"upper":1}],
"equations":[{"name":"e","y":3,"terms":[{"var":"x1","coeff":1},{"var":"x2","coeff":1}]}]}"#;

#[test]
fn solve_one_equation_demo() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("demo.json"), DEMO).unwrap();
    let o = bpbeta(&["solve", "demo.json", "--out", "out", "--oracle", "on"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let e = json(&dir.path().join("out/entropy.json"));
    assert!(e["H"].as_f64().unwrap().abs() < 1e-6);
    assert!((e["V"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(e["converged"], Value::Bool(true));
    assert_eq!(e["config"]["seed"], 1);
    let rows = csv_lines(&dir.path().join("out/marginals.csv"));
    assert_eq!(rows[0], "name,A,B,alpha,beta,mean,variance");
    assert_eq!(rows.len(), 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("inf.json"), INFEASIBLE).unwrap();
    fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    assert_eq!(code(&bpbeta(&["solve", "inf.json", "--out", "o"], dir.path())), 2);
    assert_eq!(code(&bpbeta(&["solve", "bad.json", "--out", "o"], dir.path())), 1);
    assert_eq!(code(&bpbeta(&["solve", "missing.json"], dir.path())), 1);
    assert_eq!(code(&bpbeta(&["solve", "--no-such-flag"], dir.path())), 1);
    assert_eq!(code(&bpbeta(&["solve", "inf.json", "--tol", "0"], dir.path())), 1);
}

#[test]
fn non_convergence_still_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let g = bpbeta(
        &["gen", "--n", "60", "--m", "20", "--k", "6", "--seed", "4", "--out", "g"],
        dir.path(),
    );
    assert_eq!(code(&g), 0);
    let o = bpbeta(&["solve", "g/system.json", "--max-iter", "1", "--out", "o"], dir.path());
    assert_eq!(code(&o), 3);
    let e = json(&dir.path().join("o/entropy.json"));
    assert_eq!(e["converged"], Value::Bool(false));
    assert_eq!(csv_lines(&dir.path().join("o/marginals.csv")).len(), 61);
}

#[test]
fn rbc_network_has_one_row_per_reaction() {
    let dir = tempfile::tempdir().unwrap();
    let rbc = bpbeta::ensembles::rbc_network().unwrap();
    let mut buf = Vec::new();
    bpbeta::model::io::write_json(&rbc, &mut buf).unwrap();
    fs::write(dir.path().join("rbc.json"), buf).unwrap();
    let o = bpbeta(&["solve", "rbc.json", "--exact-bounds", "on", "--out", "o"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_lines(&dir.path().join("o/marginals.csv")).len(), 47);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = bpbeta(
            &["gen", "--n", "30", "--m", "8", "--k", "4", "--seed", "9", "--out", out],
            dir.path(),
        );
        assert_eq!(code(&o), 0);
        let o = bpbeta(
            &[
                "solve",
                "a/system.json",
                "--seed",
                "5",
                "--mc-steps",
                "2000",
                "--out",
                out,
            ],
            dir.path(),
        );
        assert_eq!(code(&o), 0);
    }
    for f in ["system.json", "entropy.json", "marginals.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn triplet_input_and_input_hash() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.csv"), "eq,var,coeff\ne,x1,1\ne,x2,1\n").unwrap();
    fs::write(dir.path().join("b.csv"), "var,lower,upper\nx1,0,1\nx2,0,1\n").unwrap();
    fs::write(dir.path().join("y.csv"), "eq,y\ne,1\n").unwrap();
    let args = [
        "solve",
        "s.csv",
        "--format",
        "triplet-csv",
        "--bounds",
        "b.csv",
        "--rhs",
        "y.csv",
        "--out",
        "o",
    ];
    assert_eq!(code(&bpbeta(&args, dir.path())), 0);
    let e = json(&dir.path().join("o/entropy.json"));
    assert!(e["H"].as_f64().unwrap().abs() < 1e-6);
    let inputs = e["config"]["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 3);
    let hashes: Vec<&str> = inputs.iter().map(|i| i["sha256"].as_str().unwrap()).collect();
    assert!(hashes.iter().all(|h| h.len() == 64));
    assert!(hashes[0] != hashes[1] && hashes[1] != hashes[2]);
}

#[test]
fn benchmark_on_trivial_instances_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let o = bpbeta(
        &[
            "benchmark",
            "--n",
            "2",
            "--m",
            "1",
            "--k",
            "2",
            "--instances",
            "2",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let r = json(&dir.path().join("o/benchmark.json"));
    assert_eq!(r["n_used"], 2);
    assert!(r["epsilon"].as_f64().unwrap() < 1e-9);
    assert_eq!(csv_lines(&dir.path().join("o/benchmark.csv")).len(), 3);
}

#[test]
fn convergence_curve_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "converge",
        "--n",
        "64",
        "--m",
        "32",
        "--ks",
        "3,10",
        "--trials",
        "6",
        "--max-iter",
        "300",
        "--out",
        "o",
    ];
    assert_eq!(code(&bpbeta(&args, dir.path())), 0);
    let rows = csv_lines(&dir.path().join("o/converge.csv"));
    assert_eq!(rows.len(), 3);
    let p: Vec<f64> = rows[1..]
        .iter()
        .map(|r| r.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    assert!(p[0] >= p[1], "{p:?}");
}

#[test]
fn tomography_on_determined_routing_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("routing.csv"),
        "pair,link\nAB,l1\nBC,l2\nAC,l1\nAC,l2\nAC,l3\n",
    )
    .unwrap();
    let truth = [(2.0, 1.0, 0.5), (1.5, 0.25, 3.0)];
    let mut loads = String::from("time,link,load\n");
    let mut flows = String::from("time,pair,flow\n");
    for (t, &(ab, bc, ac)) in truth.iter().enumerate() {
        loads += &format!("{t},l1,{}\n{t},l2,{}\n{t},l3,{ac}\n", ab + ac, bc + ac);
        flows += &format!("{t},AB,{ab}\n{t},BC,{bc}\n{t},AC,{ac}\n");
    }
    fs::write(dir.path().join("loads.csv"), loads).unwrap();
    fs::write(dir.path().join("truth.csv"), flows).unwrap();
    let args = [
        "tomography",
        "--routing",
        "routing.csv",
        "--loads",
        "loads.csv",
        "--truth",
        "truth.csv",
        "--out",
        "o",
    ];
    let o = bpbeta(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&dir.path().join("o/tomography.json"));
    assert!(r["report"]["metrics"]["mean_relative_error"].as_f64().unwrap() < 1e-6);
    assert_eq!(csv_lines(&dir.path().join("o/estimates.csv")).len(), 7);
}

#[test]
fn knockdown_and_sample_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("demo.json"), DEMO).unwrap();
    let o = bpbeta(&["knockdown", "demo.json", "--factor", "1", "--out", "k"], dir.path());
    assert_eq!(code(&o), 0);
    let r = json(&dir.path().join("k/knockdown.json"));
    for e in r["entries"].as_array().unwrap() {
        assert_eq!(e["delta_h"], 0.0);
    }
    let o = bpbeta(
        &[
            "sample",
            "demo.json",
            "--mc-steps",
            "1000",
            "--stride",
            "10",
            "--out",
            "s",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let rows = csv_lines(&dir.path().join("s/samples.csv"));
    assert_eq!(rows[0], "x1,x2");
    assert_eq!(rows.len(), 101);
    for r in &rows[1..] {
        let v: Vec<f64> = r.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[0] - v[1]).abs() < 1e-9);
    }
}
