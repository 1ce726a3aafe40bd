use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn purity(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_purity"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn generate(dir: &Path, n: &str, k: &str) {
    let out = purity(&["generate", "correlated", "--n", n, "--k", k, "--seed", "3", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn scores_pure_and_identity_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, "3000", "5");
    let concepts = d.join("concepts.csv");

    let pure_out = d.join("pure");
    let out = purity(&[
        "score",
        "--concepts",
        concepts.to_str().unwrap(),
        "--reps",
        d.join("pure_reps.csv").to_str().unwrap(),
        "--out",
        pure_out.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("OIS"));
    let r = report(&pure_out);
    let ois = r["ois"].as_f64().unwrap();
    assert!((0.01..=0.10).contains(&ois), "pure OIS {ois}");
    assert!(pure_out.join("purity_matrix.csv").exists());
    assert_eq!(r["purity_matrix_path"], "purity_matrix.csv");
    assert_eq!(r["per_beta_ni"].as_array().unwrap().len(), 21);

    // The concept table itself, renamed into representation columns.
    let text = fs::read_to_string(&concepts).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(|c| format!("r_{}_1", &c[2..])).collect::<Vec<_>>().join(",");
    let body: Vec<&str> = lines.collect();
    let id_reps = d.join("identity.csv");
    fs::write(&id_reps, format!("{header}\n{}\n", body.join("\n"))).unwrap();
    let id_out = d.join("identity");
    let out = purity(&[
        "score",
        "--concepts",
        concepts.to_str().unwrap(),
        "--reps",
        id_reps.to_str().unwrap(),
        "--no-baselines",
        "--out",
        id_out.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = report(&id_out);
    assert!(r["ois"].as_f64().unwrap() <= 0.02);
    assert!(r["baselines"].is_null());
}

#[test]
fn align_recovers_permuted_columns() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, "1000", "3");
    let concepts = d.join("concepts.csv");
    let reps = d.join("impure_reps.csv");

    // Swap the representation blocks 1 <-> 3, keeping the canonical header.
    let text = fs::read_to_string(&reps).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let permuted: Vec<String> = lines
        .map(|l| {
            let v: Vec<&str> = l.split(',').collect();
            format!("{},{},{}", v[2], v[1], v[0])
        })
        .collect();
    let perm_path = d.join("permuted.csv");
    fs::write(&perm_path, format!("{header}\n{}\n", permuted.join("\n"))).unwrap();

    let run = |reps: &Path, name: &str, align: bool| {
        let out_dir = d.join(name);
        let mut args = vec![
            "score",
            "--concepts",
            concepts.to_str().unwrap(),
            "--reps",
            reps.to_str().unwrap(),
            "--no-baselines",
            "--beta-grid",
            "0,0.5,1",
            "--out",
            out_dir.to_str().unwrap(),
        ];
        if align {
            args.push("--align");
        }
        let out = purity(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        report(&out_dir)
    };
    let plain = run(&reps, "plain", false);
    let aligned = run(&perm_path, "aligned", true);
    assert_eq!(aligned["alignment"], serde_json::json!([2, 1, 0]));
    let (a, b) = (plain["ois"].as_f64().unwrap(), aligned["ois"].as_f64().unwrap());
    assert!((a - b).abs() <= 0.02, "{a} vs {b}");
}

#[test]
fn reports_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, "300", "3");
    let mut bodies = Vec::new();
    for name in ["a", "b"] {
        let out_dir = d.join(name);
        let out = purity(&[
            "score",
            "--concepts",
            d.join("concepts.csv").to_str().unwrap(),
            "--reps",
            d.join("impure_reps.csv").to_str().unwrap(),
            "--seed",
            "11",
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
        let text = fs::read_to_string(out_dir.join("report.json")).unwrap();
        bodies.push(text);
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn csv_report_format() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    generate(d, "300", "3");
    let out_dir = d.join("out");
    let out = purity(&[
        "score",
        "--concepts",
        d.join("concepts.csv").to_str().unwrap(),
        "--reps",
        d.join("pure_reps.csv").to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(text.starts_with("key,value\nois,"));
    assert!(!out_dir.join("report.json").exists());
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let c = d.join("c.csv");
    let r = d.join("r.csv");
    fs::write(&c, "c_1,c_2\n0,1\n1,0\n0,0\n").unwrap();
    fs::write(&r, "r_1_1,r_2_1\n0.1,0.2\n0.3,0.4\n0.5,0.6\n0.7,0.8\n").unwrap();
    let out = purity(&["score", "--concepts", c.to_str().unwrap(), "--reps", r.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("row count mismatch"), "{}", stderr(&out));

    fs::write(&c, "c_1,c_2\n0,1\n1,2\n0,0\n0,1\n").unwrap();
    let out = purity(&["score", "--concepts", c.to_str().unwrap(), "--reps", r.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("row 2"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_two() {
    let out = purity(&["run", "table2", "--seeds", "1", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let out = purity(&["run", "table1", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let out = purity(&["run", "table1", "--seeds=", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    let out = purity(&["score", "--concepts", "a", "--reps", "b", "--out", "c", "--beta-grid", "0,0.7,0.5,1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = purity(&["score", "--concepts", "a", "--reps", "b", "--out", "c", "--format", "xml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_documents_formats() {
    let out = purity(&["score", "--help"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for needle in ["--beta-grid", "--probe-hidden", "--align", "--folds", "--format", "r_<i>_<j>"] {
        assert!(text.contains(needle), "missing {needle}");
    }
}

#[test]
fn generate_tabular_writes_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = purity(&["generate", "tabular", "--n", "50", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let labels = fs::read_to_string(dir.path().join("labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 51);
    let features = fs::read_to_string(dir.path().join("features.csv")).unwrap();
    assert!(features.starts_with("x_1,x_2,x_3,x_4,x_5,x_6,x_7\n"));
}
