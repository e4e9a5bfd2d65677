use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_copq-bench")).args(args).output().unwrap();
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    let mut rows = vec![header];
    rows.extend(rd.records().map(|r| r.unwrap().iter().map(String::from).collect()));
    rows
}

#[test]
fn gen_graph_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.gr"), dir.path().join("b.gr"));
    run(&["gen-graph", "--n", "300", "--seed", "4", "--out", a.to_str().unwrap()]);
    run(&["gen-graph", "--spec", "n=300, seed=4", "--out", b.to_str().unwrap()]);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.lines().any(|l| l.starts_with("p sp 300 ")));
}

#[test]
fn pq_bench_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pq.csv");
    run(&["pq-bench", "--sizes", "1000,2000", "--reps", "1", "--cache-mb", "0.0625", "--csv", path.to_str().unwrap()]);
    let rows = csv_rows(&path);
    assert_eq!(rows[0][..3], ["experiment", "structure", "size"]);
    assert_eq!(rows.len(), 1 + 3 * 2);
    for row in &rows[1..] {
        assert_eq!(row[0], "pq");
        assert_eq!(row[3], "65536");
        assert!(row[7].parse::<f64>().unwrap() > 0.0);
    }
    let heaps: Vec<&str> = rows[1..].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(heaps, ["binary", "binary", "funnel", "funnel", "bucket", "bucket"]);
}

#[test]
fn sssp_bench_on_dimacs_file() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.gr");
    let csv = dir.path().join("sssp.csv");
    run(&["gen-graph", "--n", "500", "--out", graph.to_str().unwrap()]);
    run(&["sssp-bench", "--heap", "funnel,bucket", "--reps", "1", "--dimacs", graph.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 3);
    assert!(rows[1..].iter().all(|r| r[0] == "sssp-dimacs" && r[2] == "500"));
}

#[test]
fn verify_passes() {
    let out = run(&["verify", "--size", "2000"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("matches")).count(), 6);
}

#[test]
fn bad_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("bad.gr");
    std::fs::write(&graph, "p sp 2 1\na 1 5 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_copq-bench"))
        .args(["sssp-bench", "--dimacs", graph.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let out = Command::new(env!("CARGO_BIN_EXE_copq-bench")).args(["pq-bench", "--heap", "pairing"]).output().unwrap();
    assert!(!out.status.success());
}
