use std::fs;
use std::path::Path;

use congest_mst::cli::{main_with, parse_summary, report_table};

fn cli(args: &[&str]) -> i32 {
    main_with(std::iter::once("congest-mst").chain(args.iter().copied()).map(String::from))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn oracle_run_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let code = cli(&["run", "--gen", "random:64:1", "--assert", "oracle", "--trace", "--out", s(dir.path()), "--name", "r"]);
    assert_eq!(code, 0);
    let result = fs::read_to_string(dir.path().join("r.result")).unwrap();
    assert!(result.starts_with("# mst n=64 "));
    assert_eq!(result.lines().count(), 64);
    let rows = parse_summary(&fs::read_to_string(dir.path().join("r.csv")).unwrap()).unwrap().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].n, 64);
    assert!(parse_summary(&fs::read_to_string(dir.path().join("r.phases.csv")).unwrap()).unwrap().is_none());
    assert!(dir.path().join("r.trace.json").exists());
}

#[test]
fn pwa_minimum_on_a_path_file() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("p5.txt");
    let parts = dir.path().join("p5.parts");
    fs::write(&graph, "5 4\n1 2 1\n2 3 2\n3 4 3\n4 5 4\n").unwrap();
    fs::write(&parts, "1 1\n2 1\n3 1\n4 2\n5 2\n").unwrap();
    let code = cli(&["run", "--mode", "pwa", "--agg", "min", "--graph", s(&graph), "--parts", s(&parts), "--assert", "oracle", "--out", s(dir.path())]);
    assert_eq!(code, 0);
    let result = fs::read_to_string(dir.path().join("pwa-p5.result")).unwrap();
    assert_eq!(result, "# pwa n=5 m=4\n1 1\n2 1\n3 1\n4 4\n5 4\n");
}

#[test]
fn disconnected_part_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("p4.txt");
    let parts = dir.path().join("p4.parts");
    fs::write(&graph, "4 3\n1 2 1\n2 3 2\n3 4 3\n").unwrap();
    fs::write(&parts, "1 1\n2 2\n3 2\n4 1\n").unwrap();
    assert_eq!(cli(&["run", "--mode", "msf", "--graph", s(&graph), "--parts", s(&parts), "--out", s(dir.path())]), 1);
    assert!(!dir.path().join("msf-p4.result").exists());
}

#[test]
fn usage_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["run", "--out", s(dir.path())]), 1);
    assert_eq!(cli(&["run", "--gen", "moebius:8:1", "--out", s(dir.path())]), 1);
    assert_eq!(cli(&["run", "--gen", "random:8", "--out", s(dir.path())]), 1);
    assert_eq!(cli(&["frobnicate"]), 2);
}

#[test]
fn generated_graph_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g.txt");
    assert_eq!(cli(&["gen-graph", "--gen", "grid:16:3", "--out", s(&file)]), 0);
    assert_eq!(cli(&["run", "--graph", s(&file), "--assert", "oracle", "--out", s(dir.path())]), 0);
    assert!(fs::read_to_string(dir.path().join("mst-g.result")).unwrap().starts_with("# mst n=16 m=24\n"));
}

#[test]
fn report_sorts_by_size_and_skips_phase_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for n in [256, 16, 64] {
        let name = format!("n{n}");
        assert_eq!(cli(&["run", "--gen", &format!("random:{n}:2"), "--out", s(dir.path()), "--name", &name]), 0);
        files.push(dir.path().join(format!("{name}.csv")));
        files.push(dir.path().join(format!("{name}.phases.csv")));
    }
    let mut rows = Vec::new();
    for f in &files {
        if let Some(r) = parse_summary(&fs::read_to_string(f).unwrap()).unwrap() {
            rows.extend(r);
        }
    }
    assert_eq!(rows.len(), 3);
    let table = report_table(rows);
    let order: Vec<&str> = table.lines().skip(1).take(3).map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(order, ["n16", "n64", "n256"]);
    assert!(table.lines().last().unwrap().starts_with("fitted c"));
    let mut args = vec!["report"];
    args.extend(files.iter().map(|f| s(f)));
    assert_eq!(cli(&args), 0);
}
