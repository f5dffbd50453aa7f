use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pgm-forge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = bin().args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).expect("json line")).collect()
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

fn temp_file(contents: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    f
}

#[test]
fn empty_four_by_four_grid_has_288_solutions() {
    let file = temp_file("................\n");
    let out = run(&["solve", "--kind", "sudoku4", "--enumerate", "--cap", "1000", "--format", "json", file.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let lines = json_lines(&out);
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["solution_count"], 288);
    assert_eq!(lines[0]["truncated"], false);
    assert_eq!(lines[0]["solutions"].as_array().unwrap().len(), 288);
    assert_eq!(lines[0]["schema_version"], 1);
}

#[test]
fn enumeration_past_the_cap_is_a_failure() {
    let out = run_stdin(&["solve", "--kind", "sudoku4", "--enumerate", "--cap", "10", "--format", "json"], "................\n");
    assert_eq!(out.status.code(), Some(1));
    let lines = json_lines(&out);
    assert_eq!(lines[0]["status"], "truncated");
    assert_eq!(lines[0]["solution_count"], 10);
}

#[test]
fn json_lines_carry_the_reported_fields() {
    let out = run(&["solve", "--kind", "sudoku9", "--format", "json", data("sudoku9_hard.txt").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = json_lines(&out);
    assert_eq!(lines.len(), 8);
    for (k, line) in lines.iter().enumerate() {
        assert_eq!(line["index"], k);
        assert_eq!(line["solved"], true);
        assert_eq!(line["unique"], true);
        assert_eq!(line["tree"], true);
        assert!(line["runtime_ms"].as_f64().unwrap() >= 0.0);
        let entries = line["stats"]["max_table_entries"].as_u64().unwrap();
        let log2 = line["stats"]["log2_max_table_entries"].as_f64().unwrap();
        assert!(entries == 0 || (log2 - (entries as f64).log2()).abs() < 1e-9);
        assert!(line["stats"]["max_upper_bound_entropy"].as_f64().is_some());
        assert_eq!(line["solutions"][0].as_object().unwrap().len(), 81);
    }
}

#[test]
fn unsatisfiable_puzzles_exit_with_one() {
    // Two 1s in the first row.
    let out = run_stdin(&["solve", "--kind", "sudoku4", "--format", "json"], "11..............\n");
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_lines(&out)[0]["status"], "contradiction");
}

#[test]
fn tiny_table_cap_reports_capacity() {
    let out = run(&["solve", "--kind", "sudoku9", "--table-cap", "4", "--format", "json", data("sudoku9_hard.txt").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let statuses: Vec<String> = json_lines(&out).iter().map(|l| l["status"].as_str().unwrap().to_owned()).collect();
    assert!(statuses.iter().any(|s| s == "capacity_exceeded"), "{statuses:?}");
}

#[test]
fn input_errors_exit_with_two() {
    let out = run_stdin(&["solve", "--kind", "sudoku4"], "12x4............\n");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stdin:1:3"));

    let out = run(&["solve", "--kind", "sudoku9", "/no/such/file"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["solve", "--kind", "chess", "x"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["solve", "--kind", "sudoku9", "--metric", "distance", "x"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["decode-hamming", "11100"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["decode-hamming", "1110010", "--flip-prob", "0.7"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = temp_file(r#"{"kind":"kakuro","rows":2,"cols":2,"cages":[{"cells":[[0,0]],"target":50,"op":"SUM"}]}"#);
    let out = run(&["solve", "--kind", "kakuro", bad.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decode_hamming_recovers_the_message() {
    let out = run(&["decode-hamming", "1110010", "--flip-prob", "0.1", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let report = &json_lines(&out)[0];
    assert_eq!(report["message"], "1010");
    assert_eq!(report["codeword"], "1010010");
    assert_eq!(report["confidence"].as_array().unwrap().len(), 7);

    let out = run(&["decode-hamming", "0000000", "--format", "json"]);
    assert_eq!(json_lines(&out)[0]["message"], "0000");

    let text = String::from_utf8_lossy(&run(&["decode-hamming", "1110010"]).stdout).into_owned();
    assert!(text.starts_with("message 1010\ncodeword 1010010\n"));
}

/// Drops the wall-clock field so runs can be compared.
fn without_runtime(mut v: Value) -> Value {
    if let Some(obj) = v.as_object_mut() {
        obj.remove("runtime_ms");
        for val in obj.values_mut() {
            *val = without_runtime(val.take());
        }
    } else if let Some(arr) = v.as_array_mut() {
        for val in arr.iter_mut() {
            *val = without_runtime(val.take());
        }
    }
    v
}

#[test]
fn parallel_runs_match_sequential_runs() {
    let path = data("sudoku9.txt");
    let sequential = run(&["solve", "--kind", "sudoku9", "--format", "json", "--workers", "1", path.to_str().unwrap()]);
    let parallel =
        run(&["solve", "--kind", "sudoku9", "--format", "json", "--workers", "4", "--seed", "17", path.to_str().unwrap()]);
    assert_eq!(sequential.status.code(), Some(0));
    assert_eq!(parallel.status.code(), Some(0));
    let a: Vec<Value> = json_lines(&sequential).into_iter().map(without_runtime).collect();
    let b: Vec<Value> = json_lines(&parallel).into_iter().map(without_runtime).collect();
    assert_eq!(a.len(), 17);
    assert_eq!(a, b);
}

#[test]
fn grid_puzzles_solve_from_json_files() {
    for name in ["kakuro_1.json", "fill_a_pix_2.json", "calcudoku_3.json"] {
        let kind = name.rsplit_once('_').unwrap().0;
        let out = run(&["solve", "--kind", kind, "--format", "json", data(name).to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{name}");
        assert_eq!(json_lines(&out)[0]["unique"], true, "{name}");
    }
}

#[test]
fn compare_reports_both_topologies_and_all_metrics() {
    let out = run(&["compare", "--kind", "kakuro", "--format", "json", data("kakuro_1.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report = &json_lines(&out)[0];
    let topologies: Vec<&str> = report["topologies"].as_array().unwrap().iter().map(|t| t["topology"].as_str().unwrap()).collect();
    assert_eq!(topologies, ["bethe", "ltrip"]);
    let metrics: Vec<&str> = report["metrics"].as_array().unwrap().iter().map(|m| m["metric"].as_str().unwrap()).collect();
    assert_eq!(metrics, ["overlap", "entropy", "gravity"]);

    // A tree-shaped instance: both topologies solve it.
    let out = run_stdin(&["compare", "--kind", "sudoku4", "--format", "json"], "1234341221434.2.\n");
    let report = &json_lines(&out)[0];
    assert!(report["topologies"].as_array().unwrap().iter().all(|t| t["solved"] == true));
}

#[test]
fn color_finds_the_chromatic_number() {
    let graph = temp_file("# a triangle with a tail\na b\nb c\nc a\nc d\n");
    let path = graph.path().to_str().unwrap();
    let out = run(&["color", path, "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let report = &json_lines(&out)[0];
    assert_eq!(report["colours"], 3);
    let colouring = report["colouring"].as_object().unwrap();
    for (a, b) in [("a", "b"), ("b", "c"), ("c", "a"), ("c", "d")] {
        assert_ne!(colouring[a], colouring[b]);
    }

    let out = run(&["color", path, "--colours", "2"]);
    assert_eq!(out.status.code(), Some(1));

    // 3! colourings of the triangle, times 2 choices for the tail.
    let out = run(&["color", path, "--colors", "3", "--enumerate", "--format", "json"]);
    assert_eq!(json_lines(&out)[0]["solution_count"], 12);
}
