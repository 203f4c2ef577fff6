use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lllfix::fixtures;
use lllfix::format;
use lllfix::trace::parse_assignment;
use lllfix::verify::verify_assignment;
use serde_json::Value;
use tempfile::TempDir;

fn lllfix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lllfix"))
        .args(args)
        .env("LLL_LOG", "quiet")
        .output()
        .expect("spawn lllfix")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn error_record(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().find(|l| l.starts_with('{')).expect("json error record");
    serde_json::from_str(line).unwrap()
}

fn write_fixture(dir: &TempDir, name: &str, inst: &lllfix::LllInstance) -> std::path::PathBuf {
    let path = dir.path().join(name);
    format::save(inst, &path).unwrap();
    path
}

const SHARED_COIN_TRIANGLE: &str = r#"{
  "rank_cap": 3,
  "variables": [
    {"id": "Xuv", "domain": ["H", "T"], "probs": ["1/2", "1/2"]},
    {"id": "Xuw", "domain": ["H", "T"], "probs": ["1/2", "1/2"]},
    {"id": "Xvw", "domain": ["H", "T"], "probs": ["1/2", "1/2"]}
  ],
  "events": [
    {"id": "u", "vars": ["Xuv", "Xuw"], "occurs": [["H", "H"]]},
    {"id": "v", "vars": ["Xuv", "Xvw"], "occurs": [["H", "H"]]},
    {"id": "w", "vars": ["Xuw", "Xvw"], "occurs": [["H", "H"]]}
  ]
}"#;

// an event on a single die: flipping the die to face 0 makes it occur
const FOUR_SIDED: &str = r#"{
  "rank_cap": 3,
  "variables": [
    {"id": "D", "domain": ["0", "1", "2", "3"], "probs": ["1/4", "1/4", "1/4", "1/4"]},
    {"id": "C", "domain": ["H", "T"], "probs": ["1/2", "1/2"]}
  ],
  "events": [
    {"id": "zero", "vars": ["D"], "occurs": [["0"]]},
    {"id": "heads", "vars": ["C", "D"], "occurs": [["H", "1"]]}
  ]
}"#;

#[test]
fn run_triangle_then_verify_both_ways() {
    let dir = TempDir::new().unwrap();
    let inst = write_fixture(&dir, "tri.json", &fixtures::rank3_triangle().unwrap());
    let out_dir = dir.path().join("out");
    let out = lllfix(&["run", "--instance", p(&inst), "--mode", "sequential", "-o", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let assignment = out_dir.join("assignment.json");
    let trace = out_dir.join("trace.jsonl");
    assert!(assignment.exists() && trace.exists());

    let v = lllfix(&["verify", "--instance", p(&inst), "--assignment", p(&assignment)]);
    assert_eq!(v.status.code(), Some(0));
    let v = lllfix(&["verify", "--instance", p(&inst), "--trace", p(&trace)]);
    assert_eq!(v.status.code(), Some(0), "{}", String::from_utf8_lossy(&v.stderr));
}

#[test]
fn criterion_violation_exits_2() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("bad.json");
    fs::write(&inst, SHARED_COIN_TRIANGLE).unwrap();
    let out = lllfix(&["run", "--instance", p(&inst), "-o", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["error"], "CriterionViolated");
    assert_eq!(rec["prob"], "1/4");
    assert_eq!(rec["d"], 2);
}

#[test]
fn malformed_and_missing_input_exit_2() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("broken.json");
    fs::write(&inst, "{\"rank_cap\": 3, ").unwrap();
    let out = lllfix(&["verify", "--instance", p(&inst), "--assignment", "nope.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "ParseError");
    let out = lllfix(&["run", "--instance", p(&dir.path().join("missing.json")), "-o", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seeded_shuffle_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("r.json");
    let g = lllfix(&["gen", "--family", "random-rank3", "--seed", "11", "-o", p(&inst)]);
    assert_eq!(g.status.code(), Some(0));
    let mut outputs = Vec::new();
    for k in 0..2 {
        let d = dir.path().join(format!("o{k}"));
        let out = lllfix(&[
            "run", "--instance", p(&inst), "--order", "seeded-shuffle", "--seed", "7", "--check", "every-step", "-o",
            p(&d),
        ]);
        assert_eq!(out.status.code(), Some(0));
        outputs.push((
            fs::read(d.join("assignment.json")).unwrap(),
            fs::read(d.join("trace.jsonl")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn flipped_variable_names_the_event() {
    let dir = TempDir::new().unwrap();
    let instance = format::from_json_str(FOUR_SIDED).unwrap();
    let inst = write_fixture(&dir, "die.json", &instance);
    let out_dir = dir.path().join("out");
    let out = lllfix(&["run", "--instance", p(&inst), "-o", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(out_dir.join("assignment.json")).unwrap();
    let good = parse_assignment(&instance, &text).unwrap();

    // find a single-variable change that makes some event occur
    let (bad, hit) = (0..instance.num_variables())
        .flat_map(|x| (0..instance.variable(x).domain.len()).map(move |y| (x, y)))
        .find_map(|(x, y)| {
            let mut a = good.clone();
            a[x] = y;
            let occ = verify_assignment(&instance, &a);
            (!occ.is_empty()).then_some((a, occ))
        })
        .expect("some flip violates an event");
    let map: serde_json::Map<String, Value> = bad
        .iter()
        .enumerate()
        .map(|(x, &y)| {
            let var = instance.variable(x);
            (var.id.clone(), Value::String(var.domain[y].clone()))
        })
        .collect();
    let tampered = dir.path().join("bad.json");
    fs::write(&tampered, serde_json::to_string(&map).unwrap()).unwrap();
    let v = lllfix(&["verify", "--instance", p(&inst), "--assignment", p(&tampered)]);
    assert_eq!(v.status.code(), Some(1));
    let rec = error_record(&v);
    let named: Vec<&str> = rec["events"].as_array().unwrap().iter().map(|e| e.as_str().unwrap()).collect();
    let expected: Vec<&str> = hit.iter().map(|&e| instance.event(e).id.as_str()).collect();
    assert_eq!(named, expected);
}

#[test]
fn tampered_trace_lists_failed_step() {
    let dir = TempDir::new().unwrap();
    let inst = write_fixture(&dir, "tri.json", &fixtures::coin_triangle(true).unwrap());
    let out_dir = dir.path().join("out");
    assert_eq!(lllfix(&["run", "--instance", p(&inst), "-o", p(&out_dir)]).status.code(), Some(0));
    let text = fs::read_to_string(out_dir.join("trace.jsonl")).unwrap();
    let mut lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let i = lines
        .iter()
        .position(|l| !l["writes"].as_array().unwrap().is_empty())
        .unwrap();
    for w in lines[i]["writes"].as_array_mut().unwrap() {
        w["after"] = Value::String("2/1".into());
    }
    let body: String = lines.iter().map(|l| format!("{l}\n")).collect();
    let tampered = dir.path().join("t.jsonl");
    fs::write(&tampered, body).unwrap();
    let v = lllfix(&["verify", "--instance", p(&inst), "--trace", p(&tampered)]);
    assert_eq!(v.status.code(), Some(1));
    let rec = error_record(&v);
    assert_eq!(rec["steps"][0]["step"], i);
}

#[test]
fn empty_instance_verifies() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("empty.json");
    fs::write(&inst, r#"{"rank_cap": 3, "variables": [], "events": []}"#).unwrap();
    let a = dir.path().join("a.json");
    fs::write(&a, "{}").unwrap();
    assert_eq!(lllfix(&["verify", "--instance", p(&inst), "--assignment", p(&a)]).status.code(), Some(0));
}

#[test]
fn certify_flags() {
    assert_eq!(lllfix(&["certify", "--grid", "5", "--samples", "200"]).status.code(), Some(0));
    assert_eq!(lllfix(&["certify", "--samples", "0"]).status.code(), Some(2));
}

#[test]
fn certify_defaults_pass() {
    let out = lllfix(&["certify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_eq!(lllfix(&["run", "--instance", "x", "-o", "y", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(lllfix(&["srep", "mesh", "--step", "0", "-o", "/dev/null"]).status.code(), Some(2));
}

#[test]
fn parallel_modes_write_round_logs() {
    let dir = TempDir::new().unwrap();
    let inst = dir.path().join("h.json");
    assert_eq!(
        lllfix(&["gen", "--family", "hypergraph-orientation", "--seed", "3", "-o", p(&inst)]).status.code(),
        Some(0)
    );
    let out_dir = dir.path().join("p3");
    let out = lllfix(&["run", "--instance", p(&inst), "--mode", "parallel-r3", "-o", p(&out_dir)]);
    assert_eq!(out.status.code(), Some(0));
    let log = fs::read_to_string(out_dir.join("roundlog.jsonl")).unwrap();
    let first: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["kind"], "coloring");
    assert_eq!(first["coloring"], "distance2_vertex");
    let v = lllfix(&["verify", "--instance", p(&inst), "--trace", p(&out_dir.join("trace.jsonl"))]);
    assert_eq!(v.status.code(), Some(0));

    // hyperedges of size 3 are not rank 2
    let out = lllfix(&["run", "--instance", p(&inst), "--mode", "parallel-r2", "-o", p(&dir.path().join("p2"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "NotRankTwo");

    let r2 = dir.path().join("r2.json");
    assert_eq!(lllfix(&["gen", "--family", "random-rank2", "--seed", "5", "-o", p(&r2)]).status.code(), Some(0));
    let out = lllfix(&["simulate", "--instance", p(&r2), "--mode", "parallel-r2", "-o", p(&dir.path().join("s2"))]);
    assert_eq!(out.status.code(), Some(0));
    let log = fs::read_to_string(dir.path().join("s2/roundlog.jsonl")).unwrap();
    assert!(log.starts_with("{\"kind\":\"coloring\",\"coloring\":\"edge\""));
}

#[test]
fn mesh_csv() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("m.csv");
    assert_eq!(lllfix(&["srep", "mesh", "--step", "0.25", "-o", p(&f)]).status.code(), Some(0));
    let text = fs::read_to_string(&f).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("a,b,f"));
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[0] + v[1] <= 4.0 + 1e-12 && v[2] >= -1e-12 && v[2] <= 4.0 + 1e-12);
    }
}
