//! Command-line behaviour: exit codes, output files and problem files.

use std::path::PathBuf;

use polyrecourse::cli::{self, ProblemFile};
use polyrecourse::fixtures;
use polyrecourse::measures::MeasureJson;
use polyrecourse::sosrelax::{build_lower_approx_program, Order, Truncation};
use serde_json::Value;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("polyrecourse").chain(args.iter().copied());
    let code = cli::run(argv, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn scratch_dir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("polyrecourse-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn json_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn shipped_problem_files_match_builtins() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    for fx in fixtures::all().unwrap() {
        let path = dir.join(format!("{}.json", fx.name));
        let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let mut want = ProblemFile::from_fixture(&fx).to_json();
        want.push('\n');
        assert!(text == want, "{} is stale; rerun the export_problem_files example", path.display());
        let built = ProblemFile::from_json(&text).unwrap().build().unwrap();
        assert_eq!(built.name, fx.name);
    }
}

#[test]
fn loose_epsilon_converges_after_one_iteration() {
    let dir = scratch_dir("loose");
    let o = run(&["solve", "builtin:cubic_interval", "--order", "1,2,2", "--epsilon", "1e9", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let rep = json_value(&std::fs::read_to_string(dir.join("report.json")).unwrap());
    assert_eq!(rep["iterations"], 1);
    assert_eq!(rep["status"], "converged");
    let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2, "{trace}");
}

#[test]
fn iteration_cap_exits_with_three() {
    let o = run(&["solve", "builtin:cubic_interval", "--order", "1,2,2", "--epsilon", "1e-12", "--max-iters", "1", "--json"]);
    assert_eq!(o.code, 3, "{}", o.stderr);
    assert_eq!(json_value(&o.stdout)["status"], "max-iterations");
}

#[test]
fn identical_runs_write_identical_traces() {
    let traces: Vec<String> = ["a", "b"]
        .iter()
        .map(|tag| {
            let dir = scratch_dir(&format!("det-{tag}"));
            let o = run(&[
                "solve",
                "builtin:cubic_interval",
                "--order",
                "2,2,2",
                "--max-iters",
                "3",
                "--epsilon",
                "1e-9",
                "--out",
                dir.to_str().unwrap(),
            ]);
            assert!(o.code == 0 || o.code == 3, "{}", o.stderr);
            std::fs::read_to_string(dir.join("trace.csv")).unwrap()
        })
        .collect();
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn malformed_file_exits_with_five_and_a_pointer() {
    let dir = scratch_dir("schema");
    let path = dir.join("bad.json");
    let mut v = json_value(&ProblemFile::from_fixture(&fixtures::cubic_interval().unwrap()).to_json());
    v["F"][0]["coeff"] = Value::String("one".into());
    std::fs::write(&path, v.to_string()).unwrap();
    let o = run(&["eval", path.to_str().unwrap(), "--x", "0"]);
    assert_eq!(o.code, 5);
    assert!(o.stderr.contains("/F/0/coeff"), "{}", o.stderr);
}

#[test]
fn weights_not_summing_to_one_are_a_schema_error() {
    let dir = scratch_dir("weights");
    let path = dir.join("bad.json");
    let mut v = json_value(&ProblemFile::from_fixture(&fixtures::bilinear_two_scenarios().unwrap()).to_json());
    v["mu"]["weights"] = serde_json::json!([0.5, 0.6]);
    std::fs::write(&path, v.to_string()).unwrap();
    let o = run(&["approx", path.to_str().unwrap(), "--per-scenario"]);
    assert_eq!(o.code, 5, "{}", o.stderr);
}

#[test]
fn unknown_flag_exits_with_five() {
    assert_eq!(run(&["solve", "builtin:cubic_interval", "--no-such-flag"]).code, 5);
    assert_eq!(run(&["solve", "builtin:no_such_problem"]).code, 5);
}

#[test]
fn infeasible_first_stage_point_exits_with_four() {
    let o = run(&["eval", "builtin:cubic_interval", "--x", "1.5"]);
    assert_eq!(o.code, 4);
    assert!(o.stderr.contains("violated constraints [0]"), "{}", o.stderr);
}

#[test]
fn cubic_expectation_matches_independent_values() {
    // min over y of the cubic on [x - xi, x + xi] by endpoint and stationary
    // point enumeration, averaged in double precision (numpy)
    for (scheme, want) in [("grid:100", -0.5959511742), ("endgrid:100", -0.6115961324)] {
        let o = run(&["eval", "builtin:cubic_interval", "--x", "-0.3555", "--scheme", scheme, "--json"]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        let v = json_value(&o.stdout)["value"].as_f64().unwrap();
        assert!((v - want).abs() < 1e-6, "{scheme}: {v}");
    }
}

#[test]
fn quadratic_program_expectation_has_closed_form() {
    // y1 = 10 - x1 and y2..y10 = 0 are optimal, so f2 = -xi (10 - x1) and
    // the midpoint rule on [0, 1] is exact for it. The rounded point sits
    // 2e-5 outside the unit disk.
    let x = [-0.8033, 0.5956];
    let o = run(&["eval", "builtin:ten_dim_qp", "--x", "-0.8033,0.5956", "--tol", "1e-4", "--json"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v = json_value(&o.stdout)["value"].as_f64().unwrap();
    let want = x[0] * x[1] - 0.5 * (10.0 - x[0]);
    assert!((v - want).abs() < 1e-5, "{v} vs {want}");
    assert!((v + 5.8801).abs() < 1e-4, "{v}");
}

#[test]
fn dirac_measure_exact_equals_one_point_grid() {
    let dir = scratch_dir("dirac");
    let path = dir.join("dirac.json");
    let mut file = ProblemFile::from_fixture(&fixtures::cubic_interval().unwrap());
    file.mu = Some(MeasureJson::Atomic {
        blocks: vec![("xi".into(), 1)],
        points: vec![vec![0.3]],
        weights: vec![1.0],
    });
    std::fs::write(&path, file.to_json()).unwrap();
    let value = |scheme: &str| {
        let o = run(&["eval", path.to_str().unwrap(), "--x", "0.2", "--scheme", scheme, "--json"]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        json_value(&o.stdout)["value"].as_f64().unwrap()
    };
    assert_eq!(value("exact"), value("grid:1"));
}

#[test]
fn approximation_round_trips_through_eval() {
    let dir = scratch_dir("roundtrip");
    let o = run(&["approx", "builtin:cubic_interval", "--order", "2,3,3", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let csv = std::fs::read_to_string(dir.join("approx_grid.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x1,xi1,p"));

    let fx = fixtures::cubic_interval().unwrap();
    let nu = fx.problem.nu.clone().unwrap();
    let p = build_lower_approx_program(&fx.problem.model, &nu, &Order::parse("2,3,3").unwrap(), &Truncation::Full)
        .unwrap()
        .solve(&Default::default())
        .unwrap()
        .p;
    let ftilde = fx.problem.mu.expected_polynomial(&p).unwrap();
    let approx = dir.join("approx.json");
    for x in [-1.0, -0.3555, 0.0, 0.7] {
        let xs = x.to_string();
        let o = run(&["eval", "builtin:cubic_interval", "--x", &xs, "--surrogate", approx.to_str().unwrap(), "--json"]);
        assert_eq!(o.code, 0, "{}", o.stderr);
        let v = json_value(&o.stdout)["value"].as_f64().unwrap();
        let want = ftilde.evaluate_blocks(&[("x", &[x])]).unwrap();
        assert!((v - want).abs() < 1e-10, "x = {x}: {v} vs {want}");
    }
}

#[test]
fn per_scenario_approximation_writes_one_piece_per_scenario() {
    let dir = scratch_dir("scenarios");
    let o = run(&["approx", "builtin:bilinear_two_scenarios", "--order", "2", "--per-scenario", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let rep = json_value(&std::fs::read_to_string(dir.join("approx.json")).unwrap());
    assert_eq!(rep["kind"], "per-scenario");
    assert_eq!(rep["pieces"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(dir.join("approx_grid.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x1,p1,p2"));
    assert_eq!(csv.lines().count(), 102);
}

#[test]
fn stats_prints_program_sizes() {
    let o = run(&["stats", "builtin:polytope_recourse", "--order", "2,4,3", "--json"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let s = json_value(&o.stdout);
    assert_eq!(s["scalar_vars"], 210);
    assert_eq!(s["matrix_blocks"], 7);
    assert_eq!(s["scalarized_matrix_vars"], 1350);
    assert_eq!(s["constraints"], 1365);
}

#[test]
fn finite_support_solve_from_the_command_line() {
    let o = run(&["solve", "builtin:bilinear_two_scenarios", "--json"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let rep = json_value(&o.stdout);
    assert_eq!(rep["algorithm"], "finite-support");
    let vm = rep["v_minus"].as_f64().unwrap();
    let vp = rep["v_plus"].as_f64().unwrap();
    assert!(vm <= vp + 1e-6 && vp - vm <= rep["config"]["epsilon"].as_f64().unwrap());
}
