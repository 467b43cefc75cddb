//! End-to-end runs of the compiled binary: golden documents, byte
//! determinism, CSV shape, raster format, and exit codes. Every expected
//! string below was produced by the binary itself and cross-checked against
//! the library's own test suite.

use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expoly"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn stdout_of(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn stderr_of(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "command {args:?} failed");
    String::from_utf8(out.stderr).expect("utf-8 stderr")
}

fn json_of(args: &[&str]) -> Value {
    serde_json::from_str(stdout_of(args).trim_end()).expect("valid JSON document")
}

fn exit_code(args: &[&str]) -> i32 {
    run(args).status.code().expect("process not killed")
}

fn temp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("expoly-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn tableau_one_point_documents_match_golden_bytes() {
    let explicit = stdout_of(&["tableau", "--scheme", "explicit", "--n", "1"]);
    assert_eq!(
        explicit,
        concat!(
            r#"{"dense":[[-1.0000000000000000,2.0000000000000000],"#,
            r#"[2.0000000000000000,-2.0000000000000000]],"#,
            r#""mu":[[1.0000000000000000]],"n":1,"nu":[1.0000000000000000],"#,
            r#""sigma":[0.44269504088896340,0.55730495911103660]}"#,
            "\n"
        )
    );
    let implicit = stdout_of(&["tableau", "--scheme", "implicit", "--n", "1"]);
    assert_eq!(
        implicit,
        concat!(
            r#"{"n":1,"nu":[1.0000000000000000],"sigma":[[0.55730495911103660]],"#,
            r#""sigma0":[0.44269504088896340]}"#,
            "\n"
        )
    );
}

#[test]
fn tableau_published_pairs_match_golden_bytes() {
    let lstable = stdout_of(&["tableau", "--scheme", "lstable2"]);
    assert_eq!(
        lstable,
        concat!(
            r#"{"A":[[0.21799590240313070,-0.065263596316772230],"#,
            r#"[0.39704463378159427,0.60295536621840570]],"#,
            r#""b":[0.39704463378159427,0.60295536621840570],"#,
            r#""c":[0.15273230608635846,1.0000000000000000],"stages":2}"#,
            "\n"
        )
    );
    let astable = json_of(&["tableau", "--scheme", "astable2"]);
    assert_eq!(astable["stages"], 3);
    assert_eq!(astable["c"][0].as_f64(), Some(0.0));
    assert_eq!(astable["c"][2].as_f64(), Some(1.0));
    let b: f64 = astable["b"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .sum();
    assert!((b - 1.0).abs() < 1e-15, "weights sum to {b}");
}

#[test]
fn output_is_byte_identical_across_runs() {
    let tableau = ["tableau", "--scheme", "implicit", "--n", "8"];
    assert_eq!(run(&tableau).stdout, run(&tableau).stdout);

    let solve = [
        "solve", "--problem", "decay", "--scheme", "explicit", "--n", "4", "--rtol", "1e-8",
        "--atol", "1e-8",
    ];
    let (a, b) = (run(&solve), run(&solve));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
}

#[test]
fn documents_are_minified_with_sorted_keys() {
    let text = stdout_of(&["tableau", "--scheme", "implicit", "--n", "2"]);
    let body = text.strip_suffix('\n').expect("single trailing newline");
    assert!(!body.contains([' ', '\t', '\n']), "document is minified");
    let _: Value = serde_json::from_str(body).expect("valid JSON");
    // Key order is alphabetical, so the fields appear in this sequence.
    let pos = |key: &str| body.find(key).unwrap_or_else(|| panic!("missing {key}"));
    assert!(pos("\"n\":") < pos("\"nu\":"));
    assert!(pos("\"nu\":") < pos("\"sigma\":"));
    assert!(pos("\"sigma\":") < pos("\"sigma0\":"));
}

#[test]
fn solve_fixed_step_csv_shape_and_endpoint() {
    let args = [
        "solve", "--problem", "decay", "--scheme", "explicit", "--n", "4", "--h", "0.01",
    ];
    let csv = stdout_of(&args);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "T,Y0");
    assert_eq!(lines[1], "0.0000000000000000,1.0000000000000000");
    // Header, initial state, then one row per accepted step.
    assert_eq!(lines.len(), 102);
    let last = lines.last().unwrap();
    let (t, y) = last.split_once(',').expect("two CSV fields");
    assert_eq!(t, "1.0000000000000000");
    let y: f64 = y.parse().unwrap();
    assert!(
        (y - (-1.0f64).exp()).abs() < 1e-4,
        "endpoint error {:e}",
        (y - (-1.0f64).exp()).abs()
    );
    assert_eq!(
        stderr_of(&args),
        "stats: accepted=100 rejected=0 rhs_evaluations=500 newton_iterations=0\n"
    );
}

#[test]
fn solve_adaptive_controller_reports_stats() {
    let args = [
        "solve", "--problem", "decay", "--scheme", "explicit", "--n", "4", "--rtol", "1e-8",
        "--atol", "1e-8",
    ];
    let csv = stdout_of(&args);
    let last = csv.lines().last().unwrap();
    let (t, y) = last.split_once(',').unwrap();
    assert_eq!(t, "1.0000000000000000");
    let err = (y.parse::<f64>().unwrap() - (-1.0f64).exp()).abs();
    assert!(err < 2e-5, "endpoint error {err:e}");
    assert_eq!(
        stderr_of(&args),
        "stats: accepted=486 rejected=0 rhs_evaluations=3888 newton_iterations=0\n"
    );
}

#[test]
fn solve_contracts_inside_the_step_bound_and_grows_beyond() {
    // The one-point scheme damps y' = -y only for h below roughly 1.794.
    let inside = stdout_of(&[
        "solve", "--problem", "decay", "--scheme", "explicit", "--n", "1", "--h", "1.5",
        "--t-end", "3.0",
    ]);
    let values: Vec<f64> = inside
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
        .collect();
    assert_eq!(values.len(), 3);
    assert!(values.windows(2).all(|w| 0.0 < w[1] && w[1] < w[0]));

    let outside = stdout_of(&[
        "solve", "--problem", "decay", "--scheme", "explicit", "--n", "1", "--h", "3.0",
        "--t-end", "3.0",
    ]);
    let last: f64 = outside
        .lines()
        .last()
        .unwrap()
        .split_once(',')
        .unwrap()
        .1
        .parse()
        .unwrap();
    assert!(last.abs() > 1.0, "step beyond the bound grew to {last}");
}

#[test]
fn solve_stiff_oscillation_with_the_l_stable_pair() {
    let args = [
        "solve", "--problem", "prothero", "--scheme", "lstable2", "--h", "0.1",
    ];
    let csv = stdout_of(&args);
    assert_eq!(csv.lines().count(), 13);
    let last = csv.lines().last().unwrap();
    assert_eq!(last, "1.0000000000000000,0.54030043760046200");
    let y: f64 = last.split_once(',').unwrap().1.parse().unwrap();
    assert!((y - 1.0f64.cos()).abs() < 1e-4);
    assert_eq!(
        stderr_of(&args),
        "stats: accepted=11 rejected=0 rhs_evaluations=86 newton_iterations=21\n"
    );
}

#[test]
fn solve_writes_the_trajectory_to_a_file() {
    let path = temp_path("solve-out.csv");
    let base = [
        "solve", "--problem", "decay", "--scheme", "explicit", "--n", "1", "--h", "0.5",
    ];
    let direct = stdout_of(&base);
    let mut args = base.to_vec();
    args.extend(["--out", path.to_str().unwrap()]);
    let out = run(&args);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), direct);
    let _ = std::fs::remove_file(&path);
}

#[test]
fn convergence_first_order_table_and_step_coefficient() {
    let args = ["convergence", "--problem", "decay", "--n", "1"];
    let table = stdout_of(&args);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[0], "H,ERROR,ORDER");
    assert!(lines[1].ends_with(','), "first row has no order yet");
    assert_eq!(
        lines[6],
        "0.0031250000000000000,6.6691500511584230e-5,1.0175471618060168"
    );
    assert_eq!(
        stderr_of(&args),
        "one-step h^2 coefficient on y' = y: -0.057305376727089110\n"
    );
}

#[test]
fn convergence_flags_exactly_reproduced_solutions() {
    let table = stdout_of(&["convergence", "--problem", "constant", "--n", "2"]);
    for (i, line) in table.lines().enumerate().skip(1) {
        assert!(line.contains(",0.0000000000000000,"), "row {i}: {line}");
        if i >= 2 {
            assert!(line.ends_with(",exact"), "row {i}: {line}");
        }
    }
}

#[test]
fn stability_raster_covers_the_left_half_plane() {
    let path = temp_path("implicit1.pbm");
    let doc = json_of(&[
        "stability", "--scheme", "implicit", "--n", "1", "--re-min", "-20", "--re-max", "4",
        "--im-min", "-10", "--im-max", "10", "--width", "120", "--height", "100", "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(doc["a_stable"], true);
    assert_eq!(doc["l_stable"], false);
    let limit = doc["limit"].as_f64().unwrap();
    assert!((limit + 0.7943497247810448).abs() < 1e-15, "limit {limit}");
    assert_eq!(doc["p"][1].as_f64(), Some(0.4426950408889634));
    assert_eq!(doc["real_axis"][0], Value::Null);

    let pbm = std::fs::read_to_string(&path).unwrap();
    let mut tokens = pbm.split_whitespace();
    assert_eq!(tokens.next(), Some("P1"));
    assert_eq!(tokens.next(), Some("120"));
    assert_eq!(tokens.next(), Some("100"));
    let pixels: Vec<&str> = tokens.collect();
    assert_eq!(pixels.len(), 120 * 100);
    // Pixel centers in columns 0..=99 have negative real part; an A-stable
    // scheme must mark every one of them stable.
    for (i, px) in pixels.iter().enumerate() {
        assert!(*px == "0" || *px == "1");
        if i % 120 < 100 {
            assert_eq!(*px, "1", "unstable left-half-plane pixel at index {i}");
        }
    }
    let _ = std::fs::remove_file(&path);
}

#[test]
fn stability_documents_classify_the_remaining_schemes() {
    let path = temp_path("others.pbm");
    let out_arg = path.to_str().unwrap();

    let explicit = json_of(&[
        "stability", "--scheme", "explicit", "--n", "1", "--out", out_arg,
    ]);
    assert_eq!(explicit["a_stable"], false);
    // Polynomial growth at infinity, reported as a null limit.
    assert_eq!(explicit["limit"], Value::Null);
    let left = explicit["real_axis"][0].as_f64().unwrap();
    assert!((left + 1.794349724781045).abs() < 1e-6, "axis edge {left}");
    assert_eq!(explicit["real_axis"][1].as_f64(), Some(0.0));

    let lstable = stdout_of(&["stability", "--scheme", "lstable2", "--out", out_arg]);
    assert!(lstable.contains(r#""l_stable":true"#));
    assert!(lstable.contains(r#""limit":0.0000000000000000"#));

    let astable = json_of(&["stability", "--scheme", "astable2", "--out", out_arg]);
    assert_eq!(astable["a_stable"], false);
    let limit = astable["limit"].as_f64().unwrap();
    assert!((limit - 0.543836522185488).abs() < 1e-15, "limit {limit}");

    let _ = std::fs::remove_file(&path);
}

#[test]
fn orthocheck_residuals_stay_at_rounding_level() {
    let doc = json_of(&["orthocheck", "--n", "8"]);
    assert_eq!(doc["n"], 8);
    assert!(doc["pair_max"].as_f64().unwrap() < 1e-13);
    assert!(doc["integral_max"].as_f64().unwrap() < 1e-13);
}

#[test]
fn exit_codes_distinguish_failure_modes() {
    assert_eq!(exit_code(&[]), 1);
    assert_eq!(exit_code(&["tableau", "--scheme", "explicit"]), 1);

    let unknown = run(&[
        "solve", "--problem", "nosuch", "--scheme", "explicit", "--n", "1", "--h", "0.1",
    ]);
    assert_eq!(unknown.status.code(), Some(1));

    let blowup = run(&[
        "solve", "--problem", "riccati", "--scheme", "explicit", "--n", "2", "--h", "0.05",
        "--t-end", "2.0",
    ]);
    assert_eq!(blowup.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&blowup.stderr).contains("non-finite"));

    let diverged = run(&[
        "solve", "--problem", "riccati", "--scheme", "implicit", "--n", "2", "--h", "0.4",
        "--t-end", "2.0", "--newton-iters", "4",
    ]);
    assert_eq!(diverged.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&diverged.stderr).contains("diverged"));

    let underflow = run(&[
        "solve", "--problem", "harmonic", "--scheme", "explicit", "--n", "2", "--rtol",
        "1e-14", "--atol", "1e-16", "--h0", "0.5", "--h-min", "0.5",
    ]);
    assert_eq!(underflow.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&underflow.stderr).contains("underflow"));
}

#[test]
fn help_and_version_exit_cleanly() {
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("tableau"));
    assert_eq!(exit_code(&["--version"]), 0);
}
