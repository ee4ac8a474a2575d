use std::process::{Command, Output};

const BM: &str = r#"{"kind":"brownian","mu":1,"sigma":1.4142135623730951}"#;
const CL: &str = r#"{"kind":"cramer_lundberg","c":1,"eta":1,"alpha":2}"#;

fn levocc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levocc")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value_line(o: &Output) -> f64 {
    let s = stdout(o);
    let line = s.lines().find(|l| l.starts_with("value")).expect("value row");
    line.split_whitespace().nth(1).unwrap().parse().unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn tmp(name: &str) -> std::path::PathBuf {
    std::env::temp_dir().join(format!("levocc-{}-{name}", std::process::id()))
}

#[test]
fn eval_erlang2_headline() {
    let o = levocc(&["--model", BM, "eval", "ruin_prob_erlang2", "--x=0", "--lambda=2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((value_line(&o) - 0.25).abs() < 1e-12);
    assert!(stdout(&o).contains("lambda"));
}

#[test]
fn eval_at_upper_barrier_is_one() {
    let o = levocc(&["--model", BM, "eval", "joint_lt_upcross", "--x=1", "--b=1", "--q=0", "--p=2", "--lambda=2"]);
    assert!(o.status.success());
    assert_eq!(value_line(&o), 1.0);
}

#[test]
fn eval_pole_exits_3() {
    // Φ_{q+λ} = 1 for this model at q + λ = 2.
    let o = levocc(&[
        "--model", BM, "eval", "gs_lt_two_sided", "--x=0.5", "--b=1", "--q=0", "--p=1", "--lambda=2", "--theta=1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("pole"));
}

#[test]
fn usage_errors_exit_2() {
    let unknown = levocc(&["--model", BM, "eval", "no_such_identity"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr(&unknown).contains("ruin_prob_erlang2"));
    let extra = levocc(&["--model", BM, "eval", "ruin_prob_erlang2", "--x=0", "--lambda=2", "--p=1"]);
    assert_eq!(extra.status.code(), Some(2));
    let missing = levocc(&["--model", BM, "eval", "ruin_prob_erlang2", "--x=0"]);
    assert_eq!(missing.status.code(), Some(2));
    let no_model = levocc(&["eval", "ruin_prob_erlang2", "--x=0", "--lambda=2"]);
    assert_eq!(no_model.status.code(), Some(2));
}

#[test]
fn model_file_is_read() {
    let path = tmp("model.json");
    std::fs::write(&path, CL).unwrap();
    let o = levocc(&["--model", path.to_str().unwrap(), "eval", "ruin_prob_sum_exp", "--x=0", "--p=1", "--lambda=1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("cramer_lundberg"));
    std::fs::remove_file(path).ok();
}

#[test]
fn registry_is_reachable_from_eval() {
    let names = levy_occupation::identity::names();
    let listed = stderr(&levocc(&["--model", BM, "eval", "?"]));
    for name in &names {
        assert!(listed.contains(name), "{name} missing from listing");
        // A missing-parameter usage error proves the name dispatches.
        let o = levocc(&["--model", BM, "eval", name]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(stderr(&o).contains("missing parameter"), "{name}: {}", stderr(&o));
    }
}

#[test]
fn validate_passes_and_reports_json() {
    let out = tmp("report.json");
    let o = levocc(&[
        "--model", CL, "--reps", "200000", "--seed", "5", "--out", out.to_str().unwrap(),
        "validate", "ruin_prob_sum_exp", "--x=0", "--p=1", "--lambda=2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["report"]["verdict"], "pass");
    assert!(doc["report"]["z_score"].as_f64().unwrap().abs() <= 3.0);
    assert!(stdout(&o).contains("verdict"));
    std::fs::remove_file(out).ok();
}

#[test]
fn validate_one_replication_is_informational() {
    let o = levocc(&["--model", CL, "--reps", "1", "validate", "ruin_prob_sum_exp", "--x=0", "--p=1", "--lambda=1"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["report"]["verdict"], "informational");
}

#[test]
fn validate_without_counterpart_exits_2() {
    let o = levocc(&["--model", BM, "validate", "gamma_lambda", "--lambda=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("validatable"));
    assert!(stderr(&o).contains("ruin_prob_erlang2"));
    let o = levocc(&["--model", BM, "validate", "gerber_shiu_density", "--x=0", "--b=1", "--y=-0.5", "--q=0", "--p=1", "--lambda=2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_erlang_n_is_nonincreasing() {
    let o = levocc(&["--model", BM, "sweep", "ruin_prob_erlang_n", "--x=0", "--lambda=1", "--n=1,2,3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    let v = header.iter().position(|h| h == "value").unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[1][v] <= w[0][v]));
}

#[test]
fn sweep_single_point_matches_eval() {
    let args = ["--x=0", "--lambda=2"];
    let e = levocc(&[&["--model", BM, "eval", "ruin_prob_erlang2"][..], &args].concat());
    let s = levocc(&[&["--model", BM, "sweep", "ruin_prob_erlang2"][..], &args].concat());
    let (header, rows) = csv_rows(&stdout(&s));
    let v = header.iter().position(|h| h == "value").unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][v], value_line(&e));
}

#[test]
fn sweep_csv_round_trips_bit_exactly() {
    let o = levocc(&["--model", CL, "sweep", "ruin_prob_sum_exp", "--x=0:1:4", "--p=0.5,2", "--lambda=1.3"]);
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["lambda", "p", "x", "value"]);
    assert_eq!(rows.len(), 8);
    let model = serde_json::from_str(CL).unwrap();
    for row in &rows {
        let params = header[..3].iter().cloned().zip(row.iter().copied()).collect();
        let e = levy_occupation::identity::evaluate(model, "ruin_prob_sum_exp", &params, None).unwrap();
        assert_eq!(e.value.to_bits(), row[3].to_bits());
    }
    // Lexicographic order: p slower than x.
    assert_eq!(rows[0][1], 0.5);
    assert_eq!(rows[3][1], 0.5);
    assert_eq!(rows[4][1], 2.0);
    assert!(rows[0][2] < rows[1][2]);
}

#[test]
fn sweep_fixed_delay_sequence() {
    let o = levocc(&["--model", CL, "--reps", "20000", "sweep", "fixed_delay_approx", "--x=0", "--r=1", "--n=1,2,4,8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 4);
    let v = header.iter().position(|h| h == "value").unwrap();
    assert!(rows.iter().all(|r| r[v] > 0.0 && r[v] < 1.0));
}

#[test]
fn empty_grids_exit_2() {
    let o = levocc(&["--model", BM, "sweep", "ruin_prob_erlang2", "--x=0:1:0", "--lambda=2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = levocc(&["--model", BM, "dist", "--x=0", "--lambda=2", "--r="]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dist_atom_and_normalization() {
    let o = levocc(&["--model", BM, "dist", "--x=0", "--lambda=2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let atom: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# atom "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((atom - 0.5).abs() < 1e-12);
    let total: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# total atom+integral "))
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((total - 1.0).abs() < 1e-2, "{total}");
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["r", "density"]);
    assert!(rows.iter().all(|r| r[1] >= 0.0));
}

#[test]
fn dist_requires_positive_drift() {
    let o = levocc(&["--model", r#"{"kind":"brownian","mu":-1,"sigma":1}"#, "dist", "--x=0", "--lambda=2"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn registry_matches_published_names() {
    let expected = [
        "joint_lt_upcross", "lt_occupation_inf", "occupation_law", "ruin_prob_sum_exp", "gs_lt_two_sided",
        "gs_lt_infinite", "up_cross_three_barrier", "up_cross_before_ruin", "gerber_shiu_density",
        "lt_occupation_exp_horizon", "ruin_prob_erlang2", "gs_density_e2", "gs_lt_two_sided_e2",
        "gs_lt_infinite_e2", "up_cross_e2", "ruin_prob_erlang_n", "fixed_delay_approx", "T0_joint_lt",
        "upcross_before_T0_two_sided", "upcross_before_T0", "delayed_W_functional",
    ];
    assert_eq!(levy_occupation::identity::names(), expected);
}
