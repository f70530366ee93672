use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use citest_cli::report::{ReportDocument, Run};
use tempfile::TempDir;

fn citest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_citest"))
        .args(args)
        .env_remove("CITEST_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Small deterministic dataset: y depends on x1 only.
fn write_data(dir: &Path, name: &str, sep: &str) -> PathBuf {
    let mut text = ["y", "z", "x1"].join(sep) + "\n";
    let mut state = 12345u64;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..60 {
        let x = next();
        let z = 0.3 * x + 0.7 * next();
        let y = (5.0 * x).sin() + next() - 0.5;
        text.push_str(&[y.to_string(), z.to_string(), x.to_string()].join(sep));
        text.push('\n');
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn doc(o: &Output) -> ReportDocument {
    assert!(o.status.success(), "stderr: {}", stderr(o));
    ReportDocument::from_json(&stdout(o)).expect("valid report")
}

#[test]
fn defaults_produce_complete_report_with_config_echo() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "d.csv", ",");
    let out = citest(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--bootstrap",
        "99",
    ]);
    let d = doc(&out);
    assert_eq!(d.tool, "citest");
    match d.run {
        Run::Test { config, result } => {
            assert_eq!(config.x, vec!["x1".to_string()]);
            assert_eq!(config.test.bootstrap, 99);
            assert_eq!(result.n, 60);
            assert!((0.0..=1.0).contains(&result.p_value));
        }
        Run::Simulate { .. } => panic!("wrong command"),
    }
}

#[test]
fn tab_separated_input_matches_comma_separated() {
    let dir = TempDir::new().unwrap();
    let c = write_data(dir.path(), "d.csv", ",");
    let t = write_data(dir.path(), "d.tsv", "\t");
    let run = |p: &Path| match doc(&citest(&[
        "test",
        "--data",
        p.to_str().unwrap(),
        "--bootstrap",
        "49",
    ]))
    .run
    {
        Run::Test { result, .. } => result.statistic,
        Run::Simulate { .. } => unreachable!(),
    };
    assert_eq!(run(&c), run(&t));
}

#[test]
fn alpha_outside_unit_interval_is_rejected() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "d.csv", ",");
    let out = citest(&["test", "--data", data.to_str().unwrap(), "--alpha", "1.5"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("alpha"), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
}

#[test]
fn repeated_runs_and_thread_counts_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "d.csv", ",");
    let p = data.to_str().unwrap();
    let base = ["test", "--data", p, "--bootstrap", "199", "--seed", "7"];
    let first = stdout(&citest(&base));
    assert_eq!(first, stdout(&citest(&base)));
    for threads in ["1", "3"] {
        let mut args = base.to_vec();
        args.extend(["--threads", threads]);
        assert_eq!(first, stdout(&citest(&args)), "threads {threads}");
    }
}

#[test]
fn seed_env_var_sets_default_and_flag_wins() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "d.csv", ",");
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_citest"));
        cmd.args(["test", "--data", data.to_str().unwrap(), "--bootstrap", "9"]);
        cmd.env_remove("CITEST_SEED");
        if let Some(e) = env {
            cmd.env("CITEST_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        match doc(&cmd.output().unwrap()).run {
            Run::Test { config, .. } => config.test.seed,
            Run::Simulate { .. } => unreachable!(),
        }
    };
    assert_eq!(run(None, None), citest_core::bootstrap::DEFAULT_SEED);
    assert_eq!(run(Some("99"), None), 99);
    assert_eq!(run(Some("99"), Some("5")), 5);
}

#[test]
fn missing_column_and_bad_cell_are_reported() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "d.csv", ",");
    let out = citest(&["test", "--data", data.to_str().unwrap(), "--x", "age"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("\"age\""), "{}", stderr(&out));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y,z,x1\n1,2,3\n4,5,6\n7,oops,9\n").unwrap();
    let out = citest(&["test", "--data", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(
        err.contains("row 3") && err.contains("\"z\"") && err.contains("oops"),
        "{err}"
    );
}

#[test]
fn probit_on_constant_response_fails() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("ones.csv");
    let rows: String = (0..20)
        .map(|i| format!("{},1,{}\n", i as f64 * 0.1, (i * 7 % 20) as f64))
        .collect();
    std::fs::write(&path, format!("y,z,x1\n{rows}")).unwrap();
    let out = citest(&[
        "test",
        "--data",
        path.to_str().unwrap(),
        "--z-kind",
        "discrete",
        "--estimate-theta",
        "probit",
    ]);
    assert!(!out.status.success());
}

#[test]
fn replay_reproduces_the_report() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), "d.csv", ",");
    let out = citest(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--bootstrap",
        "99",
        "--beta",
        "ind",
        "--h-const2",
        "0.5",
    ]);
    let report = dir.path().join("r.json");
    std::fs::write(&report, stdout(&out)).unwrap();
    let again = citest(&["test", "--replay", report.to_str().unwrap()]);
    assert_eq!(stdout(&out), stdout(&again));
}

fn sim(args: &[&str]) -> ReportDocument {
    let mut all = vec![
        "simulate",
        "--n",
        "30",
        "--reps",
        "2",
        "--bootstrap",
        "9",
        "--grid",
        "3",
    ];
    all.extend(args);
    doc(&citest(&all))
}

fn sim_report(d: &ReportDocument) -> &citest_core::simulate::SimReport {
    match &d.run {
        Run::Simulate { report, .. } => report,
        Run::Test { .. } => panic!("wrong command"),
    }
}

#[test]
fn preset_cell_counts() {
    let t1 = sim(&["--preset", "table1"]);
    let r = sim_report(&t1);
    assert_eq!(r.cells.len(), 32);
    assert!(r.cells.iter().all(|c| c.levels.len() == 3));

    let t3 = sim(&["--preset", "table3"]);
    assert_eq!(sim_report(&t3).cells.len(), 32);
    let t3_exp = sim(&["--preset", "table3", "--beta", "exp"]);
    assert_eq!(sim_report(&t3_exp).cells.len(), 16);
}

#[test]
fn table3_text_layout_has_sixteen_bandwidth_rows() {
    let out = citest(&[
        "simulate",
        "--preset",
        "table3",
        "--n",
        "30",
        "--reps",
        "2",
        "--bootstrap",
        "9",
        "--grid",
        "3",
        "--format",
        "table",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let body: Vec<&str> = text
        .lines()
        .skip(3)
        .filter(|l| !l.starts_with("warning"))
        .collect();
    assert_eq!(body.len(), 16, "{text}");
    assert!(text.lines().nth(2).unwrap().contains("h1"));
}

#[test]
fn text_table_shows_the_json_values() {
    let args = [
        "--design",
        "A1",
        "--design",
        "B2",
        "--a",
        "0.2",
        "--h-const",
        "0.5",
        "--h-const",
        "1",
    ];
    let json = sim(&args);
    let mut targs = vec![
        "simulate",
        "--n",
        "30",
        "--reps",
        "2",
        "--bootstrap",
        "9",
        "--grid",
        "3",
        "--format",
        "table",
    ];
    targs.extend(args);
    let text = stdout(&citest(&targs));
    let shown: Vec<f64> = text
        .lines()
        .skip(3)
        .flat_map(|l| {
            l.split_whitespace()
                .skip(1)
                .filter_map(|t| t.parse::<f64>().ok())
                .collect::<Vec<_>>()
        })
        .collect();
    for cell in &sim_report(&json).cells {
        assert!(
            shown.contains(&cell.rates[0]),
            "{} missing from\n{text}",
            cell.rates[0]
        );
    }
}

#[test]
fn simulation_is_identical_across_thread_counts() {
    let base = [
        "simulate",
        "--design",
        "C",
        "--design",
        "D1",
        "--n",
        "40",
        "--reps",
        "6",
        "--bootstrap",
        "19",
    ];
    let one = stdout(&citest(&[&base[..], &["--threads", "1"]].concat()));
    let four = stdout(&citest(&[&base[..], &["--threads", "4"]].concat()));
    assert!(!one.is_empty());
    assert_eq!(one, four);
}

#[test]
fn simulate_validation_errors() {
    let zero = citest(&["simulate", "--preset", "table1", "--reps", "0"]);
    assert!(!zero.status.success());
    assert!(stderr(&zero).contains("reps"));
    let unknown = citest(&["simulate", "--design", "E7"]);
    assert!(!unknown.status.success());
    assert!(stderr(&unknown).contains("unknown design"));
    let none = citest(&["simulate"]);
    assert!(!none.status.success());
}

#[test]
fn report_round_trips_losslessly() {
    let d = sim(&[
        "--design",
        "D2",
        "--kappa",
        "1",
        "--alpha",
        "0.01",
        "--alpha",
        "0.1",
        "--functional",
        "cm2",
    ]);
    let text = d.to_json();
    let back = ReportDocument::from_json(&text).unwrap();
    assert_eq!(back, d);
    assert_eq!(back.to_json(), text);
}
