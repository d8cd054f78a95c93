use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rmab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmab")).args(args).output().unwrap()
}

fn bundled(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name).display().to_string()
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const BUNDLED: [&str; 4] = ["breakdown.toml", "mixed_grid.toml", "nonpreemptive_pair.toml", "classical_two_arm.toml"];

#[test]
fn bundled_scenarios_validate() {
    for name in BUNDLED {
        let o = rmab(&["validate", "--scenario", &bundled(name)]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert!(stdout(&o).contains("ok"));
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = rmab(&["validate", "--scenario", &bundled("breakdown.toml"), "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(rmab(&["explode"]).status.code(), Some(2));
    assert_eq!(rmab(&["--help"]).status.code(), Some(0));
}

#[test]
fn malformed_file_gets_a_line_number() {
    let path = scratch("malformed.toml");
    std::fs::write(&path, "beta = 1.0\ndelta = 0.1\n\n[[arm]]\nrates = [1.0\n").unwrap();
    let o = rmab(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));

    std::fs::write(&path, "beta = 1.0\ndelta = 0.1\ngamma = 3\n").unwrap();
    let o = rmab(&["index", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn invalid_scenario_and_bad_inputs_exit_2() {
    let path = scratch("invalid.toml");
    std::fs::write(&path, "beta = 1.0\ndelta = 0.1\nhorizon = 5\n\n[[arm]]\nrates = [1.0, 2.0]\nkernel = [[0.5, 0.4], [0.0, 1.0]]\n").unwrap();
    let o = rmab(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("row-stochastic") && err.contains("horizon-tail"), "{err}");

    let s = bundled("breakdown.toml");
    assert_eq!(rmab(&["simulate", "--scenario", &s, "--policy", "fixed:9"]).status.code(), Some(2));
    assert_eq!(rmab(&["simulate", "--scenario", &s, "--policy", "best"]).status.code(), Some(2));
    assert_eq!(rmab(&["index", "--scenario", &s, "--tol", "-1"]).status.code(), Some(2));
}

#[test]
fn missing_file_is_a_runtime_error() {
    let o = rmab(&["validate", "--scenario", "/definitely/not/here.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn index_csv_layout() {
    let out = scratch("index.csv");
    let o = rmab(&["index", "--scenario", &bundled("breakdown.toml"), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# rmab index v1"));
    assert_eq!(lines.next(), Some("arm_id,state_id,switchable,index_value,bisection_iterations"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    // repair states carry no index of their own
    let repair = rows.iter().find(|r| r[0] == "0" && r[1] == "2").unwrap();
    assert_eq!(repair[2], "false");
    assert_eq!(repair[3], "");
    let running: f64 = rows[0][3].parse().unwrap();
    assert!(running > 0.0 && running <= 3.0);
}

#[test]
fn simulate_is_reproducible_and_writes_csv() {
    let s = bundled("mixed_grid.toml");
    let (a, b, tr) = (scratch("sim_a.csv"), scratch("sim_b.csv"), scratch("trace.csv"));
    for out in [&a, &b] {
        let o = rmab(&[
            "simulate", "--scenario", &s, "--policy", "gittins", "--paths", "3000", "--seed", "5", "--out",
            out.to_str().unwrap(), "--trace", tr.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# rmab simulate v1"));
    assert_eq!(lines.next(), Some("policy,n_paths,mean,se,reward_0,reward_1,occupancy_0,occupancy_1"));
    assert!(lines.next().unwrap().starts_with("gittins,3000,"));

    let trace = std::fs::read_to_string(&tr).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("# rmab trace v1"));
    assert!(lines.next().unwrap().starts_with("t,arm,state,switchable,decision,step_reward,discounted_cumulative,local_time_0"));
    assert_eq!(lines.count(), 240);

    let o = rmab(&["simulate", "--scenario", &s, "--paths", "10", "--horizon", "20"]);
    assert!(stdout(&o).contains("warning"));
}

#[test]
fn oracle_and_compare_report_small_gaps() {
    let s = bundled("nonpreemptive_pair.toml");
    let out = scratch("oracle.csv");
    let o = rmab(&["oracle", "--scenario", &s, "--format", "csv", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# rmab oracle v1\nquantity,value,gap_to_optimal\noptimal,"));
    assert_eq!(stdout(&o), text);

    let o = rmab(&["compare", "--scenario", &bundled("breakdown.toml")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = stdout(&o);
    let row = table.lines().find(|l| l.starts_with("gittins")).unwrap();
    let gap: f64 = row.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!(gap < 1e-8, "{table}");
    assert!(table.contains("round-robin"));
}
