use std::process::{Command, Output};

fn hdivct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdivct")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// CSV rows without the walltime column, which is the only clock-dependent field.
fn without_times(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string()).collect()
}

#[test]
fn lemma1_reports_ranks() {
    let o = hdivct(&["lemma1", "--p", "2..5"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("p=3 n_i=20 dimP=10 rank=9"), "{s}");
    assert!(s.contains("p=2 n_i=6 dimP=4 rank=3"));
    assert!(s.contains("p=5 n_i=84 dimP=35 rank=34"));
    assert_eq!(s.matches("PASS").count(), 4);
}

#[test]
fn lemma1_below_two_is_a_usage_error() {
    assert_eq!(hdivct(&["lemma1", "--p", "1"]).status.code(), Some(2));
}

#[test]
fn basis_check_passes_and_is_reproducible() {
    let a = hdivct(&["basis-check", "--p", "1..2", "--seed", "5"]);
    let b = hdivct(&["basis-check", "--p", "1..2", "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let s = stdout(&a);
    assert!(s.contains("p=1 edge-face=12 face-bubble=0"));
    assert!(s.contains("total=12") && s.contains("total=30"));
    assert!(!s.contains("FAIL"));
}

#[test]
fn basis_check_degree_zero_is_a_usage_error() {
    let o = hdivct(&["basis-check", "--p", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn basis_check_writes_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.txt");
    let o = hdivct(&["basis-check", "--p", "1", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout(&o));
}

#[test]
fn mesh_info_lists_dimensions() {
    let s = stdout(&hdivct(&["mesh-info", "--levels", "2..4", "--p", "3"]));
    for d in ["dimV_3=1920", "dimV_3=15360", "dimV_3=122880"] {
        assert!(s.contains(d), "{s}");
    }
}

#[test]
fn run_writes_csv_with_orders() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let args = [
        "run",
        "--p",
        "2",
        "--levels",
        "1..2",
        "--dt",
        "0.01",
        "--steps",
        "4",
        "--mode",
        "none,local+global",
        "--out",
        path.to_str().unwrap(),
    ];
    let o = hdivct(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv, stdout(&o));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "level,L2_error,order,div_norm,div_order,dimV,mode,walltime_s");
    assert_eq!(lines.len(), 5);
    for l in &lines[1..] {
        assert_eq!(l.split(',').count(), 8, "{l}");
    }
    let level2: Vec<Vec<&str>> = lines[3..].iter().map(|l| l.split(',').collect()).collect();
    assert!(level2.iter().all(|r| r[0] == "2" && !r[2].is_empty()));
    let corrected = level2.iter().find(|r| r[6] == "local+global").unwrap();
    assert!(corrected[3].parse::<f64>().unwrap() < 1e-5);

    let again = hdivct(&args);
    let csv2 = std::fs::read_to_string(&path).unwrap();
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(without_times(&csv), without_times(&csv2));
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\np = 2\nlevels = 1\nsteps = 2\ndt = 0.01\nmode = local\n").unwrap();
    let o = hdivct(&["run", "--config", cfg.to_str().unwrap(), "--mode", "none"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    let row: Vec<&str> = s.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    assert_eq!(row[5], "108", "p=2 from the file gives 108 dofs at level 1");
    assert_eq!(row[6], "none", "flag overrides the file");
}

#[test]
fn pretty_table() {
    let s = stdout(&hdivct(&["run", "--p", "1", "--levels", "1", "--steps", "1", "--dt", "0.01", "--pretty"]));
    assert!(s.lines().next().unwrap().contains("L2 error"));
    assert!(s.lines().nth(1).unwrap().contains("none"));
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        &["run", "--p", "0"][..],
        &["run", "--mode", "both"],
        &["run", "--levels", "x"],
        &["run", "--integration", "magic"],
        &["run", "--bogus"],
        &["frobnicate"],
    ] {
        assert_eq!(hdivct(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn solver_failure_flushes_abort_marker() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("abort.csv");
    let o = hdivct(&[
        "run",
        "--p",
        "1",
        "--levels",
        "1",
        "--steps",
        "1",
        "--dt",
        "0.01",
        "--mode",
        "global-full",
        "--full-tol",
        "1e-300",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert!(csv.trim_end().ends_with("# ABORTED"), "{csv}");
}

#[test]
fn thread_cap_is_read_from_the_environment() {
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_hdivct"))
            .args(["lemma1", "--p", "2"])
            .env("HDIVCT_THREADS", v)
            .output()
            .unwrap()
    };
    assert_eq!(run("1").status.code(), Some(0));
    assert_eq!(run("0").status.code(), Some(0));
    assert_eq!(run("many").status.code(), Some(2));
}
