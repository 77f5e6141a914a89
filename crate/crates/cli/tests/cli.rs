use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_arbsched"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn arbsched")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", stderr(o));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SHORT: [&str; 4] = ["-o", "start=2022-03-01", "-o", "end=2022-03-10"];

fn simulate(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--out", p(out)];
    args.extend_from_slice(&SHORT);
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn window_zero_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), &["--mode", "milp-p", "--l", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error kind=validation code=1:"), "{err}");
}

#[test]
fn usage_errors_exit_one_on_one_line() {
    let o = run(&["oracle-check", "--count", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error kind=usage"));
    let o = run(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn simulate_writes_results_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = simulate(a.path(), &[]);
    let ob = simulate(b.path(), &[]);
    ok(&oa);
    ok(&ob);
    assert_eq!(stdout(&oa), stdout(&ob));
    for f in ["milp-o_results.csv", "summary.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between runs");
    }
    let text = std::fs::read_to_string(a.path().join("milp-o_results.csv")).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(a.path().join("milp-o_timings.csv").is_file());
    assert!(stdout(&oa).contains("milp-o"));
}

#[test]
fn dump_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["dump-config", "-o", "vgc=7.5", "-o", "run.l=14", "-o", "mode=milp-p"]);
    ok(&o);
    let first = stdout(&o);
    let file = dir.path().join("c.toml");
    std::fs::write(&file, &first).unwrap();
    let o = run(&["dump-config", "--config", p(&file)]);
    ok(&o);
    assert_eq!(stdout(&o), first);
    assert!(first.contains("vgc = 7.5"));
}

#[test]
fn missing_referenced_file_is_rejected() {
    let o = run(&["dump-config", "-o", "prices=/nonexistent/prices.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn oracle_check_is_deterministic() {
    let a = run(&["oracle-check", "--seed", "11", "--count", "3"]);
    let b = run(&["oracle-check", "--seed", "11", "--count", "3", "--sequential"]);
    ok(&a);
    assert_eq!(stdout(&a), stdout(&b));
    let out = stdout(&a);
    assert_eq!(out.lines().filter(|l| l.ends_with("pass")).count(), 3);
    assert!(out.contains("3 of 3 passed"));
}

#[test]
fn plot_data_series() {
    let dir = tempfile::tempdir().unwrap();
    ok(&simulate(dir.path(), &[]));
    let res = dir.path().join("milp-o_results.csv");
    let o = run(&["plot-data", "profit-daily", "--results", p(&res)]);
    ok(&o);
    assert_eq!(stdout(&o).lines().count(), 11);

    let o = run(&["plot-data", "fig9", "--results", p(&res)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for id in ["profit-daily", "reldiff", "degradation", "totals"] {
        assert!(err.contains(id), "{err}");
    }

    let o = run(&["plot-data", "totals", "--results", p(&res), "--results", p(&res)]);
    ok(&o);
    assert_eq!(stdout(&o).lines().count(), 3);
}

fn read_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn reldiff_recomputes_from_both_runs() {
    let dir = tempfile::tempdir().unwrap();
    ok(&simulate(dir.path(), &["--mode", "milp-p", "--l", "3"]));
    ok(&simulate(dir.path(), &[]));
    let pr = dir.path().join("milp-p_l3_results.csv");
    let or = dir.path().join("milp-o_results.csv");
    let out = dir.path().join("rel.csv");
    ok(&run(&["plot-data", "reldiff", "--results", p(&pr), "--results", p(&or), "--out", p(&out)]));

    let p_rows = read_rows(&pr);
    let o_rows = read_rows(&or);
    let rel = read_rows(&out);
    assert_eq!(rel.len(), p_rows.len());
    assert_eq!(rel.len(), 7);
    for r in &rel {
        let date = &r[0];
        let pv: f64 = p_rows.iter().find(|x| &x[0] == date).unwrap()[4].parse().unwrap();
        let ov: f64 = o_rows.iter().find(|x| &x[0] == date).unwrap()[4].parse().unwrap();
        assert_eq!(r[1].parse::<f64>().unwrap(), pv);
        assert_eq!(r[2].parse::<f64>().unwrap(), ov);
        if ov != 0.0 {
            assert_eq!(r[3].parse::<f64>().unwrap(), (pv - ov) / ov.abs());
        }
    }
}

#[test]
fn sweep_dedupes_and_matches_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep");
    let mut args = vec!["sweep-l", "--l", "2,2", "--audit-days", "3", "--out", p(&sweep)];
    args.extend_from_slice(&SHORT);
    let o = run(&args);
    ok(&o);
    let rows = read_rows(&sweep.join("comparison.csv"));
    assert_eq!(rows.len(), 2, "one deduplicated milp-p row plus milp-o");
    assert_eq!(&rows[0][0], "milp-p(l=2)");
    assert_eq!(&rows[0][13], "true");

    let single = dir.path().join("single");
    ok(&simulate(&single, &["--mode", "milp-p", "--l", "2"]));
    let a = std::fs::read(single.join("milp-p_l2_results.csv")).unwrap();
    let b = std::fs::read(sweep.join("milp-p_l2_results.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn export_and_solve_mps_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mps = dir.path().join("day.mps");
    let sol = dir.path().join("day.sol");
    let mut args = vec!["export-mps", "--date", "2022-03-01", "--out", p(&mps)];
    args.extend_from_slice(&SHORT);
    ok(&run(&args));
    ok(&run(&["solve-mps", p(&mps), p(&sol)]));
    let text = std::fs::read_to_string(&sol).unwrap();
    assert!(text.starts_with("status optimal"));
    let objective: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("objective "))
        .unwrap()
        .parse()
        .unwrap();

    // The first day of a MILP-O run starts fresh, so its plan is the same instance.
    ok(&simulate(dir.path(), &[]));
    let rows = read_rows(&dir.path().join("milp-o_results.csv"));
    let forecast: f64 = rows[0][3].parse().unwrap();
    assert!((forecast + objective).abs() <= 1e-6 * forecast.abs().max(1.0));

    let mut args = vec!["export-mps", "--date", "2023-01-01", "--out", p(&mps)];
    args.extend_from_slice(&SHORT);
    assert_eq!(run(&args).status.code(), Some(2));
}

#[cfg(unix)]
#[test]
fn builtin_solver_as_external_backend() {
    let dir = tempfile::tempdir().unwrap();
    let exe = PathBuf::from(env!("CARGO_BIN_EXE_arbsched"));
    let backend = format!("backend={}", exe.display());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&simulate(&a, &[]));
    ok(&simulate(&b, &["-o", &backend, "-o", "backend_args=[\"solve-mps\"]"]));
    let ra = read_rows(&a.join("milp-o_results.csv"));
    let rb = read_rows(&b.join("milp-o_results.csv"));
    for (x, y) in ra.iter().zip(&rb) {
        let (px, py): (f64, f64) = (x[4].parse().unwrap(), y[4].parse().unwrap());
        assert!((px - py).abs() <= 1e-6 * px.abs().max(1.0), "{px} vs {py}");
    }
}

#[test]
fn missing_backend_is_a_solver_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(dir.path(), &["-o", "backend=/nonexistent/solver"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn pwl_table_prints_all_cut_points() {
    let o = run(&["pwl-table", "-o", "n_int=4"]);
    ok(&o);
    assert_eq!(stdout(&o).lines().count(), 6);
}
