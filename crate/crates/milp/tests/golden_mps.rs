use std::path::PathBuf;

use arb_milp::{parse_mps, solve_lp, write_mps, MilpInstance, MpsFormat, Relation, Status};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

/// min x  s.t.  x >= 2,  0 <= x <= 10.
fn one_var() -> MilpInstance {
    let mut inst = MilpInstance::new("ONEVAR");
    let x = inst.add_continuous("X", 0.0, 10.0);
    inst.add_constraint("LIM", vec![(x, 1.0)], Relation::Ge, 2.0);
    inst.set_objective(x, 1.0);
    inst
}

#[test]
fn fixed_output_matches_golden_file() {
    let golden = std::fs::read_to_string(data("one_var.mps")).unwrap();
    let text = write_mps(&one_var(), MpsFormat::Fixed).unwrap();
    assert_eq!(text, golden);
}

#[test]
fn golden_file_parses_and_solves() {
    let golden = std::fs::read_to_string(data("one_var.mps")).unwrap();
    let inst = parse_mps(&golden).unwrap();
    assert_eq!(inst.variables.len(), 1);
    assert_eq!(inst.constraints.len(), 1);
    let s = solve_lp(&inst).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert_eq!(s.values, vec![2.0]);
    assert_eq!(s.objective, 2.0);
}
