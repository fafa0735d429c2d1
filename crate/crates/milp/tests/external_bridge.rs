//! External solver bridge driven by a stand-in shell "solver".
#![cfg(unix)]

use std::os::unix::fs::PermissionsExt;

use lngplan_milp::{Comparator, ExternalSolver, ModelBuilder, Sense};

fn knapsack() -> lngplan_milp::MilpModel {
    let mut b = ModelBuilder::new(Sense::Maximize);
    let x = b.binary("take[1]").unwrap();
    let y = b.binary("take[2]").unwrap();
    b.constraint("cap", [(x, 5.0), (y, 4.0)], Comparator::Le, 8.0);
    b.objective(x, 6.0);
    b.objective(y, 10.0);
    b.finish()
}

fn script(dir: &std::path::Path, body: &str) -> String {
    let path = dir.join("fake_solver.sh");
    std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn reads_back_solution_written_by_command() {
    let dir = tempfile::tempdir().unwrap();
    // The fake solver checks the LP exists and writes a fixed answer.
    let prog = script(
        dir.path(),
        "test -s \"$1\" || exit 3\nprintf '# obj 10\\ntake_1_ 0\\ntake_2_ 1\\n' > \"$2\"",
    );
    let solver = ExternalSolver {
        program: prog,
        args: vec!["{lp}".into(), "{sol}".into()],
    };
    let sol = solver.solve_in(&knapsack(), dir.path(), 1e-6).unwrap();
    assert_eq!(sol.values, vec![0.0, 1.0]);
    assert_eq!(sol.objective, 10.0);
    let lp = std::fs::read_to_string(dir.path().join("model.lp")).unwrap();
    assert!(lp.contains("Binaries"));
}

#[test]
fn infeasible_external_answer_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let prog = script(dir.path(), "printf 'take_1_ 1\\ntake_2_ 1\\n' > \"$2\"");
    let solver = ExternalSolver {
        program: prog,
        args: vec!["{lp}".into(), "{sol}".into()],
    };
    assert!(solver.solve_in(&knapsack(), dir.path(), 1e-6).is_err());
}

#[test]
fn failing_command_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let prog = script(dir.path(), "exit 1");
    let solver = ExternalSolver {
        program: prog,
        args: vec![],
    };
    assert!(solver.solve_in(&knapsack(), dir.path(), 1e-6).is_err());
}
