// SPDX-License-Identifier: Apache-2.0

use drayage_core::lp::{solve_lp_with, LinearProgram, LpStatus, Sense, SolverOptions};

/// Reads the hex-float text format of `tests/data/*.lp`: `#` comment lines, a `vars rows`
/// header, one `cost lower upper` line per column, then one
/// `sense rhs nnz (col coef)*` line per row with sense 0 (<=), 1 (=), 2 (>=).
fn load(path: &str) -> LinearProgram {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let f = |t: &str| f64::from_bits(u64::from_str_radix(t, 16).unwrap());
    let head: Vec<usize> = lines.next().unwrap().split(' ').map(|x| x.parse().unwrap()).collect();
    let mut lp = LinearProgram::new();
    for j in 0..head[0] {
        let v: Vec<f64> = lines.next().unwrap().split(' ').map(f).collect();
        lp.add_var(format!("x{j}"), v[0], v[1], v[2]);
    }
    for i in 0..head[1] {
        let t: Vec<&str> = lines.next().unwrap().split(' ').collect();
        let sense = match t[0] {
            "0" => Sense::Le,
            "1" => Sense::Eq,
            _ => Sense::Ge,
        };
        let nnz: usize = t[2].parse().unwrap();
        let coeffs = (0..nnz).map(|k| (t[3 + 2 * k].parse().unwrap(), f(t[4 + 2 * k]))).collect();
        lp.add_row(format!("r{i}"), coeffs, sense, f(t[1]));
    }
    lp
}

// A stage LP from a downsized-instance backward pass whose basis inverse
// drifted into a singular refactorization with these options.
#[test]
fn singular_refactorization_recovers() {
    let lp = load(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/singular_refactor.lp"));
    let loose = SolverOptions { pivot_tol: 1e-7, ..Default::default() };
    let sol = solve_lp_with(&lp, &loose).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    let reference = solve_lp_with(&lp, &SolverOptions { refactor_every: 1, ..Default::default() }).unwrap();
    assert!((sol.objective - reference.objective).abs() <= 1e-6 * reference.objective.abs());
    assert!(lp.max_violation(&sol.primal) <= 1e-6);
    assert!((sol.dual_objective(&lp) - sol.objective).abs() <= 1e-6 * sol.objective.abs());
}
