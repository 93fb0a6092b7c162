// SPDX-License-Identifier: Apache-2.0

//! Fixed-column MPS dump of a [`LinearProgram`], for debugging.
//!
//! Rows are named `R0000000`.., columns `C0000000`.., and the objective row
//! `COST`. Field positions follow the fixed MPS layout (columns 2-3, 5-12,
//! 15-22, 25-36, 40-47, 50-61). Numbers that do not fit in 12 characters
//! are written in shortened scientific notation, so the dump may round.
//! The original labels are listed in `*` comment lines after `NAME`.

use std::fmt::Write;

use super::{LinearProgram, Sense};

fn num(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 12 {
        return s;
    }
    for prec in (1..=7).rev() {
        let s = format!("{v:.prec$e}");
        if s.len() <= 12 {
            return s;
        }
    }
    format!("{v:.0e}")
}

fn row_name(i: usize) -> String {
    format!("R{i:07}")
}

fn col_name(j: usize) -> String {
    format!("C{j:07}")
}

fn line(out: &mut String, f1: &str, f2: &str, f3: &str, f4: &str, f5: &str, f6: &str) {
    let mut s = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}");
    if !f5.is_empty() {
        s.push_str(&format!("   {f5:<8}  {f6:>12}"));
    }
    out.push_str(s.trim_end());
    out.push('\n');
}

pub fn write_mps(lp: &LinearProgram, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {name}");
    for (i, r) in lp.rows.iter().enumerate() {
        let _ = writeln!(out, "* {} = {}", row_name(i), r.label);
    }
    for (j, l) in lp.col_labels.iter().enumerate() {
        let _ = writeln!(out, "* {} = {}", col_name(j), l);
    }
    out.push_str("ROWS\n");
    line(&mut out, "N", "COST", "", "", "", "");
    for (i, r) in lp.rows.iter().enumerate() {
        let t = match r.sense {
            Sense::Le => "L",
            Sense::Eq => "E",
            Sense::Ge => "G",
        };
        line(&mut out, t, &row_name(i), "", "", "", "");
    }

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_vars()];
    for (i, r) in lp.rows.iter().enumerate() {
        for &(j, a) in &r.coeffs {
            cols[j].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    for (j, col) in cols.iter().enumerate() {
        let mut entries: Vec<(String, f64)> = Vec::new();
        if lp.objective[j] != 0.0 {
            entries.push(("COST".into(), lp.objective[j]));
        }
        entries.extend(col.iter().map(|&(i, a)| (row_name(i), a)));
        if entries.is_empty() {
            // Keep the column declared.
            entries.push(("COST".into(), 0.0));
        }
        for pair in entries.chunks(2) {
            let (f5, f6) = pair.get(1).map(|(r, v)| (r.clone(), num(*v))).unwrap_or_default();
            line(&mut out, "", &col_name(j), &pair[0].0, &num(pair[0].1), &f5, &f6);
        }
    }
    out.push_str("RHS\n");
    for (i, r) in lp.rows.iter().enumerate() {
        if r.rhs != 0.0 {
            line(&mut out, "", "RHS", &row_name(i), &num(r.rhs), "", "");
        }
    }
    out.push_str("BOUNDS\n");
    for j in 0..lp.num_vars() {
        let (lo, up) = (lp.lower[j], lp.upper[j]);
        let c = col_name(j);
        if lo == f64::NEG_INFINITY && up == f64::INFINITY {
            line(&mut out, "FR", "BND", &c, "", "", "");
            continue;
        }
        if lo == up {
            line(&mut out, "FX", "BND", &c, &num(lo), "", "");
            continue;
        }
        if lo == f64::NEG_INFINITY {
            line(&mut out, "MI", "BND", &c, "", "", "");
        } else if lo != 0.0 {
            line(&mut out, "LO", "BND", &c, &num(lo), "", "");
        }
        if up.is_finite() {
            line(&mut out, "UP", "BND", &c, &num(up), "", "");
        }
    }
    out.push_str("ENDATA\n");
    out
}
