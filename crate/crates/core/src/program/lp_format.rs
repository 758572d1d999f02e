use std::fmt::Write;

use super::{ConvexProgram, Sense};

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{:.11e}", v)
    }
}

fn signed(v: f64) -> String {
    if v < 0.0 {
        format!("- {}", num(-v))
    } else {
        format!("+ {}", num(v))
    }
}

/// Plain-text LP-style listing: objective, one constraint per line, bounds.
/// Coefficients carry 12 significant digits.
pub fn write_lp_listing(p: &ConvexProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ program {}", p.name());
    out.push_str("minimize\n obj:");
    for (j, &c) in p.linear().iter().enumerate() {
        if c != 0.0 {
            let _ = write!(out, " {} {}", signed(c), p.var_name(j));
        }
    }
    if !p.quadratic().is_empty() {
        out.push_str(" + [");
        for &(i, j, q) in p.quadratic() {
            let _ = write!(out, " {} {} * {}", signed(q), p.var_name(i), p.var_name(j));
        }
        out.push_str(" ] / 2");
    }
    if p.constant() != 0.0 {
        let _ = write!(out, " {}", signed(p.constant()));
    }
    out.push_str("\nsubject to\n");
    for (r, row) in p.rows().iter().enumerate() {
        let _ = write!(out, " {}:", p.row_name(r));
        for &(j, a) in &row.terms {
            let _ = write!(out, " {} {}", signed(a), p.var_name(j));
        }
        let op = match row.sense {
            Sense::Eq => "=",
            Sense::Ge => ">=",
            Sense::Le => "<=",
        };
        let _ = write!(out, " {op} {}", num(row.rhs));
        if let Some(c) = p.coupling_name(row) {
            let _ = write!(out, " \\ dual {c}");
        }
        out.push('\n');
    }
    out.push_str("bounds\n");
    let (lo, hi) = (p.lower_bounds(), p.upper_bounds());
    for j in 0..p.num_vars() {
        let _ = writeln!(
            out,
            " {} <= {} <= {}",
            num(lo[j]),
            p.var_name(j),
            num(hi[j])
        );
    }
    out.push_str("end\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::ProgramBuilder;

    #[test]
    fn listing_has_one_line_per_constraint() {
        let mut b = ProgramBuilder::new("toy");
        let x = b.block("x", 2, 0.0, 1.0, "MW");
        let (a, c) = (b.var(x, 0), b.var(x, 1));
        b.cost(a, 1.0 / 3.0);
        b.row("sum", &[(a, 1.0), (c, -2.0)], Sense::Le, 4.0);
        b.row("floor", &[(a, 1.0)], Sense::Ge, 0.5);
        let text = write_lp_listing(&b.build().unwrap());
        let constraint_lines: Vec<_> = text.lines().filter(|l| l.contains("#")).collect();
        assert_eq!(constraint_lines.len(), 2);
        assert!(text.contains("+ 3.33333333333e-1 x[0]"));
        assert!(constraint_lines[0].contains("<= 4.00000000000e0"));
    }
}
