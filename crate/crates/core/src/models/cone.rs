//! Polyhedral outer approximation of the Weymouth cone `a² + p_n² ≤ p_m²`,
//! where `a` is the scaled flow `F/K`.
//!
//! Depth `Z` rotates the vector `(a, p_n)` by `π/2^{z+1}` at each level and
//! folds it back into the upper half plane. After `Z` levels the angle is at
//! most `π/2^{Z+1}`, so `p_m ≥ ξ_Z` overestimates the exact cone by at most a
//! factor `1 + ε(Z)` on `p_m`.

use std::f64::consts::PI;

use crate::program::{ProgramBuilder, Sense, VarId};

/// `1/cos(π/2^{Z+1}) − 1`.
pub fn cone_error(depth: usize) -> f64 {
    1.0 / angle(depth).cos() - 1.0
}

fn angle(z: usize) -> f64 {
    PI / 2f64.powi(z as i32 + 1)
}

/// Auxiliary variables of one cone instance, `depth + 1` of each kind.
#[derive(Debug, Clone)]
pub struct ConeVars {
    pub xi: Vec<VarId>,
    pub omega: Vec<VarId>,
}

impl ConeVars {
    pub fn depth(&self) -> usize {
        self.xi.len() - 1
    }
}

/// Number of rows emitted by [`polyhedral_cone_rows`].
pub fn rows_per_cone(depth: usize) -> usize {
    3 * depth + 4
}

/// Emits the rows linking `flow` (a linear expression equal to `F/K`), the
/// outlet pressure `p_n` and the inlet pressure `p_m` through `aux`.
pub fn polyhedral_cone_rows(
    b: &mut ProgramBuilder,
    family: &str,
    flow: &[(VarId, f64)],
    p_m: VarId,
    p_n: VarId,
    aux: &ConeVars,
) {
    let depth = aux.depth();
    let (xi, om) = (&aux.xi, &aux.omega);

    let mut terms = vec![(xi[0], 1.0)];
    terms.extend(flow.iter().map(|&(v, a)| (v, -a)));
    b.row(family, &terms, Sense::Ge, 0.0);
    b.row(family, &[(om[0], 1.0), (p_n, -1.0)], Sense::Ge, 0.0);

    for z in 1..=depth {
        let (s, c) = angle(z).sin_cos();
        b.row(
            family,
            &[(xi[z], 1.0), (om[z - 1], -s), (xi[z - 1], -c)],
            Sense::Eq,
            0.0,
        );
        b.row(
            family,
            &[(om[z], 1.0), (om[z - 1], -c), (xi[z - 1], s)],
            Sense::Ge,
            0.0,
        );
        b.row(
            family,
            &[(om[z], 1.0), (om[z - 1], c), (xi[z - 1], -s)],
            Sense::Ge,
            0.0,
        );
    }

    b.row(family, &[(xi[depth], 1.0), (p_m, -1.0)], Sense::Le, 0.0);
    b.row(
        family,
        &[(om[depth], 1.0), (xi[depth], -angle(depth).tan())],
        Sense::Le,
        0.0,
    );
}

/// Smallest-ω propagation of `(flow, p_n)` through the recurrence.
///
/// Returns `(ξ, ω)`; `(flow, p_n, p_m)` lies in the polyhedron whenever
/// `p_m ≥ ξ_Z`, with this propagation as the witness.
pub fn propagate(flow: f64, p_n: f64, depth: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xi = Vec::with_capacity(depth + 1);
    let mut om = Vec::with_capacity(depth + 1);
    xi.push(flow.abs());
    om.push(p_n.abs());
    for z in 1..=depth {
        let (s, c) = angle(z).sin_cos();
        let (x, o) = (xi[z - 1], om[z - 1]);
        xi.push(s * o + c * x);
        om.push((c * o - s * x).abs());
    }
    (xi, om)
}

/// Checks every row of the polyhedron at a given auxiliary assignment.
pub fn satisfies(flow: f64, p_n: f64, p_m: f64, xi: &[f64], om: &[f64], tol: f64) -> bool {
    let depth = xi.len() - 1;
    if xi[0] < flow - tol || om[0] < p_n - tol {
        return false;
    }
    for z in 1..=depth {
        let (s, c) = angle(z).sin_cos();
        if (xi[z] - s * om[z - 1] - c * xi[z - 1]).abs() > tol {
            return false;
        }
        if om[z] < (c * om[z - 1] - s * xi[z - 1]).abs() - tol {
            return false;
        }
    }
    xi[depth] <= p_m + tol && om[depth] <= angle(depth).tan() * xi[depth] + tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_at_small_depths() {
        assert!((cone_error(1) - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((cone_error(2) - 0.082_392).abs() < 1e-6);
        assert!((cone_error(6) - 3.013e-4).abs() < 1e-7);
        for z in 1..20 {
            assert!(cone_error(z + 1) < cone_error(z));
        }
    }

    #[test]
    fn propagation_preserves_the_norm() {
        let (xi, om) = propagate(0.7, 2.9, 6);
        let r0 = 0.7f64.hypot(2.9);
        for (x, o) in xi.iter().zip(&om) {
            assert!((x.hypot(*o) - r0).abs() < 1e-12);
        }
        assert!(satisfies(0.7, 2.9, xi[6], &xi, &om, 1e-12));
    }

    #[test]
    fn exact_cone_point_is_inside() {
        let (a, pn) = (1.2f64, 3.0);
        let pm = a.hypot(pn);
        let (xi, om) = propagate(a, pn, 6);
        assert!(xi[6] <= pm + 1e-12);
        assert!(satisfies(a, pn, pm, &xi, &om, 1e-12));
    }

    #[test]
    fn equal_pressures_force_zero_flow() {
        let (xi, om) = propagate(0.0, 3.0, 6);
        assert!(satisfies(0.0, 3.0, 3.0, &xi, &om, 1e-12));
        let pm_needed = propagate(0.1, 3.0, 6).0[6];
        assert!(pm_needed > 3.0);
    }

    #[test]
    fn row_count() {
        let mut b = ProgramBuilder::new("c");
        let x = b.block("x", 3, 0.0, 10.0, "");
        let aux = b.block("aux", 14, f64::NEG_INFINITY, f64::INFINITY, "");
        let vars: Vec<VarId> = b.vars(aux).collect();
        let cone = ConeVars {
            xi: vars[..7].to_vec(),
            omega: vars[7..].to_vec(),
        };
        let (f, pm, pn) = (b.var(x, 0), b.var(x, 1), b.var(x, 2));
        polyhedral_cone_rows(&mut b, "cone", &[(f, 1.0)], pm, pn, &cone);
        assert_eq!(b.build().unwrap().num_rows(), rows_per_cone(6));
    }
}
