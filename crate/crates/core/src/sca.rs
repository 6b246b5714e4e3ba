//! Convex restrictions of the unicast-SINR objective and the interference
//! constraints, shared by the cluster-based NOMA solver and the baselines
//! that treat interference as noise.
//!
//! A unicast SINR `S/(I + 1)` is handled with auxiliaries `ϖ` (the SINR)
//! and `B` (`B² ≤ S`): `I + 1 ≤ B²/ϖ` is restricted to `I + 1 ≤ Γ(B, ϖ)`,
//! the linearization of the convex `B²/ϖ` at the current point. An
//! interference term `I + 1 ≤ A²` is restricted to `I + 1 ≤ Υ(A)`.

use radcom_conic::{Bounds, ConeProgram, LinExpr};

/// Floor applied to `ϖⁿ` and `Bⁿ` so that `Γ` stays finite.
pub const EPS_AUX: f64 = 1e-8;

/// `Γ(B, ϖ) = (2Bⁿ/ϖⁿ) B − (Bⁿ/ϖⁿ)² ϖ`, a lower bound on `B²/ϖ` for `ϖ > 0`.
pub fn gamma_bound(b: f64, varpi: f64, b_n: f64, varpi_n: f64) -> f64 {
    let r = b_n / varpi_n;
    2.0 * r * b - r * r * varpi
}

/// `Υ(A) = 2AⁿA − Aⁿ²`, a lower bound on `A²`.
pub fn upsilon_bound(a: f64, a_n: f64) -> f64 {
    2.0 * a_n * a - a_n * a_n
}

/// Auxiliary values of one unicast link at the current point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LinkAux {
    pub varpi: f64,
    pub b: f64,
}

impl LinkAux {
    /// From signal power `s` and interference `i` (noise excluded).
    pub fn new(s: f64, i: f64) -> Self {
        let s = s.max(0.0);
        LinkAux { varpi: (s / (i.max(0.0) + 1.0)).max(EPS_AUX), b: s.sqrt().max(EPS_AUX) }
    }
}

/// `√(I + 1)`.
pub(crate) fn interference_aux(i: f64) -> f64 {
    (i.max(0.0) + 1.0).sqrt()
}

#[derive(Debug, Clone, Copy)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct UnicastVars {
    pub varpi: usize,
    pub b: usize,
    /// Epigraph variable of `(1 + ϖⁿ)/(1 + ϖ)`; minimizing `Σ q / ln 2`
    /// maximizes the tangent minorant of `Σ log₂(1 + ϖ)` at `ϖⁿ`.
    pub q: usize,
}

/// Adds `B² ≤ u·t` (the signal power written as a product of two affine
/// terms), `I + 1 ≤ Γ(B, ϖ)` and the log-minorant epigraph.
pub(crate) fn add_unicast(prog: &mut ConeProgram, u: LinExpr, t: LinExpr, interference: &LinExpr, aux: LinkAux) -> UnicastVars {
    let varpi = prog.add_scalar(Bounds::NONNEG);
    let b = prog.add_scalar(Bounds::NONNEG);
    let q = prog.add_scalar(Bounds::NONNEG);
    prog.add_rsoc(u, t, vec![LinExpr::var(b)]);
    let r = aux.b / aux.varpi;
    prog.add_ineq(
        LinExpr::new()
            .with_scalar(b, 2.0 * r)
            .with_scalar(varpi, -r * r)
            .plus(-1.0, interference)
            .with_constant(-1.0),
    );
    prog.add_rsoc(LinExpr::var(q), LinExpr::var(varpi).with_constant(1.0), vec![LinExpr::constant((1.0 + aux.varpi).sqrt())]);
    UnicastVars { varpi, b, q }
}

/// Adds `A ≥ 0` with `Υ(A) ≥ I + 1` and returns the index of `A`.
pub(crate) fn add_interference_bound(prog: &mut ConeProgram, interference: &LinExpr, a_n: f64) -> usize {
    let a = prog.add_scalar(Bounds::NONNEG);
    prog.add_ineq(LinExpr::new().with_scalar(a, 2.0 * a_n).with_constant(-a_n * a_n).plus(-1.0, interference).with_constant(-1.0));
    a
}

/// `Σ q / ln 2` over the given unicast links.
pub(crate) fn log_objective(links: &[UnicastVars]) -> LinExpr {
    let mut e = LinExpr::new();
    for l in links {
        e.add_scalar(l.q, std::f64::consts::LOG2_E);
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bound_examples() {
        assert_eq!(gamma_bound(2.0, 1.0, 1.0, 1.0), 3.0);
        assert_eq!(upsilon_bound(3.0, 2.0), 8.0);
        assert_eq!(upsilon_bound(2.0, 2.0), 4.0);
        let (b, w) = (1.7, 0.3);
        assert!((gamma_bound(b, w, b, w) - b * b / w).abs() < 1e-12);
    }

    #[test]
    fn aux_identity_and_clamp() {
        let a = LinkAux::new(6.0, 2.0);
        let an = interference_aux(2.0);
        assert!((a.varpi * an * an - a.b * a.b).abs() < 1e-12);
        let z = LinkAux::new(0.0, 2.0);
        assert_eq!((z.varpi, z.b), (EPS_AUX, EPS_AUX));
    }

    proptest! {
        #[test]
        fn gamma_is_a_global_minorant(b in 0.0f64..10.0, w in 1e-3f64..10.0, bn in 1e-3f64..10.0, wn in 1e-3f64..10.0) {
            prop_assert!(gamma_bound(b, w, bn, wn) <= b * b / w * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn upsilon_gap_is_a_square(a in -10.0f64..10.0, an in -10.0f64..10.0) {
            let gap = a * a - upsilon_bound(a, an);
            prop_assert!((gap - (a - an).powi(2)).abs() <= 1e-9 * (1.0 + a * a + an * an));
        }
    }
}
