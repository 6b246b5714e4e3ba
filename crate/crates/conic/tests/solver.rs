use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use radcom_conic::{solve, validate_solution, Bounds, ConeProgram, LinExpr, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn random_psd(rng: &mut ChaCha8Rng, d: usize, shift: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(d, d) * shift
}

fn random_sym(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

#[test]
fn lp_lower_bound() {
    let mut p = ConeProgram::new();
    let x = p.add_scalar(Bounds::FREE);
    p.minimize(LinExpr::var(x));
    p.add_ineq(LinExpr::var(x).with_constant(-1.0));
    let s = solve(&p, TOL).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.scalars[0] - 1.0).abs() < 1e-7);
    assert!((s.objective - 1.0).abs() < 1e-7);
}

#[test]
fn two_by_two_lmi() {
    // min t  s.t. [[t, 1], [1, t]] ⪰ 0, written as X ⪰ 0 with X11 = X22 = t, X12 = 1.
    let mut p = ConeProgram::new();
    let t = p.add_scalar(Bounds::FREE);
    let b = p.add_psd_block(2);
    let e = |i: usize, j: usize| {
        let mut m = DMatrix::zeros(2, 2);
        m[(i, j)] = 0.5;
        m[(j, i)] += 0.5;
        m
    };
    p.add_eq(LinExpr::new().with_block(b, e(0, 0)).with_scalar(t, -1.0));
    p.add_eq(LinExpr::new().with_block(b, e(1, 1)).with_scalar(t, -1.0));
    p.add_eq(LinExpr::new().with_block(b, e(0, 1)).with_constant(-1.0));
    p.minimize(LinExpr::var(t));
    let s = solve(&p, TOL).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.scalars[0] - 1.0).abs() < 1e-6, "t = {}", s.scalars[0]);
}

#[test]
fn euclidean_norm_on_a_line() {
    let mut p = ConeProgram::new();
    let x = p.add_scalar(Bounds::FREE);
    let y = p.add_scalar(Bounds::FREE);
    let t = p.add_scalar(Bounds::FREE);
    p.add_eq(LinExpr::var(x).with_scalar(y, 1.0).with_constant(-2.0));
    p.add_soc(LinExpr::var(t), vec![LinExpr::var(x), LinExpr::var(y)]);
    p.minimize(LinExpr::var(t));
    let s = solve(&p, TOL).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.objective - 2f64.sqrt()).abs() < 1e-7);
    assert!((s.scalars[0] - 1.0).abs() < 1e-6 && (s.scalars[1] - 1.0).abs() < 1e-6);
}

#[test]
fn rotated_cone_reciprocal() {
    // min q  s.t. q·(1 + w) ≥ 4, w ≤ 3  → q = 1.
    let mut p = ConeProgram::new();
    let q = p.add_scalar(Bounds::NONNEG);
    let w = p.add_scalar(Bounds::range(0.0, 3.0));
    p.add_rsoc(LinExpr::var(q), LinExpr::var(w).with_constant(1.0), vec![LinExpr::constant(2.0)]);
    p.minimize(LinExpr::var(q));
    let s = solve(&p, TOL).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.scalars[0] - 1.0).abs() < 1e-6);
    let (u, t) = (s.scalars[0], 1.0 + s.scalars[1]);
    assert!(u * t - 4.0 >= -TOL * (1.0 + u * t) * 10.0);
}

#[test]
fn fixed_scalars_are_substituted() {
    let mut p = ConeProgram::new();
    let x = p.add_scalar(Bounds::range(2.0, 2.0));
    let y = p.add_scalar(Bounds::FREE);
    p.add_ineq(LinExpr::var(y).with_scalar(x, -1.0));
    p.minimize(LinExpr::var(y));
    let s = solve(&p, TOL).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert_eq!(s.scalars[0], 2.0);
    assert!((s.scalars[1] - 2.0).abs() < 1e-7);
}

#[test]
fn infeasible_lp_is_certified() {
    let mut p = ConeProgram::new();
    let x = p.add_scalar(Bounds::NONNEG);
    p.add_eq(LinExpr::var(x).with_constant(1.0));
    p.minimize(LinExpr::var(x));
    let s = solve(&p, TOL).unwrap();
    assert_eq!(s.status, Status::Infeasible);
}

#[test]
fn infeasible_sdp_is_certified() {
    // Tr X = 1 and X11 + X22 ≤ 0.5 cannot both hold for a 2×2 PSD X.
    let mut p = ConeProgram::new();
    let b = p.add_psd_block(2);
    p.add_eq(LinExpr::new().with_block(b, DMatrix::identity(2, 2)).with_constant(-1.0));
    p.add_ineq(LinExpr::constant(0.5).with_block(b, -DMatrix::identity(2, 2)));
    let s = solve(&p, TOL).unwrap();
    assert_eq!(s.status, Status::Infeasible);
}

#[test]
fn unbounded_lp_is_detected() {
    let mut p = ConeProgram::new();
    let x = p.add_scalar(Bounds::FREE);
    p.add_ineq(LinExpr::constant(1.0).with_scalar(x, -1.0));
    p.minimize(LinExpr::var(x));
    let s = solve(&p, TOL).unwrap();
    assert_eq!(s.status, Status::Unbounded);
}

#[test]
fn tolerance_range_is_enforced() {
    let p = ConeProgram::new();
    assert!(solve(&p, 1e-12).is_err());
    assert!(solve(&p, 1e-3).is_err());
}

#[test]
fn trace_constrained_sdp_matches_min_eigenvalue() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for d in [2, 3, 5, 8] {
        let c = random_sym(&mut rng, d);
        let mut p = ConeProgram::new();
        let b = p.add_psd_block(d);
        p.add_eq(LinExpr::new().with_block(b, DMatrix::identity(d, d)).with_constant(-1.0));
        p.minimize(LinExpr::new().with_block(b, c.clone()));
        let s = solve(&p, TOL).unwrap();
        assert_eq!(s.status, Status::Optimal);
        let oracle = c.symmetric_eigenvalues().min();
        assert!((s.objective - oracle).abs() < 1e-7, "d={d}: {} vs {oracle}", s.objective);
    }
}

#[test]
fn least_squares_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (m, n) = (7, 3);
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let bv = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
    let mut p = ConeProgram::new();
    let xs: Vec<usize> = (0..n).map(|_| p.add_scalar(Bounds::FREE)).collect();
    let t = p.add_scalar(Bounds::FREE);
    let rows = (0..m)
        .map(|i| {
            let mut e = LinExpr::constant(-bv[i]);
            for j in 0..n {
                e.add_scalar(xs[j], a[(i, j)]);
            }
            e
        })
        .collect();
    p.add_soc(LinExpr::var(t), rows);
    p.minimize(LinExpr::var(t));
    let s = solve(&p, TOL).unwrap();
    assert_eq!(s.status, Status::Optimal);
    let ata = a.transpose() * &a;
    let x_star = ata.lu().solve(&(a.transpose() * &bv)).unwrap();
    let oracle = (&a * &x_star - &bv).norm();
    assert!((s.objective - oracle).abs() < 1e-7);
    for j in 0..n {
        assert!((s.scalars[j] - x_star[j]).abs() < 1e-5);
    }
}

/// Random program with a strictly feasible point built in, mixing every
/// constraint class.
fn random_feasible(seed: u64) -> ConeProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(2..5);
    let n = rng.random_range(1..4);
    let x0 = random_psd(&mut rng, d, 0.5);
    let s0: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let mut p = ConeProgram::new();
    let xs: Vec<usize> = (0..n).map(|_| p.add_scalar(Bounds::NONNEG)).collect();
    let b = p.add_psd_block(d);
    let rand_expr = |rng: &mut ChaCha8Rng| {
        let mut e = LinExpr::new().with_block(b, random_sym(rng, d));
        for &x in &xs {
            e.add_scalar(x, rng.random_range(-1.0..1.0));
        }
        e
    };
    for _ in 0..rng.random_range(1..3) {
        let e = rand_expr(&mut rng);
        let v = e.eval(&s0, std::slice::from_ref(&x0));
        p.add_eq(e.with_constant(-v));
    }
    for _ in 0..2 {
        let e = rand_expr(&mut rng);
        let v = e.eval(&s0, std::slice::from_ref(&x0));
        p.add_ineq(e.with_constant(-v + 0.3));
    }
    let v: Vec<LinExpr> = (0..3).map(|_| rand_expr(&mut rng)).collect();
    let norm = v.iter().map(|e| e.eval(&s0, std::slice::from_ref(&x0)).powi(2)).sum::<f64>().sqrt();
    p.add_soc(LinExpr::constant(norm + 0.5), v);
    let w = rand_expr(&mut rng);
    let wv = w.eval(&s0, std::slice::from_ref(&x0));
    p.add_rsoc(LinExpr::var(xs[0]).with_constant(0.1), LinExpr::constant(wv * wv / (s0[0] + 0.1) + 0.5), vec![w]);
    // Bounded objective: PSD weight on the block plus positive scalar costs.
    let mut obj = LinExpr::new().with_block(b, random_psd(&mut rng, d, 0.1));
    for &x in &xs {
        obj.add_scalar(x, rng.random_range(0.1..1.0));
    }
    p.minimize(obj);
    p
}

#[test]
fn random_feasible_programs_validate() {
    for seed in 0..25 {
        let p = random_feasible(seed);
        let s = solve(&p, TOL).unwrap();
        assert_eq!(s.status, Status::Optimal, "seed {seed}");
        let rep = validate_solution(&p, &s.scalars, &s.blocks);
        assert!(rep.passes(1e-7), "seed {seed}: {rep:?}");
        assert!(s.objective >= s.dual_objective - 1e-7, "weak duality, seed {seed}");
        assert!(s.primal_residual <= TOL && s.dual_residual <= TOL && s.gap <= TOL);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn objective_scaling_keeps_argmin(seed in 0u64..10_000, c in 0.01f64..100.0) {
        let p = random_feasible(seed);
        let mut q = p.clone();
        q.objective = q.objective.clone().scaled(c);
        let a = solve(&p, TOL).unwrap();
        let b = solve(&q, TOL).unwrap();
        prop_assert_eq!(a.status, Status::Optimal);
        prop_assert_eq!(b.status, Status::Optimal);
        prop_assert!((b.objective - c * a.objective).abs() <= 1e-6 * (1.0 + c * a.objective.abs()));
        // The argmin may be non-unique; compare objective values at each other's points.
        let fa = q.objective.eval(&a.scalars, &a.blocks);
        prop_assert!((fa - b.objective).abs() <= 1e-6 * (1.0 + b.objective.abs()));
    }

    #[test]
    fn weak_duality_and_rsoc_membership(seed in 0u64..10_000) {
        let p = random_feasible(seed);
        let s = solve(&p, TOL).unwrap();
        prop_assert_eq!(s.status, Status::Optimal);
        prop_assert!(s.objective >= s.dual_objective - TOL * (1.0 + s.objective.abs()));
        for c in &p.rsoc {
            let u = c.u.eval(&s.scalars, &s.blocks);
            let t = c.t.eval(&s.scalars, &s.blocks);
            let w2: f64 = c.w.iter().map(|e| e.eval(&s.scalars, &s.blocks).powi(2)).sum();
            prop_assert!(u * t - w2 >= -1e-7 * (1.0 + u * t));
        }
    }
}
