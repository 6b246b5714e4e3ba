//! Transmit beam patterns, the desired 0/1 pattern and the radar-only
//! least-squares design that serves as the mismatch reference.

use nalgebra::{DMatrix, DVector};
use radcom_conic::{solve_with, Bounds, ConeProgram, LinExpr, SolverOptions, Status};
use serde::{Deserialize, Serialize};

use crate::channel::steering_vector;
use crate::hermitian::{ComplexVector, HermitianMatrix};
use crate::lift::{block_to_hermitian, coef, trace_coef};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularGrid {
    angles_deg: Vec<f64>,
}

impl AngularGrid {
    /// `m` equally spaced angles covering [−90°, 90°]; `m` must be odd and
    /// at least 3 so that 0° lies on the grid.
    pub fn new(m: usize) -> Result<Self, Error> {
        if m < 3 || m % 2 == 0 {
            return Err(Error::Config(format!("grid size must be odd and at least 3, got {m}")));
        }
        let step = 180.0 / (m - 1) as f64;
        let mut angles_deg: Vec<f64> = (0..m).map(|i| -90.0 + step * i as f64).collect();
        angles_deg[(m - 1) / 2] = 0.0;
        Ok(AngularGrid { angles_deg })
    }

    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn steering(&self, n: usize) -> Vec<ComplexVector> {
        self.angles_deg.iter().map(|&t| steering_vector(t, n)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesiredPattern {
    pub gains: Vec<f64>,
    pub beam_width_deg: f64,
}

pub fn desired_pattern(targets_deg: &[f64], width_deg: f64, grid: &AngularGrid) -> Result<DesiredPattern, Error> {
    if targets_deg.is_empty() {
        return Err(Error::Config("desired pattern needs at least one target".into()));
    }
    if !(width_deg >= 0.0 && width_deg.is_finite()) {
        return Err(Error::Config(format!("beam width must be finite and nonnegative, got {width_deg}")));
    }
    if let Some(t) = targets_deg.iter().find(|t| !(t.abs() <= 90.0)) {
        return Err(Error::Config(format!("target {t} lies outside [-90, 90]")));
    }
    let half = 0.5 * width_deg + 1e-9;
    let gains = grid
        .angles_deg
        .iter()
        .map(|&a| if targets_deg.iter().any(|t| (a - t).abs() <= half) { 1.0 } else { 0.0 })
        .collect();
    Ok(DesiredPattern { gains, beam_width_deg: width_deg })
}

/// `αᴴ(θ_m) R α(θ_m)` at every grid angle.
pub fn evaluate_pattern(r: &HermitianMatrix, grid: &AngularGrid) -> Vec<f64> {
    grid.steering(r.dim()).iter().map(|a| r.quad_form(a)).collect()
}

/// `Σ_m |δ P*(θ_m) − αᴴ(θ_m) R α(θ_m)|²`.
pub fn pattern_error(r: &HermitianMatrix, delta: f64, desired: &DesiredPattern, grid: &AngularGrid) -> f64 {
    evaluate_pattern(r, grid)
        .iter()
        .zip(&desired.gains)
        .map(|(p, g)| (delta * g - p).powi(2))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealSolution {
    pub r0_star: HermitianMatrix,
    pub delta_star: f64,
    pub error_star: f64,
}

impl IdealSolution {
    /// Scale below which the reference error counts as a perfect fit.
    fn perfect_fit_level(&self, desired: &DesiredPattern) -> f64 {
        let s: f64 = desired.gains.iter().sum();
        1e-12 * (self.delta_star * s).powi(2)
    }

    pub fn is_perfect_fit(&self, desired: &DesiredPattern) -> bool {
        self.error_star <= self.perfect_fit_level(desired)
    }

    /// Largest pattern error allowed under mismatch tolerance `gamma_b`.
    pub fn error_budget(&self, desired: &DesiredPattern, gamma_b: f64) -> f64 {
        if self.is_perfect_fit(desired) {
            self.perfect_fit_level(desired)
        } else {
            (1.0 + gamma_b) * self.error_star
        }
    }
}

/// `(pattern_error(R, δ*) − Δ*)/Δ*`. When the reference fits perfectly the
/// ratio is 0 for patterns within the same tiny error and infinite otherwise.
pub fn mismatch_ratio(r: &HermitianMatrix, ideal: &IdealSolution, desired: &DesiredPattern, grid: &AngularGrid) -> f64 {
    let e = pattern_error(r, ideal.delta_star, desired, grid);
    if ideal.is_perfect_fit(desired) {
        return if e <= ideal.perfect_fit_level(desired) { 0.0 } else { f64::INFINITY };
    }
    (e - ideal.error_star) / ideal.error_star
}

/// The pattern map `X ↦ (αᴴ_m R α_m)_m` compressed onto its range.
///
/// The map has rank at most `2N − 1` (the pattern is a real trigonometric
/// polynomial of degree `N − 1` in `sin θ`), so the `M`-vector of residuals
/// `δ P* − p(R)` has the same norm as its projection onto an orthonormal
/// basis `U` of the range plus one constant coordinate for the part of
/// `P*` outside it.
#[derive(Debug, Clone)]
pub(crate) struct PatternMap {
    basis: Vec<DMatrix<f64>>,
    target: DVector<f64>,
    target_orth: f64,
}

pub(crate) enum Delta {
    Fixed(f64),
    Var(usize),
}

impl PatternMap {
    pub fn new(n: usize, desired: &DesiredPattern, grid: &AngularGrid) -> Self {
        let d = 2 * n;
        let g: Vec<DMatrix<f64>> = grid.steering(n).iter().map(|a| coef(&HermitianMatrix::outer(a))).collect();
        let m = g.len();
        let f = DMatrix::from_fn(m, d * d, |i, j| g[i][j]);
        let svd = f.svd(true, false);
        let u = svd.u.expect("requested U");
        let smax = svd.singular_values.max();
        let mut keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > 1e-10 * smax)
            .collect();
        keep.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
        let p = DVector::from_column_slice(&desired.gains);
        let mut basis = Vec::with_capacity(keep.len());
        let mut target = DVector::zeros(keep.len());
        let mut proj = DVector::zeros(m);
        for (r, &i) in keep.iter().enumerate() {
            let col = u.column(i);
            let mut b = DMatrix::zeros(d, d);
            for (mi, gm) in g.iter().enumerate() {
                b += gm * col[mi];
            }
            basis.push(b);
            target[r] = col.dot(&p);
            proj += col * target[r];
        }
        PatternMap { basis, target, target_orth: (p - proj).norm() }
    }

    /// Affine rows whose Euclidean norm is `‖δ P* − p(Σ_j R_j)‖ / unit`,
    /// where block `j` holds `embed(R_j)/unit` and a fixed `δ` is given in
    /// the same normalized units.
    pub fn residual_rows(&self, blocks: &[usize], delta: Delta) -> Vec<LinExpr> {
        let mut rows = Vec::with_capacity(self.basis.len() + 1);
        for (b, &t) in self.basis.iter().zip(self.target.iter()) {
            let mut e = match delta {
                Delta::Fixed(v) => LinExpr::constant(v * t),
                Delta::Var(i) => LinExpr::new().with_scalar(i, t),
            };
            for &j in blocks {
                e.add_block(j, -b);
            }
            rows.push(e);
        }
        if self.target_orth > 0.0 {
            rows.push(match delta {
                Delta::Fixed(v) => LinExpr::constant(v * self.target_orth),
                Delta::Var(i) => LinExpr::new().with_scalar(i, self.target_orth),
            });
        }
        rows
    }

    /// Adds `pattern_error(Σ_j R_j, δ*) ≤ budget` for blocks scaled by `unit`.
    pub fn add_mismatch_constraint(&self, prog: &mut ConeProgram, blocks: &[usize], ideal: &IdealSolution, budget: f64, unit: f64) {
        let rows = self.residual_rows(blocks, Delta::Fixed(ideal.delta_star / unit));
        prog.add_soc(LinExpr::constant(budget.sqrt() / unit), rows);
    }
}

/// Radar-only design: minimize `pattern_error(R₀, δ)` over `δ ≥ 0` and
/// `R₀ ⪰ 0` with `Tr R₀ = p_max`.
pub fn solve_ideal(desired: &DesiredPattern, grid: &AngularGrid, n: usize, p_max: f64, opts: &SolverOptions) -> Result<IdealSolution, Error> {
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(Error::Contract(format!("power budget must be positive, got {p_max}")));
    }
    if desired.gains.len() != grid.len() {
        return Err(Error::Contract("desired pattern does not match the grid".into()));
    }
    let map = PatternMap::new(n, desired, grid);
    let mut prog = ConeProgram::new();
    let x = prog.add_psd_block(2 * n);
    let delta = prog.add_scalar(Bounds::NONNEG);
    let t = prog.add_scalar(Bounds::FREE);
    prog.add_eq(LinExpr::constant(-1.0).with_block(x, trace_coef(n)));
    prog.add_soc(LinExpr::var(t), map.residual_rows(&[x], Delta::Var(delta)));
    prog.minimize(LinExpr::var(t));
    let sol = solve_with(&prog, opts)?;
    if sol.status != Status::Optimal {
        return Err(Error::Solver { status: sol.status, context: "ideal beampattern".into() });
    }
    let mut r0 = block_to_hermitian(&sol.blocks[x], p_max);
    r0 = r0.scaled(p_max / r0.trace());
    // The error is flat to first order around the optimum, so the solver's
    // δ is only accurate to about the square root of its tolerance. For the
    // returned R₀ the best δ has a closed form.
    let pattern = evaluate_pattern(&r0, grid);
    let pp: f64 = desired.gains.iter().map(|g| g * g).sum();
    let delta_star = if pp > 0.0 {
        (desired.gains.iter().zip(&pattern).map(|(g, p)| g * p).sum::<f64>() / pp).max(0.0)
    } else {
        (sol.scalars[delta] * p_max).max(0.0)
    };
    let error_star = pattern_error(&r0, delta_star, desired, grid);
    Ok(IdealSolution { r0_star: r0, delta_star, error_star })
}

/// Everything the communication schemes need about the radar side: the
/// grid, the desired pattern, its radar-only optimum and the compressed
/// pattern map used to constrain the mismatch.
#[derive(Debug, Clone)]
pub struct RadarReference {
    pub grid: AngularGrid,
    pub desired: DesiredPattern,
    pub ideal: IdealSolution,
    pub(crate) map: PatternMap,
}

impl RadarReference {
    pub fn new(n: usize, targets_deg: &[f64], width_deg: f64, grid_points: usize, p_max: f64, opts: &SolverOptions) -> Result<Self, Error> {
        let grid = AngularGrid::new(grid_points)?;
        let desired = desired_pattern(targets_deg, width_deg, &grid)?;
        let ideal = solve_ideal(&desired, &grid, n, p_max, opts)?;
        let map = PatternMap::new(n, &desired, &grid);
        Ok(RadarReference { grid, desired, ideal, map })
    }

    pub fn n_antennas(&self) -> usize {
        self.ideal.r0_star.dim()
    }

    pub fn p_max(&self) -> f64 {
        self.ideal.r0_star.trace()
    }

    pub fn mismatch_ratio(&self, r: &HermitianMatrix) -> f64 {
        mismatch_ratio(r, &self.ideal, &self.desired, &self.grid)
    }

    /// Adds the mismatch constraint on `Σ_j R_j` for blocks holding
    /// `embed(R_j)/unit`.
    pub(crate) fn constrain(&self, prog: &mut ConeProgram, blocks: &[usize], gamma_b: f64, unit: f64) {
        let budget = self.ideal.error_budget(&self.desired, gamma_b);
        self.map.add_mismatch_constraint(prog, blocks, &self.ideal, budget, unit);
    }
}
