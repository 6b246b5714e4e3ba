//! Problem description consumed by the solver.
//!
//! A program has scalar variables (optionally bounded) and real symmetric
//! PSD block variables. Every constraint is built from [`LinExpr`], an affine
//! functional `Σ aᵢ xᵢ + Σⱼ ⟨Cⱼ, Xⱼ⟩ + c` with `⟨C, X⟩ = Σ_ab C_ab X_ab`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ProgramError;

/// Affine functional of the program variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub scalars: Vec<(usize, f64)>,
    pub blocks: Vec<(usize, DMatrix<f64>)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { constant: c, ..Self::default() }
    }

    /// The expression `x_i`.
    pub fn var(i: usize) -> Self {
        Self::new().with_scalar(i, 1.0)
    }

    pub fn with_scalar(mut self, i: usize, coef: f64) -> Self {
        self.add_scalar(i, coef);
        self
    }

    pub fn with_block(mut self, j: usize, coef: DMatrix<f64>) -> Self {
        self.add_block(j, coef);
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_scalar(&mut self, i: usize, coef: f64) {
        if let Some(entry) = self.scalars.iter_mut().find(|(k, _)| *k == i) {
            entry.1 += coef;
        } else {
            self.scalars.push((i, coef));
        }
    }

    pub fn add_block(&mut self, j: usize, coef: DMatrix<f64>) {
        if let Some(entry) = self.blocks.iter_mut().find(|(k, _)| *k == j) {
            entry.1 += coef;
        } else {
            self.blocks.push((j, coef));
        }
    }

    /// `self + factor * other`.
    pub fn plus(mut self, factor: f64, other: &LinExpr) -> Self {
        for &(i, c) in &other.scalars {
            self.add_scalar(i, factor * c);
        }
        for (j, m) in &other.blocks {
            self.add_block(*j, m * factor);
        }
        self.constant += factor * other.constant;
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for entry in &mut self.scalars {
            entry.1 *= factor;
        }
        for entry in &mut self.blocks {
            entry.1 *= factor;
        }
        self.constant *= factor;
        self
    }

    pub fn eval(&self, scalars: &[f64], blocks: &[DMatrix<f64>]) -> f64 {
        let mut v = self.constant;
        for &(i, c) in &self.scalars {
            v += c * scalars[i];
        }
        for (j, m) in &self.blocks {
            v += m.dot(&blocks[*j]);
        }
        v
    }
}

/// Optional lower and upper bounds of a scalar variable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bounds {
    pub const FREE: Bounds = Bounds { lower: None, upper: None };
    pub const NONNEG: Bounds = Bounds { lower: Some(0.0), upper: None };

    pub fn range(lower: f64, upper: f64) -> Self {
        Bounds { lower: Some(lower), upper: Some(upper) }
    }
}

/// `‖v‖₂ ≤ t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocConstraint {
    pub t: LinExpr,
    pub v: Vec<LinExpr>,
}

/// `u·t ≥ ‖w‖₂²` with `u, t ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsocConstraint {
    pub u: LinExpr,
    pub t: LinExpr,
    pub w: Vec<LinExpr>,
}

/// Minimize a linear objective over scalars and PSD blocks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConeProgram {
    pub scalar_bounds: Vec<Bounds>,
    pub psd_blocks: Vec<usize>,
    pub objective: LinExpr,
    /// Each expression is constrained to equal zero.
    pub eq: Vec<LinExpr>,
    /// Each expression is constrained to be nonnegative.
    pub ineq: Vec<LinExpr>,
    pub soc: Vec<SocConstraint>,
    pub rsoc: Vec<RsocConstraint>,
}

impl ConeProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_scalar(&mut self, bounds: Bounds) -> usize {
        self.scalar_bounds.push(bounds);
        self.scalar_bounds.len() - 1
    }

    pub fn add_psd_block(&mut self, dim: usize) -> usize {
        self.psd_blocks.push(dim);
        self.psd_blocks.len() - 1
    }

    pub fn minimize(&mut self, objective: LinExpr) {
        self.objective = objective;
    }

    pub fn add_eq(&mut self, e: LinExpr) {
        self.eq.push(e);
    }

    pub fn add_ineq(&mut self, e: LinExpr) {
        self.ineq.push(e);
    }

    pub fn add_soc(&mut self, t: LinExpr, v: Vec<LinExpr>) {
        self.soc.push(SocConstraint { t, v });
    }

    pub fn add_rsoc(&mut self, u: LinExpr, t: LinExpr, w: Vec<LinExpr>) {
        self.rsoc.push(RsocConstraint { u, t, w });
    }

    pub fn n_scalars(&self) -> usize {
        self.scalar_bounds.len()
    }

    fn all_exprs(&self) -> impl Iterator<Item = &LinExpr> {
        std::iter::once(&self.objective)
            .chain(self.eq.iter())
            .chain(self.ineq.iter())
            .chain(self.soc.iter().flat_map(|c| std::iter::once(&c.t).chain(c.v.iter())))
            .chain(
                self.rsoc
                    .iter()
                    .flat_map(|c| [&c.u, &c.t].into_iter().chain(c.w.iter())),
            )
    }

    /// Checks indices, block shapes and finiteness of every coefficient.
    pub fn check(&self) -> Result<(), ProgramError> {
        if let Some(j) = self.psd_blocks.iter().position(|&d| d == 0) {
            return Err(ProgramError::Malformed(format!("psd block {j} has dimension 0")));
        }
        for (i, b) in self.scalar_bounds.iter().enumerate() {
            let bad = |v: Option<f64>| v.is_some_and(|x| x.is_nan());
            if bad(b.lower) || bad(b.upper) {
                return Err(ProgramError::Malformed(format!("scalar {i} has NaN bound")));
            }
            if let (Some(lo), Some(hi)) = (b.lower, b.upper) {
                if lo > hi {
                    return Err(ProgramError::Malformed(format!(
                        "scalar {i} has empty range [{lo}, {hi}]"
                    )));
                }
            }
        }
        for e in self.all_exprs() {
            if !e.constant.is_finite() {
                return Err(ProgramError::Malformed("non-finite constant".into()));
            }
            for &(i, c) in &e.scalars {
                if i >= self.n_scalars() {
                    return Err(ProgramError::Malformed(format!("scalar index {i} out of range")));
                }
                if !c.is_finite() {
                    return Err(ProgramError::Malformed(format!("non-finite coefficient on scalar {i}")));
                }
            }
            for (j, m) in &e.blocks {
                let Some(&d) = self.psd_blocks.get(*j) else {
                    return Err(ProgramError::Malformed(format!("block index {j} out of range")));
                };
                if m.nrows() != d || m.ncols() != d {
                    return Err(ProgramError::Malformed(format!(
                        "block {j} coefficient is {}x{}, expected {d}x{d}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                if m.iter().any(|x| !x.is_finite()) {
                    return Err(ProgramError::Malformed(format!("non-finite coefficient on block {j}")));
                }
            }
        }
        for (k, c) in self.soc.iter().enumerate() {
            if c.v.is_empty() {
                return Err(ProgramError::Malformed(format!("soc {k} has an empty vector part")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cone program serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ProgramError> {
        serde_json::from_str(s).map_err(|e| ProgramError::Malformed(format!("json: {e}")))
    }

    /// Writes the program as JSON for offline reproduction.
    pub fn dump(&self, path: &Path) -> Result<(), ProgramError> {
        std::fs::write(path, self.to_json()).map_err(|e| ProgramError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}
