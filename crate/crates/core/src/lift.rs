//! Bridges between Hermitian quantities and the real symmetric blocks of
//! the conic solver.
//!
//! A Hermitian variable `W` is carried as `X = embed(W) / unit`, so a
//! functional `Tr(C W)` becomes `unit · ⟨embed(C)/2, X⟩`. Using the power
//! budget as `unit` keeps every block at trace 2 or below.

use nalgebra::DMatrix;
use radcom_conic::LinExpr;

use crate::hermitian::{clip_psd, from_real_embedding, real_embed, HermitianMatrix};

/// Coefficient of `Tr(C W)` on the embedded block (before unit scaling).
pub(crate) fn coef(c: &HermitianMatrix) -> DMatrix<f64> {
    real_embed(c) * 0.5
}

pub(crate) fn trace_coef(n: usize) -> DMatrix<f64> {
    DMatrix::identity(2 * n, 2 * n) * 0.5
}

/// `Σ_j scale · Tr(C W_j)` over the listed blocks.
pub(crate) fn tr_expr(c: &DMatrix<f64>, blocks: &[usize], scale: f64) -> LinExpr {
    let mut e = LinExpr::new();
    for &j in blocks {
        e.add_block(j, c * scale);
    }
    e
}

pub(crate) fn block_to_hermitian(x: &DMatrix<f64>, unit: f64) -> HermitianMatrix {
    clip_psd(&from_real_embedding(x)).scaled(unit)
}

#[cfg(test)]
pub(crate) fn hermitian_to_block(w: &HermitianMatrix, unit: f64) -> DMatrix<f64> {
    real_embed(w) / unit
}

/// Normalization of one problem: blocks hold `W/unit`, channel matrices
/// `unit · h hᴴ`, and the block traces sum to `budget = p_max/unit`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frame {
    pub n: usize,
    pub unit: f64,
    pub budget: f64,
}

impl Frame {
    pub fn new(n: usize, p_max: f64, unit: f64) -> Self {
        Frame { n, unit, budget: p_max / unit }
    }

    pub fn channel(&self, h: &crate::hermitian::ComplexVector) -> HermitianMatrix {
        HermitianMatrix::outer(h).scaled(self.unit)
    }

    pub fn to_physical(&self, w: &HermitianMatrix) -> HermitianMatrix {
        w.scaled(self.unit)
    }
}
