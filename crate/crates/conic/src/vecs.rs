//! Iterate containers: primal variables and cone-space vectors.

use nalgebra::{DMatrix, DVector};

/// Primal variable vector: free scalars plus symmetric block matrices.
#[derive(Debug, Clone)]
pub(crate) struct XVec {
    pub s: DVector<f64>,
    pub b: Vec<DMatrix<f64>>,
}

impl XVec {
    pub fn zeros(n_s: usize, dims: &[usize]) -> Self {
        XVec {
            s: DVector::zeros(n_s),
            b: dims.iter().map(|&d| DMatrix::zeros(d, d)).collect(),
        }
    }

    pub fn dot(&self, o: &XVec) -> f64 {
        self.s.dot(&o.s) + self.b.iter().zip(&o.b).map(|(a, b)| a.dot(b)).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += a * o`.
    pub fn axpy(&mut self, a: f64, o: &XVec) {
        self.s.axpy(a, &o.s, 1.0);
        for (x, y) in self.b.iter_mut().zip(&o.b) {
            mat_axpy(x, a, y);
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.s *= a;
        for m in &mut self.b {
            *m *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> XVec {
        let mut v = self.clone();
        v.scale(a);
        v
    }
}

/// Vector in the cone space: nonnegative and second-order parts stacked in
/// `o`, one symmetric matrix per PSD cone in `p`.
#[derive(Debug, Clone)]
pub(crate) struct ConeVec {
    pub o: DVector<f64>,
    pub p: Vec<DMatrix<f64>>,
}

impl ConeVec {
    pub fn zeros(m_o: usize, dims: &[usize]) -> Self {
        ConeVec {
            o: DVector::zeros(m_o),
            p: dims.iter().map(|&d| DMatrix::zeros(d, d)).collect(),
        }
    }

    pub fn dot(&self, v: &ConeVec) -> f64 {
        self.o.dot(&v.o) + self.p.iter().zip(&v.p).map(|(a, b)| a.dot(b)).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn axpy(&mut self, a: f64, v: &ConeVec) {
        self.o.axpy(a, &v.o, 1.0);
        for (x, y) in self.p.iter_mut().zip(&v.p) {
            mat_axpy(x, a, y);
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.o *= a;
        for m in &mut self.p {
            *m *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> ConeVec {
        let mut v = self.clone();
        v.scale(a);
        v
    }

    pub fn neg(&self) -> ConeVec {
        self.scaled(-1.0)
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `x += a * y` for matrices without allocating.
pub(crate) fn mat_axpy(x: &mut DMatrix<f64>, a: f64, y: &DMatrix<f64>) {
    x.zip_apply(y, |xi, yi| *xi += a * yi);
}
