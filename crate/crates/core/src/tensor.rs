//! One-dimensional banded matrices, Kronecker-product application and fast
//! diagonalisation of separable mass/stiffness pairs.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::bspline::Axis;
use crate::error::{Error, Result};
use crate::par;
use crate::quadrature::GaussRule;

/// Compressed sparse row matrix acting along one tensor axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl AxisMatrix {
    /// Keeps every entry that is not exactly zero.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    col_idx.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { rows: m.nrows(), cols: m.ncols(), row_ptr, col_idx, vals }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|&(c, _)| c == j).map(|(_, v)| v).sum()
    }

    pub fn transpose(&self) -> Self {
        Self::from_dense(&self.to_dense().transpose())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }
}

/// Applies `m` along `axis` of a tensor with the given shape (axis 0 fastest).
/// Returns the result and its shape.
pub fn apply_axis(m: &AxisMatrix, shape: &[usize], axis: usize, x: &[f64]) -> (Vec<f64>, Vec<usize>) {
    debug_assert_eq!(shape[axis], m.cols);
    debug_assert_eq!(x.len(), shape.iter().product::<usize>());
    let inner: usize = shape[..axis].iter().product();
    let n = shape[axis];
    let outer: usize = shape[axis + 1..].iter().product();
    let mut out_shape = shape.to_vec();
    out_shape[axis] = m.rows;
    let mut out = vec![0.0; inner * m.rows * outer];
    if out.is_empty() {
        return (out, out_shape);
    }
    par::for_each_chunk_mut(&mut out, m.rows * inner, |o, block| {
        let src_block = &x[o * n * inner..(o + 1) * n * inner];
        for r in 0..m.rows {
            let dst = &mut block[r * inner..(r + 1) * inner];
            for (c, v) in m.row(r) {
                let src = &src_block[c * inner..(c + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
    });
    let _ = outer;
    (out, out_shape)
}

/// Applies `factors[D-1] ⊗ … ⊗ factors[0]` (factor `k` acting on axis `k`).
pub fn kron_apply(factors: &[&AxisMatrix], x: &[f64]) -> Vec<f64> {
    let mut shape: Vec<usize> = factors.iter().map(|f| f.cols).collect();
    let mut cur = x.to_vec();
    for (k, f) in factors.iter().enumerate() {
        let (next, s) = apply_axis(f, &shape, k, &cur);
        cur = next;
        shape = s;
    }
    cur
}

/// Gram matrix `∫ D^{dt} B^test_i · D^{dr} B^trial_j` of two bases on the
/// same axis (they may differ in order). Exact by Gauss quadrature.
pub fn gram_1d(test: &Axis, trial: &Axis, dtest: usize, dtrial: usize) -> Result<AxisMatrix> {
    if test.cells() != trial.cells()
        || test.is_periodic() != trial.is_periodic()
        || (test.lo() - trial.lo()).abs() > 1e-12 * test.width()
        || (test.width() - trial.width()).abs() > 1e-12 * test.width()
    {
        return Err(Error::Config("Gram matrix needs bases on the same grid".into()));
    }
    let rule = GaussRule::new(test.order().max(trial.order()) + 1);
    let mut m = DMatrix::zeros(test.dofs(), trial.dofs());
    let nder = dtest.max(dtrial);
    for cell in 0..test.cells() {
        for (&node, &w) in rule.nodes.iter().zip(&rule.weights) {
            let x = test.lo() + (cell as f64 + node) * test.width();
            let bt = test.eval(x, nder).expect("Gauss node inside the axis");
            let br = trial.eval(x, nder).expect("Gauss node inside the axis");
            let w = w * test.width();
            for a in 0..test.order() {
                let i = test.dof(bt.first, a);
                let va = w * bt.ders[dtest][a];
                for b in 0..trial.order() {
                    let j = trial.dof(br.first, b);
                    m[(i, j)] += va * br.ders[dtrial][b];
                }
            }
        }
    }
    Ok(AxisMatrix::from_dense(&m))
}

/// Generalised eigendecomposition `K v = λ M v` of a symmetric pair with `M`
/// positive definite. Columns of `vectors` are `M`-orthonormal.
#[derive(Debug, Clone)]
pub struct GenEigen {
    pub values: Vec<f64>,
    pub vectors: AxisMatrix,
    pub vectors_t: AxisMatrix,
}

impl GenEigen {
    pub fn new(k: &AxisMatrix, m: &AxisMatrix) -> Result<Self> {
        let md = m.to_dense();
        let kd = k.to_dense();
        let chol = md
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Config("mass matrix is not positive definite".into()))?;
        let l = chol.l();
        let l_inv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Config("singular Cholesky factor".into()))?;
        let c = &l_inv * kd * l_inv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let eig = SymmetricEigen::new(c);
        let v = l_inv.transpose() * eig.eigenvectors;
        Ok(Self {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: AxisMatrix::from_dense(&v),
            vectors_t: AxisMatrix::from_dense(&v.transpose()),
        })
    }

    /// Index of the eigenvalue of smallest magnitude.
    pub fn null_index(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if v.abs() < self.values[best].abs() {
                best = i;
            }
        }
        best
    }
}

/// Applies `V Λ^{-1} Vᵀ` where `Λ` is the diagonal built from per-axis
/// eigenvalue sums, `λ = Σ_k λ_k[i_k] + shift`. Modes whose sum is within
/// `zero_tol` of zero are projected out.
pub fn fast_diag_solve(eigs: &[&GenEigen], shift: f64, zero_tol: f64, rhs: &[f64]) -> Vec<f64> {
    let vt: Vec<&AxisMatrix> = eigs.iter().map(|e| &e.vectors_t).collect();
    let mut hat = kron_apply(&vt, rhs);
    let dims: Vec<usize> = eigs.iter().map(|e| e.values.len()).collect();
    for (flat, h) in hat.iter_mut().enumerate() {
        let mut rem = flat;
        let mut lam = shift;
        for (k, e) in eigs.iter().enumerate() {
            lam += e.values[rem % dims[k]];
            rem /= dims[k];
        }
        *h = if lam.abs() <= zero_tol { 0.0 } else { *h / lam };
    }
    let v: Vec<&AxisMatrix> = eigs.iter().map(|e| &e.vectors).collect();
    kron_apply(&v, &hat)
}
