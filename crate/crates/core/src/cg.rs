//! Preconditioned conjugate gradients with residual history and Ritz
//! value estimates from the Lanczos recurrence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::LinearOperator;
use crate::quadrature::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Preconditioner {
    None,
    #[default]
    Jacobi,
    /// Inverse of the exact tensor-product mass matrix.
    Mass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgConfig {
    pub rel_tolerance: f64,
    pub max_iterations: usize,
    pub preconditioner: Preconditioner,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self { rel_tolerance: 1e-10, max_iterations: 500, preconditioner: Preconditioner::Jacobi }
    }
}

impl CgConfig {
    pub fn with_preconditioner(mut self, p: Preconditioner) -> Self {
        self.preconditioner = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(Error::Config(format!("tolerance {} not in (0, 1)", self.rel_tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    /// Relative residual before the first and after every iteration.
    pub history: Vec<f64>,
    /// Extreme Ritz values of the preconditioned operator.
    pub ritz_min: Option<f64>,
    pub ritz_max: Option<f64>,
}

impl SolveReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    pairwise_sum(&prods)
}

fn remove_mean(v: &mut [f64]) {
    let m = pairwise_sum(v) / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Solves `A x = b` starting from the contents of `x`. `precond(r, z)`
/// writes `z = P r`. With `deflate_constant` the constant vector is treated
/// as the nullspace of `A`: residuals and the solution are kept orthogonal
/// to it.
pub fn pcg(
    op: &dyn LinearOperator,
    precond: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    cfg: &CgConfig,
    deflate_constant: bool,
) -> Result<SolveReport> {
    cfg.validate()?;
    let n = op.dim();
    if b.len() != n || x.len() != n {
        return Err(Error::Config(format!("vector length mismatch: operator {n}, rhs {}, x {}", b.len(), x.len())));
    }
    let mut rhs = b.to_vec();
    if deflate_constant {
        remove_mean(&mut rhs);
    }
    let bnorm = dot(&rhs, &rhs).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveReport {
            iterations: 0,
            relative_residual: 0.0,
            history: vec![0.0],
            ritz_min: None,
            ritz_max: None,
        });
    }
    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(&rhs) {
        *ri = bi - *ri;
    }
    if deflate_constant {
        remove_mean(&mut r);
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    if deflate_constant {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut history = vec![dot(&r, &r).sqrt() / bnorm];
    let mut alphas = Vec::new();
    let mut betas = Vec::new();
    let mut it = 0;
    while history[it] > cfg.rel_tolerance {
        if it == cfg.max_iterations {
            return Err(Error::NotConverged { iterations: it, residual: history[it], history });
        }
        op.apply(&p, &mut q);
        let curv = dot(&p, &q);
        if !(curv > 0.0) {
            return Err(Error::Indefinite { iteration: it + 1, curvature: curv });
        }
        let alpha = rz / curv;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if deflate_constant {
            remove_mean(&mut r);
        }
        precond(&r, &mut z);
        if deflate_constant {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        alphas.push(alpha);
        betas.push(beta);
        it += 1;
        history.push(dot(&r, &r).sqrt() / bnorm);
    }
    if deflate_constant {
        remove_mean(x);
    }
    let (ritz_min, ritz_max) = ritz_extremes(&alphas, &betas);
    Ok(SolveReport { iterations: it, relative_residual: history[it], history, ritz_min, ritz_max })
}

/// Extreme eigenvalues of the Lanczos tridiagonal matrix built from the CG
/// coefficients, by Sturm-sequence bisection.
pub fn ritz_extremes(alphas: &[f64], betas: &[f64]) -> (Option<f64>, Option<f64>) {
    let k = alphas.len();
    if k == 0 {
        return (None, None);
    }
    let mut diag = vec![0.0; k];
    let mut off = vec![0.0; k.saturating_sub(1)];
    for j in 0..k {
        diag[j] = 1.0 / alphas[j] + if j > 0 { betas[j - 1] / alphas[j - 1] } else { 0.0 };
        if j + 1 < k {
            off[j] = betas[j].sqrt() / alphas[j];
        }
    }
    // Gershgorin interval
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..k {
        let rad = if j > 0 { off[j - 1].abs() } else { 0.0 } + if j + 1 < k { off[j].abs() } else { 0.0 };
        lo = lo.min(diag[j] - rad);
        hi = hi.max(diag[j] + rad);
    }
    // number of eigenvalues strictly below x
    let count_below = |x: f64| -> usize {
        let mut c = 0;
        let mut q = diag[0] - x;
        if q < 0.0 {
            c += 1;
        }
        for j in 1..k {
            let denom = if q == 0.0 { f64::EPSILON * (off[j - 1].abs() + 1.0) } else { q };
            q = diag[j] - x - off[j - 1] * off[j - 1] / denom;
            if q < 0.0 {
                c += 1;
            }
        }
        c
    };
    let bisect = |target: usize| -> f64 {
        // smallest x with count_below(x) > target
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            if count_below(m) > target {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    };
    (Some(bisect(0)), Some(bisect(k - 1)))
}

/// Jacobi preconditioner closure from an operator diagonal.
pub fn jacobi(diag: &[f64]) -> impl Fn(&[f64], &mut [f64]) + '_ {
    move |r, z| {
        for i in 0..r.len() {
            z[i] = if diag[i] > 0.0 { r[i] / diag[i] } else { r[i] };
        }
    }
}

pub fn identity(r: &[f64], z: &mut [f64]) {
    z.copy_from_slice(r);
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense {
        n: usize,
        a: Vec<f64>,
    }

    impl LinearOperator for Dense {
        fn dim(&self) -> usize {
            self.n
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for i in 0..self.n {
                y[i] = (0..self.n).map(|j| self.a[i * self.n + j] * x[j]).sum();
            }
        }
    }

    fn laplace_1d(n: usize, shift: f64) -> Dense {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 2.0 + shift;
            if i > 0 {
                a[i * n + i - 1] = -1.0;
            }
            if i + 1 < n {
                a[i * n + i + 1] = -1.0;
            }
        }
        Dense { n, a }
    }

    #[test]
    fn solves_spd_system_and_reports_ritz_bounds() {
        let op = laplace_1d(30, 0.1);
        let xs: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; 30];
        op.apply(&xs, &mut b);
        let mut x = vec![0.0; 30];
        let rep = pcg(&op, &identity, &b, &mut x, &CgConfig::default(), false).unwrap();
        for (u, v) in x.iter().zip(&xs) {
            assert!((u - v).abs() < 1e-8);
        }
        assert!(rep.relative_residual <= 1e-10);
        assert_eq!(rep.history.len(), rep.iterations + 1);
        // spectrum of the shifted Laplacian lies in (0.1, 4.1)
        let (lo, hi) = (rep.ritz_min.unwrap(), rep.ritz_max.unwrap());
        assert!(lo > 0.1 - 1e-9 && hi < 4.1 + 1e-9 && lo < hi);
        assert!(hi > 4.0);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let op = laplace_1d(5, 0.0);
        let mut x = vec![1.0; 5];
        let rep = pcg(&op, &identity, &[0.0; 5], &mut x, &CgConfig::default(), false).unwrap();
        assert_eq!(x, vec![0.0; 5]);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn max_iterations_reports_history() {
        let op = laplace_1d(50, 0.0);
        let b: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let mut x = vec![0.0; 50];
        let cfg = CgConfig { max_iterations: 3, ..CgConfig::default() };
        match pcg(&op, &identity, &b, &mut x, &cfg, false) {
            Err(Error::NotConverged { iterations, history, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn indefinite_operator_detected() {
        let mut op = laplace_1d(4, 0.0);
        op.a[0] = -5.0;
        let mut x = vec![0.0; 4];
        let r = pcg(&op, &identity, &[1.0, 0.0, 0.0, 0.0], &mut x, &CgConfig::default(), false);
        assert!(matches!(r, Err(Error::Indefinite { .. })));
    }

    #[test]
    fn deflation_handles_singular_periodic_laplacian() {
        let n = 16;
        let mut op = laplace_1d(n, 0.0);
        op.a[n - 1] = -1.0;
        op.a[(n - 1) * n] = -1.0;
        let b: Vec<f64> = (0..n).map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos() + 3.0).collect();
        let mut x = vec![0.0; n];
        pcg(&op, &identity, &b, &mut x, &CgConfig::default(), true).unwrap();
        assert!(x.iter().sum::<f64>().abs() < 1e-10);
        let mut ax = vec![0.0; n];
        op.apply(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - (b[i] - 3.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn report_serialises() {
        let rep = SolveReport { iterations: 2, relative_residual: 1e-11, history: vec![1.0, 0.1, 1e-11], ritz_min: Some(0.5), ritz_max: None };
        let s = rep.to_json().unwrap();
        let back: SolveReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rep);
    }
}
