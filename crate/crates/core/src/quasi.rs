//! Local-interpolation quasi-interpolant.
//!
//! Each coefficient is read off a local least-squares fit of `f`, sampled
//! at `n` equispaced points per cell, over the support of its basis
//! function. The operator is local, bounded and reproduces the whole spline
//! space. On
//! tensor grids it factors into one small matrix per axis applied to samples
//! on a `(cells·n)^D` point lattice.

use nalgebra::DMatrix;

use crate::bspline::Axis;
use crate::error::{Error, Result};
use crate::par;
use crate::space::{SplineFunction, SplineSpace};
use crate::tensor::{kron_apply, AxisMatrix};

/// Sample abscissae of one axis: `n` per cell, at `(m + 1/2)/n` in cell units.
pub fn sample_points(axis: &Axis) -> Vec<f64> {
    let n = axis.order();
    (0..axis.cells() * n)
        .map(|s| {
            let (c, m) = (s / n, s % n);
            axis.lo() + (c as f64 + (m as f64 + 0.5) / n as f64) * axis.width()
        })
        .collect()
}

/// Cells whose samples determine coefficient `j`: its support, shifted to
/// stay inside a clamped axis, without repeats on short periodic axes.
fn window(axis: &Axis, j: usize) -> Vec<usize> {
    let n = axis.order() as isize;
    let cells = axis.cells() as isize;
    let mut start = j as isize - (n - 1);
    if !axis.is_periodic() {
        start = start.clamp(0, (cells - n).max(0));
    }
    let mut out = Vec::with_capacity(n as usize);
    for c in start..start + n.min(cells) {
        let c = c.rem_euclid(cells) as usize;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Sparse map from axis samples to coefficients. Coefficient `j` is read
/// off the least-squares fit, by the splines living on `window(j)`, of the
/// samples in that window.
pub fn axis_operator(axis: &Axis) -> Result<AxisMatrix> {
    let n = axis.order();
    let pts = sample_points(axis);
    let mut q = DMatrix::zeros(axis.dofs(), pts.len());
    for j in 0..axis.dofs() {
        let cells = window(axis, j);
        let mut locals: Vec<usize> = Vec::new();
        for &c in &cells {
            for a in 0..n {
                let d = axis.dof(c, a);
                if !locals.contains(&d) {
                    locals.push(d);
                }
            }
        }
        let rows: Vec<usize> = cells.iter().flat_map(|&c| c * n..(c + 1) * n).collect();
        let mut m = DMatrix::zeros(rows.len(), locals.len());
        for (r, &s) in rows.iter().enumerate() {
            let b = axis.eval(pts[s], 0).expect("sample inside axis");
            for a in 0..n {
                let col = locals.iter().position(|&d| d == axis.dof(b.first, a)).expect("local function");
                m[(r, col)] += b.ders[0][a];
            }
        }
        let pinv = m
            .pseudo_inverse(1e-13)
            .map_err(|e| Error::Config(format!("local fit failed: {e}")))?;
        let jl = locals.iter().position(|&d| d == j).expect("j is supported on its window");
        for (r, &s) in rows.iter().enumerate() {
            q[(j, s)] = pinv[(jl, r)];
        }
    }
    Ok(AxisMatrix::from_dense(&q))
}

/// Quasi-interpolant `P f` of a point-evaluable function.
pub fn quasi_interpolate<const D: usize, F>(space: &SplineSpace<D>, f: F) -> Result<SplineFunction<D>>
where
    F: Fn(&[f64; D]) -> f64 + Sync + Send,
{
    let pts: Vec<Vec<f64>> = (0..D).map(|k| sample_points(space.axis(k))).collect();
    let shape: Vec<usize> = pts.iter().map(Vec::len).collect();
    let total: usize = shape.iter().product();
    let samples = par::map_collect(total, |flat| {
        let mut rem = flat;
        let x: [f64; D] = std::array::from_fn(|k| {
            let i = rem % shape[k];
            rem /= shape[k];
            pts[k][i]
        });
        f(&x)
    });
    let ops = (0..D).map(|k| axis_operator(space.axis(k))).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&AxisMatrix> = ops.iter().collect();
    SplineFunction::new(*space, kron_apply(&refs, &samples))
}
