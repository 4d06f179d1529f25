//! Tensor-product spline spaces and functions in them.

use crate::bspline::{Axis, AxisBasis, MAX_DERIV, MAX_ORDER};
use crate::error::{Error, Result};
use crate::grid::CartesianGrid;

/// Maximum number of mixed partials tracked by [`Jet`]: `3^D` for `D <= 3`.
pub const JET_LEN: usize = 27;

/// The spline space of order `n` (coordinate-wise degree `n-1`, smoothness
/// `C^{n-2}`) on a uniform grid. Periodic grid axes get periodic splines,
/// the others an open (clamped) knot vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineSpace<const D: usize> {
    grid: CartesianGrid<D>,
    order: usize,
    axes: [Axis; D],
}

/// Nonzero basis data of a point, one [`AxisBasis`] per axis.
#[derive(Debug, Clone, Copy)]
pub struct LocalBasis<const D: usize> {
    pub axes: [AxisBasis; D],
}

/// All mixed partial derivatives with per-axis order at most 2; entry
/// `d_0 + 3 d_1 + 9 d_2` holds `∂^{d_0}_1 ∂^{d_1}_2 ∂^{d_2}_3`.
#[derive(Debug, Clone, Copy)]
pub struct Jet<const D: usize> {
    pub parts: [f64; JET_LEN],
}

impl<const D: usize> Jet<D> {
    #[inline]
    pub fn get(&self, alpha: [usize; D]) -> f64 {
        let mut idx = 0;
        for k in (0..D).rev() {
            idx = idx * 3 + alpha[k];
        }
        self.parts[idx]
    }

    pub fn value(&self) -> f64 {
        self.parts[0]
    }

    pub fn gradient(&self) -> [f64; D] {
        std::array::from_fn(|k| self.parts[3usize.pow(k as u32)])
    }

    pub fn laplacian(&self) -> f64 {
        (0..D).map(|k| self.parts[2 * 3usize.pow(k as u32)]).sum()
    }

    /// Second derivative `∂_i ∂_j`.
    pub fn second(&self, i: usize, j: usize) -> f64 {
        let mut idx = 3usize.pow(i as u32);
        idx += 3usize.pow(j as u32);
        self.parts[idx]
    }
}

impl<const D: usize> SplineSpace<D> {
    pub fn new(grid: CartesianGrid<D>, order: usize) -> Result<Self> {
        let lo = grid.lo();
        let hi = grid.hi();
        let cells = grid.cells();
        let periodic = grid.periodic();
        let mut axes = Vec::with_capacity(D);
        for k in 0..D {
            axes.push(Axis::new(lo[k], hi[k], cells[k], order, periodic[k])?);
        }
        let axes: [Axis; D] = axes.try_into().expect("one axis per dimension");
        Ok(Self { grid, order, axes })
    }

    pub fn grid(&self) -> &CartesianGrid<D> {
        &self.grid
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn axes(&self) -> &[Axis; D] {
        &self.axes
    }

    /// Mesh width of axis 0 (the grids used here are isotropic).
    pub fn sigma(&self) -> f64 {
        self.axes[0].width()
    }

    pub fn dofs_per_axis(&self) -> [usize; D] {
        std::array::from_fn(|k| self.axes[k].dofs())
    }

    pub fn dof_count(&self) -> usize {
        self.axes.iter().map(Axis::dofs).product()
    }

    /// Same grid, different order.
    pub fn with_order(&self, order: usize) -> Result<Self> {
        Self::new(self.grid, order)
    }

    pub fn dof_index(&self, multi: [usize; D]) -> usize {
        let mut idx = 0;
        for k in (0..D).rev() {
            idx = idx * self.axes[k].dofs() + multi[k];
        }
        idx
    }

    pub fn dof_multi_index(&self, mut idx: usize) -> [usize; D] {
        let mut multi = [0; D];
        for k in 0..D {
            let n = self.axes[k].dofs();
            multi[k] = idx % n;
            idx /= n;
        }
        multi
    }

    /// Basis data at `x`, with derivatives up to `nder` per axis.
    pub fn local_basis(&self, x: &[f64; D], nder: usize) -> Result<LocalBasis<D>> {
        let mut axes = [AxisBasis { first: 0, ders: [[0.0; MAX_ORDER]; MAX_DERIV + 1] }; D];
        for k in 0..D {
            axes[k] = self.axes[k].eval(x[k], nder).ok_or_else(|| Error::OutOfDomain {
                point: x.to_vec(),
                axis: k,
            })?;
        }
        Ok(LocalBasis { axes })
    }

    /// Visits the `n^D` nonzero basis functions at a point as
    /// `(local flat index, global dof index)` pairs. Local index has axis 0 fastest.
    pub fn for_each_local(&self, lb: &LocalBasis<D>, mut f: impl FnMut(usize, usize)) {
        let n = self.order;
        let total = n.pow(D as u32);
        let dofs = self.dofs_per_axis();
        // per-axis global offsets, already multiplied by the axis stride
        let mut offs = [[0usize; MAX_ORDER]; D];
        let mut stride = 1;
        for k in 0..D {
            for a in 0..n {
                offs[k][a] = self.axes[k].dof(lb.axes[k].first, a) * stride;
            }
            stride *= dofs[k];
        }
        let mut a = [0usize; D];
        for flat in 0..total {
            let mut g = 0;
            for k in 0..D {
                g += offs[k][a[k]];
            }
            f(flat, g);
            for k in 0..D {
                a[k] += 1;
                if a[k] < n {
                    break;
                }
                a[k] = 0;
            }
        }
    }

    /// Tensor products of the nonzero basis values at a point, flat with axis 0 fastest.
    pub fn local_values(&self, lb: &LocalBasis<D>, out: &mut [f64]) {
        let n = self.order;
        out[0] = 1.0;
        let mut len = 1;
        for k in 0..D {
            let v = &lb.axes[k].ders[0];
            // expand: new[i + len*a] = old[i] * v[a], filled backwards to stay in place
            for a in (0..n).rev() {
                for i in 0..len {
                    out[i + len * a] = out[i] * v[a];
                }
            }
            len *= n;
        }
    }

    /// Sparse list of `(dof, value)` pairs for the basis functions nonzero at `x`.
    pub fn eval_basis(&self, x: &[f64; D]) -> Result<Vec<(usize, f64)>> {
        let lb = self.local_basis(x, 0)?;
        let n = self.order.pow(D as u32);
        let mut vals = vec![0.0; n];
        self.local_values(&lb, &mut vals);
        let mut out = Vec::with_capacity(n);
        self.for_each_local(&lb, |flat, g| out.push((g, vals[flat])));
        Ok(out)
    }

    /// Gathers the `n^D` coefficients touching a point, flat with axis 0 fastest.
    pub fn gather(&self, lb: &LocalBasis<D>, coeffs: &[f64], out: &mut [f64]) {
        self.for_each_local(lb, |flat, g| out[flat] = coeffs[g]);
    }

    /// All mixed partials of per-axis order `<= nder` (at most 2) of the
    /// function with global coefficients `coeffs`, contracted one axis at a
    /// time straight from the coefficient vector.
    pub fn jet_from(&self, lb: &LocalBasis<D>, coeffs: &[f64], nder: usize) -> Jet<D> {
        let n = self.order;
        let m = nder.min(MAX_DERIV) + 1;
        let dofs = self.dofs_per_axis();
        let mut offs = [[0usize; MAX_ORDER]; D];
        let mut stride = 1;
        for k in 0..D {
            for a in 0..n {
                offs[k][a] = self.axes[k].dof(lb.axes[k].first, a) * stride;
            }
            stride *= dofs[k];
        }
        let line = |base: usize| -> [f64; 3] {
            let w = &lb.axes[0].ders;
            let mut out = [0.0; 3];
            for a in 0..n {
                let c = coeffs[base + offs[0][a]];
                for d in 0..m {
                    out[d] += w[d][a] * c;
                }
            }
            out
        };
        let plane = |base: usize| -> [f64; 9] {
            let w = &lb.axes[1].ders;
            let mut out = [0.0; 9];
            for a in 0..n {
                let t = line(base + offs[1][a]);
                for d in 0..m {
                    let wd = w[d][a];
                    for j in 0..m {
                        out[j + 3 * d] += wd * t[j];
                    }
                }
            }
            out
        };
        let mut jet = Jet { parts: [0.0; JET_LEN] };
        match D {
            1 => jet.parts[..3].copy_from_slice(&line(0)),
            2 => jet.parts[..9].copy_from_slice(&plane(0)),
            _ => {
                let w = &lb.axes[2].ders;
                for a in 0..n {
                    let t = plane(offs[2][a]);
                    for d in 0..m {
                        let wd = w[d][a];
                        for j in 0..9 {
                            jet.parts[j + 9 * d] += wd * t[j];
                        }
                    }
                }
            }
        }
        jet
    }
}

/// A scalar function of a [`SplineSpace`], stored by its B-spline coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineFunction<const D: usize> {
    pub space: SplineSpace<D>,
    pub coeffs: Vec<f64>,
}

impl<const D: usize> SplineFunction<D> {
    pub fn new(space: SplineSpace<D>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dof_count() {
            return Err(Error::Config(format!(
                "expected {} coefficients, got {}",
                space.dof_count(),
                coeffs.len()
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn zero(space: SplineSpace<D>) -> Self {
        Self { coeffs: vec![0.0; space.dof_count()], space }
    }

    pub fn constant(space: SplineSpace<D>, c: f64) -> Self {
        Self { coeffs: vec![c; space.dof_count()], space }
    }

    /// Partial derivative `∂^alpha` at `x`; every `alpha[k] <= 2`.
    pub fn eval(&self, x: &[f64; D], alpha: [usize; D]) -> Result<f64> {
        let nder = alpha.iter().copied().max().unwrap_or(0);
        if nder > MAX_DERIV {
            return Err(Error::Usage(format!(
                "derivative order {nder} per axis exceeds {MAX_DERIV}"
            )));
        }
        Ok(self.jet(x, nder)?.get(alpha))
    }

    pub fn value(&self, x: &[f64; D]) -> Result<f64> {
        self.eval(x, [0; D])
    }

    /// All mixed partials of per-axis order `<= nder` at `x`.
    pub fn jet(&self, x: &[f64; D], nder: usize) -> Result<Jet<D>> {
        let lb = self.space.local_basis(x, nder)?;
        Ok(self.jet_at(&lb, nder))
    }

    pub fn jet_at(&self, lb: &LocalBasis<D>, nder: usize) -> Jet<D> {
        self.space.jet_from(lb, &self.coeffs, nder)
    }

    /// Integral over the box. Uses the closed form `∫B_j = (t_{j+n}-t_j)/n` per axis.
    pub fn integral(&self) -> f64 {
        let weights: Vec<Vec<f64>> = (0..D).map(|k| basis_integrals(self.space.axis(k))).collect();
        let mut total = 0.0;
        for (idx, c) in self.coeffs.iter().enumerate() {
            let multi = self.space.dof_multi_index(idx);
            let w: f64 = (0..D).map(|k| weights[k][multi[k]]).product();
            total += c * w;
        }
        total
    }
}

/// Integrals of the 1D basis functions of an axis.
pub fn basis_integrals(axis: &Axis) -> Vec<f64> {
    let n = axis.order() as isize;
    let cells = axis.cells() as isize;
    (0..axis.dofs() as isize)
        .map(|j| {
            let (a, b) = if axis.is_periodic() {
                (j - (n - 1), j + 1)
            } else {
                ((j - (n - 1)).clamp(0, cells), (j + 1).clamp(0, cells))
            };
            (b - a) as f64 * axis.width() / n as f64
        })
        .collect()
}
