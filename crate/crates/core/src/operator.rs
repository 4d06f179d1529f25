//! The exact mass operator `A` and its particle-sampled counterpart `A_h`.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bspline::MAX_ORDER;
use crate::error::{Error, Result};
use crate::par;
use crate::space::SplineSpace;
use crate::tensor::{gram_1d, kron_apply, AxisMatrix};

/// A symmetric linear map on coefficient vectors.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    ExactMass,
    SampledMass,
}

/// Column table of the `(2n-1)^D` neighbour stencil of every dof. Invalid
/// neighbours (beyond a clamped boundary) point at column 0 and are flagged.
#[derive(Debug)]
pub struct StencilPattern<const D: usize> {
    space: SplineSpace<D>,
    width: usize,
    len: usize,
    cols: Vec<u32>,
    valid: Vec<bool>,
}

impl<const D: usize> StencilPattern<D> {
    pub fn new(space: &SplineSpace<D>) -> Result<Self> {
        let n = space.order();
        let width = 2 * n - 1;
        let len = width.pow(D as u32);
        let dofs = space.dofs_per_axis();
        let total = space.dof_count();
        if total >= u32::MAX as usize {
            return Err(Error::Config(format!("{total} dofs exceed the stencil index range")));
        }
        let mut cols = vec![0u32; total * len];
        let mut valid = vec![false; total * len];
        for i in 0..total {
            let r = space.dof_multi_index(i);
            for s in 0..len {
                let mut rem = s;
                let mut col = [0usize; D];
                let mut ok = true;
                for k in 0..D {
                    let o = (rem % width) as isize - (n as isize - 1);
                    rem /= width;
                    let c = r[k] as isize + o;
                    if space.axis(k).is_periodic() {
                        col[k] = c.rem_euclid(dofs[k] as isize) as usize;
                    } else if c < 0 || c >= dofs[k] as isize {
                        ok = false;
                    } else {
                        col[k] = c as usize;
                    }
                }
                if ok {
                    cols[i * len + s] = space.dof_index(col) as u32;
                    valid[i * len + s] = true;
                }
            }
        }
        Ok(Self { space: *space, width, len, cols, valid })
    }

    pub fn space(&self) -> &SplineSpace<D> {
        &self.space
    }

    /// Number of stencil slots per row.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn center(&self) -> usize {
        (self.len - 1) / 2
    }

    /// Stencil offset of local basis function `a` (flat, axis 0 fastest, base `n`).
    fn local_offsets(&self) -> Vec<isize> {
        let n = self.space.order();
        let total = n.pow(D as u32);
        (0..total)
            .map(|flat| {
                let mut rem = flat;
                let mut off = 0isize;
                let mut stride = 1isize;
                for _ in 0..D {
                    off += (rem % n) as isize * stride;
                    rem /= n;
                    stride *= self.width as isize;
                }
                off
            })
            .collect()
    }
}

/// Basis data of a fixed point set: for every point the `n^D` global dofs and
/// the corresponding basis values.
#[derive(Debug, Clone)]
pub struct PointBasis {
    pub per_point: usize,
    pub dofs: Vec<u32>,
    pub values: Vec<f64>,
    /// Points that were inside the box (all, unless restricted).
    pub active: Vec<bool>,
}

impl PointBasis {
    /// Evaluates the basis at every point. Points outside the box on a
    /// non-periodic axis are skipped when `restrict` is set, else rejected.
    pub fn new<const D: usize>(space: &SplineSpace<D>, points: &[[f64; D]], restrict: bool) -> Result<Self> {
        let per = space.order().pow(D as u32);
        let mut dofs = vec![0u32; points.len() * per];
        let mut values = vec![0.0; points.len() * per];
        let active: Vec<Result<bool>> = {
            let mut chunks: Vec<(&mut [u32], &mut [f64])> =
                dofs.chunks_mut(per).zip(values.chunks_mut(per)).collect();
            par::map_collect_mut(&mut chunks, |i, (d, v)| match space.local_basis(&points[i], 0) {
                Ok(lb) => {
                    space.local_values(&lb, v);
                    space.for_each_local(&lb, |flat, g| d[flat] = g as u32);
                    Ok(true)
                }
                Err(e) if !restrict => Err(e),
                Err(_) => {
                    v.iter_mut().for_each(|x| *x = 0.0);
                    Ok(false)
                }
            })
        };
        let active = active.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(Self { per_point: per, dofs, values, active })
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn point(&self, i: usize) -> (&[u32], &[f64]) {
        let r = i * self.per_point..(i + 1) * self.per_point;
        (&self.dofs[r.clone()], &self.values[r])
    }

    /// Load vector `Σ_i w_i u_i B_j(x_i)`; `values` has stride `components`.
    pub fn load(&self, dof_count: usize, weights: &[f64], values: &[f64], components: usize, component: usize) -> Vec<f64> {
        let mut out = vec![0.0; dof_count];
        for i in 0..self.len() {
            if !self.active[i] {
                continue;
            }
            let s = weights[i] * values[i * components + component];
            let (d, v) = self.point(i);
            for (&j, &b) in d.iter().zip(v) {
                out[j as usize] += s * b;
            }
        }
        out
    }

    /// Evaluates a coefficient vector at every point (zero at inactive points).
    pub fn evaluate(&self, coeffs: &[f64]) -> Vec<f64> {
        par::map_collect(self.len(), |i| {
            let (d, v) = self.point(i);
            d.iter().zip(v).map(|(&j, &b)| coeffs[j as usize] * b).sum()
        })
    }
}

#[derive(Debug, Clone)]
enum Storage<const D: usize> {
    /// `⊗_k factors[k]`.
    Kron(Vec<AxisMatrix>),
    Stencil { pattern: Arc<StencilPattern<D>>, vals: Vec<f64> },
}

/// Sparse symmetric operator on the coefficients of a spline space.
#[derive(Debug, Clone)]
pub struct DiscreteOperator<const D: usize> {
    pub kind: OperatorKind,
    space: SplineSpace<D>,
    storage: Storage<D>,
}

/// Exact Gram matrix `∫ B_i B_j` of the basis.
pub fn assemble_exact<const D: usize>(space: &SplineSpace<D>) -> Result<DiscreteOperator<D>> {
    let factors = (0..D)
        .map(|k| gram_1d(space.axis(k), space.axis(k), 0, 0))
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscreteOperator { kind: OperatorKind::ExactMass, space: *space, storage: Storage::Kron(factors) })
}

/// `Σ_i w_i B(x_i) B(x_i)ᵀ` over the points of `basis`.
pub fn assemble_sampled<const D: usize>(
    pattern: &Arc<StencilPattern<D>>,
    basis: &PointBasis,
    weights: &[f64],
) -> Result<DiscreteOperator<D>> {
    let space = *pattern.space();
    if basis.per_point != space.order().pow(D as u32) {
        return Err(Error::Config("point basis does not belong to this space".into()));
    }
    if weights.len() != basis.len() {
        return Err(Error::Config("one weight per point required".into()));
    }
    let len = pattern.len;
    let center = pattern.center() as isize;
    let offsets = pattern.local_offsets();
    let mut vals = vec![0.0; space.dof_count() * len];
    let mut scaled = [0.0f64; MAX_ORDER * MAX_ORDER * MAX_ORDER];
    for i in 0..basis.len() {
        if !basis.active[i] {
            continue;
        }
        if weights[i] < 0.0 {
            return Err(Error::Config(format!("negative weight at particle {i}")));
        }
        // scaling by sqrt(w) keeps every product commutative, so the
        // accumulated matrix is exactly symmetric
        let sw = weights[i].sqrt();
        let (d, v) = basis.point(i);
        for (s, b) in scaled.iter_mut().zip(v) {
            *s = sw * b;
        }
        let c = &scaled[..v.len()];
        for (a, &ca) in c.iter().enumerate() {
            let base = d[a] as isize * len as isize + center - offsets[a];
            for (b, &cb) in c.iter().enumerate() {
                vals[(base + offsets[b]) as usize] += ca * cb;
            }
        }
    }
    Ok(DiscreteOperator {
        kind: OperatorKind::SampledMass,
        space,
        storage: Storage::Stencil { pattern: Arc::clone(pattern), vals },
    })
}

impl<const D: usize> DiscreteOperator<D> {
    pub fn space(&self) -> &SplineSpace<D> {
        &self.space
    }

    /// Matrix entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Kron(f) => {
                let ri = self.space.dof_multi_index(i);
                let rj = self.space.dof_multi_index(j);
                (0..D).map(|k| f[k].get(ri[k], rj[k])).product()
            }
            Storage::Stencil { pattern, vals } => {
                let l = pattern.len;
                let mut parts: Vec<f64> = (0..l)
                    .filter(|&s| pattern.valid[i * l + s] && pattern.cols[i * l + s] as usize == j)
                    .map(|s| vals[i * l + s])
                    .collect();
                // aliased slots (periodic axes with few cells) are summed in
                // a canonical order so that entry(i, j) == entry(j, i) bitwise
                parts.sort_by(f64::total_cmp);
                parts.iter().sum()
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Kron(f) => {
                let diags: Vec<Vec<f64>> = f.iter().map(AxisMatrix::diagonal).collect();
                (0..self.space.dof_count())
                    .map(|i| {
                        let r = self.space.dof_multi_index(i);
                        (0..D).map(|k| diags[k][r[k]]).product()
                    })
                    .collect()
            }
            Storage::Stencil { .. } => (0..self.space.dof_count()).map(|i| self.entry(i, i)).collect(),
        }
    }

    /// Nonzero entries as `(row, col, value)`, aliased stencil slots merged.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let n = self.space.dof_count();
        let mut out = Vec::new();
        for i in 0..n {
            let mut row: Vec<(usize, f64)> = match &self.storage {
                Storage::Kron(_) => {
                    let ri = self.space.dof_multi_index(i);
                    let nb = self.space.order() as isize - 1;
                    let dofs = self.space.dofs_per_axis();
                    let mut cols = Vec::new();
                    let width = 2 * nb as usize + 1;
                    for s in 0..width.pow(D as u32) {
                        let mut rem = s;
                        let mut col = [0; D];
                        let mut ok = true;
                        for k in 0..D {
                            let c = ri[k] as isize + (rem % width) as isize - nb;
                            rem /= width;
                            if self.space.axis(k).is_periodic() {
                                col[k] = c.rem_euclid(dofs[k] as isize) as usize;
                            } else if c < 0 || c >= dofs[k] as isize {
                                ok = false;
                            } else {
                                col[k] = c as usize;
                            }
                        }
                        if ok {
                            cols.push(self.space.dof_index(col));
                        }
                    }
                    cols.sort_unstable();
                    cols.dedup();
                    cols.into_iter().map(|j| (j, self.entry(i, j))).collect()
                }
                Storage::Stencil { pattern, vals } => {
                    let l = pattern.len;
                    let mut r: Vec<(usize, f64)> = (0..l)
                        .filter(|&s| pattern.valid[i * l + s])
                        .map(|s| (pattern.cols[i * l + s] as usize, vals[i * l + s]))
                        .collect();
                    r.sort_by_key(|e| e.0);
                    r.dedup_by_key(|e| e.0);
                    r.into_iter().map(|(j, _)| (j, self.entry(i, j))).collect()
                }
            };
            row.retain(|e| e.1 != 0.0);
            out.extend(row.into_iter().map(|(j, v)| (i, j, v)));
        }
        out
    }

    /// Writes the matrix in Matrix Market coordinate format (1-based indices).
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let t = self.triplets();
        let n = self.space.dof_count();
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(f, "{n} {n} {}", t.len())?;
        for (i, j, v) in t {
            writeln!(f, "{} {} {:e}", i + 1, j + 1, v)?;
        }
        f.flush()?;
        Ok(())
    }

    /// `vᵀ A v`.
    pub fn energy(&self, v: &[f64]) -> f64 {
        let mut y = vec![0.0; v.len()];
        self.apply(v, &mut y);
        crate::quadrature::pairwise_sum(&y.iter().zip(v).map(|(a, b)| a * b).collect::<Vec<_>>())
    }
}

impl<const D: usize> LinearOperator for DiscreteOperator<D> {
    fn dim(&self) -> usize {
        self.space.dof_count()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match &self.storage {
            Storage::Kron(f) => {
                let refs: Vec<&AxisMatrix> = f.iter().collect();
                y.copy_from_slice(&kron_apply(&refs, x));
            }
            Storage::Stencil { pattern, vals } => {
                let l = pattern.len;
                par::for_each_mut(y, |i, yi| {
                    let row = &vals[i * l..(i + 1) * l];
                    let cols = &pattern.cols[i * l..(i + 1) * l];
                    let mut s = 0.0;
                    for (v, &c) in row.iter().zip(cols) {
                        s += v * x[c as usize];
                    }
                    *yi = s;
                });
            }
        }
    }
}
