//! Lebesgue and Sobolev norms by composite Gauss quadrature.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::CartesianGrid;
use crate::par;
use crate::quadrature::{pairwise_sum, CellQuadrature};
use crate::space::{SplineFunction, SplineSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lp {
    L1,
    L2,
    Inf,
}

/// Value and gradient of one component of a field at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<const D: usize> {
    pub value: f64,
    pub grad: [f64; D],
}

impl<const D: usize> Default for Sample<D> {
    fn default() -> Self {
        Self { value: 0.0, grad: [0.0; D] }
    }
}

/// Which Sobolev quantity to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormKind {
    pub p: Lp,
    /// Sobolev order, 0 or 1.
    pub s: usize,
    /// Keep only the derivatives of order exactly `s`.
    pub semi: bool,
}

impl NormKind {
    pub fn norm(p: Lp, s: usize) -> Self {
        Self { p, s, semi: false }
    }

    pub fn seminorm(p: Lp, s: usize) -> Self {
        Self { p, s, semi: true }
    }
}

/// `W^{s,p}` norm (or seminorm) of a vector field with `components`
/// components over `grid`, using `q` Gauss points per axis and cell. The
/// component norms are combined as `(Σ_c Σ_{|α|} ‖∂^α u_c‖_p^p)^{1/p}`; for
/// `p = ∞` the maximum is taken over all nodes and cell corners.
pub fn field_norm<const D: usize, F>(
    grid: &CartesianGrid<D>,
    q: usize,
    kind: NormKind,
    components: usize,
    field: F,
) -> Result<f64>
where
    F: Fn(&[f64; D], &mut [Sample<D>]) -> Result<()> + Sync + Send,
{
    if kind.s > 1 {
        return Err(Error::Usage(format!("Sobolev order {} not supported", kind.s)));
    }
    if components == 0 || components > 3 {
        return Err(Error::Usage(format!("{components} components not supported")));
    }
    let with_values = kind.s == 0 || !kind.semi;
    let with_grads = kind.s == 1;
    let quad = CellQuadrature::new(grid, q);
    let widths = grid.widths();

    let per_cell = par::try_map_collect(grid.cell_count(), |cell| -> Result<f64> {
        let lo = grid.cell_lo(grid.cell_multi_index(cell));
        let mut buf = [Sample::<D>::default(); 3];
        let buf = &mut buf[..components];
        let mut acc = 0.0f64;
        let mut failure = None;
        let mut visit = |x: &[f64; D], w: f64| {
            if failure.is_some() {
                return;
            }
            if let Err(e) = field(x, buf) {
                failure = Some(e);
                return;
            }
            match kind.p {
                Lp::L1 => {
                    let mut s = 0.0;
                    for c in buf.iter() {
                        if with_values {
                            s += c.value.abs();
                        }
                        if with_grads {
                            s += c.grad.iter().map(|g| g.abs()).sum::<f64>();
                        }
                    }
                    acc += w * s;
                }
                Lp::L2 => {
                    let mut s = 0.0;
                    for c in buf.iter() {
                        if with_values {
                            s += c.value * c.value;
                        }
                        if with_grads {
                            s += c.grad.iter().map(|g| g * g).sum::<f64>();
                        }
                    }
                    acc += w * s;
                }
                Lp::Inf => {
                    for c in buf.iter() {
                        if with_values {
                            acc = acc.max(c.value.abs());
                        }
                        if with_grads {
                            for g in c.grad {
                                acc = acc.max(g.abs());
                            }
                        }
                    }
                }
            }
        };
        quad.for_each(lo, &mut visit);
        if kind.p == Lp::Inf {
            for corner in 0..(1usize << D) {
                let x: [f64; D] =
                    std::array::from_fn(|k| lo[k] + if corner >> k & 1 == 1 { widths[k] } else { 0.0 });
                visit(&x, 0.0);
            }
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(acc),
        }
    })?;

    Ok(match kind.p {
        Lp::L1 => pairwise_sum(&per_cell),
        Lp::L2 => pairwise_sum(&per_cell).sqrt(),
        Lp::Inf => per_cell.iter().copied().fold(0.0, f64::max),
    })
}

/// Samples value and gradient of a spline at a point.
pub fn spline_sample<const D: usize>(f: &SplineFunction<D>, x: &[f64; D]) -> Result<Sample<D>> {
    let jet = f.jet(x, 1)?;
    Ok(Sample { value: jet.value(), grad: jet.gradient() })
}

/// Norm of a scalar spline over its box with `n+1` Gauss points per axis.
pub fn spline_norm<const D: usize>(f: &SplineFunction<D>, kind: NormKind) -> Result<f64> {
    field_norm(f.space.grid(), f.space.order() + 1, kind, 1, |x, out| {
        out[0] = spline_sample(f, x)?;
        Ok(())
    })
}

/// Norm of `f - exact`, where `exact` returns value and gradient.
pub fn spline_error_norm<const D: usize, E>(f: &SplineFunction<D>, exact: E, kind: NormKind) -> Result<f64>
where
    E: Fn(&[f64; D]) -> Sample<D> + Sync + Send,
{
    field_norm(f.space.grid(), f.space.order() + 1, kind, 1, |x, out| {
        let s = spline_sample(f, x)?;
        let e = exact(x);
        out[0] = Sample {
            value: s.value - e.value,
            grad: std::array::from_fn(|k| s.grad[k] - e.grad[k]),
        };
        Ok(())
    })
}

/// Largest observed ratio `|v|_{W^{1,1}} / (σ^{-1} ‖v‖_{L^1})` over random
/// coefficient vectors drawn uniformly from `[-1, 1]`.
pub fn inverse_estimate_probe<const D: usize>(space: &SplineSpace<D>, trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials.max(1) {
        let coeffs = (0..space.dof_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = SplineFunction::new(*space, coeffs)?;
        worst = worst.max(inverse_ratio(&v)?);
    }
    Ok(worst)
}

/// `|v|_{W^{1,1}} / (σ^{-1} ‖v‖_{L^1})` for one spline; zero for `v = 0`.
pub fn inverse_ratio<const D: usize>(v: &SplineFunction<D>) -> Result<f64> {
    let semi = spline_norm(v, NormKind::seminorm(Lp::L1, 1))?;
    let l1 = spline_norm(v, NormKind::norm(Lp::L1, 0))?;
    if l1 == 0.0 {
        return Ok(0.0);
    }
    Ok(semi * v.space.sigma() / l1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_one_has_unit_l2_norm() {
        let s = SplineSpace::<2>::new(CartesianGrid::unit(4, false).unwrap(), 3).unwrap();
        let f = SplineFunction::constant(s, 1.0);
        assert!((spline_norm(&f, NormKind::norm(Lp::L2, 0)).unwrap() - 1.0).abs() < 1e-14);
        assert!((spline_norm(&f, NormKind::norm(Lp::Inf, 1)).unwrap() - 1.0).abs() < 1e-12);
        assert!(spline_norm(&f, NormKind::seminorm(Lp::L1, 1)).unwrap() < 1e-11);
    }

    #[test]
    fn difference_with_itself_is_zero() {
        let s = SplineSpace::<2>::new(CartesianGrid::unit(5, true).unwrap(), 4).unwrap();
        let coeffs = (0..s.dof_count()).map(|i| (i as f64 * 0.37).sin()).collect();
        let f = SplineFunction::new(s, coeffs).unwrap();
        let g = f.clone();
        let e = spline_error_norm(&f, |x| spline_sample(&g, x).unwrap(), NormKind::norm(Lp::L2, 1)).unwrap();
        assert!(e < 1e-14);
    }

    #[test]
    fn gauss_exactness_for_polynomials() {
        // degree 2(n-1) per axis integrated exactly with q = n points
        let n = 3;
        let g = CartesianGrid::<2>::new([0.0, -1.0], [2.0, 1.0], [3, 2], [false; 2]).unwrap();
        let val = field_norm(&g, n, NormKind::norm(Lp::L1, 0), 1, |x, out| {
            out[0].value = x[0].powi(4) * x[1].powi(4) + 1.0;
            Ok(())
        })
        .unwrap();
        let exact = (32.0 / 5.0) * (2.0 / 5.0) + 4.0;
        assert!((val - exact).abs() < 1e-12);
    }

    #[test]
    fn unsupported_order_is_usage_error() {
        let g = CartesianGrid::<1>::unit(2, false).unwrap();
        let r = field_norm(&g, 2, NormKind::norm(Lp::L2, 2), 1, |_, _| Ok(()));
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn sine_norm_against_closed_form() {
        let g = CartesianGrid::<1>::unit(16, false).unwrap();
        let v = field_norm(&g, 6, NormKind::norm(Lp::L2, 1), 1, |x, out| {
            out[0] = Sample { value: (2.0 * PI * x[0]).sin(), grad: [2.0 * PI * (2.0 * PI * x[0]).cos()] };
            Ok(())
        })
        .unwrap();
        let exact = (0.5 + 2.0 * PI * PI).sqrt();
        assert!((v - exact).abs() < 1e-9);
    }

    #[test]
    fn inverse_ratio_of_constant_is_zero_and_bump_is_positive() {
        let s = SplineSpace::<1>::new(CartesianGrid::unit(8, false).unwrap(), 2).unwrap();
        assert_eq!(inverse_ratio(&SplineFunction::constant(s, 3.0)).unwrap(), 0.0);
        let mut bump = SplineFunction::zero(s);
        bump.coeffs[4] = 1.0;
        let r = inverse_ratio(&bump).unwrap();
        // hat of height 1 and width 2σ: |v|_{W11} = 2, ‖v‖_1 = σ
        assert!((r - 2.0).abs() < 1e-12);
    }
}
