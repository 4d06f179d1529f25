//! Projection of particle data onto a spline space by inverting the sampled
//! mass operator `A_h`, plus blob-function and decay diagnostics.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cg::{identity, jacobi, pcg, CgConfig, Preconditioner, SolveReport};
use crate::error::{Error, Result};
use crate::operator::{assemble_exact, assemble_sampled, DiscreteOperator, PointBasis, StencilPattern};
use crate::particles::ParticleField;
use crate::quadrature::{pairwise_sum, CellQuadrature};
use crate::space::{SplineFunction, SplineSpace};
use crate::tensor::{gram_1d, kron_apply, AxisMatrix};

/// A linear functional on the spline space, stored by its values on the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    pub entries: Vec<f64>,
}

impl DualVector {
    /// Point evaluation `v ↦ v(y)`.
    pub fn point_evaluation<const D: usize>(space: &SplineSpace<D>, y: &[f64; D]) -> Result<Self> {
        let mut entries = vec![0.0; space.dof_count()];
        for (j, b) in space.eval_basis(y)? {
            entries[j] += b;
        }
        Ok(Self { entries })
    }

    /// `v ↦ ∫_{Q} v` over one grid cell `Q`.
    pub fn cell_indicator<const D: usize>(space: &SplineSpace<D>, cell: usize) -> Result<Self> {
        if cell >= space.grid().cell_count() {
            return Err(Error::Config(format!("cell {cell} out of range")));
        }
        let mut entries = vec![0.0; space.dof_count()];
        let quad = CellQuadrature::new(space.grid(), space.order());
        let lo = space.grid().cell_lo(space.grid().cell_multi_index(cell));
        let mut fail = None;
        quad.for_each(lo, |x, w| match space.eval_basis(x) {
            Ok(b) => b.into_iter().for_each(|(j, v)| entries[j] += w * v),
            Err(e) => fail = Some(e),
        });
        match fail {
            Some(e) => Err(e),
            None => Ok(Self { entries }),
        }
    }

    /// Particle functional `v ↦ Σ_i w_i u_i v(x_i)` for one value component.
    pub fn from_particles<const D: usize>(
        space: &SplineSpace<D>,
        basis: &PointBasis,
        particles: &ParticleField<D>,
        component: usize,
    ) -> Self {
        Self {
            entries: basis.load(space.dof_count(), &particles.weights, &particles.values, particles.components, component),
        }
    }
}

/// `A_h` together with the basis data it was built from.
#[derive(Debug, Clone)]
pub struct SampledSystem<const D: usize> {
    pub operator: DiscreteOperator<D>,
    pub basis: PointBasis,
}

/// Result of projecting every value component of a particle field.
#[derive(Debug, Clone)]
pub struct Projection<const D: usize> {
    pub functions: Vec<SplineFunction<D>>,
    pub reports: Vec<SolveReport>,
}

impl<const D: usize> Projection<D> {
    pub fn total_iterations(&self) -> usize {
        self.reports.iter().map(|r| r.iterations).sum()
    }
}

/// Reusable projection machinery for one spline space.
#[derive(Debug, Clone)]
pub struct Projector<const D: usize> {
    space: SplineSpace<D>,
    pattern: Arc<StencilPattern<D>>,
    mass_inverse: Vec<AxisMatrix>,
    /// Skip particles outside the space's box instead of failing.
    pub restrict: bool,
}

/// Dense inverses of the one-dimensional mass matrices.
fn mass_inverse_factors<const D: usize>(space: &SplineSpace<D>) -> Result<Vec<AxisMatrix>> {
    (0..D)
        .map(|k| {
            let m = gram_1d(space.axis(k), space.axis(k), 0, 0)?.to_dense();
            let inv = m
                .cholesky()
                .ok_or_else(|| Error::Config("mass matrix is not positive definite".into()))?
                .inverse();
            Ok(AxisMatrix::from_dense(&inv))
        })
        .collect()
}

/// Runs CG on `op` with the preconditioner named in `cfg`.
fn run_cg<const D: usize>(
    op: &DiscreteOperator<D>,
    mass_inverse: &[AxisMatrix],
    rhs: &[f64],
    x: &mut [f64],
    cfg: &CgConfig,
) -> Result<SolveReport> {
    match cfg.preconditioner {
        Preconditioner::None => pcg(op, &identity, rhs, x, cfg, false),
        Preconditioner::Jacobi => {
            let diag = op.diagonal();
            let pre = jacobi(&diag);
            pcg(op, &pre, rhs, x, cfg, false)
        }
        Preconditioner::Mass => {
            let refs: Vec<&AxisMatrix> = mass_inverse.iter().collect();
            let apply = |r: &[f64], z: &mut [f64]| z.copy_from_slice(&kron_apply(&refs, r));
            pcg(op, &apply, rhs, x, cfg, false)
        }
    }
}

impl<const D: usize> Projector<D> {
    pub fn new(space: &SplineSpace<D>) -> Result<Self> {
        Ok(Self {
            space: *space,
            pattern: Arc::new(StencilPattern::new(space)?),
            mass_inverse: mass_inverse_factors(space)?,
            restrict: false,
        })
    }

    pub fn restricted(mut self, on: bool) -> Self {
        self.restrict = on;
        self
    }

    pub fn space(&self) -> &SplineSpace<D> {
        &self.space
    }

    /// Assembles `A_h` for the given points and weights.
    pub fn sample(&self, positions: &[[f64; D]], weights: &[f64]) -> Result<SampledSystem<D>> {
        let basis = PointBasis::new(&self.space, positions, self.restrict)?;
        let operator = assemble_sampled(&self.pattern, &basis, weights)?;
        Ok(SampledSystem { operator, basis })
    }

    /// Solves `op x = rhs`, starting from the contents of `x`.
    pub fn solve(&self, op: &DiscreteOperator<D>, rhs: &[f64], x: &mut [f64], cfg: &CgConfig) -> Result<SolveReport> {
        run_cg(op, &self.mass_inverse, rhs, x, cfg)
    }

    /// Projects every component of `particles`. `warm` supplies optional
    /// starting coefficients per component.
    pub fn project(
        &self,
        particles: &ParticleField<D>,
        cfg: &CgConfig,
        warm: Option<&[SplineFunction<D>]>,
    ) -> Result<Projection<D>> {
        let sys = self.sample(&particles.positions, &particles.weights)?;
        self.project_with(&sys, particles, cfg, warm)
    }

    /// As [`Projector::project`] with an already assembled system.
    pub fn project_with(
        &self,
        sys: &SampledSystem<D>,
        particles: &ParticleField<D>,
        cfg: &CgConfig,
        warm: Option<&[SplineFunction<D>]>,
    ) -> Result<Projection<D>> {
        let mut functions = Vec::with_capacity(particles.components);
        let mut reports = Vec::with_capacity(particles.components);
        for c in 0..particles.components {
            let rhs = DualVector::from_particles(&self.space, &sys.basis, particles, c);
            let mut x = match warm {
                Some(w) => w[c].coeffs.clone(),
                None => vec![0.0; self.space.dof_count()],
            };
            reports.push(self.solve(&sys.operator, &rhs.entries, &mut x, cfg)?);
            functions.push(SplineFunction::new(self.space, x)?);
        }
        Ok(Projection { functions, reports })
    }
}

/// Solves `op u = rhs` for a spline `u`.
pub fn solve<const D: usize>(
    op: &DiscreteOperator<D>,
    rhs: &DualVector,
    cfg: &CgConfig,
) -> Result<(SplineFunction<D>, SolveReport)> {
    let space = *op.space();
    let inv = if cfg.preconditioner == Preconditioner::Mass { mass_inverse_factors(&space)? } else { Vec::new() };
    let mut x = vec![0.0; space.dof_count()];
    let rep = run_cg(op, &inv, &rhs.entries, &mut x, cfg)?;
    Ok((SplineFunction::new(space, x)?, rep))
}

/// `L²` projection `A^{-1}(∫ f B_j)` of a function, with the load integrated
/// by `n+2` Gauss points per axis and cell.
pub fn l2_project<const D: usize, F>(space: &SplineSpace<D>, f: F, cfg: &CgConfig) -> Result<(SplineFunction<D>, SolveReport)>
where
    F: Fn(&[f64; D]) -> f64,
{
    let grid = space.grid();
    let quad = CellQuadrature::new(grid, space.order() + 2);
    let mut entries = vec![0.0; space.dof_count()];
    let mut fail = None;
    for c in 0..grid.cell_count() {
        quad.for_each(grid.cell_lo(grid.cell_multi_index(c)), |x, w| match space.eval_basis(x) {
            Ok(b) => {
                let v = w * f(x);
                b.into_iter().for_each(|(j, bj)| entries[j] += v * bj);
            }
            Err(e) => fail = Some(e),
        });
        if let Some(e) = fail.take() {
            return Err(e);
        }
    }
    let op = assemble_exact(space)?;
    solve(&op, &DualVector { entries }, cfg)
}

/// `u_{h,σ} = A_h^{-1} u_h` for the first value component of `particles`.
pub fn project_particles<const D: usize>(
    space: &SplineSpace<D>,
    particles: &ParticleField<D>,
    cfg: &CgConfig,
) -> Result<(SplineFunction<D>, SolveReport)> {
    let proj = Projector::new(space)?;
    let mut p = proj.project(particles, cfg, None)?;
    Ok((p.functions.swap_remove(0), p.reports.swap_remove(0)))
}

/// Blob function `ζ(·, y) = A_h^{-1} δ_y`.
pub fn blob_function<const D: usize>(
    space: &SplineSpace<D>,
    particles: &ParticleField<D>,
    y: &[f64; D],
    cfg: &CgConfig,
) -> Result<(SplineFunction<D>, SolveReport)> {
    let proj = Projector::new(space)?;
    let sys = proj.sample(&particles.positions, &particles.weights)?;
    let rhs = DualVector::point_evaluation(space, y)?;
    let mut x = vec![0.0; space.dof_count()];
    let rep = proj.solve(&sys.operator, &rhs.entries, &mut x, cfg)?;
    Ok((SplineFunction::new(*space, x)?, rep))
}

/// Largest defect `|Σ_i w_i ζ(x_i, y) x_i^α − y^α|` over `|α| < n` (total
/// degree), given the blob values at the particles.
pub fn moment_defect<const D: usize>(particles: &ParticleField<D>, zeta_at_particles: &[f64], y: &[f64; D], n: usize) -> f64 {
    let mut worst = 0.0f64;
    let mut alpha = [0usize; D];
    loop {
        if alpha.iter().sum::<usize>() < n {
            let terms: Vec<f64> = (0..particles.len())
                .map(|i| {
                    let x = &particles.positions[i];
                    let mono: f64 = (0..D).map(|k| x[k].powi(alpha[k] as i32)).product();
                    particles.weights[i] * zeta_at_particles[i] * mono
                })
                .collect();
            let target: f64 = (0..D).map(|k| y[k].powi(alpha[k] as i32)).product();
            worst = worst.max((pairwise_sum(&terms) - target).abs());
        }
        let mut k = 0;
        loop {
            if k == D {
                return worst;
            }
            alpha[k] += 1;
            if alpha[k] < n {
                break;
            }
            alpha[k] = 0;
            k += 1;
        }
    }
}

/// Norms of `A_h^{-1} f_j` outside growing neighbourhoods of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    /// `rings[k] = ‖ζ‖_{L²(Ω∖D_k)}` where `D_0 = ∅` and `D_k` (k ≥ 1) is the
    /// union of cells whose centres lie within max-norm distance `< kσ`.
    pub rings: Vec<f64>,
    /// Per-ring decay factor fitted by least squares on `log rings[k]`, `k ≥ 2`.
    pub rho: Option<f64>,
    pub report: SolveReport,
}

/// Decay of the response to the indicator load of `cell`, up to ring `k_max`.
pub fn decay_profile<const D: usize>(
    space: &SplineSpace<D>,
    particles: &ParticleField<D>,
    cell: usize,
    k_max: usize,
    cfg: &CgConfig,
) -> Result<DecayProfile> {
    let proj = Projector::new(space)?;
    let sys = proj.sample(&particles.positions, &particles.weights)?;
    let rhs = DualVector::cell_indicator(space, cell)?;
    let mut x = vec![0.0; space.dof_count()];
    let report = proj.solve(&sys.operator, &rhs.entries, &mut x, cfg)?;
    let f = SplineFunction::new(*space, x)?;

    let grid = space.grid();
    let quad = CellQuadrature::new(grid, space.order() + 1);
    let src = grid.cell_multi_index(cell);
    let mut by_ring: Vec<Vec<f64>> = vec![Vec::new(); k_max + 1];
    for c in 0..grid.cell_count() {
        let m = grid.cell_multi_index(c);
        let dist = (0..D)
            .map(|k| {
                let d = m[k].abs_diff(src[k]);
                if grid.periodic()[k] {
                    d.min(grid.cells()[k] - d)
                } else {
                    d
                }
            })
            .max()
            .unwrap_or(0);
        let mut acc = 0.0;
        let mut fail = None;
        quad.for_each(grid.cell_lo(m), |x, w| match f.value(x) {
            Ok(v) => acc += w * v * v,
            Err(e) => fail = Some(e),
        });
        if let Some(e) = fail {
            return Err(e);
        }
        // a cell at distance `dist` lies outside D_k exactly for k <= dist
        by_ring[dist.min(k_max)].push(acc);
    }
    // rings[k] = sqrt(Σ_{dist >= k} cell norms²)
    let mut rings = vec![0.0; k_max + 1];
    let mut tail = 0.0;
    for k in (0..=k_max).rev() {
        tail += pairwise_sum(&by_ring[k]);
        rings[k] = tail.sqrt();
    }
    let pts: Vec<(f64, f64)> =
        (2..=k_max).filter(|&k| rings[k] > 0.0).map(|k| (k as f64, rings[k].ln())).collect();
    let rho = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some((sxy / sxx).exp())
    } else {
        None
    };
    Ok(DecayProfile { rings, rho, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CartesianGrid;
    use crate::norms::{spline_norm, Lp, NormKind};
    use crate::operator::LinearOperator;
    use crate::particles::{init_particles, Placement};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(cells: usize, n: usize, seed: u64) -> (SplineSpace<2>, ParticleField<2>) {
        let g = CartesianGrid::<2>::unit(cells, false).unwrap();
        let s = SplineSpace::new(g, n).unwrap();
        let p = init_particles(&g, 0.5 / cells as f64, Placement::RandomInCell { seed }, 1, |x, v| {
            v[0] = (3.0 * x[0]).sin() * x[1]
        })
        .unwrap();
        (s, p)
    }

    #[test]
    fn constant_values_give_constant_spline() {
        let (s, mut p) = setup(6, 3, 1);
        p.values.iter_mut().for_each(|v| *v = 2.5);
        let cfg = CgConfig { rel_tolerance: 1e-13, ..CgConfig::default() };
        let (f, rep) = project_particles(&s, &p, &cfg).unwrap();
        assert!(f.coeffs.iter().all(|c| (c - 2.5).abs() < 1e-8), "{rep:?}");
    }

    #[test]
    fn recovers_known_coefficients_from_sampled_rhs() {
        let (s, p) = setup(5, 4, 2);
        let proj = Projector::new(&s).unwrap();
        let sys = proj.sample(&p.positions, &p.weights).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth: Vec<f64> = (0..s.dof_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut rhs = vec![0.0; truth.len()];
        sys.operator.apply(&truth, &mut rhs);
        for pre in [Preconditioner::None, Preconditioner::Jacobi, Preconditioner::Mass] {
            let mut x = vec![0.0; truth.len()];
            let cfg = CgConfig { rel_tolerance: 1e-13, max_iterations: 2000, preconditioner: pre };
            proj.solve(&sys.operator, &rhs, &mut x, &cfg).unwrap();
            for (a, b) in x.iter().zip(&truth) {
                assert!((a - b).abs() < 1e-9, "{pre:?}");
            }
        }
    }

    #[test]
    fn projection_is_conservative() {
        let (s, p) = setup(6, 3, 5);
        let (f, _) = project_particles(&s, &p, &CgConfig { rel_tolerance: 1e-13, ..CgConfig::default() }).unwrap();
        // ⟨A_h u, 1⟩ = Σ w_i u(x_i) must equal the particle sum Σ w_i u_i
        let at = PointBasis::new(&s, &p.positions, false).unwrap().evaluate(&f.coeffs);
        let sampled: f64 = at.iter().zip(&p.weights).map(|(u, w)| u * w).sum();
        assert!((sampled - p.weighted_sum()[0]).abs() < 1e-12);
    }

    #[test]
    fn blob_has_unit_mass_and_moments() {
        let (s, p) = setup(8, 3, 6);
        let y = [0.43, 0.61];
        let cfg = CgConfig { rel_tolerance: 1e-13, max_iterations: 2000, ..CgConfig::default() };
        let (z, _) = blob_function(&s, &p, &y, &cfg).unwrap();
        let basis = PointBasis::new(&s, &p.positions, false).unwrap();
        let vals = basis.evaluate(&z.coeffs);
        assert!(moment_defect(&p, &vals, &y, 3) < 1e-8);
        let zeroth: f64 = vals.iter().zip(&p.weights).map(|(v, w)| v * w).sum();
        assert!((zeroth - 1.0).abs() < 1e-10);
    }

    #[test]
    fn decay_profile_first_ring_is_global_norm() {
        let (s, p) = setup(12, 2, 7);
        let cell = s.grid().cell_index([6, 6]);
        let prof = decay_profile(&s, &p, cell, 6, &CgConfig::default()).unwrap();
        let (x, _) = {
            let proj = Projector::new(&s).unwrap();
            let sys = proj.sample(&p.positions, &p.weights).unwrap();
            let rhs = DualVector::cell_indicator(&s, cell).unwrap();
            let mut x = vec![0.0; s.dof_count()];
            proj.solve(&sys.operator, &rhs.entries, &mut x, &CgConfig::default()).unwrap();
            (x, ())
        };
        let global = spline_norm(&SplineFunction::new(s, x).unwrap(), NormKind::norm(Lp::L2, 0)).unwrap();
        assert!((prof.rings[0] - global).abs() < 1e-12 * global);
        assert!(prof.rings.windows(2).all(|w| w[1] <= w[0]));
        assert!(prof.rho.unwrap() < 1.0);
    }

    #[test]
    fn cell_indicator_integrates_partition_of_unity() {
        let s = SplineSpace::<2>::new(CartesianGrid::unit(4, false).unwrap(), 3).unwrap();
        let d = DualVector::cell_indicator(&s, 5).unwrap();
        assert!((d.entries.iter().sum::<f64>() - 1.0 / 16.0).abs() < 1e-15);
    }
}
