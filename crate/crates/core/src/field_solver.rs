//! Periodic stream-function solves and the vorticity right-hand sides.

use serde::{Deserialize, Serialize};

use crate::cg::{identity, jacobi, pcg, CgConfig, Preconditioner, SolveReport};
use crate::error::{Error, Result};
use crate::norms::Sample;
use crate::operator::LinearOperator;
use crate::par;
use crate::space::{Jet, SplineFunction, SplineSpace};
use crate::tensor::{fast_diag_solve, gram_1d, kron_apply, AxisMatrix, GenEigen};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PoissonMethod {
    /// Conjugate gradients with the constant mode deflated.
    #[default]
    Cg,
    /// Direct solve through the per-axis generalised eigenbases.
    FastDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonConfig {
    pub method: PoissonMethod,
    pub cg: CgConfig,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        Self { method: PoissonMethod::Cg, cg: CgConfig { max_iterations: 5000, ..CgConfig::default() } }
    }
}

/// Galerkin stiffness form `∫∇u·∇v` as a Kronecker sum.
#[derive(Debug, Clone)]
pub struct Stiffness {
    mass: Vec<AxisMatrix>,
    stiff: Vec<AxisMatrix>,
    dim: usize,
}

impl Stiffness {
    pub fn new<const D: usize>(space: &SplineSpace<D>) -> Result<Self> {
        let mut mass = Vec::with_capacity(D);
        let mut stiff = Vec::with_capacity(D);
        for k in 0..D {
            mass.push(gram_1d(space.axis(k), space.axis(k), 0, 0)?);
            stiff.push(gram_1d(space.axis(k), space.axis(k), 1, 1)?);
        }
        Ok(Self { mass, stiff, dim: space.dof_count() })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let md: Vec<Vec<f64>> = self.mass.iter().map(|m| m.diagonal()).collect();
        let kd: Vec<Vec<f64>> = self.stiff.iter().map(|m| m.diagonal()).collect();
        let dims: Vec<usize> = md.iter().map(|v| v.len()).collect();
        (0..self.dim)
            .map(|flat| {
                let mut idx = Vec::with_capacity(dims.len());
                let mut rem = flat;
                for &n in &dims {
                    idx.push(rem % n);
                    rem /= n;
                }
                (0..dims.len())
                    .map(|t| {
                        (0..dims.len())
                            .map(|k| if k == t { kd[k][idx[k]] } else { md[k][idx[k]] })
                            .product::<f64>()
                    })
                    .sum()
            })
            .collect()
    }

    /// `xᵀ K x`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }
}

impl LinearOperator for Stiffness {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for t in 0..self.mass.len() {
            let factors: Vec<&AxisMatrix> =
                (0..self.mass.len()).map(|k| if k == t { &self.stiff[k] } else { &self.mass[k] }).collect();
            for (yi, v) in y.iter_mut().zip(kron_apply(&factors, x)) {
                *yi += v;
            }
        }
    }
}

/// Result of one Poisson solve.
#[derive(Debug, Clone)]
pub struct PoissonSolution<const D: usize> {
    pub psi: SplineFunction<D>,
    /// Mean of the right-hand side that was removed before solving.
    pub mean: f64,
    pub report: Option<SolveReport>,
}

/// Solver for `−Δψ = f` on a fully periodic box, with `f` from one spline
/// space and `ψ` in a space of another order on the same grid.
#[derive(Debug, Clone)]
pub struct PoissonSolver<const D: usize> {
    rhs_space: SplineSpace<D>,
    psi_space: SplineSpace<D>,
    mixed: Vec<AxisMatrix>,
    stiffness: Stiffness,
    eigen: Vec<GenEigen>,
    config: PoissonConfig,
}

impl<const D: usize> PoissonSolver<D> {
    pub fn new(rhs_space: &SplineSpace<D>, psi_order: usize, config: PoissonConfig) -> Result<Self> {
        if !rhs_space.grid().periodic().iter().all(|&p| p) {
            return Err(Error::Config("the Poisson solver needs a fully periodic box".into()));
        }
        config.cg.validate()?;
        if config.method == PoissonMethod::Cg && config.cg.preconditioner == Preconditioner::Mass {
            return Err(Error::Config("mass preconditioning is not offered for the stiffness solve".into()));
        }
        let psi_space = rhs_space.with_order(psi_order)?;
        let mixed = (0..D)
            .map(|k| gram_1d(psi_space.axis(k), rhs_space.axis(k), 0, 0))
            .collect::<Result<Vec<_>>>()?;
        let stiffness = Stiffness::new(&psi_space)?;
        let eigen = if config.method == PoissonMethod::FastDiagonal {
            (0..D)
                .map(|k| GenEigen::new(&stiffness.stiff[k], &stiffness.mass[k]))
                .collect::<Result<Vec<_>>>()?
        } else {
            Vec::new()
        };
        Ok(Self { rhs_space: *rhs_space, psi_space, mixed, stiffness, eigen, config })
    }

    pub fn psi_space(&self) -> &SplineSpace<D> {
        &self.psi_space
    }

    pub fn rhs_space(&self) -> &SplineSpace<D> {
        &self.rhs_space
    }

    pub fn stiffness(&self) -> &Stiffness {
        &self.stiffness
    }

    /// Load vector `∫ f B^ψ_j`.
    pub fn load(&self, rhs: &SplineFunction<D>) -> Vec<f64> {
        let refs: Vec<&AxisMatrix> = self.mixed.iter().collect();
        kron_apply(&refs, &rhs.coeffs)
    }

    /// Solves for zero-mean `ψ`. With `mean_zero` the mean of `rhs` is
    /// subtracted first; otherwise a right-hand side with nonzero integral is
    /// rejected. `warm` seeds the iterative solve.
    pub fn solve(&self, rhs: &SplineFunction<D>, mean_zero: bool, warm: Option<&[f64]>) -> Result<PoissonSolution<D>> {
        if rhs.space != self.rhs_space {
            return Err(Error::Usage("right-hand side lives in a different spline space".into()));
        }
        let integral = rhs.integral();
        let volume = self.rhs_space.grid().volume();
        let mean = integral / volume;
        let mut f = rhs.clone();
        if mean_zero {
            // constants have all-one coefficients
            f.coeffs.iter_mut().for_each(|c| *c -= mean);
        } else {
            let scale: f64 = rhs.coeffs.iter().map(|c| c.abs()).sum::<f64>() * volume / rhs.coeffs.len() as f64;
            if integral.abs() > 1e-10 * scale.max(1.0) {
                return Err(Error::Solvability { integral });
            }
        }
        let b = self.load(&f);
        let (x, report) = match self.config.method {
            PoissonMethod::FastDiagonal => {
                let refs: Vec<&GenEigen> = self.eigen.iter().collect();
                let top = self.eigen.iter().map(|e| e.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))).sum::<f64>();
                (fast_diag_solve(&refs, 0.0, 1e-10 * top, &b), None)
            }
            PoissonMethod::Cg => {
                let mut x = match warm {
                    Some(w) if w.len() == b.len() => w.to_vec(),
                    _ => vec![0.0; b.len()],
                };
                let rep = match self.config.cg.preconditioner {
                    Preconditioner::None => pcg(&self.stiffness, &identity, &b, &mut x, &self.config.cg, true)?,
                    _ => {
                        let diag = self.stiffness.diagonal();
                        let pre = jacobi(&diag);
                        pcg(&self.stiffness, &pre, &b, &mut x, &self.config.cg, true)?
                    }
                };
                (x, Some(rep))
            }
        };
        Ok(PoissonSolution { psi: SplineFunction::new(self.psi_space, x)?, mean, report })
    }
}

/// Velocity and its gradient `grad[a][b] = ∂_b u_a` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySample<const D: usize> {
    pub u: [f64; D],
    pub grad: [[f64; D]; D],
}

#[inline]
fn first(k: usize) -> usize {
    3usize.pow(k as u32)
}

#[inline]
fn second(i: usize, j: usize) -> usize {
    3usize.pow(i as u32) + 3usize.pow(j as u32)
}

/// Sign and index pairs `(b, c)` with `ε_{abc} ≠ 0`.
fn levi_civita(a: usize) -> [(f64, usize, usize); 2] {
    [(1.0, (a + 1) % 3, (a + 2) % 3), (-1.0, (a + 2) % 3, (a + 1) % 3)]
}

/// Divergence-free velocity `∇×ψ`: `(∂₂ψ, −∂₁ψ)` in 2D, the curl of a
/// vector potential in 3D.
#[derive(Debug, Clone)]
pub struct StreamVelocity<const D: usize> {
    pub psi: Vec<SplineFunction<D>>,
}

impl<const D: usize> StreamVelocity<D> {
    pub fn new(psi: Vec<SplineFunction<D>>) -> Result<Self> {
        let want = match D {
            2 => 1,
            3 => 3,
            _ => return Err(Error::Usage(format!("stream-function velocity is undefined in {D}D"))),
        };
        if psi.len() != want {
            return Err(Error::Usage(format!("expected {want} stream-function components, got {}", psi.len())));
        }
        if psi.iter().any(|p| p.space != psi[0].space) {
            return Err(Error::Usage("stream-function components must share a space".into()));
        }
        Ok(Self { psi })
    }

    pub fn space(&self) -> &SplineSpace<D> {
        &self.psi[0].space
    }

    fn jets(&self, x: &[f64; D], nder: usize) -> Result<Vec<Jet<D>>> {
        let lb = self.space().local_basis(x, nder)?;
        Ok(self.psi.iter().map(|p| p.jet_at(&lb, nder)).collect())
    }

    pub fn velocity(&self, x: &[f64; D]) -> Result<[f64; D]> {
        let jets = self.jets(x, 1)?;
        let mut u = [0.0; D];
        if D == 2 {
            u[0] = jets[0].parts[first(1)];
            u[1] = -jets[0].parts[first(0)];
        } else {
            for (a, ua) in u.iter_mut().enumerate() {
                for (s, b, c) in levi_civita(a) {
                    *ua += s * jets[c].parts[first(b)];
                }
            }
        }
        Ok(u)
    }

    pub fn sample(&self, x: &[f64; D]) -> Result<VelocitySample<D>> {
        let jets = self.jets(x, 2)?;
        let mut u = [0.0; D];
        let mut grad = [[0.0; D]; D];
        if D == 2 {
            let p = &jets[0].parts;
            u[0] = p[first(1)];
            u[1] = -p[first(0)];
            for d in 0..2 {
                grad[0][d] = p[second(d, 1)];
                grad[1][d] = -p[second(d, 0)];
            }
        } else {
            for a in 0..3 {
                for (s, b, c) in levi_civita(a) {
                    let p = &jets[c].parts;
                    u[a] += s * p[first(b)];
                    for d in 0..3 {
                        grad[a][d] += s * p[second(d, b)];
                    }
                }
            }
        }
        Ok(VelocitySample { u, grad })
    }

    pub fn divergence(&self, x: &[f64; D]) -> Result<f64> {
        let s = self.sample(x)?;
        Ok((0..D).map(|k| s.grad[k][k]).sum())
    }

    /// Velocities at many points, in order.
    pub fn velocities(&self, points: &[[f64; D]]) -> Result<Vec<[f64; D]>> {
        par::try_map_collect(points.len(), |i| self.velocity(&points[i]))
    }

    /// Fills one [`Sample`] per velocity component, for error norms.
    pub fn fill_samples(&self, x: &[f64; D], out: &mut [Sample<D>]) -> Result<()> {
        let s = self.sample(x)?;
        for a in 0..D {
            out[a].value = s.u[a];
            out[a].grad = s.grad[a];
        }
        Ok(())
    }
}

/// Per-particle `ν Δω(x_i)` for every component of `omega`, laid out like
/// particle values (components of one particle adjacent).
pub fn viscous_rhs<const D: usize>(omega: &[SplineFunction<D>], positions: &[[f64; D]], nu: f64) -> Result<Vec<f64>> {
    let c = omega.len();
    if nu == 0.0 || c == 0 {
        return Ok(vec![0.0; positions.len() * c]);
    }
    let space = omega[0].space;
    if omega.iter().any(|w| w.space != space) {
        return Err(Error::Usage("vorticity components must share a space".into()));
    }
    let rows = par::try_map_collect(positions.len(), |i| {
        let lb = space.local_basis(&positions[i], 2)?;
        Ok::<_, Error>(omega.iter().map(|w| nu * w.jet_at(&lb, 2).laplacian()).collect::<Vec<f64>>())
    })?;
    Ok(rows.concat())
}

/// `(ω·∇)u` from the velocity gradient `g[a][b] = ∂_b u_a`, with `ω = ∇×u`.
pub fn stretching_term(g: &[[f64; 3]; 3]) -> [f64; 3] {
    let omega = [g[2][1] - g[1][2], g[0][2] - g[2][0], g[1][0] - g[0][1]];
    std::array::from_fn(|a| (0..3).map(|b| g[a][b] * omega[b]).sum())
}

/// Per-particle vortex stretching `(ω·∇)u` with `ω = ∇×u`, laid out as 3
/// components per particle. Only defined in 3D.
pub fn stretching_rhs<const D: usize>(velocity: &StreamVelocity<D>, positions: &[[f64; D]]) -> Result<Vec<f64>> {
    if D != 3 {
        return Err(Error::Usage(format!("vortex stretching is absent in {D}D")));
    }
    let rows = par::try_map_collect(positions.len(), |i| {
        let s = velocity.sample(&positions[i])?;
        let g: [[f64; 3]; 3] = std::array::from_fn(|a| std::array::from_fn(|b| s.grad[a][b]));
        Ok::<_, Error>(stretching_term(&g))
    })?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CartesianGrid;
    use crate::norms::{spline_error_norm, Lp, NormKind};
    use crate::quasi::quasi_interpolate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn periodic2(cells: usize, n: usize) -> SplineSpace<2> {
        SplineSpace::new(CartesianGrid::unit(cells, true).unwrap(), n).unwrap()
    }

    fn abc(x: &[f64; 3]) -> [f64; 3] {
        [x[2].sin() + x[1].cos(), x[0].sin() + x[2].cos(), x[1].sin() + x[0].cos()]
    }

    fn tight() -> PoissonConfig {
        PoissonConfig { cg: CgConfig { rel_tolerance: 1e-13, max_iterations: 5000, ..CgConfig::default() }, ..Default::default() }
    }

    #[test]
    fn zero_rhs_gives_zero_psi() {
        let s = periodic2(8, 2);
        let solver = PoissonSolver::new(&s, 4, PoissonConfig::default()).unwrap();
        let sol = solver.solve(&SplineFunction::zero(s), false, None).unwrap();
        assert!(sol.psi.coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn stiffness_rows_sum_to_zero_and_symmetric() {
        let s = periodic2(6, 4);
        let k = Stiffness::new(&s).unwrap();
        let mut y = vec![0.0; s.dof_count()];
        k.apply(&vec![1.0; s.dof_count()], &mut y);
        assert!(y.iter().all(|v| v.abs() < 1e-12));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..s.dof_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..s.dof_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (mut ka, mut kb) = (vec![0.0; a.len()], vec![0.0; a.len()]);
        k.apply(&a, &mut ka);
        k.apply(&b, &mut kb);
        let ab: f64 = b.iter().zip(&ka).map(|(x, y)| x * y).sum();
        let ba: f64 = a.iter().zip(&kb).map(|(x, y)| x * y).sum();
        assert!((ab - ba).abs() < 1e-12 * ab.abs().max(1.0));
        let diag = k.diagonal();
        let mut e0 = vec![0.0; a.len()];
        e0[7] = 1.0;
        k.apply(&e0, &mut y);
        assert!((y[7] - diag[7]).abs() < 1e-12 * diag[7]);
    }

    #[test]
    fn nonzero_mean_is_a_solvability_error() {
        let s = periodic2(4, 2);
        let solver = PoissonSolver::new(&s, 4, PoissonConfig::default()).unwrap();
        let r = solver.solve(&SplineFunction::constant(s, 1.0), false, None);
        assert!(matches!(r, Err(Error::Solvability { .. })));
        let sol = solver.solve(&SplineFunction::constant(s, 1.0), true, None).unwrap();
        assert!((sol.mean - 1.0).abs() < 1e-14);
        assert!(sol.psi.coeffs.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn non_periodic_box_is_rejected() {
        let s = SplineSpace::new(CartesianGrid::<2>::unit(4, false).unwrap(), 2).unwrap();
        assert!(PoissonSolver::new(&s, 4, PoissonConfig::default()).is_err());
    }

    fn sine_error(cells: usize, method: PoissonMethod) -> f64 {
        let s = periodic2(cells, 4);
        let f = quasi_interpolate(&s, |x| 8.0 * PI * PI * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()).unwrap();
        let solver = PoissonSolver::new(&s, 4, PoissonConfig { method, ..tight() }).unwrap();
        let psi = solver.solve(&f, false, None).unwrap().psi;
        spline_error_norm(&psi, |x| Sample { value: (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin(), grad: [0.0; 2] }, NormKind::norm(Lp::L2, 0)).unwrap()
    }

    #[test]
    fn eigenfunction_converges_at_psi_order() {
        let e1 = sine_error(16, PoissonMethod::Cg);
        let e2 = sine_error(32, PoissonMethod::Cg);
        let eoc = (e1 / e2).log2();
        assert!((eoc - 4.0).abs() < 0.5, "errors {e1:e} {e2:e} eoc {eoc}");
        let direct = sine_error(32, PoissonMethod::FastDiagonal);
        assert!((direct - e2).abs() < 1e-8 * e2.max(1e-12) + 1e-12);
    }

    #[test]
    fn energy_matches_rhs_pairing() {
        let s = periodic2(8, 4);
        let f = quasi_interpolate(&s, |x| (2.0 * PI * x[0]).cos() * (4.0 * PI * x[1]).sin() + 0.3).unwrap();
        let solver = PoissonSolver::new(&s, 6, tight()).unwrap();
        let sol = solver.solve(&f, true, None).unwrap();
        let mut g = f.clone();
        g.coeffs.iter_mut().for_each(|c| *c -= sol.mean);
        let pairing: f64 = solver.load(&g).iter().zip(&sol.psi.coeffs).map(|(a, b)| a * b).sum();
        let energy = solver.stiffness().energy(&sol.psi.coeffs);
        assert!((energy - pairing).abs() < 1e-8 * energy);
        assert!(sol.psi.integral().abs() < 1e-12);
    }

    #[test]
    fn abc_component_is_reproduced() {
        let g = CartesianGrid::<3>::new([0.0; 3], [2.0 * PI; 3], [8; 3], [true; 3]).unwrap();
        let s = SplineSpace::new(g, 4).unwrap();
        let f = quasi_interpolate(&s, |x| x[2].sin() + x[1].cos()).unwrap();
        let solver = PoissonSolver::new(&s, 6, tight()).unwrap();
        let psi = solver.solve(&f, false, None).unwrap().psi;
        let err = spline_error_norm(&psi, |x| Sample { value: x[2].sin() + x[1].cos(), grad: [0.0; 3] }, NormKind::norm(Lp::Inf, 0)).unwrap();
        assert!(err < 2e-3, "err {err}");
    }

    #[test]
    fn velocity_2d_of_constant_is_zero() {
        let v = StreamVelocity::new(vec![SplineFunction::constant(periodic2(4, 4), 3.0)]).unwrap();
        let u = v.velocity(&[0.3, 0.7]).unwrap();
        assert!(u.iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn velocity_2d_matches_symbolic_curl() {
        let s = periodic2(32, 6);
        let psi = quasi_interpolate(&s, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()).unwrap();
        let v = StreamVelocity::new(vec![psi]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let u = v.velocity(&x).unwrap();
            let (s0, c0) = (2.0 * PI * x[0]).sin_cos();
            let (s1, c1) = (2.0 * PI * x[1]).sin_cos();
            let exact = [2.0 * PI * s0 * c1, -2.0 * PI * c0 * s1];
            for k in 0..2 {
                assert!((u[k] - exact[k]).abs() < 1e-5, "{u:?} vs {exact:?}");
            }
        }
    }

    #[test]
    fn velocities_are_divergence_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s2 = periodic2(5, 5);
        let psi2 = SplineFunction::new(s2, (0..s2.dof_count()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let v2 = StreamVelocity::new(vec![psi2]).unwrap();
        let s3 = SplineSpace::new(CartesianGrid::<3>::unit(3, false).unwrap(), 4).unwrap();
        let psi3 = (0..3)
            .map(|_| SplineFunction::new(s3, (0..s3.dof_count()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        let v3 = StreamVelocity::new(psi3).unwrap();
        for _ in 0..1000 {
            let x2 = [rng.random::<f64>(), rng.random::<f64>()];
            assert!(v2.divergence(&x2).unwrap().abs() < 1e-10);
            let x3 = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            assert!(v3.divergence(&x3).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn curl_3d_uses_the_right_stencil() {
        // ψ = (0, 0, φ) gives u = (∂₂φ, −∂₁φ, 0)
        let s = SplineSpace::new(CartesianGrid::<3>::unit(4, true).unwrap(), 4).unwrap();
        let phi = quasi_interpolate(&s, |x| (2.0 * PI * x[0]).sin() + (2.0 * PI * x[1]).cos()).unwrap();
        let v = StreamVelocity::new(vec![SplineFunction::zero(s), SplineFunction::zero(s), phi.clone()]).unwrap();
        let x = [0.21, 0.63, 0.4];
        let u = v.velocity(&x).unwrap();
        let j = phi.jet(&x, 1).unwrap();
        assert!((u[0] - j.get([0, 1, 0])).abs() < 1e-14);
        assert!((u[1] + j.get([1, 0, 0])).abs() < 1e-14);
        assert_eq!(u[2], 0.0);
    }

    #[test]
    fn viscous_rhs_cases() {
        let s = periodic2(32, 6);
        let pts = [[0.1, 0.2], [0.7, 0.35], [0.55, 0.9]];
        assert_eq!(viscous_rhs(&[SplineFunction::constant(s, 2.0)], &pts, 0.0).unwrap(), vec![0.0; 3]);
        let c = viscous_rhs(&[SplineFunction::constant(s, 2.0)], &pts, 0.1).unwrap();
        assert!(c.iter().all(|v| v.abs() < 1e-9));
        let w = quasi_interpolate(&s, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()).unwrap();
        let nu = 1e-2;
        let r = viscous_rhs(&[w], &pts, nu).unwrap();
        for (x, v) in pts.iter().zip(&r) {
            let exact = -8.0 * PI * PI * nu * (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin();
            assert!((v - exact).abs() < 1e-4 * 8.0 * PI * PI * nu, "{v} vs {exact}");
        }
    }

    #[test]
    fn stretching_is_rejected_in_2d() {
        let v = StreamVelocity::new(vec![SplineFunction::zero(periodic2(4, 4))]).unwrap();
        assert!(matches!(stretching_rhs(&v, &[[0.5, 0.5]]), Err(Error::Usage(_))));
    }

    #[test]
    fn stretching_of_rigid_rotation_vanishes() {
        // u = (−x₂, x₁, 0) from ψ₃ = −(x₁² + x₂²)/2; ω = (0,0,2) lies in the kernel of ∇u
        let s = SplineSpace::new(CartesianGrid::<3>::new([-1.0; 3], [1.0; 3], [2; 3], [false; 3]).unwrap(), 4).unwrap();
        let psi3 = quasi_interpolate(&s, |x| -(x[0] * x[0] + x[1] * x[1]) / 2.0).unwrap();
        let v = StreamVelocity::new(vec![SplineFunction::zero(s), SplineFunction::zero(s), psi3]).unwrap();
        let pts = [[0.3, -0.4, 0.1], [0.9, 0.2, -0.7]];
        let st = v.sample(&pts[0]).unwrap();
        let g = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        for a in 0..3 {
            for b in 0..3 {
                assert!((st.grad[a][b] - g[a][b]).abs() < 1e-10);
            }
        }
        let r = stretching_rhs(&v, &pts).unwrap();
        assert!(r.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn stretching_of_abc_matches_symbolic() {
        let g = CartesianGrid::<3>::new([0.0; 3], [2.0 * PI; 3], [24; 3], [true; 3]).unwrap();
        let s = SplineSpace::new(g, 8).unwrap();
        // Beltrami: ψ = u = ω
        let psi = (0..3).map(|c| quasi_interpolate(&s, move |x| abc(x)[c]).unwrap()).collect();
        let v = StreamVelocity::new(psi).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<[f64; 3]> = (0..20).map(|_| std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI))).collect();
        let r = stretching_rhs(&v, &pts).unwrap();
        for (i, x) in pts.iter().enumerate() {
            let u = abc(x);
            let grad = [
                [0.0, -x[1].sin(), x[2].cos()],
                [x[0].cos(), 0.0, -x[2].sin()],
                [-x[0].sin(), x[1].cos(), 0.0],
            ];
            for a in 0..3 {
                let exact: f64 = (0..3).map(|b| grad[a][b] * u[b]).sum();
                let scale = exact.abs().max(1.0);
                assert!((r[3 * i + a] - exact).abs() < 1e-4 * scale, "{} vs {exact}", r[3 * i + a]);
            }
        }
    }
}
