//! Vorticity-form Navier–Stokes on a periodic box: particles carry ω, the
//! velocity comes from a projected ω through a stream-function solve.

use std::cell::Cell;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::advect::{advect_observed, ParticleDynamics};
use crate::bench::io::{EocTable, ErrorSeries, SeriesRow};
use crate::bench::scenarios::{abc_exact, abc_velocity, shear_exact, shear_vorticity};
use crate::cg::{CgConfig, Preconditioner};
use crate::error::{Error, Result};
use crate::field_solver::{stretching_term, PoissonConfig, PoissonMethod, PoissonSolver, StreamVelocity};
use crate::grid::CartesianGrid;
use crate::norms::{field_norm, Lp, NormKind, Sample};
use crate::par;
use crate::particles::{init_particles, ParticleField, Placement};
use crate::projection::{l2_project, Projector};
use crate::rk::{Scheme, TimeIntegrator};
use crate::space::{SplineFunction, SplineSpace};

/// When the vorticity is re-projected during a Runge–Kutta step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ProjectionPolicy {
    /// At every stage, from the stage positions and values.
    #[default]
    PerStage,
    /// Once per step; later stages reuse the velocity of the step start.
    PerStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexConfig {
    /// Spline cells per axis, so `σ = L / cells`.
    pub cells: usize,
    pub order: usize,
    pub d: f64,
    pub dt: f64,
    pub t_final: f64,
    pub nu: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub policy: ProjectionPolicy,
    /// Errors are measured every this many steps and at the final time.
    pub record_every: usize,
    pub cg: CgConfig,
    pub poisson: PoissonConfig,
}

impl VortexConfig {
    /// Periodic shear flow on the unit square at desk scale.
    pub fn ns2d() -> Self {
        Self {
            cells: 13,
            order: 4,
            d: 0.5,
            dt: 1.0 / 32.0,
            t_final: 26.0,
            nu: 1e-5,
            seed: 1,
            scheme: Scheme::Verner9,
            policy: ProjectionPolicy::PerStage,
            record_every: 1,
            cg: CgConfig { rel_tolerance: 1e-12, max_iterations: 2000, preconditioner: Preconditioner::Mass },
            poisson: PoissonConfig {
                method: PoissonMethod::FastDiagonal,
                cg: CgConfig { rel_tolerance: 1e-12, max_iterations: 5000, preconditioner: Preconditioner::Jacobi },
            },
        }
    }

    /// ABC flow on `(0, 2π)³`.
    pub fn abc() -> Self {
        Self { cells: 10, dt: 1.0 / 25.0, t_final: 10.0, nu: 1e-3, record_every: 25, ..Self::ns2d() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells == 0 || self.order < 2 {
            return Err(Error::Config("need at least one cell and order >= 2".into()));
        }
        if !(self.dt > 0.0 && self.t_final >= 0.0 && self.nu >= 0.0) {
            return Err(Error::Config("dt must be positive, T and nu nonnegative".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        self.cg.validate()?;
        self.poisson.cg.validate()
    }
}

type InitialFn<const D: usize> = Arc<dyn Fn(&[f64; D], &mut [f64]) + Send + Sync>;
/// `(ν, t, x, out)` writes the exact velocity components with gradients.
type ExactFn<const D: usize> = Arc<dyn Fn(f64, f64, &[f64; D], &mut [Sample<D>]) + Send + Sync>;

/// A periodic flow with known solution.
#[derive(Clone)]
pub struct VortexProblem<const D: usize> {
    pub name: &'static str,
    pub lo: [f64; D],
    pub hi: [f64; D],
    pub components: usize,
    pub initial_vorticity: InitialFn<D>,
    pub exact_velocity: ExactFn<D>,
}

impl VortexProblem<2> {
    pub fn shear() -> Self {
        Self {
            name: "ns2d",
            lo: [0.0; 2],
            hi: [1.0; 2],
            components: 1,
            initial_vorticity: Arc::new(|x, out| out[0] = shear_vorticity(x)),
            exact_velocity: Arc::new(|nu, t, x, out| out.copy_from_slice(&shear_exact(nu, t, x))),
        }
    }
}

impl VortexProblem<3> {
    pub fn abc() -> Self {
        Self {
            name: "abc",
            lo: [0.0; 3],
            hi: [2.0 * PI; 3],
            components: 3,
            initial_vorticity: Arc::new(|x, out| out.copy_from_slice(&abc_velocity(x))),
            exact_velocity: Arc::new(|nu, t, x, out| out.copy_from_slice(&abc_exact(nu, t, x))),
        }
    }
}

/// Initial velocity errors recomputed outside the time loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialBudget {
    /// `A_h` projection of the initial particles (Jacobi CG) followed by a
    /// direct stream-function solve.
    pub l2: f64,
    pub h1: f64,
    /// The same with the exact `L²` projection of `ω₀` in place of `A_h`.
    pub exact_mass_l2: f64,
    pub exact_mass_h1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofReport {
    pub particles: usize,
    pub omega: usize,
    pub psi: usize,
    /// `D+C` per particle plus one ω and one ψ coefficient per component.
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexRun {
    pub series: ErrorSeries,
    /// Time at which the run was stopped as unstable.
    pub unstable_at: Option<f64>,
    pub budget: InitialBudget,
    pub dofs: DofReport,
    pub sigma: f64,
}

impl VortexRun {
    pub fn final_l2(&self) -> f64 {
        self.series.last().map_or(f64::NAN, |r| r.l2_error)
    }

    pub fn final_h1(&self) -> f64 {
        self.series.last().map_or(f64::NAN, |r| r.h1_error)
    }
}

/// Threshold above which a run counts as blown up.
pub const UNSTABLE_ERROR: f64 = 1e3;

/// Projection and stream-function solve shared by the dynamics and the
/// error measurement.
struct Reconstructor<const D: usize> {
    projector: Projector<D>,
    poisson: PoissonSolver<D>,
    cg: CgConfig,
    components: usize,
}

/// Warm starts for one caller.
#[derive(Default)]
struct Warm {
    omega: Vec<Vec<f64>>,
    psi: Vec<Vec<f64>>,
}

struct Fields<const D: usize> {
    omega: Vec<SplineFunction<D>>,
    velocity: StreamVelocity<D>,
}

impl<const D: usize> Reconstructor<D> {
    fn fields(&self, x: &[[f64; D]], weights: &[f64], u: &[f64], warm: &mut Warm, iters: &Cell<usize>) -> Result<Fields<D>> {
        let space = *self.projector.space();
        let sys = self.projector.sample(x, weights)?;
        let c = self.components;
        warm.omega.resize(c, vec![0.0; space.dof_count()]);
        warm.psi.resize(c, Vec::new());
        let mut omega = Vec::with_capacity(c);
        let mut psi = Vec::with_capacity(c);
        for k in 0..c {
            let rhs = sys.basis.load(space.dof_count(), weights, u, c, k);
            let rep = self.projector.solve(&sys.operator, &rhs, &mut warm.omega[k], &self.cg)?;
            iters.set(iters.get() + rep.iterations);
            let w = SplineFunction::new(space, warm.omega[k].clone())?;
            let sol = self.poisson.solve(&w, true, Some(&warm.psi[k]))?;
            if let Some(r) = &sol.report {
                iters.set(iters.get() + r.iterations);
            }
            warm.psi[k] = sol.psi.coeffs.clone();
            omega.push(w);
            psi.push(sol.psi);
        }
        Ok(Fields { omega, velocity: StreamVelocity::new(psi)? })
    }

    fn errors(&self, velocity: &StreamVelocity<D>, exact: &ExactFn<D>, nu: f64, t: f64) -> Result<(f64, f64)> {
        let grid = *velocity.space().grid();
        let q = velocity.space().order() + 1;
        let norm = |kind| {
            field_norm(&grid, q, kind, D, |x, out| {
                velocity.fill_samples(x, out)?;
                let mut e = [Sample::<D>::default(); 3];
                exact(nu, t, x, &mut e[..D]);
                for (o, e) in out.iter_mut().zip(&e) {
                    o.value -= e.value;
                    for k in 0..D {
                        o.grad[k] -= e.grad[k];
                    }
                }
                Ok(())
            })
        };
        Ok((norm(NormKind::norm(Lp::L2, 0))?, norm(NormKind::norm(Lp::L2, 1))?))
    }
}

struct VortexDynamics<'a, const D: usize> {
    rec: &'a Reconstructor<D>,
    weights: Vec<f64>,
    nu: f64,
    policy: ProjectionPolicy,
    stages: usize,
    calls: usize,
    warm: Warm,
    cached: Option<Fields<D>>,
    iters: &'a Cell<usize>,
}

impl<const D: usize> ParticleDynamics<D> for VortexDynamics<'_, D> {
    fn evolves_values(&self) -> bool {
        true
    }

    fn rates(&mut self, _t: f64, x: &[[f64; D]], u: &[f64], dx: &mut [[f64; D]], du: &mut [f64]) -> Result<()> {
        let refresh = match self.policy {
            ProjectionPolicy::PerStage => true,
            ProjectionPolicy::PerStep => self.calls.is_multiple_of(self.stages),
        };
        self.calls += 1;
        if refresh || self.cached.is_none() {
            self.cached = Some(self.rec.fields(x, &self.weights, u, &mut self.warm, self.iters)?);
        }
        let fields = self.cached.as_ref().expect("fields were just computed");
        let c = self.rec.components;
        let nu = self.nu;
        let omega_space = fields.omega[0].space;
        let rows = par::try_map_collect(x.len(), |i| -> Result<([f64; D], [f64; 3])> {
            let mut rhs = [0.0; 3];
            let v = if D == 3 {
                let s = fields.velocity.sample(&x[i])?;
                let g: [[f64; 3]; 3] = std::array::from_fn(|a| std::array::from_fn(|b| s.grad[a][b]));
                rhs = stretching_term(&g);
                s.u
            } else {
                fields.velocity.velocity(&x[i])?
            };
            if nu != 0.0 {
                let lb = omega_space.local_basis(&x[i], 2)?;
                for (k, w) in fields.omega.iter().enumerate() {
                    rhs[k] += nu * w.jet_at(&lb, 2).laplacian();
                }
            }
            Ok((v, rhs))
        })?;
        for (i, (v, rhs)) in rows.into_iter().enumerate() {
            dx[i] = v;
            du[i * c..(i + 1) * c].copy_from_slice(&rhs[..c]);
        }
        Ok(())
    }
}

/// Runs one flow to `t_final`, recording velocity errors. An error above
/// [`UNSTABLE_ERROR`] or a non-finite value stops the run early and keeps
/// the partial series.
pub fn run_vortex<const D: usize>(problem: &VortexProblem<D>, cfg: &VortexConfig) -> Result<VortexRun> {
    cfg.validate()?;
    let grid = CartesianGrid::new(problem.lo, problem.hi, [cfg.cells; D], [true; D])?;
    let space = SplineSpace::new(grid, cfg.order)?;
    let sigma = space.sigma();
    let c = problem.components;
    let init = problem.initial_vorticity.clone();
    let mut particles: ParticleField<D> =
        init_particles(&grid, cfg.d * sigma, Placement::RandomInCell { seed: cfg.seed }, c, |x, v| init(x, v))?;
    let rec = Reconstructor {
        projector: Projector::new(&space)?,
        poisson: PoissonSolver::new(&space, cfg.order + 2, cfg.poisson)?,
        cg: cfg.cg,
        components: c,
    };
    let dofs = DofReport {
        particles: particles.len(),
        omega: space.dof_count(),
        psi: rec.poisson.psi_space().dof_count(),
        total: particles.len() * (D + c) + c * (space.dof_count() + rec.poisson.psi_space().dof_count()),
    };

    let budget = initial_budget(problem, &particles, &rec, cfg)?;

    let iters = Cell::new(0usize);
    let mut series = ErrorSeries::new();
    let mut probe_warm = Warm::default();
    let exact = problem.exact_velocity.clone();
    let mut record = |t: f64, p: &ParticleField<D>, series: &mut ErrorSeries| -> Result<()> {
        let f = rec.fields(&p.positions, &p.weights, &p.values, &mut probe_warm, &iters)?;
        let (l2, h1) = rec.errors(&f.velocity, &exact, cfg.nu, t)?;
        series.push(SeriesRow {
            time: t,
            l2_error: if l2.is_finite() { l2 } else { f64::INFINITY },
            h1_error: if h1.is_finite() { h1 } else { f64::INFINITY },
            cg_iters: iters.replace(0),
            sum_wu: p.weighted_sum()[0],
        })?;
        if !(l2 <= UNSTABLE_ERROR) {
            return Err(Error::Unstable { time: t, error: l2 });
        }
        Ok(())
    };

    let mut unstable_at = None;
    match record(0.0, &particles, &mut series) {
        Err(Error::Unstable { time, .. }) => unstable_at = Some(time),
        other => other?,
    }
    if unstable_at.is_none() && cfg.t_final > 0.0 {
        let integrator = TimeIntegrator::new(cfg.scheme, cfg.dt)?;
        let (steps, _) = integrator.steps(0.0, cfg.t_final)?;
        let mut dynamics = VortexDynamics {
            rec: &rec,
            weights: particles.weights.clone(),
            nu: cfg.nu,
            policy: cfg.policy,
            stages: cfg.scheme.tableau().active_stages(),
            calls: 0,
            warm: Warm::default(),
            cached: None,
            iters: &iters,
        };
        let result = advect_observed(&mut particles, &mut dynamics, &integrator, 0.0, cfg.t_final, |step, t, p| {
            if step % cfg.record_every == 0 || step == steps {
                record(t, p, &mut series)?;
            }
            Ok(())
        });
        match result {
            Ok(()) => {}
            Err(Error::Unstable { time, .. }) => unstable_at = Some(time),
            Err(e) => return Err(e),
        }
    }
    Ok(VortexRun { series, unstable_at, budget, dofs, sigma })
}

fn initial_budget<const D: usize>(
    problem: &VortexProblem<D>,
    particles: &ParticleField<D>,
    rec: &Reconstructor<D>,
    cfg: &VortexConfig,
) -> Result<InitialBudget> {
    let space = *rec.projector.space();
    let c = problem.components;
    let jacobi = CgConfig { preconditioner: Preconditioner::Jacobi, ..cfg.cg };
    let direct = PoissonSolver::new(&space, cfg.order + 2, PoissonConfig { method: PoissonMethod::FastDiagonal, ..cfg.poisson })?;
    let projected = Projector::new(&space)?.project(particles, &jacobi, None)?;
    let mut psi = Vec::with_capacity(c);
    let mut psi_exact = Vec::with_capacity(c);
    for k in 0..c {
        psi.push(direct.solve(&projected.functions[k], true, None)?.psi);
        let init = &problem.initial_vorticity;
        let (w, _) = l2_project(
            &space,
            |x| {
                let mut v = [0.0; 3];
                init(x, &mut v[..c]);
                v[k]
            },
            &jacobi,
        )?;
        psi_exact.push(direct.solve(&w, true, None)?.psi);
    }
    let (l2, h1) = rec.errors(&StreamVelocity::new(psi)?, &problem.exact_velocity, cfg.nu, 0.0)?;
    let (exact_mass_l2, exact_mass_h1) = rec.errors(&StreamVelocity::new(psi_exact)?, &problem.exact_velocity, cfg.nu, 0.0)?;
    Ok(InitialBudget { l2, h1, exact_mass_l2, exact_mass_h1 })
}

/// Final-time errors over a ladder of cell counts, as an EOC table.
pub fn vortex_eoc<const D: usize>(problem: &VortexProblem<D>, base: &VortexConfig, cells: &[usize]) -> Result<(EocTable, Vec<VortexRun>)> {
    let mut table = EocTable::new(base.order);
    let mut runs = Vec::with_capacity(cells.len());
    for &m in cells {
        let run = run_vortex(problem, &VortexConfig { cells: m, ..*base })?;
        table.push(format!("L/{m}"), run.sigma, run.final_l2(), run.final_h1(), None);
        runs.push(run);
    }
    Ok((table, runs))
}
