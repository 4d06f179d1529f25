//! A steady vortex disc transported by its own analytic velocity, projected
//! with the sampled operator `A_h` and with the exact mass matrix `A`.

use serde::{Deserialize, Serialize};

use crate::advect::advect_observed;
use crate::bench::scenarios::{disc_field, disc_vorticity};
use crate::cg::{CgConfig, Preconditioner};
use crate::error::{Error, Result};
use crate::grid::CartesianGrid;
use crate::norms::{spline_error_norm, Lp, NormKind, Sample};
use crate::operator::{assemble_exact, DiscreteOperator};
use crate::particles::{init_particles, ParticleField, Placement};
use crate::projection::Projector;
use crate::rk::{Scheme, TimeIntegrator};
use crate::space::{SplineFunction, SplineSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscConfig {
    pub sigma: f64,
    pub d: f64,
    pub order: usize,
    pub dt: f64,
    pub t_final: f64,
    pub placement: Placement,
    /// Particles born outside this radius are dropped; they would otherwise
    /// rotate out of `Ξ`.
    pub mask_radius: f64,
    /// Times at which both reconstructions are kept.
    pub snapshot_times: Vec<f64>,
    pub cg: CgConfig,
}

impl Default for DiscConfig {
    fn default() -> Self {
        Self {
            sigma: 0.02,
            d: 0.5,
            order: 2,
            dt: 0.005,
            t_final: 0.15,
            placement: Placement::CellCenter,
            mask_radius: 1.95,
            snapshot_times: vec![0.0, 0.01, 0.1, 0.15],
            cg: CgConfig { rel_tolerance: 1e-12, max_iterations: 5000, preconditioner: Preconditioner::Jacobi },
        }
    }
}

impl DiscConfig {
    /// The finer mesh of the original experiment.
    pub fn full() -> Self {
        Self { sigma: 0.01, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct DiscSnapshot {
    pub time: f64,
    pub sampled: SplineFunction<2>,
    pub exact: SplineFunction<2>,
}

#[derive(Debug, Clone)]
pub struct DiscRun {
    pub times: Vec<f64>,
    /// `‖ω_{h,σ}(t) − ω₀‖_{L∞(Ω)}` with `A_h`.
    pub deviation_sampled: Vec<f64>,
    /// The same with `A`.
    pub deviation_exact: Vec<f64>,
    pub snapshots: Vec<DiscSnapshot>,
    pub particles: usize,
}

impl DiscRun {
    /// Deviations at the recorded time closest to `t`.
    pub fn at(&self, t: f64) -> Option<(f64, f64)> {
        let i = (0..self.times.len()).min_by(|&a, &b| (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs()))?;
        Some((self.deviation_sampled[i], self.deviation_exact[i]))
    }
}

struct Reconstruction {
    projector: Projector<2>,
    exact_op: DiscreteOperator<2>,
    cg: CgConfig,
}

impl Reconstruction {
    fn both(&self, p: &ParticleField<2>, warm: &mut [Vec<f64>; 2]) -> Result<(SplineFunction<2>, SplineFunction<2>)> {
        let space = *self.projector.space();
        let sys = self.projector.sample(&p.positions, &p.weights)?;
        let rhs = sys.basis.load(space.dof_count(), &p.weights, &p.values, 1, 0);
        self.projector.solve(&sys.operator, &rhs, &mut warm[0], &self.cg)?;
        self.projector.solve(&self.exact_op, &rhs, &mut warm[1], &self.cg)?;
        Ok((SplineFunction::new(space, warm[0].clone())?, SplineFunction::new(space, warm[1].clone())?))
    }
}

fn deviation(f: &SplineFunction<2>) -> Result<f64> {
    spline_error_norm(f, |x| Sample { value: disc_vorticity(x), grad: [0.0; 2] }, NormKind::norm(Lp::Inf, 0))
}

/// Runs the disc demo on `Ω = (−1,1)²` with particles in `Ξ = (−2,2)²`.
pub fn run_disc_demo(cfg: &DiscConfig) -> Result<DiscRun> {
    let cells = (2.0 / cfg.sigma).round() as usize;
    if cells == 0 || (2.0 / cells as f64 - cfg.sigma).abs() > 1e-12 {
        return Err(Error::Config(format!("σ = {} does not divide (−1, 1)", cfg.sigma)));
    }
    let space = SplineSpace::new(CartesianGrid::new([-1.0; 2], [1.0; 2], [cells; 2], [false; 2])?, cfg.order)?;
    let xi = CartesianGrid::new([-2.0; 2], [2.0; 2], [1; 2], [false; 2])?;
    let mut particles = init_particles(&xi, cfg.d * cfg.sigma, cfg.placement, 1, |x, v| v[0] = disc_vorticity(x))?;
    let r = cfg.mask_radius;
    particles.retain_born(|x| x[0].hypot(x[1]) < r);

    let rec = Reconstruction {
        projector: Projector::new(&space)?.restricted(true),
        exact_op: assemble_exact(&space)?,
        cg: cfg.cg,
    };
    let mut warm = [vec![0.0; space.dof_count()], vec![0.0; space.dof_count()]];
    let mut run = DiscRun {
        times: Vec::new(),
        deviation_sampled: Vec::new(),
        deviation_exact: Vec::new(),
        snapshots: Vec::new(),
        particles: particles.len(),
    };
    let snaps = cfg.snapshot_times.clone();
    let dt = cfg.dt;
    let mut observe = |t: f64, p: &ParticleField<2>, run: &mut DiscRun| -> Result<()> {
        let (sampled, exact) = rec.both(p, &mut warm)?;
        run.times.push(t);
        run.deviation_sampled.push(deviation(&sampled)?);
        run.deviation_exact.push(deviation(&exact)?);
        if snaps.iter().any(|&s| (s - t).abs() < 0.25 * dt) {
            run.snapshots.push(DiscSnapshot { time: t, sampled, exact });
        }
        Ok(())
    };
    observe(0.0, &particles, &mut run)?;
    let mut field = disc_field();
    advect_observed(&mut particles, &mut field, &TimeIntegrator::new(Scheme::Rk4, cfg.dt)?, 0.0, cfg.t_final, |_, t, p| {
        observe(t, p, &mut run)
    })?;
    Ok(run)
}
