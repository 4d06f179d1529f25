//! Particle transport by explicit Runge–Kutta schemes.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::par;
use crate::particles::ParticleField;
use crate::rk::{rk_step, TimeIntegrator};

pub type VelocityFn<const D: usize> = Arc<dyn Fn(&[f64; D], f64) -> [f64; D] + Send + Sync>;
/// `(x, τ, t)` ↦ position at time `t` of the trajectory through `x` at time `τ`.
pub type TrajectoryFn<const D: usize> = Arc<dyn Fn(&[f64; D], f64, f64) -> [f64; D] + Send + Sync>;
pub type SolutionFn<const D: usize> = Arc<dyn Fn(&[f64; D], f64) -> f64 + Send + Sync>;

/// Analytic velocity field with optional exact trajectories and solution.
#[derive(Clone)]
pub struct ScenarioField<const D: usize> {
    pub velocity: VelocityFn<D>,
    pub trajectory: Option<TrajectoryFn<D>>,
    pub solution: Option<SolutionFn<D>>,
    pub nu: f64,
}

impl<const D: usize> std::fmt::Debug for ScenarioField<D> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScenarioField")
            .field("trajectory", &self.trajectory.is_some())
            .field("solution", &self.solution.is_some())
            .field("nu", &self.nu)
            .finish()
    }
}

impl<const D: usize> ScenarioField<D> {
    pub fn new(velocity: VelocityFn<D>) -> Self {
        Self { velocity, trajectory: None, solution: None, nu: 0.0 }
    }

    /// `a ≡ 0`.
    pub fn stationary() -> Self {
        Self {
            velocity: Arc::new(|_, _| [0.0; D]),
            trajectory: Some(Arc::new(|x, _, _| *x)),
            solution: None,
            nu: 0.0,
        }
    }

    /// Largest deviation between the velocity and a central difference of
    /// the exact trajectory, `|∂_t X(t; x, τ) − a(X, t)|`, over the samples.
    pub fn trajectory_defect(&self, points: &[[f64; D]], times: &[f64]) -> Option<f64> {
        let traj = self.trajectory.as_ref()?;
        let eps = 1e-5;
        let mut worst = 0.0f64;
        for x in points {
            for &t in times {
                let p = traj(x, 0.0, t);
                let fwd = traj(x, 0.0, t + eps);
                let bwd = traj(x, 0.0, t - eps);
                let v = (self.velocity)(&p, t);
                for k in 0..D {
                    let fd = (fwd[k] - bwd[k]) / (2.0 * eps);
                    worst = worst.max((fd - v[k]).abs() / v[k].abs().max(1.0));
                }
            }
        }
        Some(worst)
    }
}

impl ScenarioField<2> {
    /// Rigid rotation `ω(−(y−c_y), x−c_x)` about `center`.
    pub fn rotation(omega: f64, center: [f64; 2]) -> Self {
        Self {
            velocity: Arc::new(move |x, _| [-omega * (x[1] - center[1]), omega * (x[0] - center[0])]),
            trajectory: Some(Arc::new(move |x, tau, t| {
                let (s, c) = (omega * (t - tau)).sin_cos();
                let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
                [center[0] + c * dx - s * dy, center[1] + s * dx + c * dy]
            })),
            solution: None,
            nu: 0.0,
        }
    }
}

/// Right-hand side of the particle system.
pub trait ParticleDynamics<const D: usize> {
    /// Whether carried values change in time.
    fn evolves_values(&self) -> bool;

    /// Writes `dx/dt` and, if values evolve, `du/dt` at stage time `t`.
    fn rates(&mut self, t: f64, x: &[[f64; D]], u: &[f64], dx: &mut [[f64; D]], du: &mut [f64]) -> Result<()>;
}

impl<const D: usize> ParticleDynamics<D> for ScenarioField<D> {
    fn evolves_values(&self) -> bool {
        false
    }

    fn rates(&mut self, t: f64, x: &[[f64; D]], _u: &[f64], dx: &mut [[f64; D]], _du: &mut [f64]) -> Result<()> {
        let v = &self.velocity;
        par::for_each_mut(dx, |i, d| *d = v(&x[i], t));
        Ok(())
    }
}

/// Advances `field` from `t0` to `t1`. Carried values are left untouched
/// unless the dynamics evolve them.
pub fn advect<const D: usize>(
    field: &mut ParticleField<D>,
    dynamics: &mut dyn ParticleDynamics<D>,
    integrator: &TimeIntegrator,
    t0: f64,
    t1: f64,
) -> Result<()> {
    advect_observed(field, dynamics, integrator, t0, t1, |_, _, _| Ok(()))
}

/// As [`advect`], calling `on_step(step, t, field)` after every completed step.
pub fn advect_observed<const D: usize, F>(
    field: &mut ParticleField<D>,
    dynamics: &mut dyn ParticleDynamics<D>,
    integrator: &TimeIntegrator,
    t0: f64,
    t1: f64,
    mut on_step: F,
) -> Result<()>
where
    F: FnMut(usize, f64, &ParticleField<D>) -> Result<()>,
{
    let (steps, dt) = integrator.steps(t0, t1)?;
    let tab = integrator.scheme.tableau();
    let evolve = dynamics.evolves_values();
    let n = field.len();
    let nx = n * D;
    let nv = if evolve { field.values.len() } else { 0 };
    let mut y = vec![0.0; nx + nv];
    for step in 0..steps {
        let t = t0 + step as f64 * dt;
        y[..nx].copy_from_slice(field.positions.as_flattened());
        if evolve {
            y[nx..].copy_from_slice(&field.values);
        }
        let frozen = if evolve { Vec::new() } else { field.values.clone() };
        rk_step(&tab, t, dt, &mut y, |ts, ys, dys| {
            let (xs, _) = ys[..nx].as_chunks::<D>();
            let (dxs, dus) = dys.split_at_mut(nx);
            let (dxs, _) = dxs.as_chunks_mut::<D>();
            let u = if evolve { &ys[nx..] } else { &frozen[..] };
            dynamics.rates(ts, xs, u, dxs, dus)
        })?;
        let (xs, _) = y[..nx].as_chunks::<D>();
        field.positions.copy_from_slice(xs);
        if evolve {
            field.values.copy_from_slice(&y[nx..]);
            if let Some(i) = field.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Unstable { time: t + dt, error: field.values[i] });
            }
        }
        field.wrap_and_check()?;
        on_step(step + 1, if step + 1 == steps { t1 } else { t + dt }, field)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CartesianGrid;
    use crate::particles::{init_particles, Placement};
    use crate::rk::Scheme;
    use std::f64::consts::PI;

    #[test]
    fn zero_velocity_leaves_positions_bitwise() {
        let g = CartesianGrid::<2>::unit(1, false).unwrap();
        let mut p = init_particles(&g, 0.125, Placement::RandomInCell { seed: 3 }, 1, |x, v| v[0] = x[0]).unwrap();
        let before = p.clone();
        let mut s = ScenarioField::<2>::stationary();
        advect(&mut p, &mut s, &TimeIntegrator::new(Scheme::Verner9, 0.1).unwrap(), 0.0, 1.0).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn rotation_returns_particles_after_one_period() {
        let g = CartesianGrid::<2>::new([-1.0; 2], [1.0; 2], [1, 1], [false; 2]).unwrap();
        let mut p = init_particles(&g, 0.25, Placement::CellCenter, 1, |x, v| v[0] = x[1]).unwrap();
        p.retain_born(|x| x[0].hypot(x[1]) < 0.9);
        let values = p.values.clone();
        let mut s = ScenarioField::rotation(2.0 * PI / 628.0, [0.0, 0.0]);
        advect(&mut p, &mut s, &TimeIntegrator::new(Scheme::Rk4, 1.0).unwrap(), 0.0, 628.0).unwrap();
        for (x, x0) in p.positions.iter().zip(&p.born) {
            let r = x0[0].hypot(x0[1]);
            assert!(((x[0] - x0[0]).hypot(x[1] - x0[1])) < 1e-6 * r);
        }
        assert_eq!(p.values, values);
        // rigid motion keeps pairwise distances
        let d0 = (p.born[0][0] - p.born[5][0]).hypot(p.born[0][1] - p.born[5][1]);
        let d1 = (p.positions[0][0] - p.positions[5][0]).hypot(p.positions[0][1] - p.positions[5][1]);
        assert!((d0 - d1).abs() < 1e-9);
    }

    #[test]
    fn rotation_trajectory_is_consistent_with_velocity() {
        let s = ScenarioField::rotation(1.3, [0.2, -0.1]);
        let pts = [[0.3, 0.4], [-0.5, 0.1], [0.0, 0.9]];
        assert!(s.trajectory_defect(&pts, &[0.0, 0.7, 2.0]).unwrap() < 1e-6);
    }

    #[test]
    fn escaping_particle_is_an_error() {
        let g = CartesianGrid::<1>::unit(1, false).unwrap();
        let mut p = init_particles(&g, 0.5, Placement::CellCenter, 1, |_, _| {}).unwrap();
        let mut s = ScenarioField::<1>::new(Arc::new(|_, _| [1.0]));
        let r = advect(&mut p, &mut s, &TimeIntegrator::new(Scheme::Rk4, 0.1).unwrap(), 0.0, 1.0);
        assert!(matches!(r, Err(Error::ParticleEscaped { index: 1, .. })));
    }

    #[test]
    fn periodic_axes_wrap_after_each_step() {
        let g = CartesianGrid::<1>::unit(1, true).unwrap();
        let mut p = init_particles(&g, 0.5, Placement::CellCenter, 1, |_, _| {}).unwrap();
        let mut s = ScenarioField::<1>::new(Arc::new(|_, _| [1.0]));
        advect(&mut p, &mut s, &TimeIntegrator::new(Scheme::Rk4, 0.1).unwrap(), 0.0, 1.05).unwrap();
        assert!((p.positions[0][0] - 0.3).abs() < 1e-12);
        assert!((p.positions[1][0] - 0.8).abs() < 1e-12);
    }

    struct Growth;

    impl ParticleDynamics<1> for Growth {
        fn evolves_values(&self) -> bool {
            false
        }
        fn rates(&mut self, _: f64, x: &[[f64; 1]], _: &[f64], dx: &mut [[f64; 1]], _: &mut [f64]) -> Result<()> {
            for (d, xi) in dx.iter_mut().zip(x) {
                d[0] = xi[0];
            }
            Ok(())
        }
    }

    #[test]
    fn rk4_particle_growth_has_order_four() {
        let g = CartesianGrid::<1>::new([0.0], [10.0], [1], [false]).unwrap();
        let err = |dt: f64| {
            let mut p = init_particles(&g, 10.0, Placement::CellCenter, 1, |_, _| {}).unwrap();
            p.positions[0][0] = 1.0;
            advect(&mut p, &mut Growth, &TimeIntegrator::new(Scheme::Rk4, dt).unwrap(), 0.0, 1.0).unwrap();
            (p.positions[0][0] - 1f64.exp()).abs()
        };
        let eoc = (err(0.1) / err(0.05)).log2();
        assert!((eoc - 4.0).abs() < 0.1, "eoc {eoc}");
    }
}
