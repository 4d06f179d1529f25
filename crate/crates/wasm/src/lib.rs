//! Browser demo: a slotted disk carried by particles on a rotation, with
//! the particle values projected onto a spline space on demand.

use std::f64::consts::PI;

use wasm_bindgen::prelude::*;

use partreg::advect::{advect, ScenarioField};
use partreg::bench::contour::{positive_area, NodeField};
use partreg::bench::scenarios::zalesak_initial_data;
use partreg::cg::CgConfig;
use partreg::grid::CartesianGrid;
use partreg::particles::{init_particles, ParticleField, Placement};
use partreg::projection::Projector;
use partreg::rk::{Scheme, TimeIntegrator};
use partreg::space::{SplineFunction, SplineSpace};
use partreg::Result;

/// Time for one revolution.
pub const PERIOD: f64 = 628.0;

/// Everything the page shows, independent of the JS bindings.
pub struct Scene {
    space: SplineSpace<2>,
    particles: ParticleField<2>,
    field: ScenarioField<2>,
    integrator: TimeIntegrator,
    time: f64,
    projected: Option<SplineFunction<2>>,
    warm: Vec<f64>,
    last_iterations: usize,
}

impl Scene {
    /// `cells` spline cells per axis on `[−½, ½]²`, particles at spacing `d σ`.
    pub fn new(cells: usize, order: usize, d: f64, random: bool, seed: u64) -> Result<Self> {
        let space = SplineSpace::new(CartesianGrid::new([-0.5; 2], [0.5; 2], [cells; 2], [false; 2])?, order)?;
        let placement = if random { Placement::RandomInCell { seed } } else { Placement::CellCenter };
        let xi = CartesianGrid::new([-1.0; 2], [1.0; 2], [1; 2], [false; 2])?;
        let mut particles = init_particles(&xi, d / cells as f64, placement, 1, |x, v| v[0] = zalesak_initial_data(*x))?;
        particles.retain_born(|x| x[0].hypot(x[1]) < 0.95);
        Ok(Self {
            space,
            particles,
            field: ScenarioField::rotation(2.0 * PI / PERIOD, [0.0, 0.0]),
            integrator: TimeIntegrator::new(Scheme::Rk4, 1.0)?,
            time: 0.0,
            projected: None,
            warm: vec![0.0; space.dof_count()],
            last_iterations: 0,
        })
    }

    /// Advances the particles by `steps` unit time steps.
    pub fn rotate(&mut self, steps: u32) -> Result<()> {
        let t1 = self.time + steps as f64;
        advect(&mut self.particles, &mut self.field, &self.integrator, self.time, t1)?;
        self.time = t1;
        Ok(())
    }

    /// Projects the current particle values; returns the area of `{u > 0}`.
    pub fn project(&mut self) -> Result<f64> {
        let projector = Projector::new(&self.space)?.restricted(true);
        let sys = projector.sample(&self.particles.positions, &self.particles.weights)?;
        let rhs = sys.basis.load(self.space.dof_count(), &self.particles.weights, &self.particles.values, 1, 0);
        let cfg = CgConfig { rel_tolerance: 1e-10, ..CgConfig::default() };
        let report = projector.solve(&sys.operator, &rhs, &mut self.warm, &cfg)?;
        self.last_iterations = report.iterations;
        let f = SplineFunction::new(self.space, self.warm.clone())?;
        let area = positive_area(&NodeField::from_spline(&f)?);
        self.projected = Some(f);
        Ok(area)
    }

    /// Projected values on a `res × res` pixel grid over `[−½, ½]²`, row by
    /// row from the top; empty before the first projection.
    pub fn image(&self, res: usize) -> Result<Vec<f64>> {
        let Some(f) = &self.projected else { return Ok(Vec::new()) };
        let mut out = Vec::with_capacity(res * res);
        for j in 0..res {
            let y = 0.5 - (j as f64 + 0.5) / res as f64;
            for i in 0..res {
                let x = -0.5 + (i as f64 + 0.5) / res as f64;
                out.push(f.value(&[x, y])?);
            }
        }
        Ok(out)
    }

    /// Particle positions inside the box, flattened as `x, y, value`.
    pub fn particles(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (x, u) in self.particles.positions.iter().zip(&self.particles.values) {
            if x[0].abs() <= 0.5 && x[1].abs() <= 0.5 {
                out.extend_from_slice(&[x[0], x[1], *u]);
            }
        }
        out
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }

    pub fn particle_count(&self) -> usize {
        self.particles.len()
    }
}

fn js(e: partreg::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    scene: Scene,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(cells: usize, order: usize, d: f64, random: bool, seed: u64) -> std::result::Result<Demo, JsError> {
        Ok(Demo { scene: Scene::new(cells, order, d, random, seed).map_err(js)? })
    }

    pub fn rotate(&mut self, steps: u32) -> std::result::Result<(), JsError> {
        self.scene.rotate(steps).map_err(js)
    }

    pub fn project(&mut self) -> std::result::Result<f64, JsError> {
        self.scene.project().map_err(js)
    }

    pub fn image(&self, res: usize) -> std::result::Result<Vec<f64>, JsError> {
        self.scene.image(res).map_err(js)
    }

    pub fn particles(&self) -> Vec<f64> {
        self.scene.particles()
    }

    pub fn time(&self) -> f64 {
        self.scene.time()
    }

    #[wasm_bindgen(js_name = lastIterations)]
    pub fn last_iterations(&self) -> usize {
        self.scene.last_iterations()
    }

    #[wasm_bindgen(js_name = particleCount)]
    pub fn particle_count(&self) -> usize {
        self.scene.particle_count()
    }
}
