//! Zalesak's slotted disk: a level set carried by a rigid rotation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::advect::{advect_observed, ScenarioField};
use crate::bench::contour::{positive_area, segment_crossings, zero_contour, NodeField};
use crate::bench::scenarios::zalesak_initial_data;
use crate::cg::{CgConfig, Preconditioner};
use crate::error::{Error, Result};
use crate::grid::CartesianGrid;
use crate::particles::{init_particles, ParticleField, Placement};
use crate::projection::Projector;
use crate::rk::{Scheme, TimeIntegrator};
use crate::space::{SplineFunction, SplineSpace};

/// Snapshot times of one revolution.
pub const SNAPSHOT_TIMES: [f64; 9] = [0.0, 79.0, 157.0, 236.0, 314.0, 393.0, 471.0, 550.0, 628.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZalesakConfig {
    pub sigma: f64,
    pub d: f64,
    pub order: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Time of one revolution.
    pub period: f64,
    pub placement: Placement,
    pub mask_radius: f64,
    pub snapshot_times: Vec<f64>,
    /// Replace the level set by this constant.
    pub constant: Option<f64>,
    pub cg: CgConfig,
}

impl Default for ZalesakConfig {
    fn default() -> Self {
        Self {
            sigma: 0.02,
            d: 0.5,
            order: 2,
            dt: 1.0,
            t_final: 628.0,
            period: 628.0,
            placement: Placement::CellCenter,
            mask_radius: 0.95,
            snapshot_times: SNAPSHOT_TIMES.to_vec(),
            constant: None,
            cg: CgConfig { rel_tolerance: 1e-12, max_iterations: 5000, preconditioner: Preconditioner::Jacobi },
        }
    }
}

impl ZalesakConfig {
    pub fn full() -> Self {
        Self { sigma: 0.01, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct ZalesakSnapshot {
    pub time: f64,
    /// Area of `{u_{h,σ} > 0}` from marching squares on the σ-grid.
    pub area: f64,
    /// Sign changes across the slot, along a chord that rotates with the body.
    pub slot_crossings: usize,
    pub field: NodeField,
    pub contour: Vec<[[f64; 2]; 2]>,
    pub function: SplineFunction<2>,
    pub particles: ParticleField<2>,
}

#[derive(Debug, Clone)]
pub struct ZalesakRun {
    pub snapshots: Vec<ZalesakSnapshot>,
    /// Carried values at the end equal the initial ones bit for bit.
    pub values_invariant: bool,
    /// `|A(T) − A(0)| / A(0)` of the zero-contour area.
    pub area_drift: f64,
    pub particles: usize,
}

/// Chord across the slot at `y = 0.2`, `|x| ≤ 0.1`, rotated to time `t`.
fn slot_chord(t: f64, period: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = (2.0 * PI * t / period).sin_cos();
    let rot = |p: [f64; 2]| [c * p[0] - s * p[1], s * p[0] + c * p[1]];
    (rot([-0.1, 0.2]), rot([0.1, 0.2]))
}

/// Runs the rotation on `Ω = [−½,½]²` with particles in `Ξ = [−1,1]²`.
pub fn run_zalesak(cfg: &ZalesakConfig) -> Result<ZalesakRun> {
    let cells = (1.0 / cfg.sigma).round() as usize;
    if cells == 0 || (1.0 / cells as f64 - cfg.sigma).abs() > 1e-12 {
        return Err(Error::Config(format!("σ = {} does not divide [−½, ½]", cfg.sigma)));
    }
    let space = SplineSpace::new(CartesianGrid::new([-0.5; 2], [0.5; 2], [cells; 2], [false; 2])?, cfg.order)?;
    let xi = CartesianGrid::new([-1.0; 2], [1.0; 2], [1; 2], [false; 2])?;
    let constant = cfg.constant;
    let mut particles = init_particles(&xi, cfg.d * cfg.sigma, cfg.placement, 1, |x, v| {
        v[0] = constant.unwrap_or_else(|| zalesak_initial_data(*x))
    })?;
    let r = cfg.mask_radius;
    particles.retain_born(|x| x[0].hypot(x[1]) < r);
    let initial = particles.values.clone();

    let projector = Projector::new(&space)?.restricted(true);
    let mut warm = vec![0.0; space.dof_count()];
    let cg = cfg.cg;
    let period = cfg.period;
    let snap = |t: f64, p: &ParticleField<2>, warm: &mut Vec<f64>| -> Result<ZalesakSnapshot> {
        let sys = projector.sample(&p.positions, &p.weights)?;
        let rhs = sys.basis.load(space.dof_count(), &p.weights, &p.values, 1, 0);
        projector.solve(&sys.operator, &rhs, warm, &cg)?;
        let function = SplineFunction::new(space, warm.clone())?;
        let field = NodeField::from_spline(&function)?;
        let (a, b) = slot_chord(t, period);
        Ok(ZalesakSnapshot {
            time: t,
            area: positive_area(&field),
            slot_crossings: segment_crossings(a, b, 400, |x| function.value(x))?,
            contour: zero_contour(&field),
            field,
            function,
            particles: p.clone(),
        })
    };

    let wanted = |t: f64| cfg.snapshot_times.iter().any(|&s| (s - t).abs() < 0.25 * cfg.dt);
    let mut snapshots = Vec::new();
    if wanted(0.0) {
        snapshots.push(snap(0.0, &particles, &mut warm)?);
    }
    let mut field = ScenarioField::rotation(2.0 * PI / cfg.period, [0.0, 0.0]);
    let integrator = TimeIntegrator::new(Scheme::Rk4, cfg.dt)?;
    advect_observed(&mut particles, &mut field, &integrator, 0.0, cfg.t_final, |_, t, p| {
        if wanted(t) {
            snapshots.push(snap(t, p, &mut warm)?);
        }
        Ok(())
    })?;

    let area_drift = match (snapshots.first(), snapshots.last()) {
        (Some(a), Some(b)) if a.area > 0.0 => (b.area - a.area).abs() / a.area,
        _ => 0.0,
    };
    Ok(ZalesakRun { values_invariant: particles.values == initial, area_drift, particles: particles.len(), snapshots })
}
