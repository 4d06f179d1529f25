//! Convergence of a rotated smooth bump under σ-refinement at fixed `d`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::advect::{advect, ScenarioField};
use crate::bench::io::EocTable;
use crate::bench::scenarios::Bump;
use crate::cg::{CgConfig, Preconditioner};
use crate::error::{Error, Result};
use crate::grid::CartesianGrid;
use crate::norms::{spline_error_norm, Lp, NormKind};
use crate::particles::{init_particles, Placement};
use crate::projection::Projector;
use crate::quadrature::pairwise_sum;
use crate::rk::{Scheme, TimeIntegrator};
use crate::space::SplineSpace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvectionConfig {
    pub order: usize,
    pub d: f64,
    /// Coarsest mesh width; each further level halves it.
    pub sigma0: f64,
    pub levels: usize,
    /// Angular speed of the rotation about the origin.
    pub omega: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub dt: f64,
    pub placement: Placement,
    /// Use `a ≡ 0` instead of the rotation.
    pub stationary: bool,
    /// Only particles born within this radius are kept, so none leaves `Ξ`.
    pub mask_radius: f64,
    pub cg: CgConfig,
}

impl Default for AdvectionConfig {
    fn default() -> Self {
        Self {
            order: 4,
            d: 0.5,
            sigma0: 0.25,
            levels: 5,
            omega: 2.0 * PI,
            t_final: 1.0,
            scheme: Scheme::Verner9,
            dt: 1.0 / 50.0,
            placement: Placement::CellCenter,
            stationary: false,
            mask_radius: 1.75,
            cg: CgConfig { rel_tolerance: 1e-13, max_iterations: 5000, preconditioner: Preconditioner::Jacobi },
        }
    }
}

/// Measurements of one refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvectionLevel {
    pub sigma: f64,
    pub particles: usize,
    pub cg_iters: usize,
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
    /// `|Σ w_i u_h(x_i) − Σ w_i u_i|` over the particles inside `Ω`.
    pub conservation_defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvectionStudy {
    pub table: EocTable,
    pub levels: Vec<AdvectionLevel>,
    /// Whether every particle value is unchanged at the final time.
    pub values_invariant: bool,
}

impl AdvectionStudy {
    /// EOC in `L∞` between the last two levels.
    pub fn final_eoc_linf(&self) -> Option<f64> {
        self.table.rows.last().and_then(|r| r.eoc_linf)
    }
}

const OMEGA_LO: f64 = -1.0;
const OMEGA_HI: f64 = 1.0;
const XI_LO: f64 = -2.0;
const XI_HI: f64 = 2.0;

/// Runs one refinement level on `Ω = (−1,1)²` with particles in `Ξ = (−2,2)²`.
pub fn run_level(cfg: &AdvectionConfig, sigma: f64) -> Result<(AdvectionLevel, bool)> {
    let cells = ((OMEGA_HI - OMEGA_LO) / sigma).round() as usize;
    if cells == 0 || ((OMEGA_HI - OMEGA_LO) / cells as f64 - sigma).abs() > 1e-12 * sigma {
        return Err(Error::Config(format!("σ = {sigma} does not divide the box")));
    }
    let space = SplineSpace::new(CartesianGrid::new([OMEGA_LO; 2], [OMEGA_HI; 2], [cells; 2], [false; 2])?, cfg.order)?;
    let xi = CartesianGrid::new([XI_LO; 2], [XI_HI; 2], [1; 2], [false; 2])?;
    let bump = Bump::default();
    let mut particles = init_particles(&xi, cfg.d * sigma, cfg.placement, 1, |x, v| {
        v[0] = bump.value(x)
    })?;
    let r = cfg.mask_radius;
    particles.retain_born(|x| x[0].hypot(x[1]) < r);
    let initial = particles.values.clone();

    let mut field = if cfg.stationary { ScenarioField::stationary() } else { ScenarioField::rotation(cfg.omega, [0.0, 0.0]) };
    advect(&mut particles, &mut field, &TimeIntegrator::new(cfg.scheme, cfg.dt)?, 0.0, cfg.t_final)?;

    let projector = Projector::new(&space)?.restricted(true);
    let sys = projector.sample(&particles.positions, &particles.weights)?;
    let mut p = projector.project_with(&sys, &particles, &cfg.cg, None)?;
    let u = p.functions.swap_remove(0);

    let omega = if cfg.stationary { 0.0 } else { cfg.omega };
    let t = cfg.t_final;
    let exact = |x: &[f64; 2]| bump.rotated(omega, t, x);
    let l2 = spline_error_norm(&u, exact, NormKind::norm(Lp::L2, 0))?;
    let h1 = spline_error_norm(&u, exact, NormKind::norm(Lp::L2, 1))?;
    let linf = spline_error_norm(&u, exact, NormKind::norm(Lp::Inf, 0))?;

    let at = sys.basis.evaluate(&u.coeffs);
    let lhs: Vec<f64> = (0..particles.len()).filter(|&i| sys.basis.active[i]).map(|i| particles.weights[i] * at[i]).collect();
    let rhs: Vec<f64> =
        (0..particles.len()).filter(|&i| sys.basis.active[i]).map(|i| particles.weights[i] * particles.values[i]).collect();
    let conservation_defect = (pairwise_sum(&lhs) - pairwise_sum(&rhs)).abs();

    Ok((
        AdvectionLevel { sigma, particles: particles.len(), cg_iters: p.total_iterations(), l2, h1, linf, conservation_defect },
        particles.values == initial,
    ))
}

/// Runs the whole ladder `σ0, σ0/2, …`.
pub fn run_advection_convergence(cfg: &AdvectionConfig) -> Result<AdvectionStudy> {
    if cfg.levels == 0 {
        return Err(Error::Config("need at least one level".into()));
    }
    let mut table = EocTable::new(cfg.order);
    let mut levels = Vec::with_capacity(cfg.levels);
    let mut values_invariant = true;
    for l in 0..cfg.levels {
        let sigma = cfg.sigma0 / (1u64 << l) as f64;
        let (level, same) = run_level(cfg, sigma)?;
        values_invariant &= same;
        table.push(format!("1/{}", (1.0 / sigma).round()), sigma, level.l2, level.h1, Some(level.linf));
        levels.push(level);
    }
    Ok(AdvectionStudy { table, levels, values_invariant })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stationary_error_is_the_projection_error() {
        let cfg = AdvectionConfig { levels: 1, sigma0: 0.125, stationary: true, ..AdvectionConfig::default() };
        let moved = AdvectionConfig { t_final: 0.0, ..cfg };
        let (a, same) = run_level(&cfg, 0.125).unwrap();
        let (b, _) = run_level(&moved, 0.125).unwrap();
        assert!(same);
        assert_eq!(a.l2, b.l2);
        assert_eq!(a.linf, b.linf);
    }

    #[test]
    fn projection_conserves_the_particle_sum() {
        let cfg = AdvectionConfig { levels: 1, sigma0: 0.125, ..AdvectionConfig::default() };
        let (a, same) = run_level(&cfg, 0.125).unwrap();
        assert!(same);
        assert!(a.conservation_defect < 1e-10, "{a:?}");
    }

    #[test]
    fn second_order_ladder_converges_at_rate_two() {
        let cfg = AdvectionConfig { order: 2, sigma0: 0.125, levels: 3, ..AdvectionConfig::default() };
        let s = run_advection_convergence(&cfg).unwrap();
        let e = s.table.rows.last().unwrap().eoc_l2.unwrap();
        assert!((e - 2.0).abs() < 0.3, "{}", s.table.to_text());
    }

    #[test]
    fn mesh_must_divide_the_box() {
        assert!(run_level(&AdvectionConfig::default(), 0.3).is_err());
    }
}
