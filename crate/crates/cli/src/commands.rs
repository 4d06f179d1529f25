use std::path::Path;

use serde::Serialize;
use serde_json::json;

use partreg::bench::advection::{run_advection_convergence, AdvectionConfig};
use partreg::bench::contour::{write_segments_csv, NodeField};
use partreg::bench::diagnostics::{
    decay_diagnostic, moment_diagnostic, stability_study, DecayConfig, MomentConfig, SolveOutcome,
};
use partreg::bench::disc::{run_disc_demo, DiscConfig};
use partreg::bench::vortex::{run_vortex, vortex_eoc, ProjectionPolicy, VortexConfig, VortexProblem};
use partreg::bench::zalesak::{run_zalesak, ZalesakConfig};
use partreg::grid::CartesianGrid;
use partreg::particles::{init_particles, Placement};
use partreg::projection::Projector;
use partreg::space::SplineSpace;

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::output::RunDir;

const MOMENT_TOL: f64 = 1e-6;

/// What a finished command reports back.
pub struct Outcome {
    pub summary: String,
    pub dir: std::path::PathBuf,
    /// Set when the run completed but a checked quantity failed.
    pub failure: Option<String>,
}

fn start<A: Serialize, C: Serialize>(cli: &Cli, args: &A, config: &C) -> CliResult<RunDir> {
    let params = json!({ "args": args, "config": config });
    let mut dir = RunDir::create(&cli.out, cli.command.name(), params)?;
    dir.manifest.workers = cli.workers;
    Ok(dir)
}

fn policy(p: PolicyArg) -> ProjectionPolicy {
    match p {
        PolicyArg::Stage => ProjectionPolicy::PerStage,
        PolicyArg::Step => ProjectionPolicy::PerStep,
    }
}

fn cells_for(length: f64, sigma: f64) -> CliResult<usize> {
    let cells = (length / sigma).round() as usize;
    if cells == 0 || (length / cells as f64 - sigma).abs() > 1e-9 * sigma {
        return Err(CliError::Invalid(format!("σ = {sigma} does not divide a box of width {length}")));
    }
    Ok(cells)
}

fn time_tag(t: f64) -> String {
    format!("{:06.3}", t).replace('.', "_")
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    match &cli.command {
        Command::AdvectEoc(a) => advect_eoc(cli, a),
        Command::DiscDemo(a) => disc_demo(cli, a),
        Command::Zalesak(a) => zalesak(cli, a),
        Command::Ns2d(a) => ns2d(cli, a),
        Command::Abc(a) => abc(cli, a),
        Command::DiagMoments(a) => diag_moments(cli, a),
        Command::DiagDecay(a) => diag_decay(cli, a),
        Command::DiagStability(a) => diag_stability(cli, a),
    }
}

fn advect_eoc(cli: &Cli, a: &AdvectArgs) -> CliResult<Outcome> {
    let placement = match a.placement {
        PlacementArg::Center => Placement::CellCenter,
        PlacementArg::Random => Placement::RandomInCell { seed: a.seed },
    };
    let cfg = AdvectionConfig {
        order: a.n,
        d: a.d,
        sigma0: a.sigma,
        levels: a.sigma_ladder,
        dt: a.dt,
        t_final: a.t,
        placement,
        ..AdvectionConfig::default()
    };
    let mut dir = start(cli, a, &cfg)?;
    dir.manifest.seed = Some(a.seed);
    let study = run_advection_convergence(&cfg)?;
    study.table.write_csv(&dir.file("eoc.csv"))?;
    study.table.write_text(&dir.file("eoc.txt"))?;
    let path = dir.finish()?;
    let eoc = study.table.last_eoc_l2().map_or("-".to_string(), |e| format!("{e:.2}"));
    let failure = (!study.values_invariant).then(|| "particle values changed during transport".to_string());
    Ok(Outcome {
        summary: format!("advect-eoc: {} levels, final L2 {:.3e}, final EOC {eoc}", study.levels.len(), study.levels.last().map_or(f64::NAN, |l| l.l2)),
        dir: path,
        failure,
    })
}

fn disc_demo(cli: &Cli, a: &DiscArgs) -> CliResult<Outcome> {
    let base = if a.full { DiscConfig::full() } else { DiscConfig::default() };
    let cfg = DiscConfig { sigma: a.sigma.unwrap_or(base.sigma), d: a.d, order: a.n, dt: a.dt, t_final: a.t, ..base };
    let mut dir = start(cli, a, &cfg)?;
    let run = run_disc_demo(&cfg)?;
    let mut w = csv::Writer::from_path(dir.file("deviation.csv"))?;
    w.write_record(["time", "sampled", "exact"])?;
    for i in 0..run.times.len() {
        w.write_record(&[run.times[i].to_string(), run.deviation_sampled[i].to_string(), run.deviation_exact[i].to_string()])?;
    }
    w.flush()?;
    for s in &run.snapshots {
        let tag = time_tag(s.time);
        NodeField::from_spline(&s.sampled)?.write_csv(&dir.file(&format!("sampled_t{tag}.csv")))?;
        NodeField::from_spline(&s.exact)?.write_csv(&dir.file(&format!("exact_t{tag}.csv")))?;
    }
    let path = dir.finish()?;
    let (ds, de) = run.at(cfg.t_final).unwrap_or((f64::NAN, f64::NAN));
    Ok(Outcome {
        summary: format!("disc-demo: {} particles, L∞ deviation at T: sampled {ds:.3e}, exact {de:.3e}", run.particles),
        dir: path,
        failure: None,
    })
}

fn zalesak(cli: &Cli, a: &ZalesakArgs) -> CliResult<Outcome> {
    let base = if a.full { ZalesakConfig::full() } else { ZalesakConfig::default() };
    let cfg = ZalesakConfig { sigma: a.sigma.unwrap_or(base.sigma), d: a.d, order: a.n, dt: a.dt, t_final: a.t, ..base };
    let mut dir = start(cli, a, &cfg)?;
    let run = run_zalesak(&cfg)?;
    for s in &run.snapshots {
        let tag = format!("{:03}", s.time.round() as i64);
        s.field.write_csv(&dir.file(&format!("field_t{tag}.csv")))?;
        write_segments_csv(&s.contour, &dir.file(&format!("contour_t{tag}.csv")))?;
    }
    if let Some(s) = run.snapshots.last() {
        s.particles.write_snapshot(&dir.file("particles_final.csv"))?;
    }
    let path = dir.finish()?;
    let crossings = run.snapshots.last().map_or(0, |s| s.slot_crossings);
    let failure = (!run.values_invariant).then(|| "particle values changed during transport".to_string());
    Ok(Outcome {
        summary: format!(
            "zalesak: {} snapshots, area drift {:.3e}, slot crossings at end {crossings}",
            run.snapshots.len(),
            run.area_drift
        ),
        dir: path,
        failure,
    })
}

fn ns2d(cli: &Cli, a: &Ns2dArgs) -> CliResult<Outcome> {
    let cfg = VortexConfig {
        cells: cells_for(1.0, a.sigma)?,
        order: a.n,
        d: a.d,
        dt: a.dt,
        t_final: a.t,
        nu: a.nu,
        seed: a.seed,
        policy: policy(a.policy),
        record_every: a.record_every,
        ..VortexConfig::ns2d()
    };
    let mut dir = start(cli, a, &cfg)?;
    dir.manifest.seed = Some(a.seed);
    let run = run_vortex(&VortexProblem::shear(), &cfg)?;
    run.series.write_csv(&dir.file("series.csv"))?;
    std::fs::write(dir.file("budget.json"), serde_json::to_string_pretty(&run.budget)?)?;
    let path = dir.finish()?;
    let failure = run.unstable_at.map(|t| format!("error exceeded the instability threshold at t = {t}"));
    Ok(Outcome {
        summary: format!(
            "ns2d: {} records, final L2 {:.3e}, H1 {:.3e}, dofs {}",
            run.series.len(),
            run.final_l2(),
            run.final_h1(),
            run.dofs.total
        ),
        dir: path,
        failure,
    })
}

fn abc(cli: &Cli, a: &AbcArgs) -> CliResult<Outcome> {
    if a.sigma_ladder == 0 || a.sigma_ladder > ABC_LADDER.len() {
        return Err(CliError::Invalid(format!("--sigma-ladder must be in 1..={}", ABC_LADDER.len())));
    }
    let cells = &ABC_LADDER[..a.sigma_ladder];
    let cfg = VortexConfig {
        order: a.n,
        d: a.d,
        dt: a.dt,
        t_final: a.t,
        nu: a.nu,
        seed: a.seed,
        policy: policy(a.policy),
        record_every: a.record_every,
        ..VortexConfig::abc()
    };
    let mut dir = start(cli, a, &cfg)?;
    dir.manifest.seed = Some(a.seed);
    let (table, runs) = vortex_eoc(&VortexProblem::abc(), &cfg, cells)?;
    for (c, run) in cells.iter().zip(&runs) {
        run.series.write_csv(&dir.file(&format!("series_cells{c}.csv")))?;
    }
    table.write_csv(&dir.file("eoc.csv"))?;
    table.write_text(&dir.file("eoc.txt"))?;
    let path = dir.finish()?;
    let errs: Vec<String> = runs.iter().map(|r| format!("{:.3e}", r.final_l2())).collect();
    let eoc = table.last_eoc_l2().map_or("-".to_string(), |e| format!("{e:.2}"));
    let failure = runs
        .iter()
        .zip(cells)
        .find_map(|(r, c)| r.unstable_at.map(|t| format!("mesh 2π/{c} became unstable at t = {t}")));
    Ok(Outcome { summary: format!("abc: final L2 [{}], EOC {eoc}", errs.join(", ")), dir: path, failure })
}

fn diag_moments(cli: &Cli, a: &MomentArgs) -> CliResult<Outcome> {
    let cfg = MomentConfig { order: a.n, sigma: a.sigma, d: a.d, trials: a.trials, seed: a.seed };
    let mut dir = start(cli, a, &cfg)?;
    dir.manifest.seed = Some(a.seed);
    let defect = moment_diagnostic(&cfg)?;
    std::fs::write(dir.file("moments.json"), serde_json::to_string_pretty(&json!({ "max_defect": defect }))?)?;
    let path = dir.finish()?;
    let failure = (defect.is_nan() || defect >= MOMENT_TOL).then(|| format!("moment defect {defect:e} >= {MOMENT_TOL:e}"));
    Ok(Outcome { summary: format!("diag-moments: max defect {defect:.3e}"), dir: path, failure })
}

fn diag_decay(cli: &Cli, a: &DecayArgs) -> CliResult<Outcome> {
    let cfg = DecayConfig { order: a.n, sigma: a.sigma, d: a.d, k_max: a.k_max, seed: a.seed };
    let mut dir = start(cli, a, &cfg)?;
    dir.manifest.seed = Some(a.seed);
    let profile = decay_diagnostic(&cfg)?;
    let mut w = csv::Writer::from_path(dir.file("decay.csv"))?;
    w.write_record(["ring", "l2_outside"])?;
    for (k, r) in profile.rings.iter().enumerate() {
        w.write_record(&[k.to_string(), r.to_string()])?;
    }
    w.flush()?;
    std::fs::write(dir.file("solve_report.json"), profile.report.to_json()?)?;
    let path = dir.finish()?;
    let rho = profile.rho.map_or("-".to_string(), |r| format!("{r:.3}"));
    Ok(Outcome {
        summary: format!("diag-decay: rho {rho}, {} CG iterations", profile.report.iterations),
        dir: path,
        failure: None,
    })
}

fn dump_matrix(order: usize, seed: u64, path: &Path) -> CliResult<()> {
    let space = SplineSpace::<2>::new(CartesianGrid::unit(8, false)?, order)?;
    let particles =
        init_particles(&CartesianGrid::<2>::unit(1, false)?, 1.0 / 16.0, Placement::RandomInCell { seed }, 1, |_, _| {})?;
    let sys = Projector::new(&space)?.sample(&particles.positions, &particles.weights)?;
    sys.operator.write_matrix_market(path)?;
    Ok(())
}

fn diag_stability(cli: &Cli, a: &StabilityArgs) -> CliResult<Outcome> {
    if a.n.is_empty() {
        return Err(CliError::Invalid("need at least one order".into()));
    }
    let mut dir = start(cli, a, &json!({ "orders": a.n, "seed": a.seed }))?;
    dir.manifest.seed = Some(a.seed);
    let study = stability_study(&a.n, a.seed)?;
    let mut w = csv::Writer::from_path(dir.file("stability.csv"))?;
    w.write_record(["order", "sigma", "d", "iterations", "outcome"])?;
    for r in &study.rows {
        w.write_record(&[r.order.to_string(), r.sigma.to_string(), "0.5".into(), r.iterations.to_string(), "converged".into()])?;
    }
    for (n, o, _) in &study.coarse {
        let what = match o {
            SolveOutcome::Converged { .. } => "converged",
            SolveOutcome::NotConverged { .. } => "not_converged",
            SolveOutcome::Indefinite { .. } => "indefinite",
        };
        w.write_record(&[n.to_string(), (1.0 / 19.0).to_string(), "0.95".into(), o.iterations().to_string(), what.into()])?;
    }
    w.flush()?;
    if a.dump_matrix {
        for &n in &a.n {
            dump_matrix(n, a.seed, &dir.file(&format!("a_h_n{n}.mtx")))?;
        }
    }
    let path = dir.finish()?;
    let spreads: Vec<String> = a.n.iter().map(|&n| format!("n={n}: {:.2}", study.spread(n))).collect();
    Ok(Outcome {
        summary: format!(
            "diag-stability: spread {}, d=0.95 degrades for all orders: {}",
            spreads.join(", "),
            study.coarse_layout_degrades()
        ),
        dir: path,
        failure: None,
    })
}
