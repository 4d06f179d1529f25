use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "PARTREG_OUT";

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[command(name = "partreg", version, about = "Particle regularisation by spline projection: drivers and diagnostics")]
pub struct Cli {
    /// Output root; every run gets its own timestamped directory below it.
    #[arg(long, global = true, env = OUT_ENV, default_value = "runs")]
    pub out: PathBuf,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
pub enum Command {
    /// Rotating smooth bump under σ-refinement.
    AdvectEoc(AdvectArgs),
    /// Vortex disc in its own velocity field, sampled vs exact mass matrix.
    DiscDemo(DiscArgs),
    /// Zalesak's slotted disk over one revolution.
    Zalesak(ZalesakArgs),
    /// Periodic 2D Navier–Stokes shear flow.
    Ns2d(Ns2dArgs),
    /// 3D ABC flow on a σ ladder.
    Abc(AbcArgs),
    /// Discrete moment conditions of the blob function.
    DiagMoments(MomentArgs),
    /// Decay of A_h^{-1} away from a cell.
    DiagDecay(DecayArgs),
    /// CG iteration counts across σ and at d = 0.95.
    DiagStability(StabilityArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::AdvectEoc(_) => "advect-eoc",
            Self::DiscDemo(_) => "disc-demo",
            Self::Zalesak(_) => "zalesak",
            Self::Ns2d(_) => "ns2d",
            Self::Abc(_) => "abc",
            Self::DiagMoments(_) => "diag-moments",
            Self::DiagDecay(_) => "diag-decay",
            Self::DiagStability(_) => "diag-stability",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum PlacementArg {
    Center,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum PolicyArg {
    Stage,
    Step,
}

/// Accepts `0.25` or `1/13`.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AdvectArgs {
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value = "0.5", value_parser = parse_number)]
    pub d: f64,
    /// Coarsest mesh width.
    #[arg(long, default_value = "1/4", value_parser = parse_number)]
    pub sigma: f64,
    /// Number of levels, each halving σ.
    #[arg(long, default_value_t = 5)]
    pub sigma_ladder: usize,
    #[arg(long, default_value = "1/50", value_parser = parse_number)]
    pub dt: f64,
    #[arg(long = "T", default_value = "1", value_parser = parse_number)]
    pub t: f64,
    #[arg(long, value_enum, default_value_t = PlacementArg::Center)]
    pub placement: PlacementArg,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DiscArgs {
    /// Defaults to 0.02, or 0.01 with --full.
    #[arg(long, value_parser = parse_number)]
    pub sigma: Option<f64>,
    #[arg(long, default_value = "0.5", value_parser = parse_number)]
    pub d: f64,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value = "0.005", value_parser = parse_number)]
    pub dt: f64,
    #[arg(long = "T", default_value = "0.15", value_parser = parse_number)]
    pub t: f64,
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ZalesakArgs {
    /// Defaults to 0.02, or 0.01 with --full.
    #[arg(long, value_parser = parse_number)]
    pub sigma: Option<f64>,
    #[arg(long, default_value = "0.5", value_parser = parse_number)]
    pub d: f64,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value = "1", value_parser = parse_number)]
    pub dt: f64,
    #[arg(long = "T", default_value = "628", value_parser = parse_number)]
    pub t: f64,
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct Ns2dArgs {
    /// Mesh width; must divide the unit square.
    #[arg(long, default_value = "1/13", value_parser = parse_number)]
    pub sigma: f64,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value = "0.5", value_parser = parse_number)]
    pub d: f64,
    #[arg(long, default_value = "1/32", value_parser = parse_number)]
    pub dt: f64,
    #[arg(long = "T", default_value = "26", value_parser = parse_number)]
    pub t: f64,
    #[arg(long, default_value = "1e-5", value_parser = parse_number)]
    pub nu: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Stage)]
    pub policy: PolicyArg,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
}

/// Cells per axis of the ABC σ ladder, `σ = 2π / cells`.
pub const ABC_LADDER: [usize; 5] = [10, 14, 20, 28, 40];

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct AbcArgs {
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Number of meshes taken from 2π/10, 2π/14, 2π/20, 2π/28, 2π/40.
    #[arg(long, default_value_t = 2)]
    pub sigma_ladder: usize,
    #[arg(long, default_value = "0.5", value_parser = parse_number)]
    pub d: f64,
    #[arg(long, default_value = "1/25", value_parser = parse_number)]
    pub dt: f64,
    #[arg(long = "T", default_value = "10", value_parser = parse_number)]
    pub t: f64,
    #[arg(long, default_value = "1e-3", value_parser = parse_number)]
    pub nu: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Stage)]
    pub policy: PolicyArg,
    #[arg(long, default_value_t = 25)]
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct MomentArgs {
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value = "0.125", value_parser = parse_number)]
    pub sigma: f64,
    #[arg(long, default_value = "0.5", value_parser = parse_number)]
    pub d: f64,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, default_value_t = 11)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DecayArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value = "1/16", value_parser = parse_number)]
    pub sigma: f64,
    #[arg(long, default_value = "0.5", value_parser = parse_number)]
    pub d: f64,
    #[arg(long, default_value_t = 7)]
    pub k_max: usize,
    #[arg(long, default_value_t = 3)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct StabilityArgs {
    /// Spline orders to test.
    #[arg(long, value_delimiter = ',', default_value = "2,4")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write A_h at σ = 1/8, d = 1/2 in Matrix Market format.
    #[arg(long)]
    pub dump_matrix: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_parse() {
        assert_eq!(parse_number("1/4").unwrap(), 0.25);
        assert_eq!(parse_number("1e-3").unwrap(), 1e-3);
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("x").is_err());
    }

    #[test]
    fn parsed_args_roundtrip_through_json() {
        let cli = Cli::try_parse_from(["partreg", "--workers", "2", "abc", "--n", "6", "--T", "1/2", "--policy", "step"]).unwrap();
        let back: Cli = serde_json::from_str(&serde_json::to_string(&cli).unwrap()).unwrap();
        assert_eq!(back, cli);
    }

    #[test]
    fn defaults_match_the_reference_runs() {
        let cli = Cli::try_parse_from(["partreg", "ns2d"]).unwrap();
        let Command::Ns2d(a) = cli.command else { panic!() };
        assert_eq!((a.n, a.sigma, a.dt, a.t, a.nu), (4, 1.0 / 13.0, 1.0 / 32.0, 26.0, 1e-5));
    }
}
