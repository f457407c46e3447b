//! Command-line front end: reduction, simulation and the two packaged
//! experiments (output comparison and filter stability).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{LinearFilterFile, ReducedModelFile, read_model, to_json, write_json, write_model};
use crate::linops::{CMatrix, DensityState, QuantumModel, fidelity_unchecked, hs_norm, random_complex_matrix, random_density, random_hermitian, zeros};
use crate::models::{ChainSpec, QndSpec, build_qnd, build_spin_chain, chain_wedderburn};
use crate::observability::build_linear_filter;
use crate::pipeline::{ReduceOptions, Reduction, reduce_auto, reduce_onto};
use crate::reduction::ReducedModel;
use crate::sde::{
    FilterModel, FullModel, Scheme, SimConfig, SmeStepper, generate_truth, run_linear_filter,
    run_zakai, write_csv,
};

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_WEDDERBURN: i32 = 3;
pub const EXIT_CONTAINMENT: i32 = 4;
pub const EXIT_REFUSED: i32 = 5;
/// An experiment ran but its report did not pass.
pub const EXIT_CHECK_FAILED: i32 = 6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("refused: {0}")]
    Refused(String),
    #[error("{0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(Error::Parse(_)) => EXIT_PARSE,
            CliError::Lib(Error::Decomposition { .. }) => EXIT_WEDDERBURN,
            CliError::Lib(Error::Containment(_)) => EXIT_CONTAINMENT,
            CliError::Lib(_) => EXIT_FAILURE,
            CliError::Refused(_) => EXIT_REFUSED,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "qfred", version, about = "Reduction of quantum filters onto operator algebras")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgebraChoice {
    /// The algebra generated by the observable space, decomposed numerically.
    Auto,
    /// The analytic spin-chain algebra (model dimension must be 2^N).
    Chain,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Euler,
    PositivityPreserving,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Euler => Scheme::Euler,
            SchemeArg::PositivityPreserving => Scheme::PositivityPreserving,
        }
    }
}

#[derive(clap::Args, Debug, Clone)]
pub struct SimArgs {
    /// Final time.
    #[arg(long = "T", default_value_t = 5.0)]
    pub t_final: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SchemeArg::PositivityPreserving)]
    pub scheme: SchemeArg,
}

impl SimArgs {
    fn config(&self) -> SimConfig {
        SimConfig::new(self.t_final, self.dt, self.seed, self.scheme.into())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum DemoKind {
    Qnd,
    Chain,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Reduce a model and write the reduced model as JSON.
    Reduce {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the minimal linear filter next to --out (`*.linear.json`).
        #[arg(long)]
        linear: bool,
        #[arg(long, value_enum, default_value_t = AlgebraChoice::Auto)]
        algebra: AlgebraChoice,
        /// Seed of the randomized decomposition steps.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Simulate the true conditional state; writes a trajectory CSV with the record.
    Simulate {
        model: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write every state to `*.states.json` next to --out.
        #[arg(long)]
        store_states: bool,
    },
    /// Full vs reduced (and linear) filters on shared records.
    Compare {
        model: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum, default_value_t = AlgebraChoice::Auto)]
        algebra: AlgebraChoice,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Tolerance on output and drift deviations.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Include wall-clock runtimes (makes the report non-reproducible).
        #[arg(long)]
        timings: bool,
    },
    /// Fidelity of mis-initialized full and reduced filters.
    Stability {
        model: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long, value_enum, default_value_t = AlgebraChoice::Auto)]
        algebra: AlgebraChoice,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a packaged example model.
    Demo {
        #[arg(value_enum)]
        which: DemoKind,
        /// Number of spins (chain).
        #[arg(long, default_value_t = 3)]
        sites: usize,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Seeded Ginibre states, drawn from a stream separate from the noise.
pub fn initial_states(n: usize, seed: u64, count: usize) -> Vec<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..count).map(|_| random_density(n, &mut rng)).collect()
}

fn chain_sites(n: usize) -> Result<usize> {
    if n.is_power_of_two() && n >= 2 {
        Ok(n.trailing_zeros() as usize)
    } else {
        Err(Error::Config(format!("the chain algebra needs dimension 2^N, got {n}")))
    }
}

pub fn reduce_with(model: &QuantumModel, algebra: AlgebraChoice, seed: u64) -> Result<Reduction> {
    let opts = ReduceOptions {
        seed,
        ..ReduceOptions::default()
    };
    match algebra {
        AlgebraChoice::Auto => reduce_auto(model, &opts),
        AlgebraChoice::Chain => reduce_onto(model, chain_wedderburn(chain_sites(model.n)?)?, &opts),
    }
}

/// Reduced domains up to this dimension get an exact [`reduced_generator_norm`].
const EXACT_GENERATOR_NORM_MAX_DIM: usize = 256;

/// HS norm of Ľ as a map on the block-diagonal reduced space: exact over
/// matrix units for small domains, otherwise estimated from 32 seeded
/// Gaussian probes (E‖Ľg‖² = ‖Ľ‖²).
pub fn reduced_generator_norm(red: &ReducedModel) -> f64 {
    let mut units = Vec::new();
    let mut off = 0;
    for &(df, _) in &red.blocks {
        for a in 0..df {
            for b in 0..df {
                units.push((off + a, off + b));
            }
        }
        off += df;
    }
    if units.len() <= EXACT_GENERATOR_NORM_MAX_DIM {
        return units
            .iter()
            .map(|&(a, b)| {
                let mut e = zeros(red.m);
                e[(a, b)] = crate::linops::ONE;
                hs_norm(&red.lindbladian(&e)).powi(2)
            })
            .sum::<f64>()
            .sqrt();
    }
    let samples = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut total = 0.0;
    for _ in 0..samples {
        let g = random_complex_matrix(red.m, red.m, &mut rng);
        let mut x = zeros(red.m);
        for &(a, b) in &units {
            x[(a, b)] = g[(a, b)];
        }
        total += hs_norm(&red.lindbladian(&x)).powi(2);
    }
    (total / samples as f64).sqrt()
}

fn blocks_label(blocks: &[(usize, usize)]) -> String {
    blocks
        .iter()
        .map(|(f, g)| format!("({f},{g})"))
        .collect::<Vec<_>>()
        .join("+")
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ReduceSummary {
    pub kappa: Option<usize>,
    pub alg_dim: usize,
    pub reduced_dim: usize,
    pub blocks: Vec<(usize, usize)>,
    pub invariant: bool,
    pub invariance_defects: Vec<(String, f64)>,
    pub reduced_generator_norm: f64,
}

fn cmd_reduce(model: &Path, out: &Option<PathBuf>, linear: bool, algebra: AlgebraChoice, seed: u64) -> Result<ReduceSummary> {
    let model = read_model(model)?;
    let red = reduce_with(&model, algebra, seed)?;
    let summary = ReduceSummary {
        kappa: red.kappa(),
        alg_dim: red.algebra_dim,
        reduced_dim: red.reduced.m,
        blocks: red.reduced.blocks.clone(),
        invariant: red.invariance.invariant,
        invariance_defects: red.invariance.defects.clone(),
        reduced_generator_norm: reduced_generator_norm(&red.reduced),
    };
    let kappa = summary.kappa.map_or("not computed".to_string(), |k| k.to_string());
    println!("kappa: {kappa}");
    println!("alg_dim: {}", summary.alg_dim);
    println!("reduced_dim: {}", summary.reduced_dim);
    println!("blocks: {}", blocks_label(&summary.blocks));
    println!("invariant: {}", summary.invariant);
    println!("reduced_generator_norm: {:.3e}", summary.reduced_generator_norm);
    if let Some(path) = out {
        write_json(path, &ReducedModelFile::new(&red.reduced, red.wedderburn()))?;
        if linear {
            let nperp = match &red.nperp {
                Some(s) => s.clone(),
                None => crate::observability::observable_space(&model, crate::linops::RANK_TOL)?,
            };
            let lin = build_linear_filter(&model, &nperp)?;
            write_json(&sibling(path, ".linear.json"), &LinearFilterFile::from(&lin))?;
        }
    } else if linear {
        return Err(Error::Config("--linear needs --out".into()));
    }
    Ok(summary)
}

fn cmd_simulate(model: &Path, sim: &SimArgs, out: &Option<PathBuf>, store_states: bool) -> Result<()> {
    let model = read_model(model)?;
    let mut cfg = sim.config();
    cfg.store_states = store_states;
    if store_states && out.is_none() {
        return Err(Error::Config("--store-states needs --out".into()));
    }
    let rho0 = DensityState::new(initial_states(model.n, sim.seed, 1).remove(0), true)?;
    let (traj, rec) = generate_truth(&model, &rho0, &cfg)?;
    let mut buf = Vec::new();
    write_csv(&mut buf, &traj, Some(&rec))?;
    emit(out, &String::from_utf8(buf).expect("utf-8 csv"))?;
    if let (Some(states), Some(path)) = (&traj.states, out) {
        let json: Vec<crate::io::JsonMatrix> = states.iter().map(Into::into).collect();
        write_json(&sibling(path, ".states.json"), &json)?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ChannelDefect {
    pub channel: String,
    pub max_defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub kappa: Option<usize>,
    pub alg_dim: usize,
    pub reduced_dim: usize,
    pub blocks: Vec<(usize, usize)>,
    pub invariant: bool,
    pub scheme: Scheme,
    pub steps: usize,
    /// max_t |Θⱼ − Θ̌ⱼ| per observable.
    pub output_deviation: Vec<f64>,
    /// max_t |tr G_D(ρ) − tr G_Ď(ρ̌)| and |tr K_C(ρ) − Σ tr K_Č(ρ̌)| per channel.
    pub drift_defects: Vec<ChannelDefect>,
    /// max_t |⟨ζⱼ,v⟩ − tr Oⱼτ| / tr τ per observable, when the linear filter was built.
    pub linear_deviation: Option<Vec<f64>>,
    /// max |off-block entry| of ρ̌ over the run.
    pub reduced_off_block: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtimes_s: Option<Runtimes>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Runtimes {
    pub reduction: f64,
    pub truth: f64,
    pub filters: f64,
    pub linear: f64,
}

fn off_block(red: &ReducedModel, rho: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    let mut starts = Vec::new();
    let mut at = 0;
    for &(df, _) in &red.blocks {
        starts.push((at, at + df));
        at += df;
    }
    let block_of = |i: usize| starts.iter().position(|&(a, b)| (a..b).contains(&i));
    for i in 0..red.m {
        for j in 0..red.m {
            if block_of(i) != block_of(j) {
                worst = worst.max(rho[(i, j)].norm());
            }
        }
    }
    worst
}

pub fn run_compare_experiment(model: &QuantumModel, sim: &SimArgs, algebra: AlgebraChoice, tol: f64, timings: bool) -> Result<CompareReport> {
    let clock = Instant::now();
    let red = reduce_with(model, algebra, sim.seed)?;
    let t_reduction = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let rho0 = DensityState::new(initial_states(model.n, sim.seed, 1).remove(0), true)?;
    let truth_cfg = SimConfig::new(sim.t_final, sim.dt, sim.seed, Scheme::PositivityPreserving);
    let (_, rec) = generate_truth(model, &rho0, &truth_cfg)?;
    let t_truth = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let cfg = sim.config();
    let full = FullModel::new(model);
    let reduced = &red.reduced;
    let mut a = SmeStepper::new(&full, rho0.rho.clone(), &cfg);
    let mut b = SmeStepper::new(reduced, red.factors.r(&rho0.rho)?, &cfg);
    let r = model.o.len();
    let mut output_deviation = vec![0.0f64; r];
    let mut drift = vec![0.0f64; model.p() + model.q()];
    let mut reduced_off_block = off_block(reduced, &b.rho);
    let mut compare_point = |a: &SmeStepper<FullModel>, b: &SmeStepper<ReducedModel>| {
        for (j, (x, y)) in a.outputs().iter().zip(b.outputs()).enumerate() {
            output_deviation[j] = output_deviation[j].max((x - y).abs());
        }
        for j in 0..model.p() {
            let x = full.homodyne_map(j, &a.rho).trace().re;
            let y = reduced.homodyne_map(j, &b.rho).trace().re;
            drift[j] = drift[j].max((x - y).abs());
        }
        for j in 0..model.q() {
            let x = full.jump_map(j, &a.rho).trace().re;
            let y = reduced.jump_map(j, &b.rho).trace().re;
            drift[model.p() + j] = drift[model.p() + j].max((x - y).abs());
        }
    };
    compare_point(&a, &b);
    let (mut dy, mut dn) = (vec![0.0; model.p()], vec![0u8; model.q()]);
    for k in 0..rec.steps() {
        rec.increments(k, &mut dy, &mut dn);
        a.step(k, &dy, &dn, rec.dt)?;
        b.step(k, &dy, &dn, rec.dt)?;
        compare_point(&a, &b);
        reduced_off_block = reduced_off_block.max(off_block(reduced, &b.rho));
    }
    let t_filters = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let linear_deviation = match &red.nperp {
        Some(nperp) => {
            let lin = build_linear_filter(model, nperp)?;
            let zakai = run_zakai(model, &rho0.rho, &rec, &cfg)?;
            let linear = run_linear_filter(&lin, &lin.reduce_state(&rho0.rho), &rec, &cfg)?;
            let (x, y) = (zakai.raw_theta(), linear.raw_theta());
            Some(
                (0..r)
                    .map(|j| {
                        (0..zakai.times.len())
                            .map(|k| (x[j][k] - y[j][k]).abs() / zakai.norm_trace[k].abs())
                            .fold(0.0, f64::max)
                    })
                    .collect::<Vec<f64>>(),
            )
        }
        None => None,
    };
    let t_linear = clock.elapsed().as_secs_f64();

    let mut drift_defects: Vec<ChannelDefect> = (0..model.p())
        .map(|j| ChannelDefect {
            channel: format!("D[{j}]"),
            max_defect: drift[j],
        })
        .collect();
    drift_defects.extend((0..model.q()).map(|j| ChannelDefect {
        channel: format!("C[{j}]"),
        max_defect: drift[model.p() + j],
    }));
    let pass = output_deviation.iter().all(|&d| d <= tol)
        && drift_defects.iter().all(|d| d.max_defect <= tol)
        && linear_deviation.as_ref().is_none_or(|v| v.iter().all(|&d| d <= 1e-10));
    Ok(CompareReport {
        kappa: red.kappa(),
        alg_dim: red.algebra_dim,
        reduced_dim: reduced.m,
        blocks: reduced.blocks.clone(),
        invariant: red.invariance.invariant,
        scheme: cfg.scheme,
        steps: rec.steps(),
        output_deviation,
        drift_defects,
        linear_deviation,
        reduced_off_block,
        tolerance: tol,
        pass,
        runtimes_s: timings.then_some(Runtimes {
            reduction: t_reduction,
            truth: t_truth,
            filters: t_filters,
            linear: t_linear,
        }),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityRun {
    pub seed: u64,
    /// 𝔉(ρₜ, ρₜᵉ) on the grid.
    pub full: Vec<f64>,
    /// 𝔉(ρ̌ₜ, ρ̌ₜᵉ) on the grid.
    pub reduced: Vec<f64>,
    pub min_difference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub dt: f64,
    pub steps: usize,
    pub scheme: Scheme,
    pub runs: Vec<StabilityRun>,
    pub min_difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub const STABILITY_TOL: f64 = 1e-9;

fn stability_run(model: &QuantumModel, red: &Reduction, sim: &SimArgs, seed: u64) -> Result<StabilityRun> {
    let mut states = initial_states(model.n, seed, 2);
    let rho0e = states.pop().expect("two states");
    let rho0 = states.pop().expect("two states");
    let cfg = SimConfig::new(sim.t_final, sim.dt, seed, sim.scheme.into());
    let (_, rec) = generate_truth(model, &DensityState::new(rho0.clone(), true)?, &cfg)?;
    let full = FullModel::new(model);
    let f = &red.factors;
    let mut truth = SmeStepper::new(&full, rho0.clone(), &cfg);
    let mut est = SmeStepper::new(&full, rho0e.clone(), &cfg);
    let mut rtruth = SmeStepper::new(&red.reduced, f.r(&rho0)?, &cfg);
    let mut rest = SmeStepper::new(&red.reduced, f.r(&rho0e)?, &cfg);
    let mut run = StabilityRun {
        seed,
        full: Vec::with_capacity(rec.steps() + 1),
        reduced: Vec::with_capacity(rec.steps() + 1),
        min_difference: f64::INFINITY,
    };
    let record = |run: &mut StabilityRun, a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix| {
        let (x, y) = (fidelity_unchecked(a, b), fidelity_unchecked(c, d));
        run.full.push(x);
        run.reduced.push(y);
        run.min_difference = run.min_difference.min(y - x);
    };
    record(&mut run, &truth.rho, &est.rho, &rtruth.rho, &rest.rho);
    let (mut dy, mut dn) = (vec![0.0; model.p()], vec![0u8; model.q()]);
    for k in 0..rec.steps() {
        rec.increments(k, &mut dy, &mut dn);
        truth.step(k, &dy, &dn, rec.dt)?;
        est.step(k, &dy, &dn, rec.dt)?;
        rtruth.step(k, &dy, &dn, rec.dt)?;
        rest.step(k, &dy, &dn, rec.dt)?;
        record(&mut run, &truth.rho, &est.rho, &rtruth.rho, &rest.rho);
    }
    Ok(run)
}

pub fn run_stability_experiment(model: &QuantumModel, sim: &SimArgs, algebra: AlgebraChoice, runs: usize) -> std::result::Result<StabilityReport, CliError> {
    let red = reduce_with(model, algebra, sim.seed)?;
    if !red.invariance.invariant {
        let worst = red
            .invariance
            .defects
            .iter()
            .map(|(name, d)| format!("{name}: {d:.3e}"))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(CliError::Refused(format!(
            "the algebra is not invariant under the adjoint generators ({worst}); \
             fidelity monotonicity along the filter is not guaranteed"
        )));
    }
    let cfg = sim.config();
    cfg.validate()?;
    let results: Vec<StabilityRun> = (0..runs as u64)
        .into_par_iter()
        .map(|r| stability_run(model, &red, sim, sim.seed.wrapping_add(r)))
        .collect::<Result<_>>()?;
    let min_difference = results.iter().map(|r| r.min_difference).fold(f64::INFINITY, f64::min);
    Ok(StabilityReport {
        dt: sim.dt,
        steps: cfg.steps(),
        scheme: cfg.scheme,
        runs: results,
        min_difference,
        tolerance: STABILITY_TOL,
        pass: min_difference >= -STABILITY_TOL,
    })
}

/// Three-block QND example with block sizes (1, 2, 2).
pub fn demo_qnd(seed: u64) -> Result<QuantumModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = vec![1, 2, 2];
    build_qnd(&QndSpec {
        h_blocks: Some(dims.iter().map(|&d| random_hermitian(d, &mut rng)).collect()),
        d: vec![vec![1.0, -0.5, 0.3]],
        c: vec![vec![0.9, 0.4, 1.3]],
        dims,
        ..Default::default()
    })
}

pub fn run(cli: &Cli) -> std::result::Result<(), CliError> {
    match &cli.command {
        Command::Reduce { model, out, linear, algebra, seed } => {
            cmd_reduce(model, out, *linear, *algebra, *seed)?;
        }
        Command::Simulate { model, sim, out, store_states } => cmd_simulate(model, sim, out, *store_states)?,
        Command::Compare { model, sim, algebra, out, tol, timings } => {
            let model = read_model(model)?;
            let report = run_compare_experiment(&model, sim, *algebra, *tol, *timings)?;
            emit(out, &to_json(&report))?;
            if !report.pass {
                return Err(CliError::CheckFailed("comparison exceeded its tolerances".into()));
            }
        }
        Command::Stability { model, sim, algebra, runs, out } => {
            let model = read_model(model)?;
            let report = run_stability_experiment(&model, sim, *algebra, *runs)?;
            emit(out, &to_json(&report))?;
            eprintln!("min difference: {:.3e}", report.min_difference);
            if !report.pass {
                return Err(CliError::CheckFailed("fidelity difference fell below tolerance".into()));
            }
        }
        Command::Demo { which, sites, gamma, alpha, seed, out } => {
            let model = match which {
                DemoKind::Qnd => demo_qnd(*seed)?,
                DemoKind::Chain => build_spin_chain(&ChainSpec::random(*sites, *gamma, *alpha, *seed))?,
            };
            match out {
                Some(p) => write_model(p, &model)?,
                None => emit(&None, &to_json(&crate::io::ModelFile::from(&model)))?,
            }
        }
    }
    Ok(())
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
