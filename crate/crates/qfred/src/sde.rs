//! Jump-diffusion integration of quantum filters on shared measurement
//! records: truth generation, normalized SME filters (full and reduced), the
//! unnormalized linear (Zakai) recursion and the minimal linear filter.
//!
//! Schemes, per step of length dt with increments dYʲ, dNᵏ ∈ {0, 1}:
//! - Euler: ρ += ℒρ dt + Σ (G_jρ − m_jρ)(dYʲ − m_j dt) + Σ (K_kρ/λ_k − ρ)(dNᵏ − λ_k dt),
//!   with m_j = tr G_jρ, λ_k = tr K_kρ, followed by renormalization.
//! - Positivity preserving: without jumps ρ ∝ MρM* + dt Σ LρL* where
//!   M = 1 − (iH + ½Σ A*A)dt + Σ Dⱼ dYʲ; on a jump ρ ← K_kρ / tr K_kρ, channels in order.
//!
//! The unnormalized recursion is τ += 𝒬τ dt + Σ Gⱼτ dYʲ + Σ (Kₖ − 1)τ dNᵏ and
//! is never renormalized.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{
    C64, CMatrix, DensityState, I, QuantumModel, eye, g_d, hermitian_part, k_c,
    min_eigenvalue,
};
use crate::observability::{CVector, LinearFilter};
use crate::reduction::ReducedModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    PositivityPreserving,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Outputs drawn from the state (dY = tr G_D ρ dt + dW, jumps at rate tr K_C ρ).
    Physical,
    /// Standard Brownian increments and rate-1 jumps.
    Reference,
}

/// Euler runs abort once the state has an eigenvalue below −`DEFAULT_EULER_NEG_TOL`.
/// Near-pure states under Euler fluctuate below zero by O(‖D‖²√dt) even when
/// the scheme is otherwise well behaved, hence the loose default.
pub const DEFAULT_EULER_NEG_TOL: f64 = 0.25;
/// Per-step jump probability above which a warning is logged.
pub const JUMP_PROBABILITY_WARN: f64 = 0.1;
/// |⟨e, v⟩| below this halts the linear filter.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_final: f64,
    pub dt: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub store_states: bool,
    pub measure: Measure,
    pub euler_negativity_tol: f64,
}

impl SimConfig {
    pub fn new(t_final: f64, dt: f64, seed: u64, scheme: Scheme) -> Self {
        SimConfig {
            t_final,
            dt,
            seed,
            scheme,
            store_states: false,
            measure: Measure::Physical,
            euler_negativity_tol: DEFAULT_EULER_NEG_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return Err(Error::Config(format!(
                "horizon {} shorter than one step {}",
                self.t_final, self.dt
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Output increments on the grid: `dy[j][k]` and `dn[j][k]` for step k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub dt: f64,
    pub dy: Vec<Vec<f64>>,
    pub dn: Vec<Vec<u8>>,
}

impl NoiseRecord {
    pub fn empty(p: usize, q: usize, dt: f64, steps: usize) -> Self {
        NoiseRecord {
            dt,
            dy: vec![Vec::with_capacity(steps); p],
            dn: vec![Vec::with_capacity(steps); q],
        }
    }

    pub fn steps(&self) -> usize {
        self.dy
            .first()
            .map(Vec::len)
            .or_else(|| self.dn.first().map(Vec::len))
            .unwrap_or(0)
    }

    pub fn times(&self) -> Vec<f64> {
        grid(self.dt, self.steps())
    }

    /// Checks channel counts, lengths and binary jump indicators.
    pub fn validate_for(&self, p: usize, q: usize, steps: usize) -> Result<()> {
        if self.dy.len() != p || self.dn.len() != q {
            return Err(Error::Dimension(format!(
                "record has {} homodyne / {} counting channels, model {p} / {q}",
                self.dy.len(),
                self.dn.len()
            )));
        }
        if self.dy.iter().any(|c| c.len() != steps) || self.dn.iter().any(|c| c.len() != steps) {
            return Err(Error::Dimension(format!("record does not cover {steps} steps")));
        }
        if self.dn.iter().flatten().any(|&v| v > 1) {
            return Err(Error::Config("jump indicators must be 0 or 1".into()));
        }
        Ok(())
    }

    pub fn increments(&self, k: usize, dy: &mut [f64], dn: &mut [u8]) {
        for (out, ch) in dy.iter_mut().zip(&self.dy) {
            *out = ch[k];
        }
        for (out, ch) in dn.iter_mut().zip(&self.dn) {
            *out = ch[k];
        }
    }
}

fn grid(dt: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 * dt).collect()
}

/// Values on the grid t₀ = 0, …, t_steps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `theta[j][k]` = Θʲ at time k·dt.
    pub theta: Vec<Vec<f64>>,
    /// tr τ (unnormalized runs), ⟨e, v⟩ (linear filter), 1 otherwise.
    pub norm_trace: Vec<f64>,
    pub states: Option<Vec<CMatrix>>,
    pub vectors: Option<Vec<CVector>>,
    /// Smallest eigenvalue seen over the run (normalized matrix runs).
    pub min_eigenvalue: f64,
}

impl Trajectory {
    fn with_capacity(r: usize, steps: usize) -> Self {
        Trajectory {
            times: Vec::with_capacity(steps + 1),
            theta: vec![Vec::with_capacity(steps + 1); r],
            norm_trace: Vec::with_capacity(steps + 1),
            states: None,
            vectors: None,
            min_eigenvalue: f64::INFINITY,
        }
    }

    /// Unnormalized outputs Θʲ·tr τ.
    pub fn raw_theta(&self) -> Vec<Vec<f64>> {
        self.theta
            .iter()
            .map(|row| row.iter().zip(&self.norm_trace).map(|(a, b)| a * b).collect())
            .collect()
    }
}

/// What a matrix-valued filter needs from its model.
pub trait FilterModel: Sync {
    fn dim(&self) -> usize;
    fn homodyne_channels(&self) -> usize;
    fn counting_channels(&self) -> usize;
    fn observables(&self) -> &[CMatrix];
    /// ℒ(ρ).
    fn lindblad(&self, rho: &CMatrix) -> CMatrix;
    /// G_Dⱼ(ρ).
    fn homodyne_map(&self, j: usize, rho: &CMatrix) -> CMatrix;
    /// The (possibly multi-Kraus) jump map of counting channel j.
    fn jump_map(&self, j: usize, rho: &CMatrix) -> CMatrix;
    /// Unnormalized no-jump update of the positivity-preserving scheme.
    fn no_jump(&self, rho: &CMatrix, dy: &[f64], dt: f64) -> CMatrix;
}

/// A full model with the no-jump generator iH + ½ΣA*A cached.
pub struct FullModel<'a> {
    pub model: &'a QuantumModel,
    drift: CMatrix,
}

impl<'a> FullModel<'a> {
    pub fn new(model: &'a QuantumModel) -> Self {
        let mut drift = &model.h * I;
        for a in model.l.iter().chain(&model.d).chain(&model.c) {
            drift += (a.adjoint() * a).scale(0.5);
        }
        FullModel { model, drift }
    }
}

impl FilterModel for FullModel<'_> {
    fn dim(&self) -> usize {
        self.model.n
    }
    fn homodyne_channels(&self) -> usize {
        self.model.p()
    }
    fn counting_channels(&self) -> usize {
        self.model.q()
    }
    fn observables(&self) -> &[CMatrix] {
        &self.model.o
    }
    fn lindblad(&self, rho: &CMatrix) -> CMatrix {
        crate::linops::lindbladian(self.model, rho, false)
    }
    fn homodyne_map(&self, j: usize, rho: &CMatrix) -> CMatrix {
        g_d(&self.model.d[j], rho, false)
    }
    fn jump_map(&self, j: usize, rho: &CMatrix) -> CMatrix {
        k_c(&self.model.c[j], rho, false)
    }
    fn no_jump(&self, rho: &CMatrix, dy: &[f64], dt: f64) -> CMatrix {
        let mut m = eye(self.model.n) - self.drift.scale(dt);
        for (d, &y) in self.model.d.iter().zip(dy) {
            m += d.scale(y);
        }
        let mut out = &m * rho * m.adjoint();
        for l in &self.model.l {
            out += (l * rho * l.adjoint()).scale(dt);
        }
        out
    }
}

impl FilterModel for ReducedModel {
    fn dim(&self) -> usize {
        self.m
    }
    fn homodyne_channels(&self) -> usize {
        self.p()
    }
    fn counting_channels(&self) -> usize {
        self.q()
    }
    fn observables(&self) -> &[CMatrix] {
        &self.o
    }
    fn lindblad(&self, rho: &CMatrix) -> CMatrix {
        ReducedModel::lindbladian(self, rho)
    }
    fn homodyne_map(&self, j: usize, rho: &CMatrix) -> CMatrix {
        self.g_map(j, rho)
    }
    fn jump_map(&self, j: usize, rho: &CMatrix) -> CMatrix {
        ReducedModel::jump_map(self, j, rho)
    }
    fn no_jump(&self, rho: &CMatrix, dy: &[f64], dt: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.m, self.m);
        for sk in &self.step_kraus {
            let mut m = &sk.identity - sk.drift.scale(dt);
            for (d, &y) in sk.homodyne.iter().zip(dy) {
                m += d.scale(y);
            }
            out += &m * rho * m.adjoint();
        }
        for l in self.l.iter().flatten() {
            out += (&l.op * rho * l.op.adjoint()).scale(dt);
        }
        out
    }
}

fn re_trace(x: &CMatrix) -> f64 {
    x.trace().re
}

/// tr(Oρ) for Hermitian O.
fn expectation(o: &CMatrix, rho: &CMatrix) -> f64 {
    o.dotc(rho).re
}

fn integration_error(step: usize, reason: impl Into<String>) -> Error {
    Error::Integration {
        step,
        reason: reason.into(),
    }
}

/// One step of the normalized filter.
pub fn sme_step<F: FilterModel + ?Sized>(
    f: &F,
    rho: &CMatrix,
    dy: &[f64],
    dn: &[u8],
    dt: f64,
    scheme: Scheme,
    step: usize,
) -> Result<CMatrix> {
    let next = match scheme {
        Scheme::Euler => {
            let mut out = rho + f.lindblad(rho).scale(dt);
            for (j, &y) in dy.iter().enumerate() {
                let g = f.homodyne_map(j, rho);
                let m = re_trace(&g);
                out += (g - rho.scale(m)).scale(y - m * dt);
            }
            for (k, &jump) in dn.iter().enumerate() {
                let kr = f.jump_map(k, rho);
                let lambda = re_trace(&kr);
                let innovation = &kr - rho.scale(lambda);
                out -= innovation.scale(dt);
                if jump == 1 {
                    if !(lambda > 0.0) {
                        return Err(integration_error(step, format!("jump on channel {k} with zero intensity")));
                    }
                    out += innovation.unscale(lambda);
                }
            }
            out
        }
        Scheme::PositivityPreserving => {
            if dn.iter().any(|&v| v == 1) {
                let mut out = rho.clone();
                for (k, _) in dn.iter().enumerate().filter(|(_, v)| **v == 1) {
                    out = f.jump_map(k, &out);
                    let lambda = re_trace(&out);
                    if !(lambda > 0.0) {
                        return Err(integration_error(step, format!("jump on channel {k} with zero intensity")));
                    }
                    out.unscale_mut(lambda);
                }
                out
            } else {
                f.no_jump(rho, dy, dt)
            }
        }
    };
    let tr = re_trace(&next);
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(integration_error(
            step,
            format!("trace became {tr}; reduce dt or use the positivity-preserving scheme"),
        ));
    }
    Ok(hermitian_part(&next).unscale(tr))
}

/// One step of the unnormalized recursion.
pub fn zakai_step<F: FilterModel + ?Sized>(f: &F, tau: &CMatrix, dy: &[f64], dn: &[u8], dt: f64) -> CMatrix {
    let q = f.counting_channels() as f64;
    let mut out = tau + (f.lindblad(tau) + tau.scale(q)).scale(dt);
    for (j, &y) in dy.iter().enumerate() {
        out += f.homodyne_map(j, tau).scale(y);
    }
    for (k, &jump) in dn.iter().enumerate() {
        let kr = f.jump_map(k, tau);
        out -= kr.scale(dt);
        if jump == 1 {
            out += kr - tau;
        }
    }
    out
}

/// Normalized filter state advanced over a record, with positivity tracking.
pub struct SmeStepper<'a, F: FilterModel + ?Sized> {
    pub f: &'a F,
    pub rho: CMatrix,
    pub scheme: Scheme,
    pub negativity_tol: f64,
    pub min_eigenvalue: f64,
}

impl<'a, F: FilterModel + ?Sized> SmeStepper<'a, F> {
    pub fn new(f: &'a F, rho0: CMatrix, cfg: &SimConfig) -> Self {
        let min_eigenvalue = min_eigenvalue(&rho0);
        SmeStepper {
            f,
            rho: rho0,
            scheme: cfg.scheme,
            negativity_tol: cfg.euler_negativity_tol,
            min_eigenvalue,
        }
    }

    pub fn step(&mut self, k: usize, dy: &[f64], dn: &[u8], dt: f64) -> Result<()> {
        self.rho = sme_step(self.f, &self.rho, dy, dn, dt, self.scheme, k)?;
        let lmin = min_eigenvalue(&self.rho);
        self.min_eigenvalue = self.min_eigenvalue.min(lmin);
        if self.scheme == Scheme::Euler && lmin < -self.negativity_tol {
            return Err(integration_error(
                k,
                format!(
                    "state left the density operators (eigenvalue {lmin:.3e}); \
                     reduce dt or use the positivity-preserving scheme"
                ),
            ));
        }
        Ok(())
    }

    pub fn outputs(&self) -> Vec<f64> {
        self.f.observables().iter().map(|o| expectation(o, &self.rho)).collect()
    }
}

fn record_point(traj: &mut Trajectory, t: f64, theta: &[f64], trace: f64) {
    traj.times.push(t);
    for (row, &v) in traj.theta.iter_mut().zip(theta) {
        row.push(v);
    }
    traj.norm_trace.push(trace);
}

fn check_state(rho: &CMatrix, dim: usize) -> Result<()> {
    if rho.shape() != (dim, dim) {
        return Err(Error::Dimension(format!(
            "initial state is {:?}, model dimension {dim}",
            rho.shape()
        )));
    }
    DensityState::new(rho.clone(), true).map(|_| ())
}

/// Draws the next output increments from the current state.
fn draw_increments<F: FilterModel + ?Sized, R: Rng + ?Sized>(
    f: &F,
    rho: &CMatrix,
    dt: f64,
    measure: Measure,
    rng: &mut R,
    dy: &mut [f64],
    dn: &mut [u8],
    warned: &mut bool,
) {
    let normal = Normal::new(0.0, dt.sqrt()).expect("dt > 0");
    for (j, out) in dy.iter_mut().enumerate() {
        let dw = normal.sample(rng);
        *out = match measure {
            Measure::Physical => re_trace(&f.homodyne_map(j, rho)) * dt + dw,
            Measure::Reference => dw,
        };
    }
    for (k, out) in dn.iter_mut().enumerate() {
        let prob = match measure {
            Measure::Physical => re_trace(&f.jump_map(k, rho)).max(0.0) * dt,
            Measure::Reference => dt,
        };
        if prob > JUMP_PROBABILITY_WARN && !*warned {
            log::warn!("jump probability per step {prob:.3} exceeds {JUMP_PROBABILITY_WARN}; consider a smaller dt");
            *warned = true;
        }
        *out = u8::from(rng.random::<f64>() < prob);
    }
}

/// Simulates the true conditional state and the measurement record it emits.
pub fn generate_truth(
    model: &QuantumModel,
    rho0: &DensityState,
    cfg: &SimConfig,
) -> Result<(Trajectory, NoiseRecord)> {
    generate_truth_with(&FullModel::new(model), &rho0.rho, cfg)
}

pub fn generate_truth_with<F: FilterModel + ?Sized>(
    f: &F,
    rho0: &CMatrix,
    cfg: &SimConfig,
) -> Result<(Trajectory, NoiseRecord)> {
    cfg.validate()?;
    if cfg.measure != Measure::Physical {
        return Err(Error::Config("truth generation uses the physical measure".into()));
    }
    check_state(rho0, f.dim())?;
    let steps = cfg.steps();
    let (p, q) = (f.homodyne_channels(), f.counting_channels());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = NoiseRecord::empty(p, q, cfg.dt, steps);
    let mut traj = Trajectory::with_capacity(f.observables().len(), steps);
    let mut states = cfg.store_states.then(Vec::new);
    let mut stepper = SmeStepper::new(f, rho0.clone(), cfg);
    let (mut dy, mut dn) = (vec![0.0; p], vec![0u8; q]);
    let mut warned = false;
    record_point(&mut traj, 0.0, &stepper.outputs(), 1.0);
    if let Some(s) = states.as_mut() {
        s.push(stepper.rho.clone());
    }
    for k in 0..steps {
        draw_increments(f, &stepper.rho, cfg.dt, cfg.measure, &mut rng, &mut dy, &mut dn, &mut warned);
        for (ch, &v) in rec.dy.iter_mut().zip(&dy) {
            ch.push(v);
        }
        for (ch, &v) in rec.dn.iter_mut().zip(&dn) {
            ch.push(v);
        }
        stepper.step(k, &dy, &dn, cfg.dt)?;
        record_point(&mut traj, (k + 1) as f64 * cfg.dt, &stepper.outputs(), 1.0);
        if let Some(s) = states.as_mut() {
            s.push(stepper.rho.clone());
        }
    }
    traj.states = states;
    traj.min_eigenvalue = stepper.min_eigenvalue;
    Ok((traj, rec))
}

/// Normalized filter of any model driven by a given record.
pub fn run_sme<F: FilterModel + ?Sized>(
    f: &F,
    rho0: &CMatrix,
    rec: &NoiseRecord,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_state(rho0, f.dim())?;
    let steps = rec.steps();
    rec.validate_for(f.homodyne_channels(), f.counting_channels(), steps)?;
    let mut traj = Trajectory::with_capacity(f.observables().len(), steps);
    let mut states = cfg.store_states.then(Vec::new);
    let mut stepper = SmeStepper::new(f, rho0.clone(), cfg);
    let (mut dy, mut dn) = (vec![0.0; rec.dy.len()], vec![0u8; rec.dn.len()]);
    record_point(&mut traj, 0.0, &stepper.outputs(), 1.0);
    if let Some(s) = states.as_mut() {
        s.push(stepper.rho.clone());
    }
    for k in 0..steps {
        rec.increments(k, &mut dy, &mut dn);
        stepper.step(k, &dy, &dn, rec.dt)?;
        record_point(&mut traj, (k + 1) as f64 * rec.dt, &stepper.outputs(), 1.0);
        if let Some(s) = states.as_mut() {
            s.push(stepper.rho.clone());
        }
    }
    traj.states = states;
    traj.min_eigenvalue = stepper.min_eigenvalue;
    Ok(traj)
}

pub fn run_filter(
    model: &QuantumModel,
    rho0e: &DensityState,
    rec: &NoiseRecord,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    run_sme(&FullModel::new(model), &rho0e.rho, rec, cfg)
}

/// The reduced filter; the initial state must be block diagonal.
pub fn run_reduced_filter(
    red: &ReducedModel,
    rho0_red: &CMatrix,
    rec: &NoiseRecord,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    let mut off = 0.0f64;
    let mut at = 0;
    let offsets: Vec<usize> = red
        .blocks
        .iter()
        .map(|&(df, _)| {
            let o = at;
            at += df;
            o
        })
        .collect();
    for i in 0..red.m {
        for j in 0..red.m {
            let bi = offsets.iter().rposition(|&o| o <= i);
            let bj = offsets.iter().rposition(|&o| o <= j);
            if bi != bj {
                off = off.max(rho0_red[(i, j)].norm());
            }
        }
    }
    if off > 1e-10 {
        return Err(Error::State(format!("reduced initial state has off-block entry {off:.3e}")));
    }
    run_sme(red, rho0_red, rec, cfg)
}

/// The unnormalized recursion on the full model; Θ = tr(Oτ)/tr τ.
pub fn run_zakai(
    model: &QuantumModel,
    tau0: &CMatrix,
    rec: &NoiseRecord,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let f = FullModel::new(model);
    check_state(tau0, f.dim())?;
    let steps = rec.steps();
    rec.validate_for(model.p(), model.q(), steps)?;
    let mut traj = Trajectory::with_capacity(model.r(), steps);
    let mut states = cfg.store_states.then(Vec::new);
    let mut tau = tau0.clone();
    let (mut dy, mut dn) = (vec![0.0; model.p()], vec![0u8; model.q()]);
    let push = |traj: &mut Trajectory, t: f64, tau: &CMatrix| {
        let tr = re_trace(tau);
        let theta: Vec<f64> = model.o.iter().map(|o| expectation(o, tau) / tr).collect();
        record_point(traj, t, &theta, tr);
    };
    push(&mut traj, 0.0, &tau);
    if let Some(s) = states.as_mut() {
        s.push(tau.clone());
    }
    for k in 0..steps {
        rec.increments(k, &mut dy, &mut dn);
        tau = zakai_step(&f, &tau, &dy, &dn, rec.dt);
        push(&mut traj, (k + 1) as f64 * rec.dt, &tau);
        if let Some(s) = states.as_mut() {
            s.push(tau.clone());
        }
    }
    traj.states = states;
    traj.min_eigenvalue = f64::NAN;
    Ok(traj)
}

/// v += Qv dt + Σ Gⱼv dYʲ + Σ (Kₖ − 1)v dNᵏ; Θʲ = ⟨ζⱼ, v⟩ / ⟨e, v⟩.
pub fn run_linear_filter(
    lin: &LinearFilter,
    v0: &CVector,
    rec: &NoiseRecord,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if v0.len() != lin.kappa {
        return Err(Error::Dimension(format!(
            "initial vector has length {}, filter dimension {}",
            v0.len(),
            lin.kappa
        )));
    }
    let steps = rec.steps();
    rec.validate_for(lin.g.len(), lin.k.len(), steps)?;
    let mut traj = Trajectory::with_capacity(lin.zeta.len(), steps);
    let mut vectors = cfg.store_states.then(Vec::new);
    let mut v = v0.clone();
    let push = |traj: &mut Trajectory, t: f64, v: &CVector, step: usize| -> Result<()> {
        let norm: C64 = lin.e_vec.dotc(v);
        if norm.norm() < DEGENERACY_TOL {
            return Err(Error::Degeneracy {
                step,
                value: norm.re,
            });
        }
        let theta: Vec<f64> = lin.zeta.iter().map(|z| (z.dotc(v) / norm).re).collect();
        record_point(traj, t, &theta, norm.re);
        Ok(())
    };
    push(&mut traj, 0.0, &v, 0)?;
    if let Some(s) = vectors.as_mut() {
        s.push(v.clone());
    }
    for k in 0..steps {
        let mut next = &v + (&lin.q * &v).scale(rec.dt);
        for (g, ch) in lin.g.iter().zip(&rec.dy) {
            next += (g * &v).scale(ch[k]);
        }
        for (kk, ch) in lin.k.iter().zip(&rec.dn) {
            if ch[k] == 1 {
                next += kk * &v - &v;
            }
        }
        v = next;
        push(&mut traj, (k + 1) as f64 * rec.dt, &v, k + 1)?;
        if let Some(s) = vectors.as_mut() {
            s.push(v.clone());
        }
    }
    traj.vectors = vectors;
    traj.min_eigenvalue = f64::NAN;
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub times: Vec<f64>,
    pub mean_trace: Vec<f64>,
    pub stderr: Vec<f64>,
    pub paths: usize,
}

/// RNG of path `index` in an ensemble seeded by `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// M independent unnormalized runs under the reference measure; sample mean
/// and standard error of tr τ on the grid.
pub fn reference_measure_batch(
    model: &QuantumModel,
    rho0: &DensityState,
    cfg: &SimConfig,
    paths: usize,
) -> Result<BatchStats> {
    cfg.validate()?;
    if paths < 2 {
        return Err(Error::Config(format!("need at least 2 paths, got {paths}")));
    }
    let f = FullModel::new(model);
    check_state(&rho0.rho, model.n)?;
    let steps = cfg.steps();
    let traces: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|index| {
            let mut rng = path_rng(cfg.seed, index as u64);
            let (mut dy, mut dn) = (vec![0.0; model.p()], vec![0u8; model.q()]);
            let mut tau = rho0.rho.clone();
            let mut out = Vec::with_capacity(steps + 1);
            out.push(re_trace(&tau));
            let mut warned = true;
            for _ in 0..steps {
                draw_increments(&f, &tau, cfg.dt, Measure::Reference, &mut rng, &mut dy, &mut dn, &mut warned);
                tau = zakai_step(&f, &tau, &dy, &dn, cfg.dt);
                out.push(re_trace(&tau));
            }
            out
        })
        .collect();
    let m = paths as f64;
    let mut mean_trace = Vec::with_capacity(steps + 1);
    let mut stderr = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let mean = traces.iter().map(|t| t[k]).sum::<f64>() / m;
        let var = traces.iter().map(|t| (t[k] - mean).powi(2)).sum::<f64>() / (m - 1.0);
        mean_trace.push(mean);
        stderr.push((var / m).sqrt());
    }
    Ok(BatchStats {
        times: grid(cfg.dt, steps),
        mean_trace,
        stderr,
        paths,
    })
}

/// CSV with header `t,theta_1..theta_r,trace[,y_1..y_p,n_1..n_q]`; record
/// columns hold the increments of the step ending at t (empty at t = 0).
pub fn write_csv<W: std::io::Write>(
    out: &mut W,
    traj: &Trajectory,
    rec: Option<&NoiseRecord>,
) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.theta.len()).map(|j| format!("theta_{j}")));
    header.push("trace".into());
    if let Some(rec) = rec {
        header.extend((1..=rec.dy.len()).map(|j| format!("y_{j}")));
        header.extend((1..=rec.dn.len()).map(|j| format!("n_{j}")));
    }
    writeln!(out, "{}", header.join(","))?;
    for (k, t) in traj.times.iter().enumerate() {
        let mut row = vec![fmt17(*t)];
        row.extend(traj.theta.iter().map(|th| fmt17(th[k])));
        row.push(fmt17(traj.norm_trace[k]));
        if let Some(rec) = rec {
            for ch in &rec.dy {
                row.push(if k == 0 { String::new() } else { fmt17(ch[k - 1]) });
            }
            for ch in &rec.dn {
                row.push(if k == 0 { String::new() } else { ch[k - 1].to_string() });
            }
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// 17 significant digits, enough to round-trip an f64.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{pauli_x, pauli_z, projector, r, sigma_minus, zeros};

    fn qubit(h: CMatrix, d: Vec<CMatrix>, c: Vec<CMatrix>) -> QuantumModel {
        QuantumModel::new(h, vec![], d, c, vec![eye(2), pauli_x(), pauli_z()]).unwrap()
    }

    fn plus() -> DensityState {
        DensityState::new(CMatrix::from_element(2, 2, r(0.5)), true).unwrap()
    }

    #[test]
    fn no_dynamics_keeps_state() {
        let m = qubit(zeros(2), vec![], vec![]);
        let cfg = SimConfig::new(0.1, 0.01, 1, Scheme::Euler);
        let (traj, rec) = generate_truth(&m, &plus(), &cfg).unwrap();
        assert!(rec.dy.is_empty() && rec.dn.is_empty());
        assert!(traj.theta[1].iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn eigenstate_is_fixed_under_z_measurement() {
        let gamma = 0.7;
        let m = qubit(zeros(2), vec![pauli_z().scale(gamma)], vec![]);
        let rho0 = DensityState::new(projector(2, 0), true).unwrap();
        for scheme in [Scheme::Euler, Scheme::PositivityPreserving] {
            let cfg = SimConfig::new(0.05, 0.001, 3, scheme);
            let (traj, rec) = generate_truth(&m, &rho0, &cfg).unwrap();
            assert!(traj.theta[2].iter().all(|&v| (v - 1.0).abs() < 1e-12));
            // dY − 2γ dt is the Brownian increment drawn with the same stream.
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let normal = Normal::new(0.0, cfg.dt.sqrt()).unwrap();
            for &y in &rec.dy[0] {
                let dw: f64 = normal.sample(&mut rng);
                assert!((y - 2.0 * gamma * cfg.dt - dw).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn jump_from_excited_state() {
        let m = qubit(zeros(2), vec![], vec![sigma_minus()]);
        let rho0 = projector(2, 0);
        for scheme in [Scheme::Euler, Scheme::PositivityPreserving] {
            let next = sme_step(&FullModel::new(&m), &rho0, &[], &[1], 1e-3, scheme, 0).unwrap();
            assert!((next - projector(2, 1)).norm() < 1e-12);
        }
    }

    #[test]
    fn jump_with_zero_intensity_is_an_error() {
        let m = qubit(zeros(2), vec![], vec![sigma_minus()]);
        let err = sme_step(&FullModel::new(&m), &projector(2, 1), &[], &[1], 1e-3, Scheme::Euler, 4);
        assert!(matches!(err, Err(Error::Integration { step: 4, .. })));
    }

    #[test]
    fn free_rotation_matches_closed_form() {
        let m = qubit(pauli_z(), vec![], vec![]);
        let cfg = SimConfig::new(1.0, 1e-4, 0, Scheme::PositivityPreserving);
        let (truth, rec) = generate_truth(&m, &plus(), &cfg).unwrap();
        assert_eq!(rec.steps(), 0);
        for (t, x) in truth.times.iter().zip(&truth.theta[1]) {
            assert!((x - (2.0 * t).cos()).abs() < 1e-3);
        }
    }

    #[test]
    fn filter_replays_truth() {
        let m = qubit(pauli_x(), vec![pauli_z().scale(0.5)], vec![sigma_minus()]);
        for scheme in [Scheme::Euler, Scheme::PositivityPreserving] {
            let cfg = SimConfig::new(1.0, 1e-3, 11, scheme);
            let (truth, rec) = generate_truth(&m, &plus(), &cfg).unwrap();
            let replay = run_filter(&m, &plus(), &rec, &cfg).unwrap();
            assert_eq!(truth.theta, replay.theta);
        }
    }

    #[test]
    fn unnormalized_recursion_without_channels_keeps_trace() {
        let m = qubit(pauli_x(), vec![], vec![]);
        let cfg = SimConfig::new(0.5, 0.01, 0, Scheme::Euler);
        let stats = reference_measure_batch(&m, &plus(), &cfg, 4).unwrap();
        assert!(stats.mean_trace.iter().all(|&v| (v - 1.0).abs() < 1e-13));
        assert!(matches!(reference_measure_batch(&m, &plus(), &cfg, 1), Err(Error::Config(_))));
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(1.0, 0.0, 0, Scheme::Euler).validate().is_err());
        assert!(SimConfig::new(0.001, 0.01, 0, Scheme::Euler).validate().is_err());
        assert_eq!(SimConfig::new(5.0, 1e-3, 0, Scheme::Euler).steps(), 5000);
    }

    #[test]
    fn csv_layout() {
        let m = qubit(zeros(2), vec![pauli_z()], vec![]);
        let cfg = SimConfig::new(0.002, 0.001, 0, Scheme::Euler);
        let (traj, rec) = generate_truth(&m, &plus(), &cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &traj, Some(&rec)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,theta_1,theta_2,theta_3,trace,y_1");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].ends_with(','));
        let first: f64 = lines[2].split(',').nth(5).unwrap().parse().unwrap();
        assert_eq!(first, rec.dy[0][0]);
    }
}
