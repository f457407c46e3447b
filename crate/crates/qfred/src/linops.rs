//! Dense complex matrices, Hilbert–Schmidt geometry, the model superoperators
//! and fidelity.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Default relative rank tolerance for span computations.
pub const RANK_TOL: f64 = 1e-9;
/// Eigenvalues above `-PSD_TOL` count as nonnegative.
pub const PSD_TOL: f64 = 1e-9;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn eye(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(n: usize) -> CMatrix {
    CMatrix::zeros(n, n)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// σ₋ = |1⟩⟨0|, so that σ₋*σ₋ = |0⟩⟨0|.
pub fn sigma_minus() -> CMatrix {
    ket_bra(2, 1, 0)
}

/// |i⟩⟨j| in dimension n.
pub fn ket_bra(n: usize, i: usize, j: usize) -> CMatrix {
    let mut m = zeros(n);
    m[(i, j)] = ONE;
    m
}

pub fn projector(n: usize, k: usize) -> CMatrix {
    ket_bra(n, k, k)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all(ops: &[CMatrix]) -> CMatrix {
    ops.iter()
        .skip(1)
        .fold(ops[0].clone(), |acc, op| acc.kronecker(op))
}

/// `op` acting on qubit `site` (0-based, most significant first) of `nsites` qubits.
pub fn embed_site(op: &CMatrix, site: usize, nsites: usize) -> CMatrix {
    let left = eye(1 << site);
    let right = eye(1 << (nsites - site - 1));
    kron(&kron(&left, op), &right)
}

pub fn dagger(x: &CMatrix) -> CMatrix {
    x.adjoint()
}

pub fn trace(x: &CMatrix) -> C64 {
    x.trace()
}

/// ⟨A, B⟩ = tr(A*B).
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Result<C64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "hs_inner of {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.dotc(b))
}

pub fn hs_norm(a: &CMatrix) -> f64 {
    a.norm()
}

pub fn hermitian_part(x: &CMatrix) -> CMatrix {
    (x + x.adjoint()).scale(0.5)
}

pub fn is_hermitian(x: &CMatrix, tol: f64) -> bool {
    x.is_square() && (x - x.adjoint()).norm() <= tol * hs_norm(x).max(1.0)
}

/// Eigen-decomposition of the Hermitian part of `x`, eigenvalues ascending.
pub fn eigh(x: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = x.nrows();
    let eig = hermitian_part(x).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(k));
    }
    (vals, vecs)
}

pub fn min_eigenvalue(x: &CMatrix) -> f64 {
    hermitian_part(x)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Square root of the Hermitian part of `x` with eigenvalues clipped at zero.
pub fn psd_sqrt(x: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh(x);
    let n = x.nrows();
    let mut scaled = vecs.clone();
    for (k, v) in vals.iter().enumerate() {
        let s = v.max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, k)] *= s;
        }
    }
    &scaled * vecs.adjoint()
}

/// tr_G of a matrix on H_F ⊗ H_G (G index fastest).
pub fn partial_trace_g(x: &CMatrix, df: usize, dg: usize) -> CMatrix {
    let mut out = zeros(df);
    for a in 0..df {
        for b in 0..df {
            let mut s = ZERO;
            for mu in 0..dg {
                s += x[(a * dg + mu, b * dg + mu)];
            }
            out[(a, b)] = s;
        }
    }
    out
}

/// X ⊗ 1_G.
pub fn lift_f(x: &CMatrix, dg: usize) -> CMatrix {
    if dg == 1 {
        x.clone()
    } else {
        kron(x, &eye(dg))
    }
}

/// Entries with independent real and imaginary parts drawn from N(0, 1/2).
pub fn random_complex_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(s * re, s * im)
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    hermitian_part(&random_complex_matrix(n, n, rng))
}

/// Ginibre-distributed full-rank density matrix GG*/tr(GG*).
pub fn random_density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = random_complex_matrix(n, n, rng);
    let rho = &g * g.adjoint();
    let t = rho.trace().re;
    hermitian_part(&rho.unscale(t))
}

pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let qr = random_complex_matrix(n, n, rng).qr();
    let (q, rr) = (qr.q(), qr.r());
    let mut u = q;
    for k in 0..n {
        let d = rr[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..n {
            u[(i, k)] *= phase;
        }
    }
    u
}

/// Continuous-time measured quantum system: Hamiltonian, Lindblad noise,
/// homodyne (diffusive) and counting channels, and tracked observables.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumModel {
    pub n: usize,
    pub h: CMatrix,
    pub l: Vec<CMatrix>,
    pub d: Vec<CMatrix>,
    pub c: Vec<CMatrix>,
    pub o: Vec<CMatrix>,
}

impl QuantumModel {
    pub fn new(
        h: CMatrix,
        l: Vec<CMatrix>,
        d: Vec<CMatrix>,
        c: Vec<CMatrix>,
        o: Vec<CMatrix>,
    ) -> Result<Self> {
        let model = QuantumModel {
            n: h.nrows(),
            h,
            l,
            d,
            c,
            o,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let groups = [
            ("H", std::slice::from_ref(&self.h)),
            ("L", &self.l[..]),
            ("D", &self.d[..]),
            ("C", &self.c[..]),
            ("O", &self.o[..]),
        ];
        for (name, ops) in groups {
            for (j, op) in ops.iter().enumerate() {
                if op.shape() != (n, n) {
                    return Err(Error::Dimension(format!(
                        "{name}[{j}] is {:?}, expected {n}x{n}",
                        op.shape()
                    )));
                }
            }
        }
        if !is_hermitian(&self.h, 1e-10) {
            return Err(Error::Config("H is not Hermitian".into()));
        }
        Ok(())
    }

    /// Operators required in span{O} (1, Dⱼ+Dⱼ*, Cⱼ*Cⱼ) that are missing from it.
    pub fn assumption_defects(&self, tol: f64) -> Vec<(String, CMatrix)> {
        let span = orthonormalize_family(&self.o, tol);
        let mut required = vec![("identity".to_string(), eye(self.n))];
        for (j, d) in self.d.iter().enumerate() {
            required.push((format!("D[{j}] + D[{j}]*"), d + d.adjoint()));
        }
        for (j, cj) in self.c.iter().enumerate() {
            required.push((format!("C[{j}]* C[{j}]"), cj.adjoint() * cj));
        }
        required
            .into_iter()
            .filter(|(_, x)| !span.contains_with(x, tol, self.n))
            .collect()
    }

    pub fn p(&self) -> usize {
        self.d.len()
    }

    pub fn q(&self) -> usize {
        self.c.len()
    }

    pub fn r(&self) -> usize {
        self.o.len()
    }
}

/// Named superoperators of a model.
#[derive(Clone, Debug)]
pub enum Superop {
    Lindblad,
    /// ℒ + q·ℐ − Σⱼ K_Cⱼ, the drift of the unnormalized (Zakai) equation.
    GeneratorQ,
    GD(usize),
    KC(usize),
    /// Lindblad dissipator of an arbitrary operator.
    DOf(CMatrix),
}

/// G_D(X) = DX + XD*; adjoint D*X + XD.
pub fn g_d(d: &CMatrix, x: &CMatrix, adjoint: bool) -> CMatrix {
    if adjoint {
        d.adjoint() * x + x * d
    } else {
        d * x + x * d.adjoint()
    }
}

/// K_C(X) = CXC*; adjoint C*XC.
pub fn k_c(cop: &CMatrix, x: &CMatrix, adjoint: bool) -> CMatrix {
    if adjoint {
        cop.adjoint() * x * cop
    } else {
        cop * x * cop.adjoint()
    }
}

/// D_A(X) = AXA* − ½{A*A, X}; adjoint A*XA − ½{A*A, X}.
pub fn dissipator(a: &CMatrix, x: &CMatrix, adjoint: bool) -> CMatrix {
    let ada = a.adjoint() * a;
    k_c(a, x, adjoint) - (&ada * x + x * &ada).scale(0.5)
}

pub fn lindbladian(model: &QuantumModel, x: &CMatrix, adjoint: bool) -> CMatrix {
    let comm = &model.h * x - x * &model.h;
    let mut out = if adjoint { comm * I } else { comm * (-I) };
    for a in model.l.iter().chain(&model.d).chain(&model.c) {
        out += dissipator(a, x, adjoint);
    }
    out
}

pub fn apply_superop(
    model: &QuantumModel,
    kind: &Superop,
    adjoint: bool,
    x: &CMatrix,
) -> Result<CMatrix> {
    if x.shape() != (model.n, model.n) {
        return Err(Error::Dimension(format!(
            "operand is {:?}, model dimension {}",
            x.shape(),
            model.n
        )));
    }
    let channel = |ops: &[CMatrix], j: usize, name: &str| -> Result<CMatrix> {
        ops.get(j)
            .cloned()
            .ok_or_else(|| Error::InvalidIndex(format!("{name} channel {j} of {}", ops.len())))
    };
    Ok(match kind {
        Superop::Lindblad => lindbladian(model, x, adjoint),
        Superop::GeneratorQ => {
            let mut out = lindbladian(model, x, adjoint) + x.scale(model.q() as f64);
            for cj in &model.c {
                out -= k_c(cj, x, adjoint);
            }
            out
        }
        Superop::GD(j) => g_d(&channel(&model.d, *j, "homodyne")?, x, adjoint),
        Superop::KC(j) => k_c(&channel(&model.c, *j, "counting")?, x, adjoint),
        Superop::DOf(a) => {
            if a.shape() != x.shape() {
                return Err(Error::Dimension("dissipator operator shape".into()));
            }
            dissipator(a, x, adjoint)
        }
    })
}

/// HS-orthonormal basis of an operator subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSubspace {
    pub n: usize,
    pub basis: Vec<CMatrix>,
}

impl OperatorSubspace {
    pub fn empty(n: usize) -> Self {
        OperatorSubspace { n, basis: vec![] }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// R(X)ₖ = ⟨Eₖ, X⟩.
    pub fn coords(&self, x: &CMatrix) -> Vec<C64> {
        self.basis.iter().map(|e| e.dotc(x)).collect()
    }

    /// J(v) = Σ vₖ Eₖ.
    pub fn combine(&self, v: &[C64]) -> CMatrix {
        let mut out = zeros(self.n);
        for (e, &vk) in self.basis.iter().zip(v) {
            out += e * vk;
        }
        out
    }

    pub fn project(&self, x: &CMatrix) -> CMatrix {
        self.combine(&self.coords(x))
    }

    pub fn residual(&self, x: &CMatrix) -> CMatrix {
        x - self.project(x)
    }

    /// True if ‖X − Π(X)‖ ≤ tol·max(1, ‖X‖).
    pub fn contains(&self, x: &CMatrix, tol: f64) -> bool {
        self.contains_with(x, tol, self.n)
    }

    fn contains_with(&self, x: &CMatrix, tol: f64, n: usize) -> bool {
        if self.basis.is_empty() {
            return x.shape() == (n, n) && hs_norm(x) <= tol;
        }
        hs_norm(&self.residual(x)) <= tol * hs_norm(x).max(1.0)
    }

    /// Appends the normalized residual of `x` (two Gram–Schmidt passes) when its
    /// norm exceeds `tol·‖x‖`. Returns whether the dimension grew.
    pub fn extend_with(&mut self, x: &CMatrix, tol: f64) -> bool {
        self.extend_above(x, tol * hs_norm(x))
    }

    /// Like [`extend_with`](Self::extend_with) with an absolute residual threshold.
    pub fn extend_above(&mut self, x: &CMatrix, threshold: f64) -> bool {
        let norm = hs_norm(x);
        if norm == 0.0 || !norm.is_finite() {
            return false;
        }
        let mut v = x.clone();
        for _ in 0..2 {
            for e in &self.basis {
                let a = e.dotc(&v);
                v -= e * a;
            }
        }
        let rnorm = hs_norm(&v);
        if rnorm <= threshold || rnorm == 0.0 {
            return false;
        }
        self.basis.push(v.unscale(rnorm));
        true
    }

    /// max |⟨Eₐ, E_b⟩ − δ_ab|.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, ea) in self.basis.iter().enumerate() {
            for (b, eb) in self.basis.iter().enumerate() {
                let target = if a == b { ONE } else { ZERO };
                worst = worst.max((ea.dotc(eb) - target).norm());
            }
        }
        worst
    }

    /// Whether every element of `other` lies in this span.
    pub fn contains_subspace(&self, other: &OperatorSubspace, tol: f64) -> bool {
        other.basis.iter().all(|x| self.contains(x, tol))
    }
}

/// Orthonormal basis of span(S); rank decided by singular values above
/// `tol·σ_max`.
pub fn orthonormalize_family(s: &[CMatrix], tol: f64) -> OperatorSubspace {
    let Some(first) = s.first() else {
        return OperatorSubspace::empty(0);
    };
    let n = first.nrows();
    let len = first.len();
    let stacked = CMatrix::from_fn(len, s.len(), |i, j| s[j][i]);
    let svd = stacked.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut basis = Vec::new();
    if smax > 0.0 {
        for (k, sv) in svd.singular_values.iter().enumerate() {
            if *sv > tol * smax {
                basis.push(CMatrix::from_column_slice(n, n, u.column(k).as_slice()));
            }
        }
    }
    OperatorSubspace { n, basis }
}

/// A density operator; `normalized` means trace one.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    pub rho: CMatrix,
    pub normalized: bool,
}

impl DensityState {
    pub fn new(rho: CMatrix, normalized: bool) -> Result<Self> {
        let s = DensityState { rho, normalized };
        s.validate()?;
        Ok(s)
    }

    pub fn pure(psi: &[C64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        let v = v.unscale(v.norm());
        DensityState::new(&v * v.adjoint(), true)
    }

    pub fn validate(&self) -> Result<()> {
        let rho = &self.rho;
        if !rho.is_square() {
            return Err(Error::State("density matrix is not square".into()));
        }
        if !is_hermitian(rho, PSD_TOL) {
            return Err(Error::State("density matrix is not Hermitian".into()));
        }
        let lmin = min_eigenvalue(rho);
        if lmin < -PSD_TOL {
            return Err(Error::State(format!("negative eigenvalue {lmin:.3e}")));
        }
        if self.normalized && (rho.trace().re - 1.0).abs() > PSD_TOL {
            return Err(Error::State(format!("trace {}", rho.trace().re)));
        }
        Ok(())
    }
}

/// 𝔉(ρ, σ) = tr√(√ρ σ √ρ).
pub fn fidelity(rho: &DensityState, sigma: &DensityState) -> Result<f64> {
    if rho.rho.shape() != sigma.rho.shape() {
        return Err(Error::Dimension("fidelity operands differ in shape".into()));
    }
    for s in [rho, sigma] {
        let lmin = min_eigenvalue(&s.rho);
        if lmin < -PSD_TOL {
            return Err(Error::State(format!("negative eigenvalue {lmin:.3e}")));
        }
    }
    Ok(fidelity_unchecked(&rho.rho, &sigma.rho))
}

/// Square root with eigenvalues at roundoff level (relative to the largest)
/// treated as exact zeros.
fn psd_sqrt_clipped(x: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh(x);
    let n = x.nrows();
    let top = vals.iter().fold(0.0f64, |a, &b| a.max(b));
    let floor = 8.0 * n as f64 * f64::EPSILON * top;
    let mut scaled = vecs.clone();
    for (k, &v) in vals.iter().enumerate() {
        let s = if v > floor { v.sqrt() } else { 0.0 };
        for i in 0..n {
            scaled[(i, k)] *= s;
        }
    }
    &scaled * vecs.adjoint()
}

/// Fidelity without state validation, as the trace norm of √ρ√σ. Negative
/// and roundoff-level eigenvalues are dropped before the square roots, which
/// keeps the result stable for rank-deficient states.
pub fn fidelity_unchecked(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let prod = psd_sqrt_clipped(rho) * psd_sqrt_clipped(sigma);
    let f: f64 = prod.singular_values().iter().sum();
    f.min(1.0)
}
