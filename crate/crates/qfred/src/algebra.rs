//! Unital *-algebras of operators, commutants and the Wedderburn
//! decomposition 𝒜 ≅ U(⊕ₖ B(H_{F,k}) ⊗ 1_{G,k})U*.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linops::{
    C64, CMatrix, OperatorSubspace, c, eigh, eye, hermitian_part, hs_norm, kron, lift_f,
    orthonormalize_family, partial_trace_g, r,
};

/// Operator subspace closed under products and adjoints.
#[derive(Clone, Debug)]
pub struct StarAlgebra {
    pub n: usize,
    pub basis: OperatorSubspace,
    pub unital: bool,
}

impl StarAlgebra {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Smallest unital *-algebra containing the given operators.
    pub fn generated_by(ops: &[CMatrix], tol: f64) -> Result<Self> {
        generate_algebra(&orthonormalize_family(ops, tol), tol)
    }

    /// Largest deviation from closure: products and adjoints of basis
    /// elements that leave the span.
    pub fn closure_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in &self.basis.basis {
            worst = worst.max(hs_norm(&self.basis.residual(&a.adjoint())));
            for b in &self.basis.basis {
                worst = worst.max(hs_norm(&self.basis.residual(&(a * b))));
            }
        }
        worst
    }
}

/// Closes `seed` ∪ {1} under adjoints and products. Rank decisions use the
/// absolute threshold `tol` on residuals of products of unit-norm elements.
pub fn generate_algebra(seed: &OperatorSubspace, tol: f64) -> Result<StarAlgebra> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    if seed.dim() == 0 {
        return Err(Error::Config("empty seed subspace".into()));
    }
    let n = seed.n;
    let mut space = OperatorSubspace::empty(n);
    let identity = eye(n);
    space.extend_with(&identity, tol);
    for x in &seed.basis {
        space.extend_with(x, tol);
    }
    let mut start = 0;
    while start < space.dim() {
        let end = space.dim();
        for i in start..end {
            let e = space.basis[i].clone();
            space.extend_above(&e.adjoint(), tol);
            let mut j = 0;
            while j < space.dim() {
                let f = space.basis[j].clone();
                space.extend_above(&(&e * &f), tol);
                space.extend_above(&(&f * &e), tol);
                j += 1;
            }
        }
        start = end;
    }
    Ok(StarAlgebra {
        n,
        basis: space,
        unital: true,
    })
}

fn null_space_of_gram(gram: &CMatrix, tol: f64) -> Vec<nalgebra::DVector<C64>> {
    let (vals, vecs) = eigh(gram);
    let top = vals.iter().copied().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    vals.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() <= tol * top)
        .map(|(k, _)| vecs.column(k).into_owned())
        .collect()
}

/// {X : XB = BX for all B ∈ A}, as the null space of the stacked
/// commutator maps (Gram form, column-major vectorization).
pub fn commutant(a: &StarAlgebra) -> StarAlgebra {
    let n = a.n;
    let nn = n * n;
    let mut gram = CMatrix::zeros(nn, nn);
    let mut left = CMatrix::zeros(n, n);
    let mut right = CMatrix::zeros(n, n);
    for b in &a.basis.basis {
        // vec(XB − BX) = (Bᵀ ⊗ I − I ⊗ B) vec(X).
        left += (b * b.adjoint()).conjugate();
        right += b.adjoint() * b;
        gram -= kron(&b.conjugate(), b);
        gram -= kron(&b.transpose(), &b.adjoint());
    }
    gram += kron(&left, &eye(n)) + kron(&eye(n), &right);
    let vecs = null_space_of_gram(&gram, 1e-10);
    let mats: Vec<CMatrix> = vecs
        .iter()
        .map(|v| CMatrix::from_column_slice(n, n, v.as_slice()))
        .collect();
    StarAlgebra {
        n,
        basis: orthonormalize_family(&mats, 1e-9),
        unital: true,
    }
}

/// Z = A ∩ A′.
pub fn center(a: &StarAlgebra, comm: &StarAlgebra) -> OperatorSubspace {
    let outside: Vec<CMatrix> = a.basis.basis.iter().map(|b| comm.basis.residual(b)).collect();
    let d = outside.len();
    let gram = CMatrix::from_fn(d, d, |i, j| outside[i].dotc(&outside[j]));
    let coeffs = null_space_of_gram(&gram, 1e-10);
    let mats: Vec<CMatrix> = coeffs.iter().map(|v| a.basis.combine(v.as_slice())).collect();
    let mut z = orthonormalize_family(&mats, 1e-9);
    if z.dim() == 0 {
        z = OperatorSubspace::empty(a.n);
    }
    z
}

/// Unitary U and blocks (d_F, d_G) with U*BU = ⊕ₖ Xₖ ⊗ 1_{G,k} for B ∈ 𝒜.
#[derive(Clone, Debug, PartialEq)]
pub struct WedderburnData {
    pub u: CMatrix,
    pub blocks: Vec<(usize, usize)>,
    pub offsets: Vec<usize>,
}

impl WedderburnData {
    pub fn new(u: CMatrix, blocks: Vec<(usize, usize)>) -> Result<Self> {
        let total: usize = blocks.iter().map(|(f, g)| f * g).sum();
        if total != u.nrows() || !u.is_square() {
            return Err(Error::Dimension(format!(
                "blocks cover {total} of dimension {}",
                u.nrows()
            )));
        }
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut at = 0;
        for (f, g) in &blocks {
            offsets.push(at);
            at += f * g;
        }
        Ok(WedderburnData { u, blocks, offsets })
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    /// Σₖ d_{F,k}.
    pub fn reduced_dim(&self) -> usize {
        self.blocks.iter().map(|(f, _)| f).sum()
    }

    /// Σₖ d_{F,k}², the algebra dimension.
    pub fn algebra_dim(&self) -> usize {
        self.blocks.iter().map(|(f, _)| f * f).sum()
    }

    pub fn unitarity_defect(&self) -> f64 {
        hs_norm(&(&self.u * self.u.adjoint() - eye(self.n())))
    }

    /// Distance of U*XU to the nearest ⊕ₖ Xₖ ⊗ 1_{G,k}.
    pub fn block_defect(&self, x: &CMatrix) -> f64 {
        let y = self.u.adjoint() * x * &self.u;
        let mut nearest = CMatrix::zeros(self.n(), self.n());
        for (&(df, dg), &off) in self.blocks.iter().zip(&self.offsets) {
            let s = df * dg;
            let block = y.view((off, off), (s, s)).into_owned();
            let xf = partial_trace_g(&block, df, dg).unscale(dg as f64);
            nearest.view_mut((off, off), (s, s)).copy_from(&lift_f(&xf, dg));
        }
        hs_norm(&(y - nearest))
    }
}

/// Maximum block-form defect over the (unit-norm) basis of `a`.
pub fn verify_block_form(a: &StarAlgebra, w: &WedderburnData) -> f64 {
    a.basis
        .basis
        .iter()
        .map(|b| w.block_defect(b))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct WedderburnConfig {
    pub rank_tol: f64,
    /// Eigenvalue gaps below `cluster_tol·spread` merge clusters.
    pub cluster_tol: f64,
    pub verify_tol: f64,
    pub max_attempts: usize,
}

impl Default for WedderburnConfig {
    fn default() -> Self {
        WedderburnConfig {
            rank_tol: 1e-9,
            cluster_tol: 1e-6,
            verify_tol: 1e-8,
            max_attempts: 10,
        }
    }
}

pub fn wedderburn_decompose(a: &StarAlgebra, tol: f64, rng_seed: u64) -> Result<WedderburnData> {
    let cfg = WedderburnConfig {
        rank_tol: tol,
        ..WedderburnConfig::default()
    };
    wedderburn_decompose_with(a, &cfg, rng_seed)
}

/// Eigenvalue clusters of a Hermitian matrix as column index ranges.
fn clusters(vals: &[f64], rel_tol: f64) -> Vec<std::ops::Range<usize>> {
    let spread = vals.last().unwrap() - vals.first().unwrap();
    let scale = spread.max(vals.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..vals.len() {
        if vals[i] - vals[i - 1] > rel_tol * scale {
            out.push(start..i);
            start = i;
        }
    }
    out.push(start..vals.len());
    out
}

fn random_combination(ops: &[CMatrix], complex: bool, rng: &mut ChaCha8Rng) -> CMatrix {
    let n = ops[0].nrows();
    let mut out = CMatrix::zeros(n, n);
    for op in ops {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = if complex { StandardNormal.sample(rng) } else { 0.0 };
        out += op * c(re, im);
    }
    out
}

fn columns(m: &CMatrix, range: std::ops::Range<usize>) -> CMatrix {
    m.columns(range.start, range.len()).into_owned()
}

struct Block {
    df: usize,
    dg: usize,
    reference: f64,
    cols: CMatrix,
}

pub fn wedderburn_decompose_with(
    a: &StarAlgebra,
    cfg: &WedderburnConfig,
    rng_seed: u64,
) -> Result<WedderburnData> {
    let comm = commutant(a);
    let z = center(a, &comm);
    let mut last = f64::INFINITY;
    let mut reason = String::from("no attempt made");
    for attempt in 0..cfg.max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed.wrapping_add(attempt as u64));
        match decompose_once(a, &comm, &z, cfg, &mut rng) {
            Ok(w) => {
                let residual = verify_block_form(a, &w).max(w.unitarity_defect());
                if residual <= cfg.verify_tol {
                    return Ok(w);
                }
                last = residual;
                reason = "block form verification failed".into();
            }
            Err(why) => reason = why,
        }
        log::debug!("Wedderburn attempt {attempt} rejected: {reason}");
    }
    Err(Error::Decomposition {
        reason,
        residual: last,
    })
}

fn decompose_once(
    a: &StarAlgebra,
    comm: &StarAlgebra,
    z: &OperatorSubspace,
    cfg: &WedderburnConfig,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<WedderburnData, String> {
    let n = a.n;
    let zc = hermitian_part(&random_combination(&z.basis, false, rng));
    let (zvals, zvecs) = eigh(&zc);
    let central = clusters(&zvals, cfg.cluster_tol);
    if central.len() != z.dim() {
        return Err(format!(
            "{} eigenvalue clusters for a {}-dimensional center",
            central.len(),
            z.dim()
        ));
    }
    let mut blocks = Vec::new();
    for range in central {
        let y = columns(&zvecs, range);
        let s = y.ncols();
        let restrict = |x: &CMatrix| y.adjoint() * x * &y;
        let local: Vec<CMatrix> = a.basis.basis.iter().map(restrict).collect();
        let local_comm: Vec<CMatrix> = comm.basis.basis.iter().map(restrict).collect();
        let local_dim = orthonormalize_family(&local, cfg.rank_tol).dim();
        let df = (local_dim as f64).sqrt().round() as usize;
        if df * df != local_dim || df == 0 || s % df != 0 {
            return Err(format!("block of size {s} carries a {local_dim}-dimensional algebra"));
        }
        let dg = s / df;

        let ah = hermitian_part(&random_combination(&local, false, rng));
        let (avals, avecs) = eigh(&ah);
        let labels = clusters(&avals, cfg.cluster_tol);
        if labels.len() != df || labels.iter().any(|r| r.len() != dg) {
            return Err("generic algebra element has degenerate spectrum".into());
        }
        // μ-basis of the first spectral subspace from a generic commutant element.
        let x1 = columns(&avecs, labels[0].clone());
        let ch = hermitian_part(&random_combination(&local_comm, false, rng));
        let (_, w) = eigh(&(x1.adjoint() * &ch * &x1));
        let first = &x1 * w;
        let g = random_combination(&local, true, rng);
        let mut local_cols = CMatrix::zeros(s, s);
        local_cols.columns_mut(0, dg).copy_from(&first);
        for (i, range) in labels.iter().enumerate().skip(1) {
            let xi = columns(&avecs, range.clone());
            let mapped = &xi * (xi.adjoint() * &g * &first);
            for mu in 0..dg {
                let col = mapped.column(mu);
                let norm = col.norm();
                if norm < 1e-8 {
                    return Err("intertwiner vanishes on a spectral subspace".into());
                }
                local_cols.set_column(i * dg + mu, &col.unscale(norm));
            }
        }
        let cols = &y * local_cols;
        let reference = (0..n)
            .map(|i| i as f64 * y.row(i).norm_squared())
            .sum::<f64>();
        blocks.push(Block {
            df,
            dg,
            reference,
            cols,
        });
    }
    blocks.sort_by(|p, q| {
        q.df.cmp(&p.df)
            .then(q.dg.cmp(&p.dg))
            .then(p.reference.total_cmp(&q.reference))
    });
    let mut u = CMatrix::zeros(n, n);
    let mut at = 0;
    for b in &blocks {
        let s = b.cols.ncols();
        u.columns_mut(at, s).copy_from(&b.cols);
        at += s;
    }
    if at != n {
        return Err(format!("blocks cover {at} of dimension {n}"));
    }
    // Re-orthonormalize against roundoff (columns are orthonormal up to it).
    let qr = u.clone().qr();
    let q = qr.q();
    let rr = qr.r();
    let mut fixed = q;
    for k in 0..n {
        let d = rr[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { r(1.0) };
        for i in 0..n {
            fixed[(i, k)] *= phase;
        }
    }
    WedderburnData::new(fixed, blocks.iter().map(|b| (b.df, b.dg)).collect())
        .map_err(|e| e.to_string())
}
