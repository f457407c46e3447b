//! Example model families: block-diagonal (QND-type) measurements and the
//! measured Ising chain with its analytic change of basis.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::algebra::WedderburnData;
use crate::error::{Error, Result};
use crate::linops::{
    CMatrix, QuantumModel, embed_site, eye, kron, pauli_x, pauli_z, projector, r, sigma_minus,
    zeros,
};

/// Block-diagonal model on ℋ = ⊕ₖ ℋₖ. Scalar channel strengths give
/// Dⱼ = ⊕ₖ d_{j,k}1ₖ and Cⱼ = ⊕ₖ c_{j,k}1ₖ; explicit block operators take
/// precedence over the scalars of the same channel.
#[derive(Clone, Debug, Default)]
pub struct QndSpec {
    pub dims: Vec<usize>,
    pub d: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub h_blocks: Option<Vec<CMatrix>>,
    pub l_blocks: Vec<Vec<CMatrix>>,
    pub d_blocks: Vec<Vec<CMatrix>>,
    pub c_blocks: Vec<Vec<CMatrix>>,
}

fn direct_sum(dims: &[usize], parts: &[CMatrix], what: &str) -> Result<CMatrix> {
    if parts.len() != dims.len() {
        return Err(Error::Dimension(format!(
            "{what}: {} blocks for {} subspaces",
            parts.len(),
            dims.len()
        )));
    }
    let n: usize = dims.iter().sum();
    let mut out = zeros(n);
    let mut at = 0;
    for (k, (&dk, part)) in dims.iter().zip(parts).enumerate() {
        if part.shape() != (dk, dk) {
            return Err(Error::Dimension(format!(
                "{what}: block {k} is {:?}, expected {dk}x{dk}",
                part.shape()
            )));
        }
        out.view_mut((at, at), (dk, dk)).copy_from(part);
        at += dk;
    }
    Ok(out)
}

fn scalar_blocks(dims: &[usize], s: &[f64], what: &str) -> Result<Vec<CMatrix>> {
    if s.len() != dims.len() {
        return Err(Error::Dimension(format!(
            "{what}: {} scalars for {} subspaces",
            s.len(),
            dims.len()
        )));
    }
    Ok(dims.iter().zip(s).map(|(&dk, &v)| eye(dk).scale(v)).collect())
}

pub fn build_qnd(spec: &QndSpec) -> Result<QuantumModel> {
    let dims = &spec.dims;
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::Dimension("QND blocks must be non-empty".into()));
    }
    let n: usize = dims.iter().sum();
    let h = match &spec.h_blocks {
        Some(hb) => direct_sum(dims, hb, "H")?,
        None => zeros(n),
    };
    let l = spec
        .l_blocks
        .iter()
        .map(|b| direct_sum(dims, b, "L"))
        .collect::<Result<Vec<_>>>()?;
    let channels = |scalars: &[Vec<f64>], blocks: &[Vec<CMatrix>], what: &str| {
        (0..scalars.len().max(blocks.len()))
            .map(|j| match blocks.get(j) {
                Some(b) => direct_sum(dims, b, what),
                None => direct_sum(dims, &scalar_blocks(dims, &scalars[j], what)?, what),
            })
            .collect::<Result<Vec<_>>>()
    };
    let d = channels(&spec.d, &spec.d_blocks, "D")?;
    let c = channels(&spec.c, &spec.c_blocks, "C")?;
    let mut o = Vec::with_capacity(dims.len());
    let mut at = 0;
    for &dk in dims {
        let mut p = zeros(n);
        p.view_mut((at, at), (dk, dk)).copy_from(&eye(dk));
        o.push(p);
        at += dk;
    }
    QuantumModel::new(h, l, d, c, o)
}

/// Inhomogeneous transverse-field Ising chain with local homodyne (γⱼσ_z)
/// and counting (αⱼσ₋) channels. Sites are 0-based here; site 0 is the most
/// significant tensor factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n: usize,
    pub delta: Vec<f64>,
    pub mu: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl ChainSpec {
    pub fn uniform(n: usize, delta: f64, mu: f64, gamma: f64, alpha: f64) -> Self {
        ChainSpec {
            n,
            delta: vec![delta; n.saturating_sub(1)],
            mu: vec![mu; n],
            gamma: vec![gamma; n],
            alpha: vec![alpha; n],
        }
    }

    /// δⱼ ~ N(2, 0.2²), μⱼ ~ N(1, 0.2²), deterministic in `seed`.
    pub fn random(n: usize, gamma: f64, alpha: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(2.0, 0.2).expect("valid normal");
        let nm = Normal::new(1.0, 0.2).expect("valid normal");
        let delta = (0..n.saturating_sub(1)).map(|_| nd.sample(&mut rng)).collect();
        let mu = (0..n).map(|_| nm.sample(&mut rng)).collect();
        ChainSpec {
            n,
            delta,
            mu,
            gamma: vec![gamma; n],
            alpha: vec![alpha; n],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("spin chain needs N >= 2, got {}", self.n)));
        }
        if self.delta.len() != self.n - 1
            || self.mu.len() != self.n
            || self.gamma.len() != self.n
            || self.alpha.len() != self.n
        {
            return Err(Error::Dimension(format!(
                "chain of {} sites needs {} couplings and {} fields/strengths",
                self.n,
                self.n - 1,
                self.n
            )));
        }
        Ok(())
    }
}

/// Channels with zero strength are omitted from the model.
pub fn build_spin_chain(spec: &ChainSpec) -> Result<QuantumModel> {
    spec.validate()?;
    let nsites = spec.n;
    let dim = 1usize << nsites;
    let site = |op: &CMatrix, j: usize| embed_site(op, j, nsites);
    let mut h = zeros(dim);
    for (j, &dj) in spec.delta.iter().enumerate() {
        h += (site(&pauli_x(), j) * site(&pauli_x(), j + 1)).scale(dj);
    }
    for (j, &mj) in spec.mu.iter().enumerate() {
        h += site(&pauli_z(), j).scale(mj);
    }
    let d = spec
        .gamma
        .iter()
        .enumerate()
        .filter(|(_, g)| **g != 0.0)
        .map(|(j, &g)| site(&pauli_z(), j).scale(g))
        .collect();
    let c = spec
        .alpha
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != 0.0)
        .map(|(j, &a)| site(&sigma_minus(), j).scale(a))
        .collect();
    let o = (0..dim).map(|k| projector(dim, k)).collect();
    QuantumModel::new(h, vec![], d, c, o)
}

/// Uₙ = (P ⊗ 1)(1₂ ⊗ Uₙ₋₁), U₁ = 1₂, where P swaps |01⟩ and |11⟩.
pub fn chain_unitary(n: usize) -> CMatrix {
    let mut u = eye(2);
    let mut p = zeros(4);
    for (a, b) in [(0, 0), (1, 3), (2, 2), (3, 1)] {
        p[(a, b)] = r(1.0);
    }
    for k in 2..=n.max(1) {
        u = kron(&p, &eye(1 << (k - 2))) * kron(&eye(2), &u);
    }
    u
}

/// Decomposition of alg({σ_z⁽ʲ⁾} ∪ {σ_x⁽ʲ⁾σ_x⁽ʲ⁺¹⁾}) ≅ B(ℂ^{2^{N−1}}) ⊕ B(ℂ^{2^{N−1}}),
/// without any numerical factorization.
pub fn chain_wedderburn(n: usize) -> Result<WedderburnData> {
    if n < 2 {
        return Err(Error::Config(format!("spin chain needs N >= 2, got {n}")));
    }
    let half = 1 << (n - 1);
    WedderburnData::new(chain_unitary(n).adjoint(), vec![(half, 1), (half, 1)])
}

/// Generators of the chain algebra.
pub fn chain_algebra_generators(n: usize) -> Vec<CMatrix> {
    let mut out: Vec<CMatrix> = (0..n).map(|j| embed_site(&pauli_z(), j, n)).collect();
    for j in 0..n.saturating_sub(1) {
        out.push(embed_site(&pauli_x(), j, n) * embed_site(&pauli_x(), j + 1, n));
    }
    out
}

/// The two diagonal blocks of Uₙ H Uₙ*, written on N − 1 qubits:
/// Σⱼ δⱼ σ_x⁽ʲ⁾ ± μ₀ σ_z⁽⁰⁾ + Σ_{0<j<N−1} μⱼ σ_z⁽ʲ⁻¹⁾σ_z⁽ʲ⁾ + μ_{N−1} σ_z⁽ᴺ⁻²⁾
/// (sites 0-based on the reduced chain, with σ_x⁽ʲ⁾ acting on reduced site j for
/// the coupling between original sites j and j+1).
pub fn chain_reduced_hamiltonian(spec: &ChainSpec) -> Result<(CMatrix, CMatrix)> {
    spec.validate()?;
    let m = spec.n - 1;
    let site = |op: &CMatrix, j: usize| embed_site(op, j, m);
    let mut common = zeros(1 << m);
    for (j, &dj) in spec.delta.iter().enumerate() {
        common += site(&pauli_x(), j).scale(dj);
    }
    for j in 1..spec.n - 1 {
        common += (site(&pauli_z(), j - 1) * site(&pauli_z(), j)).scale(spec.mu[j]);
    }
    common += site(&pauli_z(), m - 1).scale(spec.mu[spec.n - 1]);
    let first = site(&pauli_z(), 0).scale(spec.mu[0]);
    Ok((&common + &first, &common - &first))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::hs_norm;

    #[test]
    fn qnd_two_level_example() {
        let spec = QndSpec {
            dims: vec![1, 1],
            d: vec![vec![1.0, -1.0]],
            ..Default::default()
        };
        let m = build_qnd(&spec).unwrap();
        assert_eq!(m.d[0], pauli_z());
        assert_eq!(m.o, vec![projector(2, 0), projector(2, 1)]);
        assert!(m.assumption_defects(1e-9).is_empty());
    }

    #[test]
    fn qnd_dimension_errors() {
        let spec = QndSpec {
            dims: vec![1, 2],
            d: vec![vec![1.0]],
            ..Default::default()
        };
        assert!(matches!(build_qnd(&spec), Err(Error::Dimension(_))));
    }

    #[test]
    fn chain_two_sites() {
        let m = build_spin_chain(&ChainSpec {
            n: 2,
            delta: vec![1.0],
            mu: vec![1.0, 1.0],
            gamma: vec![0.5, 0.5],
            alpha: vec![0.0, 0.0],
        })
        .unwrap();
        assert_eq!((m.n, m.r(), m.p(), m.q()), (4, 4, 2, 0));
        assert!(m.assumption_defects(1e-9).is_empty());
        assert!(build_spin_chain(&ChainSpec::uniform(1, 1.0, 1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn chain_unitary_conjugations() {
        let u2 = chain_unitary(2);
        let z1 = kron(&pauli_z(), &eye(2));
        assert!(hs_norm(&(&u2 * z1 * u2.adjoint() - kron(&pauli_z(), &pauli_z()))) < 1e-15);
        let xx = kron(&pauli_x(), &pauli_x());
        assert!(hs_norm(&(&u2 * xx * u2.adjoint() - kron(&eye(2), &pauli_x()))) < 1e-15);
        for n in 1..=5 {
            let u = chain_unitary(n);
            assert!(hs_norm(&(&u * u.adjoint() - eye(1 << n))) < 1e-14);
        }
    }

    #[test]
    fn chain_unitary_general_conjugations() {
        for n in 2..=4 {
            let u = chain_unitary(n);
            let conj = |x: &CMatrix| &u * x * u.adjoint();
            for j in 0..n {
                let z = embed_site(&pauli_z(), j, n);
                let target = if j + 1 < n { &z * embed_site(&pauli_z(), j + 1, n) } else { z.clone() };
                assert!(hs_norm(&(conj(&z) - target)) < 1e-13);
            }
            for j in 0..n - 1 {
                let xx = embed_site(&pauli_x(), j, n) * embed_site(&pauli_x(), j + 1, n);
                assert!(hs_norm(&(conj(&xx) - embed_site(&pauli_x(), j + 1, n))) < 1e-13);
            }
        }
    }
}
