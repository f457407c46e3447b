#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qfred::algebra::WedderburnData;
use qfred::condexp::{CondExpFactors, build_factors};
use qfred::linops::{
    CMatrix, QuantumModel, random_complex_matrix, random_density, random_hermitian, random_unitary,
};
use qfred::models::{QndSpec, build_qnd};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generic model: one channel of each kind plus one random observable.
pub fn random_model(n: usize, seed: u64) -> QuantumModel {
    let mut g = rng(seed);
    let h = random_hermitian(n, &mut g);
    let l = random_complex_matrix(n, n, &mut g).scale(0.4);
    let d = random_complex_matrix(n, n, &mut g).scale(0.4);
    let c = random_complex_matrix(n, n, &mut g).scale(0.4);
    let o = random_hermitian(n, &mut g);
    QuantumModel::new(h, vec![l], vec![d], vec![c], vec![o]).unwrap()
}

/// Factors of a randomly rotated algebra with the given block structure.
pub fn random_factors(blocks: &[(usize, usize)], seed: u64) -> CondExpFactors {
    let n = blocks.iter().map(|&(f, g)| f * g).sum();
    let u = random_unitary(n, &mut rng(seed));
    build_factors(&WedderburnData::new(u, blocks.to_vec()).unwrap())
}

/// Random element of the reduced (block-diagonal) space.
pub fn random_reduced(f: &CondExpFactors, g: &mut ChaCha8Rng) -> CMatrix {
    f.pinch(&random_complex_matrix(f.m, f.m, g))
}

pub fn random_reduced_state(f: &CondExpFactors, g: &mut ChaCha8Rng) -> CMatrix {
    f.pinch(&random_density(f.m, g))
}

/// Random element of the algebra behind `f`.
pub fn random_algebra_element(f: &CondExpFactors, g: &mut ChaCha8Rng) -> CMatrix {
    f.j(&random_reduced(f, g)).unwrap()
}

pub fn random_algebra_hermitian(f: &CondExpFactors, g: &mut ChaCha8Rng) -> CMatrix {
    let a = random_algebra_element(f, g);
    (&a + a.adjoint()).scale(0.5)
}

/// Model compatible with the algebra of `f`: observables in 𝒜, D + D* ∈ 𝒜,
/// C*C ∈ 𝒜; H and L unrestricted.
pub fn model_for_algebra(f: &CondExpFactors, seed: u64) -> QuantumModel {
    let mut g = rng(seed);
    let n = f.n();
    let h = random_hermitian(n, &mut g);
    let l = random_complex_matrix(n, n, &mut g).scale(0.4);
    let skew = {
        let s = random_hermitian(n, &mut g);
        s * qfred::linops::I
    };
    let d = (random_algebra_hermitian(f, &mut g) + skew).scale(0.4);
    let c = random_unitary(n, &mut g) * random_algebra_element(f, &mut g).scale(0.4);
    let o = random_algebra_hermitian(f, &mut g);
    QuantumModel::new(h, vec![l], vec![d], vec![c], vec![o]).unwrap()
}

/// QND model with random block Hamiltonians and scalar couplings.
pub fn random_qnd(dims: &[usize], seed: u64) -> QuantumModel {
    let mut g = rng(seed);
    let k = dims.len();
    let mut scalars = |count: usize| -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..k).map(|_| rand::RngExt::random_range(&mut g, -1.0..1.0)).collect())
            .collect()
    };
    let d = scalars(1);
    let c = scalars(1);
    let h_blocks = Some(dims.iter().map(|&dk| random_hermitian(dk, &mut rng(seed ^ dk as u64))).collect());
    build_qnd(&QndSpec {
        dims: dims.to_vec(),
        d,
        c,
        h_blocks,
        ..Default::default()
    })
    .unwrap()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}
