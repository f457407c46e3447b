use qfred::algebra::{StarAlgebra, verify_block_form};
use qfred::linops::{CMatrix, RANK_TOL, eigh, hs_norm};
use qfred::models::{
    ChainSpec, build_spin_chain, chain_algebra_generators, chain_reduced_hamiltonian,
    chain_wedderburn,
};
use qfred::pipeline::{ReduceOptions, reduce_auto, reduce_onto};

fn spectrum(x: &CMatrix) -> Vec<f64> {
    let mut v = eigh(x).0;
    v.sort_by(f64::total_cmp);
    v
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn diagonal_block(x: &CMatrix, k: usize, size: usize) -> CMatrix {
    x.view((k * size, k * size), (size, size)).into_owned()
}

#[test]
fn analytic_reduced_hamiltonian_matches_chain_reduction() {
    for n in [2, 3] {
        let spec = ChainSpec::random(n, 0.5, 0.5, 30 + n as u64);
        let model = build_spin_chain(&spec).unwrap();
        let red = reduce_onto(&model, chain_wedderburn(n).unwrap(), &ReduceOptions::default()).unwrap();
        let (h1, h2) = chain_reduced_hamiltonian(&spec).unwrap();
        let half = 1 << (n - 1);
        for (k, hk) in [h1, h2].iter().enumerate() {
            let block = diagonal_block(&red.reduced.h, k, half);
            assert!(close(&spectrum(&block), &spectrum(hk), 1e-10), "N={n}, block {k}");
            // Moments against the reduced observables restricted to the block.
            for o in &red.reduced.o {
                let ob = diagonal_block(o, k, half);
                for a in 1..4 {
                    let mut pa = CMatrix::identity(half, half);
                    let mut qa = pa.clone();
                    for _ in 0..a {
                        pa = &pa * &block;
                        qa = &qa * hk;
                    }
                    let lhs = (&pa * &ob).trace();
                    let rhs = (&qa * &ob).trace();
                    assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + lhs.norm()));
                }
            }
        }
    }
}

#[test]
fn automatic_reduction_has_the_same_spectra() {
    for n in [2, 3] {
        let spec = ChainSpec::random(n, 0.5, 0.5, 50 + n as u64);
        let model = build_spin_chain(&spec).unwrap();
        let red = reduce_auto(&model, &ReduceOptions::default()).unwrap();
        let (h1, h2) = chain_reduced_hamiltonian(&spec).unwrap();
        let half = 1 << (n - 1);
        let (b0, b1) = (
            spectrum(&diagonal_block(&red.reduced.h, 0, half)),
            spectrum(&diagonal_block(&red.reduced.h, 1, half)),
        );
        let (s1, s2) = (spectrum(&h1), spectrum(&h2));
        let matched = (close(&b0, &s1, 1e-9) && close(&b1, &s2, 1e-9))
            || (close(&b0, &s2, 1e-9) && close(&b1, &s1, 1e-9));
        assert!(matched, "N={n}: {b0:?} {b1:?} vs {s1:?} {s2:?}");
    }
}

#[test]
fn counting_operators_are_off_block() {
    for n in [2, 3, 4] {
        let spec = ChainSpec::random(n, 0.0, 4.0, 70 + n as u64);
        let model = build_spin_chain(&spec).unwrap();
        let red = reduce_onto(&model, chain_wedderburn(n).unwrap(), &ReduceOptions::default()).unwrap();
        let half = 1 << (n - 1);
        assert!(!red.reduced.c.is_empty());
        for op in red.reduced.c.iter().flatten() {
            assert_ne!(op.e, 0);
            for k in 0..2 {
                assert!(hs_norm(&diagonal_block(&op.op, k, half)) <= 1e-12);
            }
            assert!(hs_norm(&op.op) > 1e-6);
        }
    }
}

#[test]
fn chain_unitary_block_diagonalizes_the_algebra() {
    for n in 2..=4 {
        let a = StarAlgebra::generated_by(&chain_algebra_generators(n), RANK_TOL).unwrap();
        let w = chain_wedderburn(n).unwrap();
        assert_eq!(a.dim(), 2 * (1 << (2 * (n - 1))));
        assert!(verify_block_form(&a, &w) <= 1e-10, "N={n}");
    }
}
