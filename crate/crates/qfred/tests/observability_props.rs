mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;

use qfred::linops::{QuantumModel, RANK_TOL, hs_norm, eye, lindbladian, g_d, k_c, random_complex_matrix};
use qfred::models::{ChainSpec, build_spin_chain};
use qfred::observability::{
    CLOSURE_TOL, adjoint_generators, closure_defects, krylov_closure, observable_space,
};
use qfred::pipeline::{ReduceOptions, linear_filter};

use common::{random_qnd, rng};

fn structured_model(seed: u64, pick: usize) -> QuantumModel {
    match pick {
        0 => random_qnd(&[1, 2, 2], seed),
        1 => random_qnd(&[2, 3], seed),
        _ => build_spin_chain(&ChainSpec::random(2, 0.5, 0.5, seed)).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn observable_space_contains_seeds_and_is_closed(seed in any::<u64>(), pick in 0usize..3) {
        let model = structured_model(seed, pick);
        let space = observable_space(&model, RANK_TOL).unwrap();
        prop_assert!(space.contains(&eye(model.n), 1e-9));
        for o in &model.o {
            prop_assert!(space.contains(o, 1e-9));
        }
        for (name, defect) in closure_defects(&model, &space).unwrap() {
            prop_assert!(defect <= CLOSURE_TOL, "{name}: {defect:e}");
        }
    }

    #[test]
    fn projection_commutes_with_generators(seed in any::<u64>(), pick in 0usize..3) {
        let model = structured_model(seed, pick);
        let space = observable_space(&model, RANK_TOL).unwrap();
        let mut g = rng(seed.wrapping_add(7));
        let x = random_complex_matrix(model.n, model.n, &mut g);
        let px = space.project(&x);
        let maps: Vec<Box<dyn Fn(&qfred::linops::CMatrix) -> qfred::linops::CMatrix>> = vec![
            Box::new(|y| lindbladian(&model, y, false)),
            Box::new(|y| g_d(&model.d[0], y, false)),
            Box::new(|y| k_c(&model.c[0], y, false)),
        ];
        for map in &maps {
            let defect = hs_norm(&(space.project(&map(&x)) - space.project(&map(&px))));
            prop_assert!(defect <= 1e-9 * (1.0 + hs_norm(&x)), "{defect:e}");
        }
    }

    #[test]
    fn closure_is_order_independent(seed in any::<u64>(), pick in 0usize..3) {
        let model = structured_model(seed, pick);
        let mut seeds = model.o.clone();
        seeds.push(eye(model.n));
        let mut gens = adjoint_generators(&model);
        let reference = krylov_closure(&model, &seeds, &gens, RANK_TOL).unwrap().dim();
        let mut g = rng(seed);
        for _ in 0..10 {
            gens.shuffle(&mut g);
            seeds.shuffle(&mut g);
            prop_assert_eq!(krylov_closure(&model, &seeds, &gens, RANK_TOL).unwrap().dim(), reference);
        }
    }

    /// Minimality surrogate: the closure of span{Oⱼ, 1} is all of 𝒩⊥, and
    /// dropping any generator from the closure can only shrink it.
    #[test]
    fn observable_space_is_minimal_closure(seed in any::<u64>(), pick in 0usize..3) {
        let model = structured_model(seed, pick);
        let space = observable_space(&model, RANK_TOL).unwrap();
        let gens = adjoint_generators(&model);
        let mut seeds = model.o.clone();
        seeds.push(eye(model.n));
        let closure = krylov_closure(&model, &seeds, &gens, RANK_TOL).unwrap();
        prop_assert_eq!(closure.dim(), space.dim());
        prop_assert!(space.contains_subspace(&closure, 1e-8));
        for skip in 0..gens.len() {
            let partial: Vec<_> = gens.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, g)| g.clone()).collect();
            let sub = krylov_closure(&model, &seeds, &partial, RANK_TOL).unwrap();
            prop_assert!(sub.dim() <= space.dim());
            prop_assert!(space.contains_subspace(&sub, 1e-8));
        }
    }

    #[test]
    fn qnd_linear_filter_has_one_state_per_block(seed in any::<u64>(), k in 2usize..5) {
        let dims: Vec<usize> = (0..k).map(|i| 1 + i % 2).collect();
        let model = random_qnd(&dims, seed);
        let lin = linear_filter(&model, &ReduceOptions::default()).unwrap();
        prop_assert_eq!(lin.kappa, k);
        prop_assert_eq!(lin.q.nrows(), k);
    }
}

#[test]
fn generic_models_are_fully_observable() {
    for seed in 0..5 {
        let model = common::random_model(3, seed);
        assert_eq!(observable_space(&model, RANK_TOL).unwrap().dim(), 9);
    }
}

#[test]
fn nothing_to_observe_beyond_identity() {
    let model = QuantumModel::new(eye(3), vec![], vec![], vec![], vec![eye(3)]).unwrap();
    assert_eq!(observable_space(&model, RANK_TOL).unwrap().dim(), 1);
}
