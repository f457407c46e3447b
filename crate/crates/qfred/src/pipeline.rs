//! End-to-end reduction: 𝒩⊥ → alg(𝒩⊥) → Wedderburn → factors → reduced model,
//! or reduction onto a caller-supplied decomposed algebra.

use crate::algebra::{StarAlgebra, WedderburnData, generate_algebra, wedderburn_decompose};
use crate::condexp::{CondExpFactors, build_factors};
use crate::error::{Error, Result};
use crate::linops::{QuantumModel, RANK_TOL};
use crate::observability::{LinearFilter, OperatorSubspace, build_linear_filter, observable_space};
use crate::reduction::{
    CONTAINMENT_TOL, InvarianceReport, ReducedModel, invariance_check_factors, reduce_model,
};

#[derive(Clone, Debug)]
pub struct Reduction {
    /// 𝒩⊥, when it was computed.
    pub nperp: Option<OperatorSubspace>,
    pub algebra_dim: usize,
    pub factors: CondExpFactors,
    pub reduced: ReducedModel,
    pub invariance: InvarianceReport,
}

impl Reduction {
    pub fn kappa(&self) -> Option<usize> {
        self.nperp.as_ref().map(|s| s.dim())
    }

    pub fn wedderburn(&self) -> &WedderburnData {
        &self.factors.wedderburn
    }
}

#[derive(Clone, Debug)]
pub struct ReduceOptions {
    pub tol: f64,
    pub seed: u64,
}

impl Default for ReduceOptions {
    fn default() -> Self {
        ReduceOptions {
            tol: RANK_TOL,
            seed: 0,
        }
    }
}

/// Reduction onto alg(𝒩⊥), the smallest algebra the theory allows.
pub fn reduce_auto(model: &QuantumModel, opts: &ReduceOptions) -> Result<Reduction> {
    let nperp = observable_space(model, opts.tol)?;
    let algebra = generate_algebra(&nperp, opts.tol)?;
    let w = wedderburn_decompose(&algebra, opts.tol, opts.seed)?;
    let factors = build_factors(&w);
    let reduced = reduce_model(model, &factors)?;
    let invariance = invariance_check_factors(model, &factors, opts.seed)?;
    Ok(Reduction {
        nperp: Some(nperp),
        algebra_dim: algebra.dim(),
        factors,
        reduced,
        invariance,
    })
}

/// Reduction onto a known decomposed algebra. Containment of 𝒩⊥ is certified
/// without computing 𝒩⊥: the observables must lie in 𝒜 and 𝒜 must be
/// invariant under every adjoint generator.
pub fn reduce_onto(model: &QuantumModel, w: WedderburnData, opts: &ReduceOptions) -> Result<Reduction> {
    let factors = build_factors(&w);
    let reduced = reduce_model(model, &factors)?;
    let invariance = invariance_check_factors(model, &factors, opts.seed)?;
    if !invariance.invariant {
        let (name, defect) = invariance
            .defects
            .iter()
            .cloned()
            .fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
        return Err(Error::Containment(format!(
            "algebra is not invariant under {name}* (defect {defect:.3e}); \
             it need not contain the observable space"
        )));
    }
    Ok(Reduction {
        nperp: None,
        algebra_dim: w.algebra_dim(),
        factors,
        reduced,
        invariance,
    })
}

/// Reduction onto a given algebra with an explicit check that it contains 𝒩⊥
/// (the algebra itself need not be invariant).
pub fn reduce_containing(
    model: &QuantumModel,
    algebra: &StarAlgebra,
    w: WedderburnData,
    opts: &ReduceOptions,
) -> Result<Reduction> {
    let nperp = observable_space(model, opts.tol)?;
    if !algebra.basis.contains_subspace(&nperp, CONTAINMENT_TOL) {
        return Err(Error::Containment("algebra does not contain the observable space".into()));
    }
    let factors = build_factors(&w);
    let reduced = reduce_model(model, &factors)?;
    let invariance = invariance_check_factors(model, &factors, opts.seed)?;
    Ok(Reduction {
        nperp: Some(nperp),
        algebra_dim: algebra.dim(),
        factors,
        reduced,
        invariance,
    })
}

pub fn linear_filter(model: &QuantumModel, opts: &ReduceOptions) -> Result<LinearFilter> {
    build_linear_filter(model, &observable_space(model, opts.tol)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ChainSpec, build_spin_chain, chain_wedderburn};

    #[test]
    fn chain_structural_numbers() {
        for (n, dim, block) in [(2, 8, 2), (3, 32, 4)] {
            let model = build_spin_chain(&ChainSpec::uniform(n, 1.0, 0.7, 0.5, 0.5)).unwrap();
            let red = reduce_auto(&model, &ReduceOptions::default()).unwrap();
            assert_eq!(red.algebra_dim, dim);
            assert_eq!(red.wedderburn().blocks, vec![(block, 1), (block, 1)]);
            assert!(red.invariance.invariant);
        }
    }

    #[test]
    fn chain_path_matches_auto_dimensions() {
        let model = build_spin_chain(&ChainSpec::uniform(3, 1.0, 0.7, 0.5, 0.5)).unwrap();
        let red = reduce_onto(&model, chain_wedderburn(3).unwrap(), &ReduceOptions::default())
            .unwrap();
        assert_eq!((red.algebra_dim, red.reduced.m), (32, 8));
    }
}
