//! Observable operator space 𝒩⊥ and the minimal linear filter living on it.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linops::{
    C64, CMatrix, QuantumModel, Superop, apply_superop, eye, hs_norm, orthonormalize_family,
};

pub use crate::linops::OperatorSubspace;

pub type CVector = DVector<C64>;

/// Adds any of 1, Dⱼ+Dⱼ*, Cⱼ*Cⱼ missing from span{Oⱼ} to the observables.
/// Returns the repaired model and one notice per added operator.
pub fn repair_assumptions(model: &QuantumModel, tol: f64) -> (QuantumModel, Vec<String>) {
    let missing = model.assumption_defects(tol);
    let mut repaired = model.clone();
    let mut notices = Vec::new();
    for (name, op) in missing {
        notices.push(format!("observables augmented with {name}"));
        repaired.o.push(op);
    }
    (repaired, notices)
}

/// The adjoint generators whose common invariant subspace defines 𝒩⊥.
pub fn adjoint_generators(model: &QuantumModel) -> Vec<Superop> {
    let mut gens = vec![Superop::Lindblad];
    gens.extend((0..model.p()).map(Superop::GD));
    gens.extend((0..model.q()).map(Superop::KC));
    gens
}

/// Frobenius bound on ‖𝒮*(X)‖ for unit ‖X‖; sets the absolute scale of
/// rank decisions in the closure.
pub fn generator_scale(model: &QuantumModel, g: &Superop) -> f64 {
    let sq = |a: &CMatrix| hs_norm(a).powi(2);
    match g {
        Superop::Lindblad => {
            2.0 * hs_norm(&model.h)
                + model.l.iter().chain(&model.d).chain(&model.c).map(|a| 2.0 * sq(a)).sum::<f64>()
        }
        Superop::GeneratorQ => {
            generator_scale(model, &Superop::Lindblad)
                + model.q() as f64
                + model.c.iter().map(sq).sum::<f64>()
        }
        Superop::GD(j) => 2.0 * hs_norm(&model.d[*j]),
        Superop::KC(j) => sq(&model.c[*j]),
        Superop::DOf(a) => 2.0 * sq(a),
    }
    .max(f64::MIN_POSITIVE)
}

fn generator_name(g: &Superop) -> String {
    match g {
        Superop::Lindblad => "L*".into(),
        Superop::GeneratorQ => "Q*".into(),
        Superop::GD(j) => format!("G_D[{j}]*"),
        Superop::KC(j) => format!("K_C[{j}]*"),
        Superop::DOf(_) => "D_A*".into(),
    }
}

/// Smallest subspace containing span(seeds) and invariant under the given
/// adjoint generators, by breadth-first sweeps over newly added elements.
pub fn krylov_closure(
    model: &QuantumModel,
    seeds: &[CMatrix],
    generators: &[Superop],
    tol: f64,
) -> Result<OperatorSubspace> {
    let mut space = orthonormalize_family(seeds, tol);
    if space.dim() == 0 {
        space = OperatorSubspace::empty(model.n);
    }
    let scales: Vec<f64> = generators.iter().map(|g| generator_scale(model, g)).collect();
    let mut frontier: Vec<CMatrix> = space.basis.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for e in &frontier {
            for (g, scale) in generators.iter().zip(&scales) {
                let y = apply_superop(model, g, true, e)?;
                if space.extend_above(&y, tol * scale) {
                    next.push(space.basis.last().expect("just pushed").clone());
                }
            }
        }
        frontier = next;
    }
    Ok(space)
}

/// 𝒩⊥: the smallest subspace containing span{Oⱼ} that is invariant under
/// ℒ*, G_Dⱼ* and K_Cⱼ*. Missing assumption operators are added to the seeds
/// with a logged notice.
pub fn observable_space(model: &QuantumModel, tol: f64) -> Result<OperatorSubspace> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let (repaired, notices) = repair_assumptions(model, tol);
    for notice in &notices {
        log::warn!("{notice}");
    }
    krylov_closure(model, &repaired.o, &adjoint_generators(model), tol)
}

/// Largest relative defect ‖(I − Π)𝒮*(Eₖ)‖ / scale over basis and generators.
pub fn closure_defects(
    model: &QuantumModel,
    space: &OperatorSubspace,
) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for g in adjoint_generators(model) {
        let scale = generator_scale(model, &g);
        let mut worst: f64 = 0.0;
        for e in &space.basis {
            let y = apply_superop(model, &g, true, e)?;
            worst = worst.max(hs_norm(&space.residual(&y)) / scale);
        }
        out.push((generator_name(&g), worst));
    }
    Ok(out)
}

/// Minimal linear filter: v̇ = Qv dt + Σ Gⱼv dYʲ + Σ (Kⱼ − I)v dNʲ on ℂ^κ with
/// outputs Θⱼ = ⟨ζⱼ, v⟩ / ⟨e, v⟩.
#[derive(Clone, Debug)]
pub struct LinearFilter {
    pub kappa: usize,
    pub q: CMatrix,
    pub g: Vec<CMatrix>,
    pub k: Vec<CMatrix>,
    pub zeta: Vec<CVector>,
    pub e_vec: CVector,
    /// Orthonormal basis {Eₖ} realizing R(X)ₖ = ⟨Eₖ, X⟩ and J(v) = Σ vₖEₖ.
    pub basis: OperatorSubspace,
}

/// Invariance tolerance used when building the filter.
pub const CLOSURE_TOL: f64 = 1e-8;

fn compress(space: &OperatorSubspace, f: impl Fn(&CMatrix) -> Result<CMatrix>) -> Result<CMatrix> {
    let k = space.dim();
    let mut m = CMatrix::zeros(k, k);
    for (l, el) in space.basis.iter().enumerate() {
        let image = f(el)?;
        for (row, ek) in space.basis.iter().enumerate() {
            m[(row, l)] = ek.dotc(&image);
        }
    }
    Ok(m)
}

pub fn build_linear_filter(model: &QuantumModel, nperp: &OperatorSubspace) -> Result<LinearFilter> {
    for (generator, residual) in closure_defects(model, nperp)? {
        if residual > CLOSURE_TOL {
            return Err(Error::NotClosed { generator, residual });
        }
    }
    let q = compress(nperp, |x| apply_superop(model, &Superop::GeneratorQ, false, x))?;
    let g = (0..model.p())
        .map(|j| compress(nperp, |x| apply_superop(model, &Superop::GD(j), false, x)))
        .collect::<Result<Vec<_>>>()?;
    let k = (0..model.q())
        .map(|j| compress(nperp, |x| apply_superop(model, &Superop::KC(j), false, x)))
        .collect::<Result<Vec<_>>>()?;
    let as_vec = |x: &CMatrix| CVector::from_vec(nperp.coords(x));
    Ok(LinearFilter {
        kappa: nperp.dim(),
        q,
        g,
        k,
        zeta: model.o.iter().map(as_vec).collect(),
        e_vec: as_vec(&eye(model.n)),
        basis: nperp.clone(),
    })
}

impl LinearFilter {
    /// v = R(τ).
    pub fn reduce_state(&self, tau: &CMatrix) -> CVector {
        CVector::from_vec(self.basis.coords(tau))
    }

    /// J(v).
    pub fn inject(&self, v: &CVector) -> CMatrix {
        self.basis.combine(v.as_slice())
    }

    /// ⟨ζⱼ, v⟩ for every observable (unnormalized expectations).
    pub fn raw_outputs(&self, v: &CVector) -> Vec<f64> {
        self.zeta.iter().map(|z| z.dotc(v).re).collect()
    }

    pub fn norm(&self, v: &CVector) -> f64 {
        self.e_vec.dotc(v).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{RANK_TOL, pauli_x, pauli_y, pauli_z, projector, random_complex_matrix, random_hermitian, zeros};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_only_model() {
        let m = QuantumModel::new(zeros(3), vec![], vec![], vec![], vec![eye(3)]).unwrap();
        let space = observable_space(&m, RANK_TOL).unwrap();
        assert_eq!(space.dim(), 1);
        let lin = build_linear_filter(&m, &space).unwrap();
        assert_eq!(lin.kappa, 1);
        // No counting channels: the drift vanishes and ⟨e, v⟩ is conserved.
        assert!(lin.q[(0, 0)].norm() < 1e-14);
        assert!((lin.e_vec[0].norm() - 3f64.sqrt()).abs() < 1e-12);
        assert!((lin.zeta[0].norm() - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let m = QuantumModel::new(zeros(2), vec![], vec![], vec![], vec![eye(2)]).unwrap();
        assert!(matches!(observable_space(&m, 0.0), Err(Error::Config(_))));
    }

    #[test]
    fn missing_identity_is_repaired() {
        let m = QuantumModel::new(zeros(2), vec![], vec![pauli_z()], vec![], vec![projector(2, 0)])
            .unwrap();
        // Both 1 and D + D* = 2σ_z lie outside span{|0⟩⟨0|}.
        let (repaired, notices) = repair_assumptions(&m, RANK_TOL);
        assert_eq!(notices.len(), 2);
        assert!(repaired.assumption_defects(RANK_TOL).is_empty());
        let space = observable_space(&m, RANK_TOL).unwrap();
        assert!(space.contains(&eye(2), 1e-10));
    }

    #[test]
    fn build_rejects_non_invariant_subspace() {
        let m = QuantumModel::new(pauli_x(), vec![], vec![], vec![], vec![eye(2), pauli_z()])
            .unwrap();
        let seed = orthonormalize_family(&m.o, RANK_TOL);
        match build_linear_filter(&m, &seed) {
            Err(Error::NotClosed { generator, .. }) => assert_eq!(generator, "L*"),
            other => panic!("expected NotClosed, got {other:?}"),
        }
    }

    #[test]
    fn full_pauli_observables_give_full_superoperators() {
        let mut g = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(2, &mut g);
        let l = vec![random_complex_matrix(2, 2, &mut g)];
        let d = vec![random_complex_matrix(2, 2, &mut g)];
        let c = vec![random_complex_matrix(2, 2, &mut g)];
        let o = vec![eye(2), pauli_x(), pauli_y(), pauli_z()];
        let m = QuantumModel::new(h, l, d, c, o.clone()).unwrap();
        let space = observable_space(&m, RANK_TOL).unwrap();
        assert_eq!(space.dim(), 4);
        let lin = build_linear_filter(&m, &space).unwrap();

        // Oracle: superoperator matrices in the normalized Pauli basis, moved to
        // the computed basis by B_ab = ⟨P_a, E_b⟩.
        let paulis: Vec<CMatrix> = o.iter().map(|p| p.unscale(2f64.sqrt())).collect();
        let oracle = |kind: &Superop| {
            CMatrix::from_fn(4, 4, |a, b| {
                paulis[a].dotc(&apply_superop(&m, kind, false, &paulis[b]).unwrap())
            })
        };
        let basis_change = CMatrix::from_fn(4, 4, |a, b| paulis[a].dotc(&space.basis[b]));
        let moved = |x: &CMatrix| &basis_change * x * basis_change.adjoint();
        assert!((moved(&lin.q) - oracle(&Superop::GeneratorQ)).norm() < 1e-10);
        assert!((moved(&lin.g[0]) - oracle(&Superop::GD(0))).norm() < 1e-10);
        assert!((moved(&lin.k[0]) - oracle(&Superop::KC(0))).norm() < 1e-10);
    }
}
