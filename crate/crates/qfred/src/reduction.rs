//! Operator-level reduction onto a decomposed algebra: the Kraus-set map 𝒳,
//! the reduced model and algebra-invariance diagnostics.
//!
//! A block Vⱼ*CVₖ is expanded as Σ_ℓ C_ℓ^{(j,k)} ⊗ G_ℓ^{(j,k)} against a fixed
//! orthonormal basis of operators H_{G,k} → H_{G,j}; the reduced Kraus
//! operators collect one principal block diagonal e = k − j each:
//!   Č_{ℓ,e} = Σₖ W_{k−e} (C_ℓ^{(k−e,k)} / √d_{G,k}) Wₖ*.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::StarAlgebra;
use crate::condexp::CondExpFactors;
use crate::error::{Error, Result};
use crate::linops::{
    C64, CMatrix, I, ONE, QuantumModel, Superop, ZERO, apply_superop, dissipator, eye, hs_norm,
    random_complex_matrix,
};

/// Kraus members with HS norm below this are dropped.
pub const PRUNE_TOL: f64 = 1e-12;
/// Residual threshold of [`invariance_check`].
pub const INVARIANCE_TOL: f64 = 1e-9;

/// A reduced operator with its Schmidt label ℓ (1-based) and block diagonal e.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledOp {
    pub l: usize,
    pub e: isize,
    pub op: CMatrix,
}

/// Orthonormal basis of operators ℂ^{dk} → ℂ^{dj}. Diagonal blocks start with
/// 1/√d followed by a traceless completion; off-diagonal blocks use matrix units.
pub fn g_basis(dj: usize, dk: usize, diagonal: bool) -> Vec<CMatrix> {
    let unit = |a: usize, b: usize| {
        let mut m = CMatrix::zeros(dj, dk);
        m[(a, b)] = ONE;
        m
    };
    if !diagonal {
        let mut out = Vec::with_capacity(dj * dk);
        for a in 0..dj {
            for b in 0..dk {
                out.push(unit(a, b));
            }
        }
        return out;
    }
    let d = dj;
    let mut out = vec![eye(d).unscale((d as f64).sqrt())];
    for a in 0..d {
        for b in 0..d {
            if a != b {
                out.push(unit(a, b));
            }
        }
    }
    // Generalized Gell-Mann diagonals.
    for l in 1..d {
        let mut m = CMatrix::zeros(d, d);
        for a in 0..l {
            m[(a, a)] = ONE;
        }
        m[(l, l)] = C64::new(-(l as f64), 0.0);
        out.push(m.unscale(((l * (l + 1)) as f64).sqrt()));
    }
    out
}

/// C_ℓ[a, b] = Σ_{α,β} B[(a,α),(b,β)] conj(G_ℓ[α,β]).
fn schmidt_component(block: &CMatrix, fj: usize, fk: usize, g: &CMatrix) -> CMatrix {
    let (gj, gk) = g.shape();
    let mut out = CMatrix::zeros(fj, fk);
    for a in 0..fj {
        for b in 0..fk {
            let mut s = ZERO;
            for al in 0..gj {
                for be in 0..gk {
                    let gv = g[(al, be)];
                    if gv != ZERO {
                        s += block[(a * gj + al, b * gk + be)] * gv.conj();
                    }
                }
            }
            out[(a, b)] = s;
        }
    }
    out
}

/// Every label (ℓ, e) of 𝒳(C), including zero members. Labels depend only on
/// the block structure, so the map C ↦ Č_{ℓ,e} is linear for each label.
pub fn kraus_reduce_labeled(f: &CondExpFactors, cop: &CMatrix) -> Vec<LabeledOp> {
    let blocks = f.blocks();
    let nb = blocks.len() as isize;
    let mut out = Vec::new();
    for e in -(nb - 1)..nb {
        let ks: Vec<usize> = (0..nb).filter(|k| (0..nb).contains(&(k - e))).map(|k| k as usize).collect();
        let lmax = ks
            .iter()
            .map(|&k| blocks[(k as isize - e) as usize].1 * blocks[k].1)
            .max()
            .unwrap_or(0);
        let mut members = vec![CMatrix::zeros(f.m, f.m); lmax];
        for &k in &ks {
            let j = (k as isize - e) as usize;
            let ((fj, gj), (fk, gk)) = (blocks[j], blocks[k]);
            let block = f.v[j].adjoint() * cop * &f.v[k];
            let scale = (gk as f64).sqrt();
            for (l, g) in g_basis(gj, gk, j == k).iter().enumerate() {
                let comp = schmidt_component(&block, fj, fk, g).unscale(scale);
                members[l]
                    .view_mut((f.reduced_offsets[j], f.reduced_offsets[k]), (fj, fk))
                    .copy_from(&comp);
            }
        }
        for (l, op) in members.into_iter().enumerate() {
            out.push(LabeledOp { l: l + 1, e, op });
        }
    }
    out
}

/// 𝒳(C): members of [`kraus_reduce_labeled`] with HS norm ≥ 1e-12.
pub fn kraus_reduce(f: &CondExpFactors, cop: &CMatrix) -> Vec<CMatrix> {
    kraus_reduce_pruned(f, cop).into_iter().map(|x| x.op).collect()
}

pub fn kraus_reduce_pruned(f: &CondExpFactors, cop: &CMatrix) -> Vec<LabeledOp> {
    kraus_reduce_labeled(f, cop)
        .into_iter()
        .filter(|x| hs_norm(&x.op) >= PRUNE_TOL)
        .collect()
}

/// One label of the exact reduction of the Kraus operator
/// M = 1 − B·dt + Σⱼ Dⱼ dYʲ used by the positivity-preserving step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepKraus {
    pub l: usize,
    pub e: isize,
    pub identity: CMatrix,
    pub drift: CMatrix,
    pub homodyne: Vec<CMatrix>,
}

#[derive(Clone, Debug)]
pub struct ReducedModel {
    pub m: usize,
    pub blocks: Vec<(usize, usize)>,
    pub h: CMatrix,
    pub l: Vec<Vec<LabeledOp>>,
    /// Ďⱼ = J*(Dⱼ).
    pub d: Vec<CMatrix>,
    /// 𝒳(Dⱼ) without the (ℓ=1, e=0) member J*(Dⱼ).
    pub d_extra: Vec<Vec<LabeledOp>>,
    pub c: Vec<Vec<LabeledOp>>,
    pub o: Vec<CMatrix>,
    /// max d_G², the bound on Schmidt labels per block pair.
    pub d_max: usize,
    /// Reduced Kraus data of the positivity-preserving step,
    /// with B = iH + ½ Σ A*A over all noise operators.
    pub step_kraus: Vec<StepKraus>,
}

fn in_algebra(f: &CondExpFactors, x: &CMatrix) -> Result<f64> {
    Ok(hs_norm(&(f.e(x)? - x)) / hs_norm(x).max(1.0))
}

/// Relative tolerance of the containment precheck in [`reduce_model`].
pub const CONTAINMENT_TOL: f64 = 1e-8;

pub fn reduce_model(model: &QuantumModel, f: &CondExpFactors) -> Result<ReducedModel> {
    if f.n() != model.n {
        return Err(Error::Dimension(format!(
            "factors act on dimension {}, model on {}",
            f.n(),
            model.n
        )));
    }
    let mut required: Vec<(String, CMatrix)> = vec![("1".into(), eye(model.n))];
    for (j, o) in model.o.iter().enumerate() {
        required.push((format!("O[{j}]"), o.clone()));
    }
    for (j, d) in model.d.iter().enumerate() {
        required.push((format!("D[{j}] + D[{j}]*"), d + d.adjoint()));
    }
    for (j, cj) in model.c.iter().enumerate() {
        required.push((format!("C[{j}]* C[{j}]"), cj.adjoint() * cj));
    }
    for (name, x) in &required {
        let defect = in_algebra(f, x)?;
        if defect > CONTAINMENT_TOL {
            return Err(Error::Containment(format!(
                "{name} is not in the algebra (defect {defect:.3e})"
            )));
        }
    }

    let d_extra = model
        .d
        .iter()
        .map(|d| {
            kraus_reduce_pruned(f, d)
                .into_iter()
                .filter(|x| !(x.l == 1 && x.e == 0))
                .collect()
        })
        .collect();

    let mut drift = model.h.clone() * I;
    for a in model.l.iter().chain(&model.d).chain(&model.c) {
        drift += (a.adjoint() * a).scale(0.5);
    }
    let ident = kraus_reduce_labeled(f, &eye(model.n));
    let drift_red = kraus_reduce_labeled(f, &drift);
    let d_red: Vec<Vec<LabeledOp>> = model.d.iter().map(|d| kraus_reduce_labeled(f, d)).collect();
    let mut step_kraus = Vec::new();
    for (idx, (id, dr)) in ident.into_iter().zip(drift_red).enumerate() {
        let homodyne: Vec<CMatrix> = d_red.iter().map(|dj| dj[idx].op.clone()).collect();
        let weight = hs_norm(&id.op) + hs_norm(&dr.op) + homodyne.iter().map(hs_norm).sum::<f64>();
        if weight >= PRUNE_TOL {
            step_kraus.push(StepKraus {
                l: id.l,
                e: id.e,
                identity: id.op,
                drift: dr.op,
                homodyne,
            });
        }
    }

    Ok(ReducedModel {
        m: f.m,
        blocks: f.blocks().to_vec(),
        h: f.jadj(&model.h)?,
        l: model.l.iter().map(|l| kraus_reduce_pruned(f, l)).collect(),
        d: model.d.iter().map(|d| f.jadj(d)).collect::<Result<_>>()?,
        d_extra,
        c: model.c.iter().map(|c| kraus_reduce_pruned(f, c)).collect(),
        o: model.o.iter().map(|o| f.jadj(o)).collect::<Result<_>>()?,
        d_max: f.blocks().iter().map(|&(_, g)| g * g).max().unwrap_or(1),
        step_kraus,
    })
}

impl ReducedModel {
    /// Every operator contributing a dissipator to the reduced generator.
    pub fn noise_operators(&self) -> impl Iterator<Item = &CMatrix> {
        self.l
            .iter()
            .flatten()
            .map(|x| &x.op)
            .chain(&self.d)
            .chain(self.d_extra.iter().flatten().map(|x| &x.op))
            .chain(self.c.iter().flatten().map(|x| &x.op))
    }

    /// Ľ(ρ̌) = −i[Ĥ, ρ̌] + Σ D_Ľ + Σ D_Ď + Σ D_Ď′ + Σ D_Č.
    pub fn lindbladian(&self, rho: &CMatrix) -> CMatrix {
        let mut out = (&self.h * rho - rho * &self.h) * (-I);
        for a in self.noise_operators() {
            out += dissipator(a, rho, false);
        }
        out
    }

    /// Σ_{Č ∈ 𝒳(Cⱼ)} Č ρ̌ Č*.
    pub fn jump_map(&self, j: usize, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.m, self.m);
        for x in &self.c[j] {
            out += &x.op * rho * x.op.adjoint();
        }
        out
    }

    pub fn g_map(&self, j: usize, rho: &CMatrix) -> CMatrix {
        crate::linops::g_d(&self.d[j], rho, false)
    }

    pub fn p(&self) -> usize {
        self.d.len()
    }

    pub fn q(&self) -> usize {
        self.c.len()
    }
}

#[derive(Clone, Debug)]
pub struct InvarianceReport {
    pub invariant: bool,
    /// ‖E𝒮 − E𝒮E‖ (Hilbert–Schmidt norm of the superoperator) per generator.
    pub defects: Vec<(String, f64)>,
}

fn generator_list(model: &QuantumModel) -> Vec<(String, Superop)> {
    let mut gens = vec![("L".to_string(), Superop::Lindblad)];
    gens.extend((0..model.p()).map(|j| (format!("G_D[{j}]"), Superop::GD(j))));
    gens.extend((0..model.q()).map(|j| (format!("K_C[{j}]"), Superop::KC(j))));
    gens
}

/// ‖E𝒮 − E𝒮E‖ = ‖(I − E)𝒮*E‖, evaluated over an orthonormal basis of 𝒜.
pub fn invariance_check(model: &QuantumModel, a: &StarAlgebra) -> Result<InvarianceReport> {
    invariance_from_basis(model, &a.basis.basis, &|x| Ok(a.basis.project(x)))
}

/// Algebra dimension above which [`invariance_check_factors`] switches to a
/// randomized estimate of the same norm.
pub const EXACT_INVARIANCE_MAX_DIM: usize = 1024;

/// As [`invariance_check`], with E realized through the factors. For large
/// algebras the norm is estimated from Gaussian elements of 𝒜
/// (E‖T g‖² = ‖T‖² for standard complex Gaussian g ∈ 𝒜).
pub fn invariance_check_factors(
    model: &QuantumModel,
    f: &CondExpFactors,
    seed: u64,
) -> Result<InvarianceReport> {
    let project = |x: &CMatrix| f.e(x);
    let dim = f.wedderburn.algebra_dim();
    if dim <= EXACT_INVARIANCE_MAX_DIM {
        return invariance_from_basis(model, &f.algebra_basis(), &project);
    }
    let samples = 32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<CMatrix> = (0..samples)
        .map(|_| {
            let g = random_complex_matrix(f.m, f.m, &mut rng);
            // J*-embedding of a Gaussian reduced element: Σₖ Vₖ(Xₖ ⊗ 1/√d_G)Vₖ*.
            let mut x = CMatrix::zeros(f.n(), f.n());
            for (k, (vk, &(_, dg))) in f.v.iter().zip(f.blocks()).enumerate() {
                let lifted = crate::linops::lift_f(&f.block(&g, k, k), dg).unscale((dg as f64).sqrt());
                x += vk * lifted * vk.adjoint();
            }
            x.unscale((samples as f64).sqrt())
        })
        .collect();
    invariance_from_basis(model, &probes, &project)
}

fn invariance_from_basis(
    model: &QuantumModel,
    basis: &[CMatrix],
    project: &dyn Fn(&CMatrix) -> Result<CMatrix>,
) -> Result<InvarianceReport> {
    let mut defects = Vec::new();
    for (name, g) in generator_list(model) {
        let mut sq = 0.0;
        for b in basis {
            let y = apply_superop(model, &g, true, b)?;
            sq += hs_norm(&(&y - project(&y)?)).powi(2);
        }
        defects.push((name, sq.sqrt()));
    }
    Ok(InvarianceReport {
        invariant: defects.iter().all(|(_, d)| *d <= INVARIANCE_TOL),
        defects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{StarAlgebra, WedderburnData};
    use crate::condexp::build_factors;
    use crate::linops::{RANK_TOL, pauli_x, pauli_z, projector, r, sigma_minus, zeros};

    fn scalar2() -> CondExpFactors {
        build_factors(&WedderburnData::new(eye(2), vec![(1, 2)]).unwrap())
    }

    #[test]
    fn g_basis_is_orthonormal_with_identity_first() {
        for d in 1..5 {
            let basis = g_basis(d, d, true);
            assert_eq!(basis.len(), d * d);
            assert!((&basis[0] - eye(d).unscale((d as f64).sqrt())).norm() < 1e-15);
            for (a, x) in basis.iter().enumerate() {
                if a > 0 {
                    assert!(x.trace().norm() < 1e-14);
                }
                for (b, y) in basis.iter().enumerate() {
                    let target = if a == b { 1.0 } else { 0.0 };
                    assert!((x.dotc(y) - r(target)).norm() < 1e-14);
                }
            }
        }
        assert_eq!(g_basis(2, 3, false).len(), 6);
    }

    #[test]
    fn scalar_algebra_examples() {
        let f = scalar2();
        // R(σ_x (x·1/2) σ_x) = x, realized by the single Kraus operator [1].
        let k = kraus_reduce(&f, &pauli_x());
        let total: f64 = k.iter().map(|c| c[(0, 0)].norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-14);
        // σ₋ halves the trace: R(σ₋(x·1/2)σ₊) = x/2.
        let k = kraus_reduce(&f, &sigma_minus());
        let total: f64 = k.iter().map(|c| c[(0, 0)].norm_sqr()).sum();
        assert!((total - 0.5).abs() < 1e-14);
    }

    #[test]
    fn member_of_algebra_reduces_to_jadj() {
        let f = build_factors(&WedderburnData::new(eye(2), vec![(1, 1), (1, 1)]).unwrap());
        let c = CMatrix::from_row_slice(2, 2, &[r(0.3), ZERO, ZERO, r(-1.2)]);
        let members = kraus_reduce_pruned(&f, &c);
        assert_eq!(members.len(), 1);
        assert_eq!((members[0].l, members[0].e), (1, 0));
        assert!((&members[0].op - f.jadj(&c).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn diagonal_algebra_with_transverse_field_is_not_invariant() {
        let a = StarAlgebra::generated_by(&[pauli_z()], RANK_TOL).unwrap();
        let m = QuantumModel::new(pauli_x(), vec![], vec![], vec![], vec![eye(2)]).unwrap();
        let rep = invariance_check(&m, &a).unwrap();
        assert!(!rep.invariant);
        assert!(rep.defects[0].1 > 1.0);
        let m = QuantumModel::new(pauli_z(), vec![], vec![], vec![], vec![eye(2)]).unwrap();
        assert!(invariance_check(&m, &a).unwrap().invariant);
    }

    #[test]
    fn containment_failure_is_reported() {
        let f = build_factors(&WedderburnData::new(eye(2), vec![(1, 2)]).unwrap());
        let m = QuantumModel::new(zeros(2), vec![], vec![], vec![], vec![eye(2), projector(2, 0)])
            .unwrap();
        assert!(matches!(reduce_model(&m, &f), Err(Error::Containment(_))));
    }
}
