//! Orthogonal conditional expectation E = J∘R onto a decomposed algebra and
//! its CPTP factors, with the reduced space Ȟ = ⊕ₖ H_{F,k}.
//!
//! With Vₖ the columns of U belonging to block k:
//!   R(X)  = ⊕ₖ tr_G(Vₖ* X Vₖ)
//!   J(X̌)  = Σₖ Vₖ (X̌ₖ ⊗ 1_G/d_G) Vₖ*
//!   J*(X) = ⊕ₖ tr_G(Vₖ* X Vₖ)/d_G

use crate::algebra::WedderburnData;
use crate::error::{Error, Result};
use crate::linops::{CMatrix, ONE, ZERO, eye, hs_norm, lift_f, partial_trace_g, zeros};

/// Tolerance on off-block entries accepted by [`CondExpFactors::j`].
pub const DOMAIN_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct CondExpFactors {
    pub wedderburn: WedderburnData,
    /// Σₖ d_{F,k}.
    pub m: usize,
    /// Isometries Vₖ: H_{F,k} ⊗ H_{G,k} → ℋ.
    pub v: Vec<CMatrix>,
    /// Offset of H_{F,k} inside Ȟ (defines Wₖ).
    pub reduced_offsets: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    R,
    J,
    Jadj,
    E,
}

pub fn build_factors(w: &WedderburnData) -> CondExpFactors {
    let mut v = Vec::new();
    let mut reduced_offsets = Vec::new();
    let mut at = 0;
    for (&(df, dg), &off) in w.blocks.iter().zip(&w.offsets) {
        v.push(w.u.columns(off, df * dg).into_owned());
        reduced_offsets.push(at);
        at += df;
    }
    CondExpFactors {
        wedderburn: w.clone(),
        m: at,
        v,
        reduced_offsets,
    }
}

impl CondExpFactors {
    pub fn n(&self) -> usize {
        self.wedderburn.n()
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.wedderburn.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.wedderburn.blocks.len()
    }

    /// Wₖ: H_{F,k} → Ȟ.
    pub fn w(&self, k: usize) -> CMatrix {
        let df = self.blocks()[k].0;
        let mut w = CMatrix::zeros(self.m, df);
        for a in 0..df {
            w[(self.reduced_offsets[k] + a, a)] = ONE;
        }
        w
    }

    /// Block k of a reduced operator.
    pub fn block(&self, x: &CMatrix, j: usize, k: usize) -> CMatrix {
        let (fj, fk) = (self.blocks()[j].0, self.blocks()[k].0);
        x.view((self.reduced_offsets[j], self.reduced_offsets[k]), (fj, fk))
            .into_owned()
    }

    fn assemble(&self, parts: impl Iterator<Item = CMatrix>) -> CMatrix {
        let mut out = zeros(self.m);
        for (k, part) in parts.enumerate() {
            let off = self.reduced_offsets[k];
            out.view_mut((off, off), part.shape()).copy_from(&part);
        }
        out
    }

    fn check_full(&self, x: &CMatrix) -> Result<()> {
        if x.shape() != (self.n(), self.n()) {
            return Err(Error::Dimension(format!(
                "expected {0}x{0}, got {1:?}",
                self.n(),
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn r(&self, x: &CMatrix) -> Result<CMatrix> {
        self.check_full(x)?;
        Ok(self.assemble(self.v.iter().zip(self.blocks()).map(|(vk, &(df, dg))| {
            partial_trace_g(&(vk.adjoint() * x * vk), df, dg)
        })))
    }

    pub fn jadj(&self, x: &CMatrix) -> Result<CMatrix> {
        self.check_full(x)?;
        Ok(self.assemble(self.v.iter().zip(self.blocks()).map(|(vk, &(df, dg))| {
            partial_trace_g(&(vk.adjoint() * x * vk), df, dg).unscale(dg as f64)
        })))
    }

    /// Norm of the off-block part of a reduced operator.
    pub fn off_block_norm(&self, x: &CMatrix) -> f64 {
        let diag = self.pinch(x);
        hs_norm(&(x - diag))
    }

    /// Block-diagonal part ⊕ₖ X̌ₖₖ.
    pub fn pinch(&self, x: &CMatrix) -> CMatrix {
        self.assemble((0..self.num_blocks()).map(|k| self.block(x, k, k)))
    }

    pub fn j(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.shape() != (self.m, self.m) {
            return Err(Error::Dimension(format!(
                "expected {0}x{0}, got {1:?}",
                self.m,
                x.shape()
            )));
        }
        let off = self.off_block_norm(x);
        if off > DOMAIN_TOL * hs_norm(x).max(1.0) {
            return Err(Error::Domain(format!("off-block mass {off:.3e}")));
        }
        Ok(self.j_pinched(x))
    }

    /// J applied to the block-diagonal part of `x` (no domain check).
    pub fn j_pinched(&self, x: &CMatrix) -> CMatrix {
        let n = self.n();
        let mut out = zeros(n);
        for (k, (vk, &(_, dg))) in self.v.iter().zip(self.blocks()).enumerate() {
            let lifted = lift_f(&self.block(x, k, k), dg).unscale(dg as f64);
            out += vk * lifted * vk.adjoint();
        }
        out
    }

    pub fn e(&self, x: &CMatrix) -> Result<CMatrix> {
        Ok(self.j_pinched(&self.r(x)?))
    }

    pub fn apply(&self, which: Factor, x: &CMatrix) -> Result<CMatrix> {
        match which {
            Factor::R => self.r(x),
            Factor::J => self.j(x),
            Factor::Jadj => self.jadj(x),
            Factor::E => self.e(x),
        }
    }

    /// Orthonormal basis of the algebra: Vₖ(|a⟩⟨b| ⊗ 1_G/√d_G)Vₖ*.
    pub fn algebra_basis(&self) -> Vec<CMatrix> {
        let mut out = Vec::new();
        for (vk, &(df, dg)) in self.v.iter().zip(self.blocks()) {
            for a in 0..df {
                for b in 0..df {
                    let mut unit = CMatrix::zeros(df, df);
                    unit[(a, b)] = ONE;
                    let lifted = lift_f(&unit, dg).unscale((dg as f64).sqrt());
                    out.push(vk * lifted * vk.adjoint());
                }
            }
        }
        out
    }
}

pub fn apply_factor(f: &CondExpFactors, which: Factor, x: &CMatrix) -> Result<CMatrix> {
    f.apply(which, x)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CptpReport {
    pub choi_min_eig: f64,
    pub trace_defect: f64,
}

/// Choi matrix Σᵢⱼ |i⟩⟨j| ⊗ Φ(|i⟩⟨j|) of a linear map on in_dim×in_dim matrices.
pub fn choi_matrix(map: &dyn Fn(&CMatrix) -> CMatrix, in_dim: usize, out_dim: usize) -> CMatrix {
    let mut choi = CMatrix::zeros(in_dim * out_dim, in_dim * out_dim);
    for i in 0..in_dim {
        for j in 0..in_dim {
            let mut unit = CMatrix::zeros(in_dim, in_dim);
            unit[(i, j)] = ONE;
            let image = map(&unit);
            choi.view_mut((i * out_dim, j * out_dim), (out_dim, out_dim))
                .copy_from(&image);
        }
    }
    choi
}

pub fn cptp_check(map: &dyn Fn(&CMatrix) -> CMatrix, in_dim: usize, out_dim: usize) -> CptpReport {
    let choi = choi_matrix(map, in_dim, out_dim);
    let mut trace_defect: f64 = 0.0;
    for i in 0..in_dim {
        for j in 0..in_dim {
            let block = choi.view((i * out_dim, j * out_dim), (out_dim, out_dim));
            let target = if i == j { ONE } else { ZERO };
            trace_defect = trace_defect.max((block.trace() - target).norm());
        }
    }
    CptpReport {
        choi_min_eig: crate::linops::min_eigenvalue(&choi),
        trace_defect,
    }
}

/// ‖J*(1) − 1‖.
pub fn unital_defect(f: &CondExpFactors) -> f64 {
    hs_norm(&(f.jadj(&eye(f.n())).expect("square") - eye(f.m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{kron, pauli_x, pauli_z, r};

    fn diag2() -> CondExpFactors {
        build_factors(&WedderburnData::new(eye(2), vec![(1, 1), (1, 1)]).unwrap())
    }

    fn scalar2() -> CondExpFactors {
        build_factors(&WedderburnData::new(eye(2), vec![(1, 2)]).unwrap())
    }

    #[test]
    fn diagonal_algebra_dephases() {
        let f = diag2();
        let rho = CMatrix::from_row_slice(2, 2, &[r(0.7), r(0.2), r(0.2), r(0.3)]);
        let red = f.r(&rho).unwrap();
        assert_eq!(red, CMatrix::from_row_slice(2, 2, &[r(0.7), ZERO, ZERO, r(0.3)]));
        assert_eq!(f.e(&rho).unwrap(), red);
    }

    #[test]
    fn scalar_algebra_traces_out() {
        let f = scalar2();
        let rho = CMatrix::from_row_slice(2, 2, &[r(0.7), r(0.2), r(0.2), r(0.3)]);
        assert!((f.r(&rho).unwrap()[(0, 0)] - ONE).norm() < 1e-15);
        let x = CMatrix::from_element(1, 1, r(0.4));
        assert!((f.j(&x).unwrap() - eye(2).scale(0.2)).norm() < 1e-15);
        assert!(f.jadj(&pauli_z()).unwrap()[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn one_block_with_multiplicity_is_partial_trace() {
        let f = build_factors(&WedderburnData::new(eye(4), vec![(2, 2)]).unwrap());
        let a = CMatrix::from_row_slice(2, 2, &[r(0.6), r(0.1), r(0.1), r(0.4)]);
        let b = CMatrix::from_row_slice(2, 2, &[r(0.5), r(0.2), r(0.2), r(0.5)]);
        assert!((f.r(&kron(&a, &b)).unwrap() - &a).norm() < 1e-15);
        assert!((f.j(&a).unwrap() - kron(&a, &eye(2).scale(0.5))).norm() < 1e-15);
    }

    #[test]
    fn j_rejects_off_block_input() {
        let f = diag2();
        assert!(matches!(f.j(&pauli_x()), Err(Error::Domain(_))));
        assert!(matches!(f.r(&eye(3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn transpose_is_not_cp() {
        let rep = cptp_check(&|x: &CMatrix| x.transpose(), 2, 2);
        assert!((rep.choi_min_eig + 1.0).abs() < 1e-12);
        assert!(rep.trace_defect < 1e-15);
    }

    #[test]
    fn factors_are_cptp_and_unital() {
        for f in [diag2(), scalar2()] {
            let rep = cptp_check(&|x: &CMatrix| f.r(x).unwrap(), f.n(), f.m);
            assert!(rep.choi_min_eig >= -1e-10 && rep.trace_defect <= 1e-11);
            let rep = cptp_check(&|x: &CMatrix| f.e(x).unwrap(), f.n(), f.n());
            assert!(rep.choi_min_eig >= -1e-10 && rep.trace_defect <= 1e-11);
            assert!(unital_defect(&f) < 1e-14);
        }
    }
}
