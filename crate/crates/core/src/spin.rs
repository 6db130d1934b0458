// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Spin-only Hamiltonians on the `2^N` tensor-product space.
//!
//! Basis convention: ion 1 is the leftmost tensor factor (most significant
//! bit), a set bit means the ion is excited (`σ^z = +1`). The transverse
//! field is along `σ^z`, the spin–spin coupling along `σ^x`, and the
//! conserved quantity of the XX model is the number of `σ^z` excitations.
//!
//! Pairs are counted once: `H_J = Σ_{i<j} J_ij σ_i^x σ_j^x` and
//! `H_XX = Σ_{i<j} J_ij σ_i^+ σ_j^− + h.c.`, so the single-excitation block of
//! `H_XX` has off-diagonal entries exactly `J_ij`.

use nalgebra::DMatrix;

use crate::chain::CouplingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{HermitianOperator, SparseMatrix, C64, ONE};

/// Upper bound on chain length for spin-space operators.
pub const MAX_SPINS: usize = 10;

/// Whether `ion` is excited in basis state `index`.
#[inline]
pub fn is_excited(n_ions: usize, index: usize, ion: usize) -> bool {
    index >> (n_ions - 1 - ion) & 1 == 1
}

#[inline]
pub(crate) fn ion_bit(n_ions: usize, ion: usize) -> usize {
    1 << (n_ions - 1 - ion)
}

/// Basis index of the state with exactly one excitation, on `ion`.
pub fn single_excitation_index(n_ions: usize, ion: usize) -> usize {
    ion_bit(n_ions, ion)
}

/// Number of excited ions in a basis state.
pub fn excitation_count(index: usize) -> u32 {
    index.count_ones()
}

/// Hermitian operator on the spin space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperator {
    pub n_ions: usize,
    pub matrix: SparseMatrix,
}

impl SpinOperator {
    pub fn zeros(n_ions: usize) -> Self {
        Self { n_ions, matrix: SparseMatrix::zeros(1 << n_ions) }
    }

    pub fn from_dense(n_ions: usize, m: &DMatrix<C64>) -> Self {
        Self { n_ions, matrix: SparseMatrix::from_dense(m) }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_ions
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { n_ions: self.n_ions, matrix: self.matrix.add(&other.matrix) }
    }

    pub fn to_coordinate_text(&self) -> String {
        self.matrix.to_coordinate_text()
    }
}

impl HermitianOperator for SpinOperator {
    fn dim(&self) -> usize {
        SpinOperator::dim(self)
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.matrix.apply(x, y)
    }
}

/// Normalized spin-space amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    pub n_ions: usize,
    pub amplitudes: Vec<C64>,
}

impl SpinState {
    pub fn basis(n_ions: usize, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); 1 << n_ions];
        amplitudes[index] = ONE;
        Self { n_ions, amplitudes }
    }

    /// One excitation on `ion`, all others in the ground state (`|↑↓↓⟩` for ion 0).
    pub fn single_excitation(n_ions: usize, ion: usize) -> Self {
        Self::basis(n_ions, single_excitation_index(n_ions, ion))
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.amplitudes)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SPINS {
        return Err(Error::DimensionMismatch { expected: MAX_SPINS, got: n });
    }
    Ok(())
}

/// `H_J = Σ_{i<j} J_ij σ_i^x σ_j^x`.
pub fn build_ising(j: &CouplingMatrix) -> Result<SpinOperator> {
    let n = j.n();
    check_n(n)?;
    let tol = 1e-12 * j.j_rms.max(f64::MIN_POSITIVE);
    let dim = 1usize << n;
    let mut t = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let v = j.get(a, b);
            if v.im.abs() > tol {
                return Err(Error::ComplexIsingCoupling(a, b));
            }
            if v.re == 0.0 {
                continue;
            }
            let flip = ion_bit(n, a) | ion_bit(n, b);
            for s in 0..dim {
                t.push((s ^ flip, s, C64::new(v.re, 0.0)));
            }
        }
    }
    Ok(SpinOperator { n_ions: n, matrix: SparseMatrix::from_triplets(dim, t) })
}

/// `H_XX = Σ_{i<j} J_ij σ_i^+ σ_j^− + h.c.` for Hermitian (possibly complex) `J`.
pub fn build_xx(j: &CouplingMatrix) -> Result<SpinOperator> {
    let n = j.n();
    check_n(n)?;
    let dim = 1usize << n;
    let mut t = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let v = j.get(a, b);
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            // σ_a^+ σ_b^−: moves an excitation from b to a.
            let (ba, bb) = (ion_bit(n, a), ion_bit(n, b));
            for s in 0..dim {
                if s & bb != 0 && s & ba == 0 {
                    t.push((s ^ bb ^ ba, s, v));
                }
            }
        }
    }
    let op = SpinOperator { n_ions: n, matrix: SparseMatrix::from_triplets(dim, t) };
    let herr = op.matrix.hermiticity_error();
    if herr > 1e-12 * j.j_rms.max(f64::MIN_POSITIVE) {
        return Err(Error::NonHermitian(herr));
    }
    Ok(op)
}

/// `Σ_i b_i σ_i^z`.
pub fn build_field(b: &[f64]) -> SpinOperator {
    let n = b.len();
    let dim = 1usize << n;
    let t = (0..dim)
        .map(|s| {
            let e: f64 = (0..n).map(|i| if is_excited(n, s, i) { b[i] } else { -b[i] }).sum();
            (s, s, C64::new(e, 0.0))
        })
        .collect();
    SpinOperator { n_ions: n, matrix: SparseMatrix::from_triplets(dim, t) }
}

/// `σ^z` eigenvalues of each basis state as a diagonal, per ion.
pub fn sz_diagonal(n_ions: usize, ion: usize) -> Vec<f64> {
    (0..1usize << n_ions).map(|s| if is_excited(n_ions, s, ion) { 1.0 } else { -1.0 }).collect()
}

/// Largest matrix element connecting sectors of different excitation number.
pub fn off_block_norm(op: &SpinOperator) -> f64 {
    op.matrix
        .iter()
        .filter(|(r, c, _)| excitation_count(*r) != excitation_count(*c))
        .map(|(_, _, v)| v.norm())
        .fold(0.0, f64::max)
}

/// `N × N` restriction to the one-excitation states, ordered by ion.
pub fn single_excitation_block(op: &SpinOperator) -> Result<DMatrix<C64>> {
    let off = off_block_norm(op);
    if off > 1e-10 {
        return Err(Error::ExcitationNotConserved(off));
    }
    let n = op.n_ions;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        op.matrix.get(single_excitation_index(n, i), single_excitation_index(n, j))
    }))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, HermitianEigen};
    use std::f64::consts::PI;

    fn triangle(j12: f64, j13: f64, j23: f64) -> CouplingMatrix {
        CouplingMatrix::from_pairs(
            3,
            &[((0, 1), C64::new(j12, 0.0)), ((0, 2), C64::new(j13, 0.0)), ((1, 2), C64::new(j23, 0.0))],
        )
        .unwrap()
    }

    fn flux_triangle(jmag: f64, flux: f64) -> CouplingMatrix {
        CouplingMatrix::from_pairs(
            3,
            &[((0, 1), C64::new(jmag, 0.0)), ((0, 2), C64::from_polar(jmag, flux)), ((1, 2), C64::new(jmag, 0.0))],
        )
        .unwrap()
    }

    #[test]
    fn two_spin_ising_spectrum() {
        let j = CouplingMatrix::from_pairs(2, &[((0, 1), C64::new(1.5, 0.0))]).unwrap();
        let eig = HermitianEigen::new(&build_ising(&j).unwrap().to_dense());
        let expect = [-1.5, -1.5, 1.5, 1.5];
        for (a, b) in eig.values.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_couplings_give_zero_operator() {
        let j = triangle(0.0, 0.0, 0.0);
        assert_eq!(build_ising(&j).unwrap().matrix.nnz(), 0);
        assert_eq!(build_xx(&j).unwrap().matrix.nnz(), 0);
    }

    #[test]
    fn complex_couplings_rejected_by_ising() {
        assert!(matches!(build_ising(&flux_triangle(1.0, 0.5)), Err(Error::ComplexIsingCoupling(0, 2))));
    }

    #[test]
    fn builders_match_kronecker_oracle() {
        for n in 1..=4 {
            let mut pairs = Vec::new();
            for a in 0..n {
                for b in (a + 1)..n {
                    pairs.push(((a, b), C64::new(0.3 + a as f64 - 0.7 * b as f64, 0.2 * (a + 2 * b) as f64)));
                }
            }
            let jc = CouplingMatrix::from_pairs(n, &pairs).unwrap();
            let jr = CouplingMatrix::from_pairs(
                n,
                &pairs.iter().map(|&(p, v)| (p, C64::new(v.re, 0.0))).collect::<Vec<_>>(),
            )
            .unwrap();
            assert!(max_abs(&(build_ising(&jr).unwrap().to_dense() - oracle::ising(&jr))) < 1e-12);
            assert!(max_abs(&(build_xx(&jc).unwrap().to_dense() - oracle::xx(&jc))) < 1e-12);
            let b: Vec<f64> = (0..n).map(|i| 0.5 - i as f64).collect();
            assert!(max_abs(&(build_field(&b).to_dense() - oracle::field(&b))) < 1e-12);
        }
    }

    #[test]
    fn xx_conserves_excitations() {
        let h = build_xx(&flux_triangle(1.0, 0.7)).unwrap().to_dense();
        let nz = build_field(&[1.0, 1.0, 1.0]).to_dense();
        assert!(max_abs(&(&h * &nz - &nz * &h)) < 1e-12);
        assert_eq!(off_block_norm(&build_xx(&flux_triangle(1.0, 0.7)).unwrap()), 0.0);
    }

    #[test]
    fn real_xx_is_real_symmetric() {
        let h = build_xx(&triangle(1.0, 0.4, 0.9)).unwrap().to_dense();
        assert!(h.iter().all(|v| v.im == 0.0));
        assert!(max_abs(&(&h - h.transpose())) == 0.0);
    }

    #[test]
    fn single_excitation_block_holds_couplings() {
        let j = flux_triangle(0.8, 1.1);
        let block = single_excitation_block(&build_xx(&j).unwrap()).unwrap();
        assert!(max_abs(&(&block - &j.values)) < 1e-15);
        assert!(matches!(
            single_excitation_block(&build_ising(&triangle(1.0, 1.0, 1.0)).unwrap()),
            Err(Error::ExcitationNotConserved(_))
        ));
    }

    #[test]
    fn field_spectra() {
        let eig = HermitianEigen::new(&build_field(&[0.7]).to_dense());
        assert!((eig.values[0] + 0.7).abs() < 1e-15 && (eig.values[1] - 0.7).abs() < 1e-15);
        let n = 4;
        let b0 = 0.37;
        let h = build_field(&vec![b0; n]);
        for s in 0..(1 << n) {
            let k = excitation_count(s) as f64;
            assert!((h.matrix.get(s, s).re - b0 * (2.0 * k - n as f64)).abs() < 1e-14);
        }
        let other = build_field(&[0.1, -2.0, 0.3, 5.0]).to_dense();
        let hm = h.to_dense();
        assert!(max_abs(&(&hm * &other - &other * &hm)) < 1e-14);
        assert!(single_excitation_block(&h).unwrap().iter().enumerate().all(|(k, v)| k % 5 == 0 || v.norm() == 0.0));
    }

    #[test]
    fn triangle_spectrum_with_flux() {
        let jm = 1.3;
        for flux in [0.0, 0.4, PI / 2.0, 2.0 * PI / 3.0, PI, -1.0] {
            let block = single_excitation_block(&build_xx(&flux_triangle(jm, flux)).unwrap()).unwrap();
            let eig = HermitianEigen::new(&block);
            let mut expect: Vec<f64> =
                (0..3).map(|k| 2.0 * jm * ((flux + 2.0 * PI * k as f64) / 3.0).cos()).collect();
            expect.sort_by(f64::total_cmp);
            for (a, b) in eig.values.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12, "flux {flux}: {a} vs {b}");
            }
        }
        let eig = HermitianEigen::new(
            &single_excitation_block(&build_xx(&flux_triangle(jm, PI / 2.0)).unwrap()).unwrap(),
        );
        let r3 = 3f64.sqrt() * jm;
        assert!((eig.values[0] + r3).abs() < 1e-12 && eig.values[1].abs() < 1e-12 && (eig.values[2] - r3).abs() < 1e-12);
    }

    #[test]
    fn gauge_transformation_preserves_block_spectrum() {
        let j = flux_triangle(1.0, 0.9);
        let theta = [0.3, -1.2, 2.5];
        let mut g = j.values.clone();
        for a in 0..3 {
            for b in 0..3 {
                g[(a, b)] *= C64::from_polar(1.0, theta[a] - theta[b]);
            }
        }
        let jg = CouplingMatrix::from_complex(g).unwrap();
        let e1 = HermitianEigen::new(&single_excitation_block(&build_xx(&j).unwrap()).unwrap()).values;
        let e2 = HermitianEigen::new(&single_excitation_block(&build_xx(&jg).unwrap()).unwrap()).values;
        for (a, b) in e1.iter().zip(&e2) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((j.loop_flux().unwrap() - jg.loop_flux().unwrap()).abs() < 1e-12);
    }
}
