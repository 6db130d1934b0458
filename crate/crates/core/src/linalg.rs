// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Small linear-algebra layer: a compressed-sparse-row matrix for the large
//! spin–phonon operators and dense Hermitian/unitary helpers for the 2^N spin
//! space.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Anything that can act as a Hermitian generator on a state vector.
pub trait HermitianOperator {
    fn dim(&self) -> usize;

    /// `y = H x`. `y` is overwritten.
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

/// Compressed sparse row matrix with complex entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, indptr: vec![0; dim + 1], indices: Vec::new(), values: Vec::new() }
    }

    /// Assemble from `(row, col, value)` triplets. Duplicates are summed and
    /// entries that cancel to exactly zero are dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; dim + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r},{c}) outside dimension {dim}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                rows.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.into_iter().zip(indices).zip(values) {
            if v != ZERO {
                indptr[r + 1] += 1;
                keep_idx.push(c);
                keep_val.push(v);
            }
        }
        for r in 0..dim {
            indptr[r + 1] += indptr[r];
        }
        Self { dim, indptr, indices: keep_idx, values: keep_val }
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != ZERO {
                    t.push((r, c, m[(r, c)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), t)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let (lo, hi) = (self.indptr[row], self.indptr[row + 1]);
        match self.indices[lo..hi].binary_search(&col) {
            Ok(k) => self.values[lo + k],
            Err(_) => ZERO,
        }
    }

    /// Iterate over stored `(row, col, value)` entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.values[k]))
        })
    }

    /// `y += scale * A x`.
    pub fn apply_add(&self, scale: C64, x: &[C64], y: &mut [C64]) {
        for r in 0..self.dim {
            let mut acc = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            y[r] += scale * acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    /// Largest `|A_rc - conj(A_cr)|` over stored entries.
    pub fn hermiticity_error(&self) -> f64 {
        self.iter().map(|(r, c, v)| (v - self.get(c, r).conj()).norm()).fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let t = self.iter().chain(other.iter()).collect();
        Self::from_triplets(self.dim, t)
    }

    /// Write the matrix in coordinate format, one `row col re im` per line.
    pub fn to_coordinate_text(&self) -> String {
        let mut s = format!("% dim {} nnz {}\n", self.dim, self.nnz());
        for (r, c, v) in self.iter() {
            s.push_str(&format!("{r} {c} {:e} {:e}\n", v.re, v.im));
        }
        s
    }
}

impl HermitianOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|v| *v = ZERO);
        self.apply_add(ONE, x, y);
    }
}

impl HermitianOperator for DMatrix<C64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for r in 0..self.nrows() {
            let mut acc = ZERO;
            for c in 0..self.ncols() {
                acc += self[(r, c)] * x[c];
            }
            y[r] = acc;
        }
    }
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `|<a|b>|^2` for normalized vectors.
pub fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    inner(a, b).norm_sqr()
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Spectral decomposition of a dense Hermitian matrix, ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn new(h: &DMatrix<C64>) -> Self {
        let n = h.nrows();
        // Symmetrize so round-off asymmetry does not leak into the solver.
        let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    /// `exp(-i H t)` as a dense matrix.
    pub fn propagator(&self, t: f64) -> DMatrix<C64> {
        let n = self.values.len();
        let phases = DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                C64::from_polar(1.0, -self.values[r] * t)
            } else {
                ZERO
            }
        });
        &self.vectors * phases * self.vectors.adjoint()
    }

    /// Apply `exp(-i H t)` to a state without forming the propagator.
    pub fn evolve(&self, psi: &[C64], t: f64) -> Vec<C64> {
        let v = DVector::from_column_slice(psi);
        let mut coeff = self.vectors.adjoint() * v;
        for (k, c) in coeff.iter_mut().enumerate() {
            *c *= C64::from_polar(1.0, -self.values[k] * t);
        }
        (&self.vectors * coeff).as_slice().to_vec()
    }
}

/// `exp(-i H t)` for dense Hermitian `H`.
pub fn expm_hermitian(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    HermitianEigen::new(h).propagator(t)
}

/// Recover the Hermitian generator `H` with `U = exp(-i H period)` on the
/// principal branch (eigenphases in `(-π, π]`).
///
/// Fails when an eigenphase lies within `margin` of ±π, where the branch
/// choice is ambiguous.
pub fn principal_generator(u: &DMatrix<C64>, period: f64, margin: f64) -> Result<DMatrix<C64>> {
    let n = u.nrows();
    let (q, t) = Schur::new(u.clone()).unpack();
    let mut diag = DMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let phase = lambda.arg();
        if std::f64::consts::PI - phase.abs() < margin {
            return Err(Error::QuasiEnergyFolding { phase, margin });
        }
        diag[(k, k)] = C64::new(-phase / period, 0.0);
    }
    let h = &q * diag * q.adjoint();
    Ok((&h + h.adjoint()) * C64::new(0.5, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    const I: C64 = C64::new(0.0, 1.0);

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(
            3,
            vec![(0, 1, ONE), (0, 1, ONE), (2, 2, ONE), (2, 2, -ONE), (1, 0, I)],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), C64::new(2.0, 0.0));
        assert_eq!(m.get(2, 2), ZERO);
        assert_eq!(m.get(1, 0), I);
    }

    #[test]
    fn sparse_matches_dense_product() {
        let h = random_hermitian(7, 3);
        let s = SparseMatrix::from_dense(&h);
        let x: Vec<C64> = (0..7).map(|k| C64::new(k as f64, 1.0 - k as f64)).collect();
        let mut y1 = vec![ZERO; 7];
        let mut y2 = vec![ZERO; 7];
        s.apply(&x, &mut y1);
        h.apply(&x, &mut y2);
        for (a, b) in y1.iter().zip(&y2) {
            assert!((a - b).norm() < 1e-13);
        }
        assert!(s.hermiticity_error() < 1e-15);
    }

    #[test]
    fn propagator_is_unitary_and_generator_round_trips() {
        let h = random_hermitian(6, 11);
        let u = expm_hermitian(&h, 0.7);
        let id = DMatrix::<C64>::identity(6, 6);
        assert!(max_abs(&(&u * u.adjoint() - &id)) < 1e-12);
        let back = principal_generator(&u, 0.7, 1e-6).unwrap();
        assert!(max_abs(&(back - h)) < 1e-10);
    }

    #[test]
    fn folding_is_reported() {
        let mut h = DMatrix::<C64>::zeros(2, 2);
        h[(0, 0)] = C64::new(std::f64::consts::PI, 0.0);
        let u = expm_hermitian(&h, 1.0);
        assert!(matches!(principal_generator(&u, 1.0, 1e-6), Err(Error::QuasiEnergyFolding { .. })));
    }

    #[test]
    fn eigen_evolve_matches_propagator() {
        let h = random_hermitian(5, 2);
        let eig = HermitianEigen::new(&h);
        let psi: Vec<C64> = (0..5).map(|k| C64::new(1.0, k as f64)).collect();
        let a = eig.evolve(&psi, 0.3);
        let b = eig.propagator(0.3) * DVector::from_column_slice(&psi);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }
}
