// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Lanczos approximation of `exp(−i H dt) ψ` for large sparse Hermitian `H`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{inner, norm, HermitianOperator, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovSettings {
    /// Largest Krylov subspace before the step is split.
    pub max_dim: usize,
    /// Error bound per call, relative to `‖ψ‖`.
    pub tol: f64,
    /// How many times a step may be halved.
    pub max_splits: u32,
}

impl Default for KrylovSettings {
    fn default() -> Self {
        Self { max_dim: 30, tol: 1e-9, max_splits: 16 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KrylovStats {
    /// Sub-steps actually taken (1 unless the step was split).
    pub substeps: usize,
    pub max_dim_used: usize,
    /// Sum of the a-posteriori error estimates over sub-steps.
    pub error_estimate: f64,
}

impl KrylovStats {
    fn merge(&mut self, o: KrylovStats) {
        self.substeps += o.substeps;
        self.max_dim_used = self.max_dim_used.max(o.max_dim_used);
        self.error_estimate += o.error_estimate;
    }
}

/// `exp(−i T dt) e_1` for the real symmetric tridiagonal `T` of size `m`.
fn small_exponential(alpha: &[f64], beta: &[f64], m: usize, dt: f64) -> Vec<C64> {
    let t = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    (0..m)
        .map(|r| {
            (0..m)
                .map(|k| {
                    let v = eig.eigenvectors[(r, k)] * eig.eigenvectors[(0, k)];
                    C64::from_polar(v, -eig.eigenvalues[k] * dt)
                })
                .sum()
        })
        .collect()
}

/// One Lanczos attempt. Returns `None` when the subspace cap is hit before the
/// error estimate drops below the tolerance.
fn attempt<H: HermitianOperator + ?Sized>(
    h: &H,
    psi: &[C64],
    dt: f64,
    s: &KrylovSettings,
) -> Option<(Vec<C64>, KrylovStats)> {
    let n = psi.len();
    let beta0 = norm(psi);
    if beta0 == 0.0 {
        return Some((psi.to_vec(), KrylovStats { substeps: 1, ..Default::default() }));
    }
    let cap = s.max_dim.min(n).max(1);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(cap + 1);
    basis.push(psi.iter().map(|x| x / beta0).collect());
    let (mut alpha, mut beta) = (Vec::with_capacity(cap), Vec::with_capacity(cap));
    let mut w = vec![ZERO; n];
    let mut scale = 0.0f64;

    for j in 0..cap {
        h.apply(&basis[j], &mut w);
        let a = inner(&basis[j], &w).re;
        alpha.push(a);
        // Full reorthogonalisation against the whole basis.
        for v in &basis {
            let c = inner(v, &w);
            w.iter_mut().zip(v).for_each(|(x, y)| *x -= c * y);
        }
        let b = norm(&w);
        scale = scale.max(a.abs()).max(b);
        let m = j + 1;
        let happy = b <= 1e-13 * scale.max(f64::MIN_POSITIVE);
        // The error estimate needs a few vectors before it is meaningful and
        // is cheap to skip while ‖T dt‖ is clearly not resolved.
        if !happy && m < cap && m < 3.max((scale * dt) as usize) {
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
            continue;
        }
        let c = small_exponential(&alpha, &beta, m, dt);
        let err = if happy { 0.0 } else { beta0 * b * c[m - 1].norm() };
        if happy || err <= s.tol * beta0 {
            let mut out = vec![ZERO; n];
            for (v, ck) in basis.iter().zip(&c) {
                out.iter_mut().zip(v).for_each(|(o, x)| *o += beta0 * ck * x);
            }
            return Some((out, KrylovStats { substeps: 1, max_dim_used: m, error_estimate: err }));
        }
        if m == cap {
            return None;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    None
}

fn step_rec<H: HermitianOperator + ?Sized>(
    h: &H,
    psi: &[C64],
    dt: f64,
    s: &KrylovSettings,
    budget: u32,
) -> Result<(Vec<C64>, KrylovStats)> {
    if let Some(r) = attempt(h, psi, dt, s) {
        return Ok(r);
    }
    if budget == 0 {
        return Err(Error::Krylov(format!(
            "no convergence within dimension {} after {} step halvings (dt = {dt:.3e})",
            s.max_dim, s.max_splits
        )));
    }
    let half = 0.5 * dt;
    let (mid, mut st) = step_rec(h, psi, half, s, budget - 1)?;
    let (out, st2) = step_rec(h, &mid, half, s, budget - 1)?;
    st.merge(st2);
    Ok((out, st))
}

/// `exp(−i H dt) ψ` with the error held below `settings.tol · ‖ψ‖`. The
/// subspace grows up to `max_dim`; beyond that the step is halved recursively.
pub fn krylov_expm_step<H: HermitianOperator + ?Sized>(
    h: &H,
    psi: &[C64],
    dt: f64,
    settings: &KrylovSettings,
) -> Result<(Vec<C64>, KrylovStats)> {
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: psi.len() });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Krylov(format!("step must be positive, got {dt}")));
    }
    step_rec(h, psi, dt, settings, settings.max_splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{HermitianEigen, SparseMatrix};
    use rand::{Rng, SeedableRng};

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    fn random_state(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let nv = norm(&v);
        v.into_iter().map(|x| x / nv).collect()
    }

    #[test]
    fn matches_dense_oracle_on_200_dims() {
        let h = random_hermitian(200, 7);
        let eig = HermitianEigen::new(&h);
        let psi = random_state(200, 8);
        for dt in [0.01, 0.1, 0.5] {
            let (got, stats) = krylov_expm_step(&h, &psi, dt, &KrylovSettings::default()).unwrap();
            let want = eig.evolve(&psi, dt);
            let err = got.iter().zip(&want).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            assert!(err < 1e-8, "dt {dt}: err {err:.3e}, {stats:?}");
            assert!((norm(&got) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn long_step_is_split() {
        let h = random_hermitian(120, 3);
        let psi = random_state(120, 4);
        let s = KrylovSettings { max_dim: 12, ..Default::default() };
        let (got, stats) = krylov_expm_step(&h, &psi, 3.0, &s).unwrap();
        assert!(stats.substeps > 1);
        let want = HermitianEigen::new(&h).evolve(&psi, 3.0);
        let err = got.iter().zip(&want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8);
    }

    #[test]
    fn eigenvector_picks_up_a_phase() {
        let h = random_hermitian(40, 1);
        let eig = HermitianEigen::new(&h);
        let v: Vec<C64> = eig.vectors.column(5).iter().copied().collect();
        let (got, stats) = krylov_expm_step(&h, &v, 0.8, &KrylovSettings::default()).unwrap();
        assert_eq!(stats.max_dim_used, 1);
        let phase = C64::from_polar(1.0, -eig.values[5] * 0.8);
        let err = got.iter().zip(&v).map(|(a, b)| (a - phase * b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn sparse_operator_and_errors() {
        let h = SparseMatrix::from_dense(&random_hermitian(16, 2));
        let psi = random_state(16, 5);
        assert!(krylov_expm_step(&h, &psi[..8], 0.1, &KrylovSettings::default()).is_err());
        assert!(krylov_expm_step(&h, &psi, 0.0, &KrylovSettings::default()).is_err());
        let s = KrylovSettings { max_dim: 2, tol: 1e-14, max_splits: 0 };
        assert!(matches!(krylov_expm_step(&h, &psi, 5.0, &s), Err(Error::Krylov(_))));
        let (full, _) = krylov_expm_step(&h, &psi, 0.3, &KrylovSettings::default()).unwrap();
        assert!((norm(&full) - 1.0).abs() < 1e-12);
    }
}
