// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Linear ion chain: equilibrium positions, transverse normal modes,
//! Lamb-Dicke factors and the static spin–spin coupling matrix.
//!
//! Positions are dimensionless in units of `ℓ = (e²/(4πε₀ M ω_z²))^{1/3}`.
//! The transverse mode frequencies follow from `ω_m² = ω_xy² − λ_m ω_z²` with
//! `λ_m` the eigenvalues of the Coulomb curvature matrix
//! `C_ii = Σ_k 1/|u_i − u_k|³`, `C_ij = −1/|u_i − u_j|³`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Smallest tolerated beat-note detuning from any mode (rad/s).
pub const RESONANCE_THRESHOLD: f64 = 2.0 * PI * 1.0;

/// Physical trap and laser parameters. All frequencies are angular (rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct TrapSpec {
    pub n_ions: usize,
    /// Ion mass in atomic mass units.
    pub mass_amu: f64,
    pub omega_xy: f64,
    pub omega_z: f64,
    /// Per-ion Rabi frequencies Ω_i.
    pub rabi: Vec<f64>,
    pub omega_rec: f64,
    /// Detuning of the beat note above the center-of-mass mode.
    pub delta_com: f64,
}

impl TrapSpec {
    /// Three ¹⁷¹Yb⁺-like ions with the reference parameter set
    /// (δ_COM = 2π·80 kHz, ω_xy = 2π·5 MHz, ω_z = 2π·900 kHz, Ω = 2π·200 kHz,
    /// ω_rec = 2π·26 kHz).
    pub fn reference() -> Self {
        Self::uniform(3, 171.0, 5.0e6, 0.9e6, 200.0e3, 26.0e3, 80.0e3)
    }

    /// Build from ordinary frequencies in Hz with one Rabi frequency shared by
    /// every ion.
    pub fn uniform(
        n_ions: usize,
        mass_amu: f64,
        omega_xy_hz: f64,
        omega_z_hz: f64,
        rabi_hz: f64,
        omega_rec_hz: f64,
        delta_com_hz: f64,
    ) -> Self {
        let w = |hz: f64| 2.0 * PI * hz;
        Self {
            n_ions,
            mass_amu,
            omega_xy: w(omega_xy_hz),
            omega_z: w(omega_z_hz),
            rabi: vec![w(rabi_hz); n_ions],
            omega_rec: w(omega_rec_hz),
            delta_com: w(delta_com_hz),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidTrap(m.to_string()));
        if self.n_ions == 0 {
            return bad("n_ions must be positive");
        }
        if !(self.omega_z > 0.0 && self.omega_xy > self.omega_z) {
            return bad("need omega_xy > omega_z > 0 for a linear chain");
        }
        if !(self.mass_amu > 0.0) {
            return bad("mass must be positive");
        }
        if self.omega_rec < 0.0 || !self.omega_rec.is_finite() {
            return bad("omega_rec must be non-negative");
        }
        if !self.delta_com.is_finite() {
            return bad("delta_com must be finite");
        }
        if self.rabi.len() != self.n_ions {
            return bad("rabi list length must equal n_ions");
        }
        if self.rabi.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return bad("Rabi frequencies must be non-negative");
        }
        Ok(())
    }

    /// Laser beat-note frequency ω = ω_xy + δ_COM.
    pub fn beat_note(&self) -> f64 {
        self.omega_xy + self.delta_com
    }

    /// Coulomb length scale ℓ in metres.
    pub fn length_scale(&self) -> f64 {
        let m = self.mass_amu * ATOMIC_MASS_UNIT;
        (ELEMENTARY_CHARGE.powi(2) / (4.0 * PI * VACUUM_PERMITTIVITY * m * self.omega_z.powi(2)))
            .cbrt()
    }
}

/// Equilibrium geometry and transverse normal modes.
#[derive(Debug, Clone)]
pub struct ModeData {
    pub positions: Vec<f64>,
    /// ω_m in descending order.
    pub mode_freqs: Vec<f64>,
    /// `b_{i,m}`: row = ion, column = mode.
    pub mode_matrix: DMatrix<f64>,
    /// Eigenvalues λ_m of the Coulomb curvature matrix, same order as `mode_freqs`.
    pub curvature_eigenvalues: Vec<f64>,
    /// `η_{i,m}`; empty until [`lamb_dicke`] has been applied.
    pub lamb_dicke: DMatrix<f64>,
}

impl ModeData {
    /// Positions, modes and Lamb-Dicke factors in one go.
    pub fn compute(spec: &TrapSpec) -> Result<Self> {
        spec.validate()?;
        let positions = equilibrium_positions(spec)?;
        let mut modes = transverse_modes(spec, &positions)?;
        modes.lamb_dicke = lamb_dicke(&modes, spec)?;
        Ok(modes)
    }

    pub fn n_modes(&self) -> usize {
        self.mode_freqs.len()
    }

    /// CSV with one row per mode: frequency, eigenvector and Lamb-Dicke column.
    pub fn to_csv(&self) -> String {
        let n = self.positions.len();
        let mut s = String::from("mode,omega,freq_hz");
        for i in 1..=n {
            s.push_str(&format!(",b_{i}"));
        }
        for i in 1..=n {
            s.push_str(&format!(",eta_{i}"));
        }
        s.push('\n');
        for m in 0..self.n_modes() {
            s.push_str(&format!("{},{:e},{:e}", m + 1, self.mode_freqs[m], self.mode_freqs[m] / (2.0 * PI)));
            for i in 0..n {
                s.push_str(&format!(",{:e}", self.mode_matrix[(i, m)]));
            }
            for i in 0..n {
                let eta = if self.lamb_dicke.nrows() == n { self.lamb_dicke[(i, m)] } else { f64::NAN };
                s.push_str(&format!(",{eta:e}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Hermitian coupling matrix (rad/s) with zero diagonal, pairs counted once.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    pub values: DMatrix<C64>,
    pub j_rms: f64,
}

impl CouplingMatrix {
    pub fn from_complex(values: DMatrix<C64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: values.ncols() });
        }
        let scale = values.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let herm = (&values - values.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        let diag = (0..n).map(|i| values[(i, i)].norm()).fold(0.0, f64::max);
        if herm > 1e-12 * scale || diag > 1e-12 * scale {
            return Err(Error::NonHermitian(herm.max(diag)));
        }
        let mut values = values;
        for i in 0..n {
            values[(i, i)] = ZERO;
        }
        let j_rms = rms_off_diagonal(&values);
        Ok(Self { values, j_rms })
    }

    pub fn from_real(values: &DMatrix<f64>) -> Result<Self> {
        Self::from_complex(values.map(|v| C64::new(v, 0.0)))
    }

    /// Symmetric real couplings given pair by pair, `pairs[(i, j)]` for `i < j`.
    pub fn from_pairs(n: usize, pairs: &[((usize, usize), C64)]) -> Result<Self> {
        let mut m = DMatrix::zeros(n, n);
        for &((i, j), v) in pairs {
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
        Self::from_complex(m)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.values[(i, j)]
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.values.iter().all(|v| v.im.abs() <= tol * self.j_rms.max(f64::MIN_POSITIVE))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let values = self.values.map(|v| v * s);
        let j_rms = rms_off_diagonal(&values);
        Self { values, j_rms }
    }

    /// Loop phase `arg(J_13 J_32 J_21)` for a three-site system.
    ///
    /// Orientation 1→3→2: this equals `+2πτ/Δ` for the reference flux
    /// protocol. The opposite orientation `arg(J_12 J_23 J_31)` is its negative.
    pub fn loop_flux(&self) -> Option<f64> {
        (self.n() == 3).then(|| (self.get(0, 2) * self.get(2, 1) * self.get(1, 0)).arg())
    }

    /// CSV matrix, row/column = ion index, entries in rad/s. Complex entries
    /// are written as `re+imj`.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let real = self.is_real(0.0);
        let mut s = String::from("ion");
        for j in 1..=n {
            s.push_str(&format!(",j_{j}"));
        }
        s.push('\n');
        for i in 0..n {
            s.push_str(&format!("{}", i + 1));
            for j in 0..n {
                let v = self.get(i, j);
                if real {
                    s.push_str(&format!(",{:e}", v.re));
                } else {
                    s.push_str(&format!(",{:e}{:+e}j", v.re, v.im));
                }
            }
            s.push('\n');
        }
        s
    }
}

fn rms_off_diagonal(values: &DMatrix<C64>) -> f64 {
    let n = values.nrows();
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            acc += values[(i, j)].norm_sqr();
        }
    }
    (acc / (n * (n - 1) / 2) as f64).sqrt()
}

/// Axial force imbalance `F_i = u_i − Σ_{j≠i} sign(u_i−u_j)/(u_i−u_j)²`.
fn force_residual(u: &[f64]) -> Vec<f64> {
    (0..u.len())
        .map(|i| {
            let coulomb: f64 = (0..u.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let d = u[i] - u[j];
                    d.signum() / (d * d)
                })
                .sum();
            u[i] - coulomb
        })
        .collect()
}

/// The dimensionless Coulomb curvature matrix `C` at the given positions.
pub fn curvature_matrix(positions: &[f64]) -> DMatrix<f64> {
    let n = positions.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let k = 1.0 / (positions[i] - positions[j]).abs().powi(3);
                c[(i, j)] = -k;
                c[(i, i)] += k;
            }
        }
    }
    c
}

/// Equilibrium axial positions by damped Newton iteration from an equally
/// spaced seed. Sorted ascending and antisymmetric about zero.
pub fn equilibrium_positions(spec: &TrapSpec) -> Result<Vec<f64>> {
    const TOL: f64 = 1e-13;
    const MAX_ITER: usize = 200;
    let n = spec.n_ions;
    if n == 0 {
        return Err(Error::InvalidTrap("n_ions must be positive".into()));
    }
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let spacing = 2.018 / (n as f64).powf(0.559);
    let mut u: Vec<f64> = (0..n).map(|i| (i as f64 - (n - 1) as f64 / 2.0) * spacing).collect();
    let residual_norm = |u: &[f64]| force_residual(u).iter().map(|r| r * r).sum::<f64>().sqrt();
    let mut res = residual_norm(&u);
    let mut iterations = 0;
    while res > TOL && iterations < MAX_ITER {
        iterations += 1;
        // Jacobian of F is the axial Hessian I + 2C.
        let jac = DMatrix::identity(n, n) + curvature_matrix(&u) * 2.0;
        let f = DVector::from_vec(force_residual(&u));
        let step = jac.lu().solve(&f).ok_or(Error::EquilibriumNotConverged { residual: res, iterations })?;
        let mut damping = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, s)| x - damping * s).collect();
            let ordered = trial.windows(2).all(|w| w[0] < w[1]);
            let r = if ordered { residual_norm(&trial) } else { f64::INFINITY };
            if r < res || damping < 1e-6 {
                if ordered {
                    u = trial;
                    res = r;
                }
                break;
            }
            damping *= 0.5;
        }
        if damping < 1e-6 {
            break;
        }
    }
    // Enforce exact antisymmetry; the solution is unique so this only removes round-off.
    let sym: Vec<f64> = (0..n).map(|i| 0.5 * (u[i] - u[n - 1 - i])).collect();
    let final_res = force_residual(&sym).iter().fold(0.0f64, |a, r| a.max(r.abs()));
    if final_res > 1e-10 {
        return Err(Error::EquilibriumNotConverged { residual: final_res, iterations });
    }
    Ok(sym)
}

/// Transverse normal modes, descending in frequency, each eigenvector signed so
/// that its largest-magnitude component (first one on ties) is positive.
pub fn transverse_modes(spec: &TrapSpec, positions: &[f64]) -> Result<ModeData> {
    let n = positions.len();
    if n != spec.n_ions {
        return Err(Error::DimensionMismatch { expected: spec.n_ions, got: n });
    }
    let c = curvature_matrix(positions);
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    // Ascending λ is descending ω.
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut mode_freqs = Vec::with_capacity(n);
    let mut curvature_eigenvalues = Vec::with_capacity(n);
    let mut mode_matrix = DMatrix::zeros(n, n);
    for (m, &k) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[k];
        let curvature = spec.omega_xy.powi(2) - lambda * spec.omega_z.powi(2);
        if curvature <= 0.0 {
            return Err(Error::ZigzagInstability { mode: m, curvature });
        }
        mode_freqs.push(curvature.sqrt());
        curvature_eigenvalues.push(lambda);
        let col = eig.eigenvectors.column(k);
        let max_mag = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let lead = col.iter().find(|v| v.abs() >= max_mag - 1e-9).copied().unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            mode_matrix[(i, m)] = sign * col[i];
        }
    }
    // The centre-of-mass mode is exactly uniform with λ = 0; remove round-off.
    if n > 1 && curvature_eigenvalues[0].abs() < 1e-9 {
        curvature_eigenvalues[0] = 0.0;
        mode_freqs[0] = spec.omega_xy;
        let b = 1.0 / (n as f64).sqrt();
        for i in 0..n {
            mode_matrix[(i, 0)] = b;
        }
    }
    Ok(ModeData {
        positions: positions.to_vec(),
        mode_freqs,
        mode_matrix,
        curvature_eigenvalues,
        lamb_dicke: DMatrix::zeros(0, 0),
    })
}

/// `η_{i,m} = b_{i,m} √(ω_rec/ω_m)`.
pub fn lamb_dicke(modes: &ModeData, spec: &TrapSpec) -> Result<DMatrix<f64>> {
    if modes.mode_freqs.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::InvalidTrap("mode frequencies must be positive".into()));
    }
    let n = modes.mode_matrix.nrows();
    Ok(DMatrix::from_fn(n, modes.n_modes(), |i, m| {
        modes.mode_matrix[(i, m)] * (spec.omega_rec / modes.mode_freqs[m]).sqrt()
    }))
}

/// Mode detunings `δ_m = ω − ω_m` of the beat note.
pub fn detunings(modes: &ModeData, spec: &TrapSpec) -> Vec<f64> {
    let w = spec.beat_note();
    modes.mode_freqs.iter().map(|wm| w - wm).collect()
}

/// Static Ising couplings from virtual phonon exchange,
/// `J_ij = Ω_i Ω_j Σ_m η_{i,m} η_{j,m} / (2 δ_m)` per unordered pair.
///
/// The factor ½ is the one produced by adiabatically eliminating the phonons
/// from the spin–phonon Hamiltonian with its `sin(ωt)` drive, so that the
/// full spin–phonon dynamics and the Ising model share the same `J`.
pub fn spin_spin_couplings(modes: &ModeData, spec: &TrapSpec) -> Result<CouplingMatrix> {
    let n = spec.n_ions;
    let eta = if modes.lamb_dicke.nrows() == n { modes.lamb_dicke.clone() } else { lamb_dicke(modes, spec)? };
    let deltas = detunings(modes, spec);
    if let Some((mode, &detuning)) = deltas.iter().enumerate().find(|(_, d)| d.abs() < RESONANCE_THRESHOLD) {
        return Err(Error::Resonance { mode, detuning });
    }
    let mut j = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let sum: f64 = (0..modes.n_modes()).map(|m| eta[(a, m)] * eta[(b, m)] / (2.0 * deltas[m])).sum();
            j[(a, b)] = spec.rabi[a] * spec.rabi[b] * sum;
        }
    }
    // Exact symmetry.
    let j = (&j + j.transpose()) * 0.5;
    CouplingMatrix::from_real(&j)
}

/// Fractional reduction `ε_i = Σ_m (Ω_i η_im)² / (2 δ_m²)` of each ion's
/// Zeeman splitting by virtual phonon dressing. The spin models leave it out;
/// the Dicke model contains it.
pub fn field_renormalisation(modes: &ModeData, spec: &TrapSpec) -> Vec<f64> {
    let deltas = detunings(modes, spec);
    (0..spec.n_ions)
        .map(|i| {
            (0..modes.n_modes())
                .map(|m| (spec.rabi[i] * modes.lamb_dicke[(i, m)] / deltas[m]).powi(2) / 2.0)
                .sum()
        })
        .collect()
}
