// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Derived quantities: populations, chiral currents, tier deviations, the
//! double-well relative phase and flux scans of the triangle.
//!
//! Everything is computed from reduced spin density matrices, so spin-only
//! and spin–phonon runs share one code path. `pop_i = (1 + ⟨σ_i^z⟩)/2`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::chain::CouplingMatrix;
use crate::error::{Error, Result};
use crate::evolve::SampleGrid;
use crate::linalg::{HermitianEigen, C64};
use crate::protocol::wrap_phase;
use crate::spin::{ion_bit, is_excited, single_excitation_index, SpinState};

/// Where a trajectory came from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLabel {
    pub tier: String,
    pub frame: String,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub label: TrajectoryLabel,
    pub n_ions: usize,
    pub times: Vec<f64>,
    pub strobe: Vec<bool>,
    pub pops: Vec<Vec<f64>>,
    pub sz: Vec<Vec<f64>>,
    pub phonons: Vec<f64>,
    pub norms: Vec<f64>,
    pub chiral: Vec<f64>,
    /// Reduced spin density matrix per sample.
    pub rho: Vec<DMatrix<C64>>,
    pub j_rms: f64,
}

pub fn pure_density(psi: &[C64]) -> DMatrix<C64> {
    let n = psi.len();
    DMatrix::from_fn(n, n, |r, c| psi[r] * psi[c].conj())
}

fn sz_expectation(rho: &DMatrix<C64>, n: usize, ion: usize) -> f64 {
    (0..rho.nrows()).map(|s| if is_excited(n, s, ion) { rho[(s, s)].re } else { -rho[(s, s)].re }).sum()
}

impl Trajectory {
    /// Build from density matrices. `couplings` feeds the chiral-current
    /// column; pass `None` to leave it at zero.
    pub fn from_density(
        label: TrajectoryLabel,
        grid: &SampleGrid,
        rho: Vec<DMatrix<C64>>,
        phonons: Vec<f64>,
        couplings: Option<&CouplingMatrix>,
        j_rms: f64,
    ) -> Result<Self> {
        if rho.len() != grid.len() || phonons.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} samples for {} grid points", rho.len(), grid.len())));
        }
        let n = rho.first().map_or(0, |r| r.nrows().trailing_zeros() as usize);
        let current = couplings.map(chiral_current_operator).transpose()?;
        let mut t = Self {
            label,
            n_ions: n,
            times: grid.times.clone(),
            strobe: grid.strobe.clone(),
            pops: Vec::with_capacity(rho.len()),
            sz: Vec::with_capacity(rho.len()),
            phonons,
            norms: Vec::with_capacity(rho.len()),
            chiral: Vec::with_capacity(rho.len()),
            rho: Vec::new(),
            j_rms,
        };
        for r in &rho {
            let sz: Vec<f64> = (0..n).map(|i| sz_expectation(r, n, i)).collect();
            t.pops.push(sz.iter().map(|z| 0.5 * (1.0 + z)).collect());
            t.sz.push(sz);
            t.norms.push(r.trace().re.max(0.0).sqrt());
            t.chiral.push(current.as_ref().map_or(0.0, |op| expectation_real(op, r)));
        }
        t.rho = rho;
        Ok(t)
    }

    pub fn from_states(
        label: TrajectoryLabel,
        grid: &SampleGrid,
        states: &[SpinState],
        couplings: Option<&CouplingMatrix>,
        j_rms: f64,
    ) -> Result<Self> {
        let rho = states.iter().map(|s| pure_density(&s.amplitudes)).collect();
        Self::from_density(label, grid, rho, vec![0.0; states.len()], couplings, j_rms)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Columns `t, pop_1.., sz_1.., nph_total, norm, strobe_flag, t_jrms, i_chiral`.
    pub fn to_csv(&self) -> String {
        let n = self.n_ions;
        let mut s = String::from("t");
        (1..=n).for_each(|i| s.push_str(&format!(",pop_{i}")));
        (1..=n).for_each(|i| s.push_str(&format!(",sz_{i}")));
        s.push_str(",nph_total,norm,strobe_flag,t_jrms,i_chiral\n");
        for k in 0..self.len() {
            let _ = write!(s, "{:e}", self.times[k]);
            for v in self.pops[k].iter().chain(&self.sz[k]) {
                let _ = write!(s, ",{v:.12e}");
            }
            let _ = writeln!(
                s,
                ",{:.12e},{:.15e},{},{:.9e},{:.12e}",
                self.phonons[k],
                self.norms[k],
                self.strobe[k] as u8,
                self.times[k] * self.j_rms,
                self.chiral[k]
            );
        }
        s
    }

    /// Largest `|Σ_i pop_i − Σ_i pop_i(0)|` over the run.
    pub fn population_leakage(&self) -> f64 {
        let total = |k: usize| self.pops[k].iter().sum::<f64>();
        let t0 = total(0);
        (0..self.len()).map(|k| (total(k) - t0).abs()).fold(0.0, f64::max)
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norms.iter().map(|v| (v - self.norms[0]).abs()).fold(0.0, f64::max)
    }
}

fn expectation_real(op: &DMatrix<C64>, rho: &DMatrix<C64>) -> f64 {
    let v: C64 = (op * rho).trace();
    debug_assert!(v.im.abs() < 1e-10 * (1.0 + v.re.abs()), "imaginary expectation {v}");
    v.re
}

/// `I = i Σ_{(i,j) ∈ ring} (J_ij σ_i^+ σ_j^− − h.c.)` over the oriented ring
/// `(1,2), (2,3), …, (N,1)`.
pub fn chiral_current_operator(j: &CouplingMatrix) -> Result<DMatrix<C64>> {
    let n = j.n();
    let dim = 1usize << n;
    let mut op = DMatrix::<C64>::zeros(dim, dim);
    if n < 2 {
        return Ok(op);
    }
    let edges: Vec<(usize, usize)> = if n == 2 { vec![(0, 1)] } else { (0..n).map(|i| (i, (i + 1) % n)).collect() };
    for (a, b) in edges {
        let v = j.get(a, b);
        let (ba, bb) = (ion_bit(n, a), ion_bit(n, b));
        for s in 0..dim {
            if s & bb != 0 && s & ba == 0 {
                let r = s ^ ba ^ bb;
                // i J σ_a^+ σ_b^− and its Hermitian partner.
                op[(r, s)] += C64::new(0.0, 1.0) * v;
                op[(s, r)] += C64::new(0.0, -1.0) * v.conj();
            }
        }
    }
    Ok(op)
}

/// `⟨ψ|I|ψ⟩` for a normalised spin state.
pub fn chiral_current(state: &SpinState, j: &CouplingMatrix) -> Result<f64> {
    let op = chiral_current_operator(j)?;
    let psi = &state.amplitudes;
    let v: C64 = (0..psi.len()).map(|r| psi[r].conj() * (0..psi.len()).map(|c| op[(r, c)] * psi[c]).sum::<C64>()).sum();
    if v.im.abs() > 1e-12 * (1.0 + v.re.abs()) {
        return Err(Error::NonHermitian(v.im.abs()));
    }
    Ok(v.re)
}

/// `Σ_i (⟨σ_i^z⟩_a − ⟨σ_i^z⟩_b)²` at the shared stroboscopic times.
pub fn trajectory_deviation(a: &Trajectory, b: &Trajectory) -> Result<Vec<(f64, f64)>> {
    let sa: Vec<usize> = (0..a.len()).filter(|&k| a.strobe[k]).collect();
    let sb: Vec<usize> = (0..b.len()).filter(|&k| b.strobe[k]).collect();
    if sa.len() != sb.len() || sa.iter().zip(&sb).any(|(&x, &y)| (a.times[x] - b.times[y]).abs() > 1e-12 * a.times[x].abs().max(1e-30)) {
        return Err(Error::GridMismatch(format!("{} vs {} stroboscopic samples", sa.len(), sb.len())));
    }
    if a.n_ions != b.n_ions {
        return Err(Error::GridMismatch("different ion counts".into()));
    }
    Ok(sa
        .iter()
        .zip(&sb)
        .map(|(&x, &y)| {
            let d: f64 = a.sz[x].iter().zip(&b.sz[y]).map(|(p, q)| (p - q).powi(2)).sum();
            (a.times[x], d)
        })
        .collect())
}

pub const TURNING_POINT_EPS: f64 = 0.02;
pub const PLATEAU_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseSample {
    Valid(f64),
    /// `|c_L||c_R|` too small for the phase to be defined.
    TurningPoint,
}

impl PhaseSample {
    pub fn value(&self) -> Option<f64> {
        match self {
            PhaseSample::Valid(v) => Some(*v),
            PhaseSample::TurningPoint => None,
        }
    }
}

/// `|Δφ| = arccos(⟨σ_L^x σ_R^x⟩ / (2|c_L||c_R|))` with
/// `|c| = √((1 + ⟨σ^z⟩)/2)`.
pub fn phase_from_correlations(xx: f64, sz_left: f64, sz_right: f64, eps: f64) -> Result<PhaseSample> {
    let cl = (0.5 * (1.0 + sz_left)).max(0.0).sqrt();
    let cr = (0.5 * (1.0 + sz_right)).max(0.0).sqrt();
    if cl * cr <= eps {
        return Ok(PhaseSample::TurningPoint);
    }
    let arg = xx / (2.0 * cl * cr);
    if arg.abs() > 1.0 + 1e-9 {
        return Err(Error::InconsistentState(arg));
    }
    Ok(PhaseSample::Valid(arg.clamp(-1.0, 1.0).acos()))
}

/// `⟨σ_a^x σ_b^x⟩` from a density matrix.
pub fn xx_correlator(rho: &DMatrix<C64>, n: usize, a: usize, b: usize) -> f64 {
    let flip = ion_bit(n, a) | ion_bit(n, b);
    (0..rho.nrows()).map(|s| rho[(s, s ^ flip)].re).sum()
}

/// Relative phase `arg(c_R c_L*)` between single excitations on `left` and
/// `right`, read from the coherence of the density matrix.
pub fn wavefunction_phase(rho: &DMatrix<C64>, n: usize, left: usize, right: usize) -> f64 {
    let (l, r) = (single_excitation_index(n, left), single_excitation_index(n, right));
    rho[(r, l)].arg()
}

/// `|c_L| |c_R|` from single-excitation populations.
pub fn edge_weight(rho: &DMatrix<C64>, n: usize, left: usize, right: usize) -> f64 {
    let (l, r) = (single_excitation_index(n, left), single_excitation_index(n, right));
    (rho[(l, l)].re.max(0.0) * rho[(r, r)].re.max(0.0)).sqrt()
}

/// Median of each contiguous run of samples with weight above `threshold`.
/// Runs are separated where the weight drops (the Rabi nodes).
pub fn plateaus(values: &[f64], weights: &[f64], threshold: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut run: Vec<f64> = Vec::new();
    let flush = |run: &mut Vec<f64>, out: &mut Vec<f64>| {
        if run.len() >= 3 {
            run.sort_by(f64::total_cmp);
            let m = run.len();
            out.push(if m % 2 == 1 { run[m / 2] } else { 0.5 * (run[m / 2 - 1] + run[m / 2]) });
        }
        run.clear();
    };
    for (v, w) in values.iter().zip(weights) {
        if *w > threshold && v.is_finite() {
            run.push(*v);
        } else {
            flush(&mut run, &mut out);
        }
    }
    flush(&mut run, &mut out);
    out
}

/// `Δφ₀ = −π(1/2 + 2τ/Δ)` folded to `[0, π]`, and its partner `π − Δφ₀`
/// reached after each Rabi node.
pub fn expected_double_well_phases(tau_over_delta: f64) -> (f64, f64) {
    let a = wrap_phase(-PI * (0.5 + 2.0 * tau_over_delta)).abs();
    (a, PI - a)
}

/// Spectrum and per-eigenstate currents of a uniform triangle.
#[derive(Debug, Clone)]
pub struct FluxScan {
    pub flux: Vec<f64>,
    pub energies: Vec<Vec<f64>>,
    pub currents: Vec<Vec<f64>>,
}

/// Triangle with `|J'| = jmag` and loop flux `Φ` placed on the 1–3 bond.
pub fn flux_triangle(jmag: f64, flux: f64) -> Result<CouplingMatrix> {
    CouplingMatrix::from_pairs(
        3,
        &[
            ((0, 1), C64::new(jmag, 0.0)),
            ((0, 2), C64::from_polar(jmag, flux)),
            ((1, 2), C64::new(jmag, 0.0)),
        ],
    )
}

/// `Φ_k = π(k − half)/half` for `k = 0..=2·half`.
pub fn flux_grid(points: usize) -> Vec<f64> {
    let half = (points.max(3) - 1) / 2;
    (0..=2 * half).map(|k| PI * (k as f64 - half as f64) / half as f64).collect()
}

/// Single-excitation eigenenergies and currents. Currents of degenerate
/// eigenstates are replaced by the cluster average, the only basis
/// independent value.
pub fn flux_scan(jmag: f64, flux: &[f64]) -> Result<FluxScan> {
    let mut energies = Vec::with_capacity(flux.len());
    let mut currents = Vec::with_capacity(flux.len());
    for &phi in flux {
        let j = flux_triangle(jmag, phi)?;
        let eig = HermitianEigen::new(&j.values);
        let full = chiral_current_operator(&j)?;
        let idx: Vec<usize> = (0..3).map(|i| single_excitation_index(3, i)).collect();
        let block = DMatrix::from_fn(3, 3, |r, c| full[(idx[r], idx[c])]);
        let mut cur: Vec<f64> = (0..3)
            .map(|k| {
                let v = eig.vectors.column(k);
                (v.adjoint() * &block * v)[(0, 0)].re
            })
            .collect();
        let tol = 1e-9 * jmag.abs().max(f64::MIN_POSITIVE);
        let mut k = 0;
        while k < 3 {
            let mut e = k + 1;
            while e < 3 && (eig.values[e] - eig.values[k]).abs() < tol {
                e += 1;
            }
            let avg = cur[k..e].iter().sum::<f64>() / (e - k) as f64;
            cur[k..e].iter_mut().for_each(|c| *c = avg);
            k = e;
        }
        energies.push(eig.values.clone());
        currents.push(cur);
    }
    Ok(FluxScan { flux: flux.to_vec(), energies, currents })
}

impl FluxScan {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("phi,e1,e2,e3,i1,i2,i3\n");
        for k in 0..self.flux.len() {
            let _ = write!(s, "{:.15e}", self.flux[k]);
            for v in self.energies[k].iter().chain(&self.currents[k]) {
                let _ = write!(s, ",{v:.15e}");
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chirality {
    /// `1 → 3 → 2`.
    CounterClockwise,
    /// `1 → 2 → 3`.
    Clockwise,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiralityReport {
    pub chirality: Chirality,
    pub t3_star: f64,
    pub t2_star: f64,
    /// `max_t Σ_i |pop_i(t) − pop_i(T' − t)|` over the window.
    pub time_reversal_asymmetry: f64,
}

fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let k = times.partition_point(|&x| x < t);
    if k == 0 {
        return values[0];
    }
    if k >= times.len() {
        return *values.last().unwrap();
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
    values[k - 1] * (1.0 - w) + values[k] * w
}

/// First-maximum ordering of `pop_3` and `pop_2` inside `[0, window]`, for a
/// run started from an excitation on ion 1.
pub fn chirality_witness(traj: &Trajectory, window: f64) -> ChiralityReport {
    let idx: Vec<usize> = (0..traj.len()).filter(|&k| traj.times[k] <= window * (1.0 + 1e-12)).collect();
    let argmax = |ion: usize| {
        idx.iter().copied().fold((0usize, f64::NEG_INFINITY), |best, k| {
            let v = traj.pops[k][ion];
            if v > best.1 {
                (k, v)
            } else {
                best
            }
        })
    };
    let (k3, v3) = argmax(2);
    let (k2, v2) = argmax(1);
    let (t3, t2) = (traj.times[k3], traj.times[k2]);
    let resolution = if idx.len() > 1 { window / (idx.len() - 1) as f64 } else { window };
    let chirality = if v2.max(v3) < 0.05 || (t3 - t2).abs() <= resolution {
        Chirality::Indeterminate
    } else if t3 < t2 {
        Chirality::CounterClockwise
    } else {
        Chirality::Clockwise
    };
    let times: Vec<f64> = idx.iter().map(|&k| traj.times[k]).collect();
    let mut asym = 0.0f64;
    for &k in &idx {
        let mirror = window - traj.times[k];
        let d: f64 = (0..traj.n_ions)
            .map(|i| {
                let series: Vec<f64> = idx.iter().map(|&q| traj.pops[q][i]).collect();
                (traj.pops[k][i] - interpolate(&times, &series, mirror)).abs()
            })
            .sum();
        asym = asym.max(d);
    }
    ChiralityReport { chirality, t3_star: t3, t2_star: t2, time_reversal_asymmetry: asym }
}

/// Revival time `2π/(√3 |J'|)` of a uniform triangle at `|Φ| = π/2`.
pub fn revival_time(jmag: f64) -> f64 {
    2.0 * PI / (3f64.sqrt() * jmag)
}

/// Rabi period from a least-squares fit of `1 − A sin²(Ωt)` to the
/// stroboscopic population of ion 1. `guess` only brackets the search to
/// `[0.44, 4]·guess`.
pub fn rabi_period_fit(traj: &Trajectory, guess: f64) -> f64 {
    let (t, y): (Vec<f64>, Vec<f64>) =
        (0..traj.len()).filter(|&k| traj.strobe[k]).map(|k| (traj.times[k], 1.0 - traj.pops[k][0])).unzip();
    let residual = |w: f64| {
        let s: Vec<f64> = t.iter().map(|x| (w * x).sin().powi(2)).collect();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        let a = if ss > 0.0 { s.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>() / ss } else { 0.0 };
        s.iter().zip(&y).map(|(p, q)| (q - a * p).powi(2)).sum::<f64>()
    };
    let w0 = PI / guess;
    let n = 4000;
    let grid = |k: usize| w0 * (0.25 + 2.0 * k as f64 / n as f64);
    let k = (0..=n).min_by(|&a, &b| residual(grid(a)).total_cmp(&residual(grid(b)))).unwrap_or(0);
    let (mut lo, mut hi) = (grid(k.saturating_sub(1)), grid((k + 1).min(n)));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let (a, b) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if residual(a) < residual(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    PI / (0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use proptest::prelude::*;

    fn label() -> TrajectoryLabel {
        TrajectoryLabel { tier: "xx".into(), frame: "test".into() }
    }

    #[test]
    fn real_couplings_real_state_no_current() {
        let j = flux_triangle(1.0, 0.0).unwrap();
        let mut s = SpinState::basis(3, 0);
        s.amplitudes = (0..8).map(|k| C64::new((k as f64).sin(), 0.0)).collect();
        let n = s.norm();
        s.amplitudes.iter_mut().for_each(|a| *a /= n);
        assert!(chiral_current(&s, &j).unwrap().abs() < 1e-14);
    }

    #[test]
    fn ground_state_current_flips_with_flux() {
        let scan = flux_scan(1.0, &[PI / 2.0, -PI / 2.0]).unwrap();
        let (a, b) = (scan.currents[0][0], scan.currents[1][0]);
        assert!(a.abs() > 0.1);
        assert!((a + b).abs() < 1e-10);
    }

    #[test]
    fn currents_vanish_at_integer_flux() {
        let scan = flux_scan(1.0, &[0.0, PI, -PI]).unwrap();
        for c in &scan.currents {
            assert!(c.iter().all(|v| v.abs() < 1e-10), "{c:?}");
        }
        let e = &scan.energies[0];
        assert!((e[0] + 1.0).abs() < 1e-12 && (e[1] + 1.0).abs() < 1e-12 && (e[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scan_antisymmetry_and_nonzero_currents() {
        let grid = flux_grid(241);
        assert_eq!(grid.len(), 241);
        assert!((grid[0] + PI).abs() < 1e-15 && grid[120] == 0.0);
        let scan = flux_scan(0.7, &grid).unwrap();
        for k in 0..241 {
            let m = 240 - k;
            for e in 0..3 {
                assert!((scan.currents[k][e] + scan.currents[m][e]).abs() < 1e-10);
                assert!((scan.energies[k][e] - scan.energies[m][e]).abs() < 1e-10);
            }
            let phi = grid[k];
            if (phi.abs() - PI).abs() > 1e-9 && phi.abs() > 1e-9 {
                assert!(scan.currents[k].iter().all(|c| c.abs() > 1e-6), "phi {phi}: {:?}", scan.currents[k]);
            }
        }
        assert!(scan.to_csv().starts_with("phi,e1,e2,e3,i1,i2,i3\n"));
    }

    #[test]
    fn deviation_of_identical_trajectories_is_zero() {
        let grid = SampleGrid::stroboscopic(1.0, 3, 2);
        let states: Vec<SpinState> = (0..grid.len()).map(|k| SpinState::basis(2, k % 4)).collect();
        let t = Trajectory::from_states(label(), &grid, &states, None, 1.0).unwrap();
        let d = trajectory_deviation(&t, &t).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.iter().all(|x| x.1 == 0.0));
        let other = SampleGrid::stroboscopic(1.0, 2, 2);
        let u = Trajectory::from_states(label(), &other, &states[..other.len()], None, 1.0).unwrap();
        assert!(matches!(trajectory_deviation(&t, &u), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn phase_guards() {
        assert_eq!(phase_from_correlations(0.0, -1.0, 1.0, TURNING_POINT_EPS).unwrap(), PhaseSample::TurningPoint);
        assert!(matches!(phase_from_correlations(1.5, 0.0, 0.0, TURNING_POINT_EPS), Err(Error::InconsistentState(_))));
        let v = phase_from_correlations(1.0 + 1e-10, 0.0, 0.0, TURNING_POINT_EPS).unwrap();
        assert_eq!(v, PhaseSample::Valid(0.0));
    }

    #[test]
    fn plateau_medians() {
        let v = [1.0, 1.1, 0.9, 9.0, 2.0, 2.0, 2.1, 1.9];
        let w = [0.5, 0.5, 0.5, 0.0, 0.5, 0.5, 0.5, 0.5];
        assert_eq!(plateaus(&v, &w, 0.15), vec![1.0, 2.0]);
        let (a, b) = expected_double_well_phases(1.0 / 3.0);
        assert!((a - 5.0 * PI / 6.0).abs() < 1e-12 && (b - PI / 6.0).abs() < 1e-12);
    }

    #[test]
    fn csv_columns() {
        let grid = SampleGrid::stroboscopic(1.0, 1, 2);
        let states = vec![SpinState::single_excitation(3, 0); 3];
        let t = Trajectory::from_states(label(), &grid, &states, Some(&flux_triangle(1.0, 0.3).unwrap()), 2.0).unwrap();
        let csv = t.to_csv();
        let head = csv.lines().next().unwrap();
        assert_eq!(head, "t,pop_1,pop_2,pop_3,sz_1,sz_2,sz_3,nph_total,norm,strobe_flag,t_jrms,i_chiral");
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().all(|l| l.split(',').count() == 12));
        assert_eq!(t.pops[0], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn chirality_from_synthetic_trajectory() {
        let jm = 1.0;
        let tp = revival_time(jm);
        let grid = SampleGrid::from_times((0..=300).map(|k| tp * k as f64 / 300.0).collect(), 1e9).unwrap();
        for (flux, want) in [(PI / 2.0, Chirality::CounterClockwise), (-PI / 2.0, Chirality::Clockwise)] {
            let j = flux_triangle(jm, flux).unwrap();
            let h = crate::spin::build_xx(&j).unwrap().to_dense();
            let eig = HermitianEigen::new(&h);
            let psi0 = SpinState::single_excitation(3, 0);
            let states: Vec<SpinState> = grid
                .times
                .iter()
                .map(|t| SpinState { n_ions: 3, amplitudes: eig.evolve(&psi0.amplitudes, *t) })
                .collect();
            let tr = Trajectory::from_states(label(), &grid, &states, Some(&j), 1.0).unwrap();
            let rep = chirality_witness(&tr, tp);
            assert_eq!(rep.chirality, want);
            assert!(rep.time_reversal_asymmetry > 0.1);
            assert!(tr.pops.last().unwrap()[0] > 1.0 - 1e-9);
        }
    }

    proptest! {
        #[test]
        fn correlator_phase_recovers_two_level_phase(theta in 0.05f64..1.5, dphi in -3.13f64..3.13) {
            prop_assume!(dphi.abs() > 0.01);
            let n = 3;
            let mut psi = vec![ZERO; 8];
            psi[single_excitation_index(n, 0)] = C64::new(theta.cos(), 0.0);
            psi[single_excitation_index(n, 2)] = C64::from_polar(theta.sin(), dphi);
            let rho = pure_density(&psi);
            let xx = xx_correlator(&rho, n, 0, 2);
            let sz = |i| sz_expectation(&rho, n, i);
            let got = phase_from_correlations(xx, sz(0), sz(2), TURNING_POINT_EPS).unwrap().value().unwrap();
            prop_assert!((got - dphi.abs()).abs() < 1e-10 || theta.sin() * theta.cos() <= TURNING_POINT_EPS);
            prop_assert!((wavefunction_phase(&rho, n, 0, 2) - dphi).abs() < 1e-12);
        }

        #[test]
        fn current_is_real_for_any_state(re in prop::collection::vec(-1.0f64..1.0, 8), im in prop::collection::vec(-1.0f64..1.0, 8), flux in -3.0f64..3.0) {
            let mut s = SpinState::basis(3, 0);
            s.amplitudes = re.iter().zip(&im).map(|(a, b)| C64::new(*a, *b)).collect();
            let nrm = s.norm();
            prop_assume!(nrm > 1e-3);
            s.amplitudes.iter_mut().for_each(|a| *a /= nrm);
            prop_assert!(chiral_current(&s, &flux_triangle(0.8, flux).unwrap()).is_ok());
        }
    }
}
