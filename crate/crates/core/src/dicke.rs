// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Full spin–phonon dynamics with truncated Fock spaces.
//!
//! Lab frame:
//! `H(t) = Σ_m ω_m a_m†a_m + sin(ωt) Σ_{i,m} Ω_i η_im σ_i^x (a_m + a_m†) + Σ_i (B0 + μ_i(t)) σ_i^z`.
//!
//! Beat-note frame (phonons rotating at `ω`, terms at `ω + ω_m` dropped):
//! `H = −Σ_m δ_m a_m†a_m + Σ_{i,m} (Ω_i η_im / 2) σ_i^x · (−i)(a_m − a_m†) + Σ_i (B0 + μ_i(t)) σ_i^z`,
//! which is constant on every drive segment.
//!
//! Basis index: `spin · P + phonon`, with `P = n_max^M` and mode 0 (the
//! centre-of-mass mode) the most significant phonon digit.

use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::chain::{detunings, ModeData, TrapSpec};
use crate::error::{Error, Result};
use crate::evolve::SampleGrid;
use crate::krylov::{krylov_expm_step, KrylovSettings};
use crate::linalg::{norm, HermitianOperator, SparseMatrix, C64, ZERO};
use crate::protocol::DriveProtocol;
use crate::spin::{is_excited, ion_bit, SpinState};

pub const DEFAULT_DIM_CAP: usize = 1 << 21;
pub const DEFAULT_N_MAX: usize = 4;
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Lab,
    Rotating,
}

impl Frame {
    pub fn as_str(&self) -> &'static str {
        match self {
            Frame::Lab => "lab",
            Frame::Rotating => "rwa",
        }
    }
}

impl FromStr for Frame {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "lab" => Ok(Frame::Lab),
            "rwa" | "rotating" => Ok(Frame::Rotating),
            o => Err(format!("unknown frame `{o}` (expected lab or rwa)")),
        }
    }
}

/// Fock truncation: occupations `0..n_max` per mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockSpec {
    pub n_max: usize,
    pub dim_cap: usize,
}

impl Default for FockSpec {
    fn default() -> Self {
        Self { n_max: DEFAULT_N_MAX, dim_cap: DEFAULT_DIM_CAP }
    }
}

impl FockSpec {
    pub fn new(n_max: usize) -> Self {
        Self { n_max, ..Default::default() }
    }

    pub fn phonon_dim(&self, n_modes: usize) -> usize {
        self.n_max.pow(n_modes as u32)
    }

    pub fn total_dim(&self, n_ions: usize) -> usize {
        (1usize << n_ions).saturating_mul(self.phonon_dim(n_ions))
    }

    pub fn validate(&self, n_ions: usize) -> Result<()> {
        if self.n_max < 2 {
            return Err(Error::config("fock.n_max", "n_max must be at least 2"));
        }
        let dim = (1u128 << n_ions) * (self.n_max as u128).pow(n_ions as u32);
        if dim > self.dim_cap as u128 {
            let mut best = 1;
            while (1u128 << n_ions) * ((best + 1) as u128).pow(n_ions as u32) <= self.dim_cap as u128 {
                best += 1;
            }
            return Err(Error::DimensionCap { dim: dim.min(usize::MAX as u128) as usize, cap: self.dim_cap, suggested_n_max: best });
        }
        Ok(())
    }

    /// Occupation of `mode` in phonon index `p`.
    pub fn occupation(&self, n_modes: usize, p: usize, mode: usize) -> usize {
        p / self.n_max.pow((n_modes - 1 - mode) as u32) % self.n_max
    }

    pub fn phonon_index(&self, occupations: &[usize]) -> usize {
        occupations.iter().fold(0, |acc, &n| acc * self.n_max + n)
    }
}

/// Amplitudes over the spin ⊗ phonon basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FullState {
    pub n_ions: usize,
    pub fock: FockSpec,
    pub amplitudes: Vec<C64>,
}

impl FullState {
    /// `|spin⟩ ⊗ |n_1, ..., n_M⟩`.
    pub fn product(spin: &SpinState, fock: FockSpec, occupations: &[usize]) -> Result<Self> {
        fock.validate(spin.n_ions)?;
        if occupations.len() != spin.n_ions || occupations.iter().any(|&n| n >= fock.n_max) {
            return Err(Error::InvalidPlan("phonon occupations out of range".into()));
        }
        let pd = fock.phonon_dim(spin.n_ions);
        let p = fock.phonon_index(occupations);
        let mut amplitudes = vec![ZERO; spin.amplitudes.len() * pd];
        for (s, a) in spin.amplitudes.iter().enumerate() {
            amplitudes[s * pd + p] = *a;
        }
        Ok(Self { n_ions: spin.n_ions, fock, amplitudes })
    }

    pub fn vacuum(spin: &SpinState, fock: FockSpec) -> Result<Self> {
        Self::product(spin, fock, &vec![0; spin.n_ions])
    }

    pub fn phonon_dim(&self) -> usize {
        self.fock.phonon_dim(self.n_ions)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// Spin density matrix with the phonons traced out.
    pub fn reduced_spin(&self) -> DMatrix<C64> {
        let pd = self.phonon_dim();
        let ds = 1usize << self.n_ions;
        let a = &self.amplitudes;
        DMatrix::from_fn(ds, ds, |r, c| (0..pd).map(|p| a[r * pd + p] * a[c * pd + p].conj()).sum())
    }
}

/// `Σ_m ⟨a_m† a_m⟩`.
pub fn phonon_number(state: &FullState) -> f64 {
    let pd = state.phonon_dim();
    let n = state.n_ions;
    let totals: Vec<f64> =
        (0..pd).map(|p| (0..n).map(|m| state.fock.occupation(n, p, m)).sum::<usize>() as f64).collect();
    state.amplitudes.iter().enumerate().map(|(k, a)| a.norm_sqr() * totals[k % pd]).sum()
}

/// The static pieces of the Dicke Hamiltonian for one frame.
#[derive(Debug, Clone)]
pub struct DickeSystem {
    pub n_ions: usize,
    pub fock: FockSpec,
    pub frame: Frame,
    /// Beat note `ω`.
    pub beat_note: f64,
    /// Phonon energy of each phonon index.
    phonon_energy: Vec<f64>,
    /// Spin–phonon coupling without the time factor.
    coupling: SparseMatrix,
    /// Largest retained angular frequency of the bare terms.
    fastest: f64,
}

impl DickeSystem {
    pub fn new(modes: &ModeData, spec: &TrapSpec, fock: FockSpec, frame: Frame) -> Result<Self> {
        let n = spec.n_ions;
        fock.validate(n)?;
        let m_count = modes.n_modes();
        let pd = fock.phonon_dim(m_count);
        let dim = (1usize << n) * pd;
        let beat = spec.beat_note();
        let det = detunings(modes, spec);
        let freq: Vec<f64> = match frame {
            Frame::Lab => modes.mode_freqs.clone(),
            Frame::Rotating => det.iter().map(|d| -d).collect(),
        };
        let phonon_energy = (0..pd)
            .map(|p| (0..m_count).map(|m| freq[m] * fock.occupation(m_count, p, m) as f64).sum())
            .collect();

        // Quadrature operator per mode: a + a† (lab) or −i(a − a†)/2 (rotating).
        let mut t = Vec::new();
        for m in 0..m_count {
            let stride = fock.n_max.pow((m_count - 1 - m) as u32);
            for p in 0..pd {
                let occ = fock.occupation(m_count, p, m);
                if occ + 1 >= fock.n_max {
                    continue;
                }
                let up = p + stride;
                let amp = ((occ + 1) as f64).sqrt();
                // ⟨occ+1| X |occ⟩ and its conjugate.
                let (raise, lower) = match frame {
                    Frame::Lab => (C64::new(amp, 0.0), C64::new(amp, 0.0)),
                    Frame::Rotating => (C64::new(0.0, 0.5 * amp), C64::new(0.0, -0.5 * amp)),
                };
                for i in 0..n {
                    let g = spec.rabi[i] * modes.lamb_dicke[(i, m)];
                    if g == 0.0 {
                        continue;
                    }
                    let flip = ion_bit(n, i);
                    for s in 0..(1usize << n) {
                        let sp = s ^ flip;
                        t.push((sp * pd + up, s * pd + p, raise * g));
                        t.push((sp * pd + p, s * pd + up, lower * g));
                    }
                }
            }
        }
        let coupling = SparseMatrix::from_triplets(dim, t);
        let fastest = match frame {
            Frame::Lab => beat.max(freq.iter().fold(0.0f64, |a, b| a.max(b.abs()))),
            Frame::Rotating => freq.iter().fold(0.0f64, |a, b| a.max(b.abs())),
        };
        Ok(Self { n_ions: n, fock, frame, beat_note: beat, phonon_energy, coupling, fastest })
    }

    pub fn dim(&self) -> usize {
        (1usize << self.n_ions) * self.phonon_energy.len()
    }

    /// Fastest retained frequency, including the spin fields of `protocol`.
    pub fn fastest_frequency(&self, protocol: &DriveProtocol) -> f64 {
        let field = (0..protocol.segments().len())
            .flat_map(|k| protocol.segment_fields(k))
            .fold(0.0f64, |a, b| a.max(2.0 * b.abs()));
        self.fastest.max(field)
    }

    /// Prefactor of the coupling term at time `t`.
    pub fn coupling_factor(&self, t: f64) -> f64 {
        match self.frame {
            Frame::Lab => (self.beat_note * t).sin(),
            Frame::Rotating => 1.0,
        }
    }

    fn diagonal(&self, fields: &[f64]) -> Vec<f64> {
        let n = self.n_ions;
        let pd = self.phonon_energy.len();
        let spin: Vec<f64> = (0..1usize << n)
            .map(|s| (0..n).map(|i| if is_excited(n, s, i) { fields[i] } else { -fields[i] }).sum())
            .collect();
        (0..self.dim()).map(|k| spin[k / pd] + self.phonon_energy[k % pd]).collect()
    }

    /// Generator at time `t` with the given per-ion fields `B0 + μ_i`.
    pub fn generator(&self, t: f64, fields: &[f64]) -> DickeGenerator<'_> {
        DickeGenerator { diag: self.diagonal(fields), coupling: &self.coupling, factor: self.coupling_factor(t) }
    }
}

/// `diag + factor · K`, applied matrix-free.
pub struct DickeGenerator<'a> {
    diag: Vec<f64>,
    coupling: &'a SparseMatrix,
    factor: f64,
}

impl DickeGenerator<'_> {
    pub fn to_sparse(&self) -> SparseMatrix {
        let n = self.diag.len();
        let d = SparseMatrix::from_triplets(n, self.diag.iter().enumerate().map(|(k, v)| (k, k, C64::new(*v, 0.0))).collect());
        d.add(&self.coupling.scaled(C64::new(self.factor, 0.0)))
    }
}

impl HermitianOperator for DickeGenerator<'_> {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for ((yk, xk), d) in y.iter_mut().zip(x).zip(&self.diag) {
            *yk = xk * d;
        }
        if self.factor != 0.0 {
            self.coupling.apply_add(C64::new(self.factor, 0.0), x, y);
        }
    }
}

/// Assemble the full Hamiltonian at time `t` as a sparse matrix.
pub fn build_dicke_hamiltonian(
    t: f64,
    modes: &ModeData,
    spec: &TrapSpec,
    fock: FockSpec,
    frame: Frame,
    fields: &[f64],
) -> Result<SparseMatrix> {
    if fields.len() != spec.n_ions {
        return Err(Error::DimensionMismatch { expected: spec.n_ions, got: fields.len() });
    }
    Ok(DickeSystem::new(modes, spec, fock, frame)?.generator(t, fields).to_sparse())
}

#[derive(Debug, Clone)]
pub struct EvolutionPlan {
    pub grid: SampleGrid,
    /// Samples per period of the fastest retained frequency (at least 20).
    pub oversampling: f64,
    /// Optional hard cap on the step, seconds.
    pub max_step: Option<f64>,
    pub krylov: KrylovSettings,
    pub norm_limit: f64,
}

impl EvolutionPlan {
    pub fn new(grid: SampleGrid) -> Self {
        Self { grid, oversampling: 20.0, max_step: None, krylov: KrylovSettings::default(), norm_limit: NORM_DRIFT_LIMIT }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.oversampling >= 20.0) {
            return Err(Error::InvalidPlan(format!("oversampling must be at least 20, got {}", self.oversampling)));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidPlan("sample grid is empty".into()));
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) {
                return Err(Error::InvalidPlan("max_step must be positive".into()));
            }
        }
        Ok(())
    }

    /// Step bound for a system with the given fastest frequency.
    pub fn step_bound(&self, fastest: f64) -> f64 {
        let b = if fastest > 0.0 { 2.0 * std::f64::consts::PI / (fastest * self.oversampling) } else { f64::INFINITY };
        self.max_step.map_or(b, |m| m.min(b))
    }
}

/// Sampled output of one Dicke run.
#[derive(Debug, Clone)]
pub struct DickeOutput {
    pub rho: Vec<DMatrix<C64>>,
    pub phonons: Vec<f64>,
    pub norms: Vec<f64>,
    pub steps: usize,
    pub max_norm_drift: f64,
    pub final_state: FullState,
}

/// Time-ordered evolution with the generator frozen at each step midpoint.
/// Steps never straddle a drive breakpoint.
pub fn evolve_dicke(
    system: &DickeSystem,
    state: &FullState,
    protocol: &DriveProtocol,
    plan: &EvolutionPlan,
) -> Result<DickeOutput> {
    plan.validate()?;
    if state.amplitudes.len() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), got: state.amplitudes.len() });
    }
    if protocol.n_ions() != system.n_ions {
        return Err(Error::DimensionMismatch { expected: system.n_ions, got: protocol.n_ions() });
    }
    let h_max = plan.step_bound(system.fastest_frequency(protocol));
    let period = protocol.period();
    let bp = protocol.breakpoints();
    let n_seg = protocol.segments().len();
    let seg_fields: Vec<Vec<f64>> = (0..n_seg).map(|k| protocol.segment_fields(k)).collect();
    let norm0 = state.norm();

    let mut psi = state.amplitudes.clone();
    let mut t = 0.0f64;
    let mut out = DickeOutput {
        rho: Vec::with_capacity(plan.grid.len()),
        phonons: Vec::with_capacity(plan.grid.len()),
        norms: Vec::with_capacity(plan.grid.len()),
        steps: 0,
        max_norm_drift: 0.0,
        final_state: state.clone(),
    };
    let mut cur = state.clone();
    // Rotating frame: one generator per segment, reused.
    let cached: Option<Vec<DickeGenerator<'_>>> = (system.frame == Frame::Rotating)
        .then(|| seg_fields.iter().map(|f| system.generator(0.0, f)).collect());

    for &target in &plan.grid.times {
        while target - t > 1e-12 * h_max.min(period) {
            let cycles = (t / period).floor();
            let local = t - cycles * period;
            let mut k = bp[1..].partition_point(|&b| b <= local).min(n_seg - 1);
            let mut seg_end = cycles * period + bp[k + 1];
            if seg_end - t <= 1e-12 * period {
                k = (k + 1) % n_seg;
                seg_end = if k == 0 { (cycles + 1.0) * period + bp[1] } else { cycles * period + bp[k + 1] };
            }
            let stop = seg_end.min(target);
            let span = stop - t;
            let n_steps = (span / h_max).ceil().max(1.0) as usize;
            let dt = span / n_steps as f64;
            for s in 0..n_steps {
                let t0 = t + s as f64 * dt;
                let (next, _) = match &cached {
                    Some(g) => krylov_expm_step(&g[k], &psi, dt, &plan.krylov),
                    None => krylov_expm_step(&system.generator(t0 + 0.5 * dt, &seg_fields[k]), &psi, dt, &plan.krylov),
                }
                .map_err(|e| match e {
                    Error::Krylov(_) => Error::Stiffness { min_step: dt / f64::powi(2.0, plan.krylov.max_splits as i32) },
                    o => o,
                })?;
                psi = next;
            }
            out.steps += n_steps;
            t = stop;
            let drift = (norm(&psi) - norm0).abs();
            out.max_norm_drift = out.max_norm_drift.max(drift);
            if drift > plan.norm_limit {
                return Err(Error::NormDrift { drift, limit: plan.norm_limit, t });
            }
        }
        cur.amplitudes.clone_from(&psi);
        out.rho.push(cur.reduced_spin());
        out.phonons.push(phonon_number(&cur));
        out.norms.push(cur.norm());
    }
    out.final_state = cur;
    Ok(out)
}

/// Bose–Einstein weights over Fock configurations, truncated to `n_max` and
/// renormalised; configurations below `1e-6` are dropped.
pub fn thermal_configurations(nbar: &[f64], fock: FockSpec) -> Vec<(Vec<usize>, f64)> {
    let m_count = nbar.len();
    let pd = fock.phonon_dim(m_count);
    let per_mode: Vec<Vec<f64>> = nbar
        .iter()
        .map(|&nb| {
            let x = if nb > 0.0 { nb / (1.0 + nb) } else { 0.0 };
            let w: Vec<f64> = (0..fock.n_max).map(|n| x.powi(n as i32)).collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|v| v / z).collect()
        })
        .collect();
    let mut confs: Vec<(Vec<usize>, f64)> = (0..pd)
        .map(|p| {
            let occ: Vec<usize> = (0..m_count).map(|m| fock.occupation(m_count, p, m)).collect();
            let w = occ.iter().enumerate().map(|(m, &n)| per_mode[m][n]).product();
            (occ, w)
        })
        .filter(|(_, w)| *w >= 1e-6)
        .collect();
    let z: f64 = confs.iter().map(|c| c.1).sum();
    confs.iter_mut().for_each(|c| c.1 /= z);
    confs
}

/// Thermal initial phonons: incoherent average over Fock configurations.
pub fn evolve_dicke_thermal(
    system: &DickeSystem,
    spin: &SpinState,
    nbar: &[f64],
    protocol: &DriveProtocol,
    plan: &EvolutionPlan,
) -> Result<DickeOutput> {
    let confs = thermal_configurations(nbar, system.fock);
    let runs: Vec<(f64, DickeOutput)> = confs
        .par_iter()
        .map(|(occ, w)| {
            let s = FullState::product(spin, system.fock, occ)?;
            Ok((*w, evolve_dicke(system, &s, protocol, plan)?))
        })
        .collect::<Result<_>>()?;
    let (w0, first) = &runs[0];
    let mut acc = DickeOutput {
        rho: first.rho.iter().map(|r| r * C64::new(*w0, 0.0)).collect(),
        phonons: first.phonons.iter().map(|v| v * w0).collect(),
        norms: first.norms.iter().map(|v| v * w0).collect(),
        steps: first.steps,
        max_norm_drift: first.max_norm_drift,
        final_state: first.final_state.clone(),
    };
    for (w, r) in &runs[1..] {
        for (a, b) in acc.rho.iter_mut().zip(&r.rho) {
            *a += b * C64::new(*w, 0.0);
        }
        acc.phonons.iter_mut().zip(&r.phonons).for_each(|(a, b)| *a += w * b);
        acc.norms.iter_mut().zip(&r.norms).for_each(|(a, b)| *a += w * b);
        acc.steps += r.steps;
        acc.max_norm_drift = acc.max_norm_drift.max(r.max_norm_drift);
    }
    Ok(acc)
}
