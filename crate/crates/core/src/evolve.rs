// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Spin-only time evolution with exact per-segment exponentials.
//!
//! Frames: the Ising tier is in the frame of the optical transition (fields
//! `B0 + μ_i` explicit). The XX tier drops `B0` and keeps `μ_i`. The `h_eff`
//! and averaged tiers live in the drive frame where both are removed. All
//! frames differ by diagonal phases, so populations agree directly and
//! coherences agree after [`to_drive_frame`].

use std::str::FromStr;

use nalgebra::DMatrix;

use crate::chain::CouplingMatrix;
use crate::error::{Error, Result};
use crate::floquet::{averaged_couplings, drive_frame_phases, exact_effective_hamiltonian, segment_generators};
use crate::linalg::{HermitianEigen, C64};
use crate::protocol::{chi_profile, DriveProtocol};
use crate::spin::{build_field, build_ising, build_xx, is_excited, SpinState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpinTier {
    /// `H_J + Σ_i (B0 + μ_i(t)) σ_i^z`.
    Ising,
    /// `H_XX(J) + Σ_i μ_i(t) σ_i^z`.
    Xx,
    /// Exact stroboscopic Hamiltonian, time independent.
    HEff,
    /// `H_XX(J')` with first-order averaged couplings, time independent.
    XxAveraged,
}

impl SpinTier {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpinTier::Ising => "ising",
            SpinTier::Xx => "xx",
            SpinTier::HEff => "h_eff",
            SpinTier::XxAveraged => "xx_avg",
        }
    }
}

impl FromStr for SpinTier {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "ising" => Ok(SpinTier::Ising),
            "xx" => Ok(SpinTier::Xx),
            "h_eff" | "heff" => Ok(SpinTier::HEff),
            "xx_avg" | "averaged" => Ok(SpinTier::XxAveraged),
            o => Err(format!("unknown spin tier `{o}`")),
        }
    }
}

/// Sample times, each flagged if it is a stroboscopic time `mT`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub times: Vec<f64>,
    pub strobe: Vec<bool>,
}

impl SampleGrid {
    /// `per_period` equally spaced samples per period over `n_periods`
    /// periods; every `per_period`-th sample is stroboscopic.
    pub fn stroboscopic(period: f64, n_periods: usize, per_period: usize) -> Self {
        let per = per_period.max(1);
        let total = n_periods * per;
        let times = (0..=total).map(|k| period * k as f64 / per as f64).collect();
        let strobe = (0..=total).map(|k| k % per == 0).collect();
        Self { times, strobe }
    }

    /// Stroboscopic grid covering at least `t_end`.
    pub fn covering(period: f64, t_end: f64, per_period: usize) -> Self {
        let n = (t_end / period - 1e-9).ceil().max(1.0) as usize;
        Self::stroboscopic(period, n, per_period)
    }

    /// Arbitrary sorted times; a time is stroboscopic if it is within
    /// `1e-9 T` of a multiple of `period`.
    pub fn from_times(times: Vec<f64>, period: f64) -> Result<Self> {
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|t| *t < 0.0) {
            return Err(Error::InvalidPlan("sample times must be sorted and non-negative".into()));
        }
        let strobe = times
            .iter()
            .map(|t| {
                let x = t / period;
                (x - x.round()).abs() < 1e-9
            })
            .collect();
        Ok(Self { times, strobe })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn strobe_times(&self) -> Vec<f64> {
        self.times.iter().zip(&self.strobe).filter(|(_, s)| **s).map(|(t, _)| *t).collect()
    }
}

/// Evolve under a `T`-periodic piecewise-constant generator, returning the
/// state at each grid time. Segment `k` lasts `durations[k]`.
pub fn evolve_piecewise(gens: &[HermitianEigen], durations: &[f64], psi0: &[C64], grid: &SampleGrid) -> Vec<Vec<C64>> {
    let period: f64 = durations.iter().sum();
    let mut bp = vec![0.0];
    for d in durations {
        bp.push(bp.last().unwrap() + d);
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut psi = psi0.to_vec();
    let mut t = 0.0f64;
    for &target in &grid.times {
        while target - t > 1e-15 * period.max(target) {
            let cycles = (t / period).floor();
            let local = t - cycles * period;
            let mut k = bp[1..].partition_point(|&b| b <= local + 1e-14 * period).min(durations.len() - 1);
            let mut seg_end = cycles * period + bp[k + 1];
            if seg_end - t <= 1e-14 * period {
                k = (k + 1) % durations.len();
                seg_end = if k == 0 { (cycles + 1.0) * period + bp[1] } else { cycles * period + bp[k + 1] };
            }
            let stop = seg_end.min(target);
            psi = gens[k].evolve(&psi, stop - t);
            t = stop;
        }
        out.push(psi.clone());
    }
    out
}

/// Phases mapping a `tier` state at time `t` into the drive frame.
pub fn frame_phases(tier: SpinTier, protocol: &DriveProtocol, t: f64) -> Vec<C64> {
    match tier {
        SpinTier::Ising => {
            let n = protocol.n_ions();
            let b0t = protocol.b0() * t;
            drive_frame_phases(protocol, t)
                .into_iter()
                .enumerate()
                .map(|(s, p)| {
                    let k = (0..n).filter(|&i| is_excited(n, s, i)).count() as f64;
                    p * C64::from_polar(1.0, b0t * (2.0 * k - n as f64))
                })
                .collect()
        }
        SpinTier::Xx => drive_frame_phases(protocol, t),
        SpinTier::HEff | SpinTier::XxAveraged => vec![C64::new(1.0, 0.0); 1 << protocol.n_ions()],
    }
}

/// A state of the given tier expressed in the drive frame.
pub fn to_drive_frame(tier: SpinTier, protocol: &DriveProtocol, t: f64, psi: &[C64]) -> Vec<C64> {
    frame_phases(tier, protocol, t).iter().zip(psi).map(|(p, x)| p * x).collect()
}

fn generators(tier: SpinTier, j: &CouplingMatrix, protocol: &DriveProtocol) -> Result<(Vec<DMatrix<C64>>, Vec<f64>)> {
    Ok(match tier {
        SpinTier::Ising => {
            let h = build_ising(j)?;
            let g = (0..protocol.segments().len())
                .map(|k| h.add(&build_field(&protocol.segment_fields(k))).to_dense())
                .collect();
            (g, protocol.durations())
        }
        SpinTier::Xx => (segment_generators(j, protocol)?, protocol.durations()),
        SpinTier::HEff => (vec![exact_effective_hamiltonian(j, protocol)?.to_dense()], vec![protocol.period()]),
        SpinTier::XxAveraged => {
            let avg = averaged_couplings(j, protocol)?;
            (vec![build_xx(&avg.couplings)?.to_dense()], vec![protocol.period()])
        }
    })
}

/// Spin-space evolution of `psi0` under one tier. States are returned in the
/// tier's own frame.
pub fn evolve_spin(
    tier: SpinTier,
    j: &CouplingMatrix,
    protocol: &DriveProtocol,
    psi0: &SpinState,
    grid: &SampleGrid,
) -> Result<Vec<SpinState>> {
    if psi0.n_ions != protocol.n_ions() || j.n() != protocol.n_ions() {
        return Err(Error::DimensionMismatch { expected: protocol.n_ions(), got: psi0.n_ions });
    }
    let (gens, durations) = generators(tier, j, protocol)?;
    let eig: Vec<HermitianEigen> = gens.iter().map(HermitianEigen::new).collect();
    let states = evolve_piecewise(&eig, &durations, &psi0.amplitudes, grid);
    Ok(states.into_iter().map(|a| SpinState { n_ions: psi0.n_ions, amplitudes: a }).collect())
}

/// `χ_i(t)` helper re-exported for callers that build their own frames.
pub fn chi_at(protocol: &DriveProtocol, t: f64) -> Vec<f64> {
    chi_profile(protocol).eval_all(t)
}
