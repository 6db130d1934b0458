// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Periodic piecewise-constant drive protocols.
//!
//! Every local potential is an integer multiple of `μ0 = π/Δ`, so on each
//! segment `μ_i(t) = k_i μ0` and the accumulated phase
//! `χ_i(t) = ∫₀ᵗ μ_i` is piecewise linear.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::floquet::pair_average;
use crate::linalg::C64;

/// One constant stretch of the drive.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Duration in units of `Δ`.
    pub units: f64,
    /// Per-ion integer multipliers `k_i` of `μ0`.
    pub multipliers: Vec<i32>,
}

impl Segment {
    pub fn new(units: f64, multipliers: &[i32]) -> Self {
        Self { units, multipliers: multipliers.to_vec() }
    }
}

/// How strong the drive is relative to the undriven couplings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveScale {
    pub j_rms: f64,
    pub mu0_over_jrms: f64,
    pub b0_over_jrms: f64,
}

impl DriveScale {
    pub fn new(j_rms: f64, mu0_over_jrms: f64, b0_over_jrms: f64) -> Self {
        Self { j_rms, mu0_over_jrms, b0_over_jrms }
    }

    /// Time unit `Δ = π/μ0`.
    pub fn delta(&self) -> f64 {
        PI / (self.mu0_over_jrms * self.j_rms)
    }
}

/// A `T`-periodic drive `H_B(t) = Σ_i [B0 + μ_i(t)] σ_i^z`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveProtocol {
    delta: f64,
    mu0_over_jrms: f64,
    b0_over_jrms: f64,
    tau_over_delta: f64,
    segments: Vec<Segment>,
}

impl DriveProtocol {
    pub fn new(
        delta: f64,
        mu0_over_jrms: f64,
        b0_over_jrms: f64,
        tau_over_delta: f64,
        segments: Vec<Segment>,
    ) -> Result<Self> {
        let p = Self { delta, mu0_over_jrms, b0_over_jrms, tau_over_delta, segments };
        p.validate()?;
        Ok(p)
    }

    /// A single constant segment of length `Δ` with all multipliers zero.
    pub fn undriven(n_ions: usize, scale: &DriveScale) -> Result<Self> {
        Self::new(
            scale.delta(),
            scale.mu0_over_jrms,
            scale.b0_over_jrms,
            0.0,
            vec![Segment::new(1.0, &vec![0; n_ions])],
        )
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidProtocol(m));
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.mu0_over_jrms > 0.0 && self.mu0_over_jrms.is_finite()) {
            return bad("mu0_over_jrms must be positive".into());
        }
        if !self.b0_over_jrms.is_finite() {
            return bad("b0_over_jrms must be finite".into());
        }
        if !(0.0..1.0).contains(&self.tau_over_delta) {
            return bad(format!("tau must satisfy 0 <= tau < delta, got tau/delta = {}", self.tau_over_delta));
        }
        let Some(first) = self.segments.first() else {
            return bad("protocol needs at least one segment".into());
        };
        let n = first.multipliers.len();
        if n == 0 {
            return bad("segments need at least one ion".into());
        }
        for (k, s) in self.segments.iter().enumerate() {
            if s.multipliers.len() != n {
                return bad(format!("segment {k} has {} multipliers, expected {n}", s.multipliers.len()));
            }
            if !(s.units > 0.0 && s.units.is_finite()) {
                return bad(format!("segment {k} has non-positive duration {}", s.units));
            }
            let whole = (s.units - s.units.round()).abs() < 1e-12;
            let frac = (s.units - self.tau_over_delta).abs() < 1e-12
                || (s.units - (1.0 - self.tau_over_delta)).abs() < 1e-12;
            if !whole && !frac {
                return bad(format!(
                    "segment {k} duration {} is neither a multiple of delta nor tau or delta - tau",
                    s.units
                ));
            }
        }
        Ok(())
    }

    pub fn n_ions(&self) -> usize {
        self.segments[0].multipliers.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `μ0 = π/Δ` (rad/s).
    pub fn mu0(&self) -> f64 {
        PI / self.delta
    }

    pub fn j_rms(&self) -> f64 {
        self.mu0() / self.mu0_over_jrms
    }

    pub fn b0(&self) -> f64 {
        self.b0_over_jrms * self.j_rms()
    }

    pub fn mu0_over_jrms(&self) -> f64 {
        self.mu0_over_jrms
    }

    pub fn b0_over_jrms(&self) -> f64 {
        self.b0_over_jrms
    }

    pub fn tau_over_delta(&self) -> f64 {
        self.tau_over_delta
    }

    pub fn tau(&self) -> f64 {
        self.tau_over_delta * self.delta
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Durations in seconds.
    pub fn durations(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.units * self.delta).collect()
    }

    /// Period `T = Σ durations`.
    pub fn period(&self) -> f64 {
        self.segments.iter().map(|s| s.units).sum::<f64>() * self.delta
    }

    /// Segment start times within one period, plus the period itself.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut t = vec![0.0];
        let mut acc = 0.0;
        for s in &self.segments {
            acc += s.units;
            t.push(acc * self.delta);
        }
        t
    }

    /// Index of the segment active at time `t` (periodic, right-continuous).
    pub fn segment_at(&self, t: f64) -> usize {
        let period = self.period();
        let local = t.rem_euclid(period);
        let bp = self.breakpoints();
        bp[1..].iter().position(|&b| local < b).unwrap_or(self.segments.len() - 1)
    }

    /// Local potentials `μ_i(t)` (rad/s), without `B0`.
    pub fn potentials_at(&self, t: f64) -> Vec<f64> {
        let mu0 = self.mu0();
        self.segments[self.segment_at(t)].multipliers.iter().map(|&k| k as f64 * mu0).collect()
    }

    /// Total per-ion fields `B0 + μ_i(t)` on segment `k`.
    pub fn segment_fields(&self, k: usize) -> Vec<f64> {
        let (mu0, b0) = (self.mu0(), self.b0());
        self.segments[k].multipliers.iter().map(|&m| b0 + m as f64 * mu0).collect()
    }

    /// Same protocol with fields rescaled; `Δ` follows from `μ0Δ = π`.
    pub fn with_scale(&self, scale: &DriveScale) -> Result<Self> {
        Self::new(
            scale.delta(),
            scale.mu0_over_jrms,
            scale.b0_over_jrms,
            self.tau_over_delta,
            self.segments.clone(),
        )
    }

    /// Structured-text form: `key = value` header, then one
    /// `duration_units multiplier_1 ... multiplier_N` line per segment.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "delta = {:?}", self.delta);
        let _ = writeln!(s, "mu0_over_jrms = {:?}", self.mu0_over_jrms);
        let _ = writeln!(s, "b0_over_jrms = {:?}", self.b0_over_jrms);
        let _ = writeln!(s, "tau_over_delta = {:?}", self.tau_over_delta);
        for seg in &self.segments {
            let _ = write!(s, "{:?}", seg.units);
            for k in &seg.multipliers {
                let _ = write!(s, " {k}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut header = [None::<f64>; 4];
        const KEYS: [&str; 4] = ["delta", "mu0_over_jrms", "b0_over_jrms", "tau_over_delta"];
        let mut segments = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { line: lineno + 1, msg };
            if let Some((key, value)) = line.split_once('=') {
                let key = key.trim();
                let slot = KEYS
                    .iter()
                    .position(|k| *k == key)
                    .ok_or_else(|| perr(format!("unknown header key `{key}`")))?;
                let v: f64 = value.trim().parse().map_err(|_| perr(format!("bad number for `{key}`")))?;
                header[slot] = Some(v);
            } else {
                let mut tokens = line.split_whitespace();
                let units: f64 = tokens
                    .next()
                    .unwrap()
                    .parse()
                    .map_err(|_| perr("bad segment duration".into()))?;
                let multipliers = tokens
                    .map(|t| t.parse::<i32>().map_err(|_| perr(format!("bad multiplier `{t}`"))))
                    .collect::<Result<Vec<_>>>()?;
                segments.push(Segment { units, multipliers });
            }
        }
        let get = |k: usize| {
            header[k].ok_or_else(|| Error::Parse { line: 0, msg: format!("missing header key `{}`", KEYS[k]) })
        };
        Self::new(get(0)?, get(1)?, get(2)?, get(3)?, segments)
    }
}

/// Reference three-ion flux protocol, period `5Δ`:
/// `(τ, (2,0,1))`, `(2Δ, (0,1,0))`, `(Δ−τ, (2,0,1))`, `(Δ, (0,0,2))`, `(Δ, (1,0,0))`.
///
/// To first order this gives `|J'_13| = (2/5)|J_13|` with phase `+2πτ/Δ`
/// and real `J'_12 = J_12/5`, `J'_23 = J_23/5`. The construction is checked
/// against the averaged couplings and fails if any of these is not met.
pub fn flux_protocol(tau_over_delta: f64, scale: &DriveScale) -> Result<DriveProtocol> {
    let tau = tau_over_delta;
    let mut segments = Vec::with_capacity(5);
    if tau > 0.0 {
        segments.push(Segment::new(tau, &[2, 0, 1]));
    }
    segments.push(Segment::new(2.0, &[0, 1, 0]));
    segments.push(Segment::new(1.0 - tau, &[2, 0, 1]));
    segments.push(Segment::new(1.0, &[0, 0, 2]));
    segments.push(Segment::new(1.0, &[1, 0, 0]));
    let p = DriveProtocol::new(scale.delta(), scale.mu0_over_jrms, scale.b0_over_jrms, tau, segments)?;

    let first_block: f64 = p.segments[..p.segments.len() - 2].iter().map(|s| s.units).sum();
    let a13 = pair_average(&p, 0, 2);
    let a12 = pair_average(&p, 0, 1);
    let a23 = pair_average(&p, 1, 2);
    let phase = wrap_phase(a13.arg() - 2.0 * PI * tau);
    let checks = [
        ((first_block - 3.0).abs(), "first block lasts 3Δ"),
        ((a13.norm() - 0.4).abs(), "|J'_13| = 2/5 |J_13|"),
        ((a12 - C64::new(0.2, 0.0)).norm(), "J'_12 = J_12/5"),
        ((a23 - C64::new(0.2, 0.0)).norm(), "J'_23 = J_23/5"),
        (phase.abs(), "arg J'_13 = 2πτ/Δ"),
    ];
    for (err, what) in checks {
        if err > 1e-10 {
            return Err(Error::ProtocolSelfCheck(format!("{what} violated by {err:.3e}")));
        }
    }
    Ok(p)
}

/// Double-well protocol, period `2Δ`: the centre ion sits at `2μ0`
/// throughout; ions 1 and 3 differ by `μ0` outside `(τ, τ+Δ]` and are both
/// zero inside it. Gives `J'_13 = (J_13/2) e^{2πiτ/Δ}` and `J'_12 = J'_23 = 0`.
pub fn double_well_protocol(tau_over_delta: f64, scale: &DriveScale) -> Result<DriveProtocol> {
    let tau = tau_over_delta;
    let mut segments = Vec::with_capacity(3);
    if tau > 0.0 {
        segments.push(Segment::new(tau, &[1, 2, 0]));
    }
    segments.push(Segment::new(1.0, &[0, 2, 0]));
    segments.push(Segment::new(1.0 - tau, &[1, 2, 0]));
    let p = DriveProtocol::new(scale.delta(), scale.mu0_over_jrms, scale.b0_over_jrms, tau, segments)?;
    let a13 = pair_average(&p, 0, 2);
    let expected = C64::from_polar(0.5, 2.0 * PI * tau);
    let err = (a13 - expected).norm().max(pair_average(&p, 0, 1).norm()).max(pair_average(&p, 1, 2).norm());
    if err > 1e-10 {
        return Err(Error::ProtocolSelfCheck(format!("double-well averages off by {err:.3e}")));
    }
    Ok(p)
}

/// Wrap an angle to `(-π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// `∫₀ᵈ exp(i(φ0 + s t)) dt`, stable for any slope including `s → 0`.
pub fn linear_phase_integral(phi0: f64, slope: f64, d: f64) -> C64 {
    let half = 0.5 * slope * d;
    let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
    C64::from_polar(d * sinc, phi0 + half)
}

/// Piecewise-linear phase accumulators `χ_i(t)`.
#[derive(Debug, Clone)]
pub struct PhaseProfile {
    /// Segment start times with the period appended.
    pub breakpoints: Vec<f64>,
    /// `values[k][i] = χ_i(breakpoints[k])`.
    pub values: Vec<Vec<f64>>,
    /// `slopes[k][i] = k_i μ0` on segment `k`.
    pub slopes: Vec<Vec<f64>>,
}

impl PhaseProfile {
    pub fn n_ions(&self) -> usize {
        self.values[0].len()
    }

    pub fn period(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// `χ_i(T)`.
    pub fn winding(&self, ion: usize) -> f64 {
        self.values.last().unwrap()[ion]
    }

    /// `χ_i(t)` for any `t ≥ 0`, using `χ_i(t + T) = χ_i(t) + χ_i(T)`.
    pub fn eval(&self, ion: usize, t: f64) -> f64 {
        let period = self.period();
        let cycles = (t / period).floor();
        let mut local = t - cycles * period;
        if local >= period {
            local = 0.0;
        }
        let k = self.breakpoints[1..].partition_point(|&b| b <= local).min(self.slopes.len() - 1);
        cycles * self.winding(ion) + self.values[k][ion] + self.slopes[k][ion] * (local - self.breakpoints[k])
    }

    pub fn eval_all(&self, t: f64) -> Vec<f64> {
        (0..self.n_ions()).map(|i| self.eval(i, t)).collect()
    }
}

/// Exact phase profile of a protocol.
pub fn chi_profile(protocol: &DriveProtocol) -> PhaseProfile {
    let n = protocol.n_ions();
    let mu0 = protocol.mu0();
    let breakpoints = protocol.breakpoints();
    let mut values = vec![vec![0.0; n]];
    let mut slopes = Vec::new();
    for (seg, d) in protocol.segments().iter().zip(protocol.durations()) {
        let slope: Vec<f64> = seg.multipliers.iter().map(|&k| k as f64 * mu0).collect();
        let prev = values.last().unwrap();
        let next = prev.iter().zip(&slope).map(|(c, s)| c + s * d).collect();
        values.push(next);
        slopes.push(slope);
    }
    PhaseProfile { breakpoints, values, slopes }
}

/// Residuals of the two-excitation (counter-rotating) terms,
/// `|∫₀^T̃ exp[2i(2B0 t + χ_i + χ_j)] dt| / T̃`, per pair.
#[derive(Debug, Clone)]
pub struct RwaValidity {
    pub pairs: Vec<((usize, usize), f64)>,
    /// Integration window `T̃`.
    pub window: f64,
    /// `false` when no joint period was found within the search limit and the
    /// protocol period was used instead.
    pub commensurate: bool,
    pub threshold: f64,
}

impl RwaValidity {
    pub fn max_residual(&self) -> f64 {
        self.pairs.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_residual() < self.threshold
    }
}

pub const DEFAULT_RWA_THRESHOLD: f64 = 0.05;
const MAX_JOINT_PERIODS: usize = 4096;

pub fn rwa_validity_check(protocol: &DriveProtocol, threshold: f64) -> Result<RwaValidity> {
    let b0 = protocol.b0();
    if !(b0 > 0.0) {
        return Err(Error::InvalidProtocol("validity check needs B0 > 0".into()));
    }
    let profile = chi_profile(protocol);
    let n = protocol.n_ions();
    let period = protocol.period();
    let durations = protocol.durations();

    // One period of the integrand contributes I_1; later periods repeat it
    // with an extra phase θ per period.
    let pair_period = |i: usize, j: usize| -> (C64, f64) {
        let mut acc = C64::new(0.0, 0.0);
        for (k, d) in durations.iter().enumerate() {
            let t0 = profile.breakpoints[k];
            let phi0 = 2.0 * (2.0 * b0 * t0 + profile.values[k][i] + profile.values[k][j]);
            let slope = 2.0 * (2.0 * b0 + profile.slopes[k][i] + profile.slopes[k][j]);
            acc += linear_phase_integral(phi0, slope, *d);
        }
        let theta = 2.0 * (2.0 * b0 * period + profile.winding(i) + profile.winding(j));
        (acc, theta)
    };

    // Joint period: smallest n with n·θ ≡ 0 (mod 2π) for every pair.
    let thetas: Vec<f64> =
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| pair_period(i, j).1).collect();
    let joint = (1..=MAX_JOINT_PERIODS).find(|&m| {
        thetas.iter().all(|th| wrap_phase(m as f64 * th).abs() < 1e-9 * (m as f64).max(1.0))
    });
    let (periods, commensurate) = match joint {
        Some(m) => (m, true),
        None => (1, false),
    };
    let window = periods as f64 * period;
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (one, theta) = pair_period(i, j);
            let geometric: C64 = (0..periods).map(|m| C64::from_polar(1.0, m as f64 * theta)).sum();
            pairs.push(((i, j), (one * geometric).norm() / window));
        }
    }
    Ok(RwaValidity { pairs, window, commensurate, threshold })
}
