// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Scenario runner: config in, CSV tables plus a metadata sidecar out.
//!
//! Every output directory gets a `metadata.toml` that echoes the full config,
//! the derived physical scales and the conventions the tables depend on.
//! Table bodies carry no timestamps, so repeated runs are byte-identical.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::chain::{spin_spin_couplings, CouplingMatrix, ModeData, TrapSpec};
use crate::config::{ProtocolKind, RunConfig, Tier};
use crate::dicke::{evolve_dicke, DickeSystem, EvolutionPlan, FullState};
use crate::error::{Error, Result};
use crate::evolve::{evolve_spin, SampleGrid, SpinTier};
use crate::floquet::{
    averaged_couplings, coupling_discrepancy, discrepancy_csv, exact_effective_couplings, log_log_slope,
    EffectiveCouplings,
};
use crate::observables::{
    edge_weight, expected_double_well_phases, rabi_period_fit, flux_grid, flux_scan, phase_from_correlations, plateaus,
    trajectory_deviation, wavefunction_phase, xx_correlator, PhaseSample, Trajectory, TrajectoryLabel,
    PLATEAU_THRESHOLD, TURNING_POINT_EPS,
};
use crate::protocol::{wrap_phase, DriveProtocol};
use crate::spin::SpinState;

/// Drive strengths of the Floquet scaling table, in units of `J_rms`.
pub const SCALING_GRID: [f64; 5] = [5.0, 10.0, 20.0, 40.0, 80.0];
/// Points of the flux scan over `[−π, π]`.
pub const FLUX_POINTS: usize = 241;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Fig1d,
    Fig2,
    Fig3,
    Fig4,
    FloquetScaling,
}

impl Scenario {
    pub const ALL: [Scenario; 5] =
        [Scenario::Fig1d, Scenario::Fig2, Scenario::Fig3, Scenario::Fig4, Scenario::FloquetScaling];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Fig1d => "fig1d",
            Scenario::Fig2 => "fig2",
            Scenario::Fig3 => "fig3",
            Scenario::Fig4 => "fig4",
            Scenario::FloquetScaling => "floquet-scaling",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::config("scenario", format!("unknown scenario `{s}`")))
    }
}

/// Anything a sweep can repeat.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Couplings,
    FloquetCheck,
    Evolve,
    Spectrum,
    Phase,
    Scenario(Scenario),
}

impl FromStr for Action {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "couplings" => Action::Couplings,
            "floquet-check" => Action::FloquetCheck,
            "evolve" => Action::Evolve,
            "spectrum" => Action::Spectrum,
            "phase" => Action::Phase,
            o => Action::Scenario(o.parse()?),
        })
    }
}

/// Trap, modes, couplings and drive derived from one config.
#[derive(Debug, Clone)]
pub struct Physics {
    pub spec: TrapSpec,
    pub modes: ModeData,
    pub j: CouplingMatrix,
    pub protocol: DriveProtocol,
    pub averaged: EffectiveCouplings,
}

impl Physics {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.trap();
        let modes = ModeData::compute(&spec)?;
        let j = spin_spin_couplings(&modes, &spec)?;
        let protocol = cfg.build_protocol(j.j_rms)?;
        let averaged = averaged_couplings(&j, &protocol)?;
        Ok(Self { spec, modes, j, protocol, averaged })
    }

    /// Sample grid spanning `cfg.window_jrms / J_rms`.
    pub fn grid(&self, cfg: &RunConfig) -> SampleGrid {
        SampleGrid::covering(self.protocol.period(), cfg.window_jrms / self.j.j_rms, cfg.samples_per_period)
    }
}

/// Files written by one action, metadata sidecar included.
#[derive(Debug, Clone, Default)]
pub struct OutputSet {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl OutputSet {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, body)?;
        self.files.push(path);
        Ok(())
    }
}

/// Flat `key = value` sidecar.
#[derive(Debug, Clone, Default)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.entries.push((key.into(), toml_float(v)));
        self
    }

    pub fn int(&mut self, key: &str, v: i64) -> &mut Self {
        self.entries.push((key.into(), v.to_string()));
        self
    }

    pub fn text(&mut self, key: &str, v: &str) -> &mut Self {
        self.entries.push((key.into(), format!("\"{}\"", v.replace('\\', "\\\\").replace('"', "\\\""))));
        self
    }

    pub fn list(&mut self, key: &str, v: &[f64]) -> &mut Self {
        let items: Vec<String> = v.iter().map(|x| toml_float(*x)).collect();
        self.entries.push((key.into(), format!("[{}]", items.join(", "))));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k} = {v}");
            s
        })
    }
}

fn toml_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:e}")
    }
}

fn hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

/// Config echo, physical constants, derived scales and conventions.
pub fn base_metadata(cfg: &RunConfig, phys: &Physics, action: &str) -> Metadata {
    let mut m = Metadata::default();
    m.text("action", action);
    for key in crate::config::KEYS {
        let v = cfg.get(key).expect("listed key");
        if v.parse::<f64>().is_ok() {
            m.entries.push(((*key).into(), v));
        } else {
            m.text(key, &v);
        }
    }
    m.text("config.sha256", &cfg.hash());
    m.num("constant.elementary_charge_c", crate::chain::ELEMENTARY_CHARGE)
        .num("constant.vacuum_permittivity_f_per_m", crate::chain::VACUUM_PERMITTIVITY)
        .num("constant.atomic_mass_unit_kg", crate::chain::ATOMIC_MASS_UNIT)
        .num("derived.length_scale_m", phys.spec.length_scale())
        .list("derived.positions", &phys.modes.positions)
        .list("derived.mode_freqs_hz", &phys.modes.mode_freqs.iter().map(|w| hz(*w)).collect::<Vec<_>>())
        .num("derived.beat_note_hz", hz(phys.spec.beat_note()))
        .num("derived.j_rms_hz", hz(phys.j.j_rms))
        .num("derived.mu0_rad_per_s", phys.protocol.mu0())
        .num("derived.b0_rad_per_s", phys.protocol.b0())
        .num("derived.delta_s", phys.protocol.delta())
        .num("derived.period_s", phys.protocol.period());
    let pair = |c: &CouplingMatrix, a: usize, b: usize| c.get(a, b);
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let (x, y) = (pair(&phys.j, a, b), pair(&phys.averaged.couplings, a, b));
        m.num(&format!("derived.j_{}{}_hz", a + 1, b + 1), hz(x.re))
            .num(&format!("derived.jeff_{}{}_abs_hz", a + 1, b + 1), hz(y.norm()))
            .num(&format!("derived.jeff_{}{}_arg", a + 1, b + 1), y.arg());
    }
    if let Some(f) = phys.averaged.flux {
        m.num("derived.loop_flux", f);
    }
    m.text("convention.pair", "unordered pairs; single-excitation block entry equals J'_ij")
        .text("convention.basis", "ion 1 is the most significant bit; excited means sigma_z = +1")
        .text("convention.flux", "arg(J'_13 J'_32 J'_21)")
        .text("convention.frame.ising", "lab, with B0 and mu_i(t)")
        .text("convention.frame.xx", "B0 removed")
        .text("convention.frame.h_eff", "drive frame exp(+i sum chi_i sigma_z)")
        .text("convention.frame.dicke", cfg.frame.as_str())
        .int("convention.dicke.n_max", cfg.n_max as i64)
        .text("convention.time", "t in seconds; t_jrms = t * J_rms");
    m
}

fn label(tier: Tier, cfg: &RunConfig) -> TrajectoryLabel {
    let frame = match tier {
        Tier::Spin(SpinTier::Ising) => "lab",
        Tier::Spin(SpinTier::Xx) => "interaction",
        Tier::Spin(_) => "drive",
        Tier::Dicke => cfg.frame.as_str(),
    };
    TrajectoryLabel { tier: tier.as_str().into(), frame: frame.into() }
}

/// Evolve one tier from an excitation on ion 1 (phonon vacuum for Dicke).
pub fn run_tier(tier: Tier, cfg: &RunConfig, phys: &Physics, grid: &SampleGrid) -> Result<Trajectory> {
    run_tier_from(tier, cfg, phys, grid, &SpinState::single_excitation(phys.spec.n_ions, 0))
}

pub fn run_tier_from(
    tier: Tier,
    cfg: &RunConfig,
    phys: &Physics,
    grid: &SampleGrid,
    psi0: &SpinState,
) -> Result<Trajectory> {
    let current = Some(&phys.averaged.couplings);
    match tier {
        Tier::Spin(t) => {
            let states = evolve_spin(t, &phys.j, &phys.protocol, psi0, grid)?;
            Trajectory::from_states(label(tier, cfg), grid, &states, current, phys.j.j_rms)
        }
        Tier::Dicke => {
            let sys = DickeSystem::new(&phys.modes, &phys.spec, cfg.fock(), cfg.frame)?;
            let state = FullState::vacuum(psi0, cfg.fock())?;
            let out = evolve_dicke(&sys, &state, &phys.protocol, &EvolutionPlan::new(grid.clone()))?;
            Trajectory::from_density(label(tier, cfg), grid, out.rho, out.phonons, current, phys.j.j_rms)
        }
    }
}

pub fn couplings(cfg: &RunConfig, out: &Path) -> Result<OutputSet> {
    let phys = Physics::new(cfg)?;
    let mut o = OutputSet::new(out)?;
    o.write("mode_freqs.csv", &phys.modes.to_csv())?;
    o.write("couplings.csv", &phys.j.to_csv())?;
    o.write("effective_couplings.csv", &phys.averaged.couplings.to_csv())?;
    o.write("metadata.toml", &base_metadata(cfg, &phys, "couplings").to_text())?;
    Ok(o)
}

/// Averaged against exact couplings for the configured drive, plus the table
/// over [`SCALING_GRID`].
pub fn floquet_check(cfg: &RunConfig, out: &Path) -> Result<OutputSet> {
    let phys = Physics::new(cfg)?;
    let exact = exact_effective_couplings(&phys.j, &phys.protocol)?;
    let mut o = OutputSet::new(out)?;
    let mut table = String::from("i,j,avg_re,avg_im,exact_re,exact_im,rel_amp_error,phase_error\n");
    for a in 0..phys.j.n() {
        for b in (a + 1)..phys.j.n() {
            let (x, y) = (phys.averaged.couplings.get(a, b), exact.couplings.get(a, b));
            let amp = if x.norm() > 0.0 { (y.norm() - x.norm()).abs() / x.norm() } else { y.norm() / phys.j.j_rms };
            let ph = if x.norm() > 0.0 { wrap_phase(y.arg() - x.arg()).abs() } else { 0.0 };
            let _ = writeln!(table, "{},{},{:e},{:e},{:e},{:e},{:e},{:e}", a + 1, b + 1, x.re, x.im, y.re, y.im, amp, ph);
        }
    }
    o.write("effective_couplings.csv", &table)?;
    let (reports, mut meta) = scaling_table(cfg, &phys)?;
    if let Some(f) = exact.flux {
        meta.num("floquet.exact_loop_flux", f);
    }
    o.write("discrepancy.csv", &discrepancy_csv(&reports))?;
    o.write("metadata.toml", &meta.to_text())?;
    Ok(o)
}

fn scaling_table(cfg: &RunConfig, phys: &Physics) -> Result<(Vec<crate::floquet::DiscrepancyReport>, Metadata)> {
    let reports = coupling_discrepancy(&phys.j, &phys.protocol, &SCALING_GRID)?;
    let x: Vec<f64> = reports.iter().map(|r| r.mu0_over_jrms).collect();
    let amp: Vec<f64> = reports.iter().map(|r| r.amp_error).collect();
    let ph: Vec<f64> = reports.iter().map(|r| r.phase_error).collect();
    let mut meta = base_metadata(cfg, phys, "floquet-check");
    meta.list("floquet.mu0_grid", &x)
        .num("floquet.amp_slope", log_log_slope(&x, &amp))
        .num("floquet.phase_slope", log_log_slope(&x, &ph));
    Ok((reports, meta))
}

/// One trajectory CSV per configured tier.
pub fn evolve(cfg: &RunConfig, out: &Path) -> Result<(OutputSet, Vec<Trajectory>)> {
    let phys = Physics::new(cfg)?;
    let grid = phys.grid(cfg);
    let mut o = OutputSet::new(out)?;
    let mut trajs = Vec::new();
    let mut meta = base_metadata(cfg, &phys, "evolve");
    for &tier in &cfg.tiers {
        let t = run_tier(tier, cfg, &phys, &grid)?;
        meta.num(&format!("result.{}.max_norm_drift", tier.as_str()), t.max_norm_drift());
        o.write(&format!("trajectory_{}.csv", tier.as_str()), &t.to_csv())?;
        trajs.push(t);
    }
    meta.int("run.samples", grid.len() as i64).num("run.t_end_s", grid.end());
    o.write("metadata.toml", &meta.to_text())?;
    Ok((o, trajs))
}

/// Flux scan of a uniform triangle, energies in units of `|J'|`.
pub fn spectrum(cfg: &RunConfig, out: &Path) -> Result<OutputSet> {
    let phys = Physics::new(cfg)?;
    let scan = flux_scan(1.0, &flux_grid(FLUX_POINTS))?;
    let mut o = OutputSet::new(out)?;
    o.write("flux_scan.csv", &scan.to_csv())?;
    let mut meta = base_metadata(cfg, &phys, "spectrum");
    meta.text("spectrum.energy_unit", "|J'|").int("spectrum.points", FLUX_POINTS as i64);
    o.write("metadata.toml", &meta.to_text())?;
    Ok(o)
}

/// Relative phase of the two edge ions sampled at stroboscopic times.
#[derive(Debug, Clone)]
pub struct PhaseSeries {
    pub times: Vec<f64>,
    pub weight: Vec<f64>,
    pub ising_wf: Vec<f64>,
    pub dicke_wf: Option<Vec<f64>>,
    pub dicke_corr: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct DoubleWellRun {
    pub tau_over_delta: f64,
    pub expected: (f64, f64),
    /// Rabi period `π/|J'_13|` of the averaged model.
    pub t_osc: f64,
    pub ising: Trajectory,
    /// Flip-flop model with the drive kept, where the two-level picture is derived.
    pub xx: Trajectory,
    pub dicke: Option<Trajectory>,
    pub series: PhaseSeries,
}

impl DoubleWellRun {
    pub fn ising_plateaus(&self) -> Vec<f64> {
        plateaus(&self.series.ising_wf, &self.series.weight, PLATEAU_THRESHOLD)
    }

    pub fn dicke_wf_plateaus(&self) -> Option<Vec<f64>> {
        let w = dicke_weights(self);
        self.series.dicke_wf.as_ref().map(|v| plateaus(v, &w, PLATEAU_THRESHOLD))
    }

    pub fn dicke_corr_plateaus(&self) -> Option<Vec<f64>> {
        let w = dicke_weights(self);
        self.series.dicke_corr.as_ref().map(|v| plateaus(v, &w, PLATEAU_THRESHOLD))
    }

    /// Rabi period fitted to the stroboscopic populations of the XX tier.
    pub fn measured_rabi_period(&self) -> f64 {
        rabi_period_fit(&self.xx, self.t_osc)
    }

    pub fn ising_rabi_period(&self) -> f64 {
        rabi_period_fit(&self.ising, self.t_osc)
    }

    /// Largest center-ion population over every sample of the spin tiers.
    pub fn max_center_population(&self) -> f64 {
        [&self.ising, &self.xx].iter().flat_map(|t| t.pops.iter().map(|p| p[1])).fold(0.0, f64::max)
    }
}

fn dicke_weights(run: &DoubleWellRun) -> Vec<f64> {
    match &run.dicke {
        Some(d) => strobe_indices(d).map(|k| edge_weight(&d.rho[k], d.n_ions, 0, 2)).collect(),
        None => Vec::new(),
    }
}

fn strobe_indices(t: &Trajectory) -> impl Iterator<Item = usize> + '_ {
    (0..t.len()).filter(|&k| t.strobe[k])
}

fn folded_phase(rho: &nalgebra::DMatrix<crate::C64>, n: usize) -> f64 {
    wrap_phase(wavefunction_phase(rho, n, 0, 2)).abs()
}

/// Double-well run in the Ising tier, plus the Dicke tier when the config
/// lists it. The window is `1.25 T_osc` unless the config asks for longer.
pub fn double_well(cfg: &RunConfig) -> Result<DoubleWellRun> {
    let mut cfg = cfg.clone();
    cfg.protocol = ProtocolKind::DoubleWell;
    let phys = Physics::new(&cfg)?;
    let t_osc = PI / phys.averaged.couplings.get(0, 2).norm();
    let t_end = (1.25 * t_osc).max(cfg.window_jrms / phys.j.j_rms);
    let grid = SampleGrid::covering(phys.protocol.period(), t_end, cfg.samples_per_period);
    let ising = run_tier(Tier::Spin(SpinTier::Ising), &cfg, &phys, &grid)?;
    let xx = run_tier(Tier::Spin(SpinTier::Xx), &cfg, &phys, &grid)?;
    let dicke = cfg.tiers.contains(&Tier::Dicke).then(|| run_tier(Tier::Dicke, &cfg, &phys, &grid)).transpose()?;
    let n = phys.spec.n_ions;
    let idx: Vec<usize> = strobe_indices(&ising).collect();
    let mut series = PhaseSeries {
        times: idx.iter().map(|&k| grid.times[k]).collect(),
        weight: idx.iter().map(|&k| edge_weight(&ising.rho[k], n, 0, 2)).collect(),
        ising_wf: idx.iter().map(|&k| folded_phase(&ising.rho[k], n)).collect(),
        dicke_wf: None,
        dicke_corr: None,
    };
    if let Some(d) = &dicke {
        series.dicke_wf = Some(idx.iter().map(|&k| folded_phase(&d.rho[k], n)).collect());
        let corr = idx
            .iter()
            .map(|&k| {
                let xx = xx_correlator(&d.rho[k], n, 0, 2);
                Ok(match phase_from_correlations(xx, d.sz[k][0], d.sz[k][2], TURNING_POINT_EPS)? {
                    PhaseSample::Valid(v) => v,
                    PhaseSample::TurningPoint => f64::NAN,
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        series.dicke_corr = Some(corr);
    }
    Ok(DoubleWellRun {
        tau_over_delta: cfg.tau_over_delta,
        expected: expected_double_well_phases(cfg.tau_over_delta),
        t_osc,
        ising,
        xx,
        dicke,
        series,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.12e}"),
        _ => "nan".into(),
    }
}

pub fn phase(cfg: &RunConfig, out: &Path) -> Result<(OutputSet, DoubleWellRun)> {
    let run = double_well(cfg)?;
    let mut dw = cfg.clone();
    dw.protocol = ProtocolKind::DoubleWell;
    let phys = Physics::new(&dw)?;
    let s = &run.series;
    let mut body = String::from("t,t_jrms,edge_weight,ising_wf,dicke_wf,dicke_corr\n");
    for k in 0..s.times.len() {
        let _ = writeln!(
            body,
            "{:e},{:.9e},{:.12e},{:.12e},{},{}",
            s.times[k],
            s.times[k] * phys.j.j_rms,
            s.weight[k],
            s.ising_wf[k],
            fmt_opt(s.dicke_wf.as_ref().map(|v| v[k])),
            fmt_opt(s.dicke_corr.as_ref().map(|v| v[k])),
        );
    }
    let mut o = OutputSet::new(out)?;
    o.write("phase.csv", &body)?;
    o.write("trajectory_ising.csv", &run.ising.to_csv())?;
    if let Some(d) = &run.dicke {
        o.write("trajectory_dicke.csv", &d.to_csv())?;
    }
    let mut meta = base_metadata(&dw, &phys, "phase");
    meta.list("phase.expected", &[run.expected.0, run.expected.1])
        .num("phase.t_osc_s", run.t_osc)
        .num("phase.measured_rabi_period_s", run.measured_rabi_period())
        .num("phase.ising_rabi_period_s", run.ising_rabi_period())
        .num("phase.max_center_population", run.max_center_population())
        .list("phase.ising_wf_plateaus", &run.ising_plateaus())
        .num("phase.turning_point_eps", TURNING_POINT_EPS)
        .num("phase.plateau_weight_threshold", PLATEAU_THRESHOLD);
    if let Some(p) = run.dicke_wf_plateaus() {
        meta.list("phase.dicke_wf_plateaus", &p);
    }
    if let Some(p) = run.dicke_corr_plateaus() {
        meta.list("phase.dicke_corr_plateaus", &p);
    }
    o.write("metadata.toml", &meta.to_text())?;
    Ok((o, run))
}

/// Ising and Dicke at `Φ = π/2` and `Φ = 0` with their stroboscopic deviation.
fn fig2(cfg: &RunConfig, out: &Path) -> Result<OutputSet> {
    let mut o = OutputSet::new(out)?;
    let mut devs = Vec::new();
    let mut meta = None;
    for (tag, tau) in [("phi_pi2", 0.25), ("phi_0", 0.0)] {
        let mut c = cfg.clone();
        c.protocol = ProtocolKind::Flux;
        c.tau_over_delta = tau;
        let phys = Physics::new(&c)?;
        let grid = phys.grid(&c);
        let ising = run_tier(Tier::Spin(SpinTier::Ising), &c, &phys, &grid)?;
        let dicke = run_tier(Tier::Dicke, &c, &phys, &grid)?;
        o.write(&format!("trajectory_ising_{tag}.csv"), &ising.to_csv())?;
        o.write(&format!("trajectory_dicke_{tag}.csv"), &dicke.to_csv())?;
        devs.push((phys.j.j_rms, trajectory_deviation(&ising, &dicke)?));
        meta.get_or_insert_with(|| base_metadata(&c, &phys, "fig2"));
    }
    let mut body = String::from("t,t_jrms,dev_phi_pi2,dev_phi_0\n");
    let (j_rms, a) = &devs[0];
    let b = &devs[1].1;
    for (x, y) in a.iter().zip(b) {
        let _ = writeln!(body, "{:e},{:.9e},{:.12e},{:.12e}", x.0, x.0 * j_rms, x.1, y.1);
    }
    o.write("deviation.csv", &body)?;
    let mut meta = meta.expect("two runs");
    meta.num("fig2.final_dev_phi_pi2", a.last().map_or(0.0, |x| x.1))
        .num("fig2.final_dev_phi_0", b.last().map_or(0.0, |x| x.1));
    o.write("metadata.toml", &meta.to_text())?;
    Ok(o)
}

pub fn run_scenario(scenario: Scenario, cfg: &RunConfig, out: &Path) -> Result<OutputSet> {
    match scenario {
        Scenario::Fig1d => {
            let mut c = cfg.clone();
            c.protocol = ProtocolKind::Flux;
            c.tiers = vec![Tier::Spin(SpinTier::Ising), Tier::Spin(SpinTier::Xx)];
            Ok(evolve(&c, out)?.0)
        }
        Scenario::Fig2 => fig2(cfg, out),
        Scenario::Fig3 => spectrum(cfg, out),
        Scenario::Fig4 => {
            let mut c = cfg.clone();
            c.tau_over_delta = 1.0 / 3.0;
            if !c.tiers.contains(&Tier::Dicke) {
                c.tiers.push(Tier::Dicke);
            }
            Ok(phase(&c, out)?.0)
        }
        Scenario::FloquetScaling => {
            let phys = Physics::new(cfg)?;
            let (reports, mut meta) = scaling_table(cfg, &phys)?;
            meta.text("action", "floquet-scaling");
            let mut o = OutputSet::new(out)?;
            o.write("discrepancy.csv", &discrepancy_csv(&reports))?;
            o.write("metadata.toml", &meta.to_text())?;
            Ok(o)
        }
    }
}

pub fn run_action(action: Action, cfg: &RunConfig, out: &Path) -> Result<OutputSet> {
    match action {
        Action::Couplings => couplings(cfg, out),
        Action::FloquetCheck => floquet_check(cfg, out),
        Action::Evolve => Ok(evolve(cfg, out)?.0),
        Action::Spectrum => spectrum(cfg, out),
        Action::Phase => Ok(phase(cfg, out)?.0),
        Action::Scenario(s) => run_scenario(s, cfg, out),
    }
}

/// Resolve a full dotted key or an unambiguous last segment
/// (`tau_over_delta` → `protocol.tau_over_delta`).
pub fn resolve_key(name: &str) -> Result<&'static str> {
    if let Some(k) = crate::config::KEYS.iter().find(|k| **k == name) {
        return Ok(k);
    }
    let hits: Vec<&'static str> =
        crate::config::KEYS.iter().copied().filter(|k| k.rsplit('.').next() == Some(name)).collect();
    match hits.as_slice() {
        [k] => Ok(k),
        [] => Err(Error::config(name, "not a config key")),
        _ => Err(Error::config(name, "ambiguous key; use the dotted path")),
    }
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub index: usize,
    pub value: String,
    pub config_hash: String,
    pub dir: PathBuf,
    pub error: Option<(i32, String)>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub parameter: String,
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    pub fn failed(&self) -> usize {
        self.entries.iter().filter(|e| e.error.is_some()).count()
    }

    pub fn index_csv(&self) -> String {
        let mut s = String::from("run,parameter,value,config_sha256,status,dir,error\n");
        for e in &self.entries {
            let (status, msg) = match &e.error {
                None => ("ok", String::new()),
                Some((_, m)) => ("failed", m.replace(['"', '\n'], "'")),
            };
            let dir = e.dir.file_name().map(|d| d.to_string_lossy().into_owned()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{status},{dir},\"{msg}\"", e.index, self.parameter, e.value, e.config_hash);
        }
        s
    }
}

/// Run `action` once per value of `parameter`, concurrently, each in its own
/// `run_NNN` directory under `out`. Failures are recorded and the sweep
/// carries on; `index.csv` lists every run.
pub fn sweep(parameter: &str, values: &[String], base: &RunConfig, action: Action, out: &Path) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::config("sweep.values", "value list is empty"));
    }
    let key = resolve_key(parameter)?;
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|v| {
            let mut c = base.clone();
            c.set(key, v)?;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    std::fs::create_dir_all(out)?;
    let entries: Vec<SweepEntry> = configs
        .into_par_iter()
        .enumerate()
        .map(|(i, mut c)| {
            let dir = out.join(format!("run_{i:03}"));
            c.out_dir = dir.clone();
            let error = c.validate().and_then(|_| run_action(action, &c, &dir)).err().map(|e| (e.exit_code(), e.to_string()));
            SweepEntry { index: i, value: values[i].clone(), config_hash: c.hash(), dir, error }
        })
        .collect();
    let report = SweepReport { parameter: key.to_string(), entries };
    std::fs::write(out.join("index.csv"), report.index_csv())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> RunConfig {
        RunConfig { window_jrms: 2.0, ..RunConfig::default() }
    }

    #[test]
    fn scenario_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.as_str().parse::<Scenario>().unwrap(), s);
        }
        assert!("fig9".parse::<Scenario>().is_err());
        assert_eq!("evolve".parse::<Action>().unwrap(), Action::Evolve);
        assert_eq!("fig3".parse::<Action>().unwrap(), Action::Scenario(Scenario::Fig3));
    }

    #[test]
    fn key_resolution() {
        assert_eq!(resolve_key("tau_over_delta").unwrap(), "protocol.tau_over_delta");
        assert_eq!(resolve_key("fock.n_max").unwrap(), "fock.n_max");
        assert!(resolve_key("nonsense").is_err());
    }

    #[test]
    fn evolve_is_deterministic_and_echoes_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick();
        let (a, _) = evolve(&cfg, &dir.path().join("a")).unwrap();
        let (b, _) = evolve(&cfg, &dir.path().join("b")).unwrap();
        for (x, y) in a.files.iter().zip(&b.files) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
        }
        let meta = std::fs::read_to_string(a.dir.join("metadata.toml")).unwrap();
        for key in crate::config::KEYS {
            assert!(meta.contains(&format!("{key} = ")), "{key} missing");
        }
        for key in ["convention.pair", "convention.frame.dicke", "convention.dicke.n_max", "derived.j_rms_hz"] {
            assert!(meta.contains(key), "{key} missing");
        }
        let _: toml::Table = meta.parse().unwrap();
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<String> = ["0", "1/4", "0.5"].iter().map(|s| s.to_string()).collect();
        let r = sweep("tau_over_delta", &values, &quick(), Action::Couplings, dir.path()).unwrap();
        assert_eq!(r.failed(), 0);
        let index = std::fs::read_to_string(dir.path().join("index.csv")).unwrap();
        assert_eq!(index.lines().count(), 4);
        assert!(sweep("tau_over_delta", &[], &quick(), Action::Couplings, dir.path()).is_err());
        let bad = sweep("mu0_over_jrms", &["20".into(), "-1".into()], &quick(), Action::Couplings, &dir.path().join("bad"))
            .unwrap();
        assert_eq!(bad.failed(), 1);
        assert!(bad.entries[0].error.is_none());
    }

    #[test]
    fn sweep_is_order_independent() {
        let dir = tempfile::tempdir().unwrap();
        let v1: Vec<String> = vec!["0".into(), "0.25".into()];
        let v2: Vec<String> = vec!["0.25".into(), "0".into()];
        let a = sweep("tau_over_delta", &v1, &quick(), Action::Evolve, &dir.path().join("a")).unwrap();
        let b = sweep("tau_over_delta", &v2, &quick(), Action::Evolve, &dir.path().join("b")).unwrap();
        for (i, j) in [(0, 1), (1, 0)] {
            let x = std::fs::read(a.entries[i].dir.join("trajectory_ising.csv")).unwrap();
            let y = std::fs::read(b.entries[j].dir.join("trajectory_ising.csv")).unwrap();
            assert_eq!(x, y);
            assert_eq!(a.entries[i].config_hash, b.entries[j].config_hash);
        }
    }
}
