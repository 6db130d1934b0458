// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! First-order averaged couplings and the exact stroboscopic Hamiltonian.
//!
//! Going to the interaction picture of the drive, `σ_i^+ → e^{2iχ_i(t)} σ_i^+`
//! and the XX model acquires time-dependent couplings
//! `J_ij e^{2i(χ_i − χ_j)}`. Averaging over one period gives `J'_ij`. The
//! exact counterpart is the principal generator of the one-period evolution in
//! the same frame.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::chain::CouplingMatrix;
use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, principal_generator, C64, ZERO};
use crate::protocol::{chi_profile, linear_phase_integral, wrap_phase, DriveProtocol, DriveScale};
use crate::spin::{build_field, build_xx, is_excited, single_excitation_block, SpinOperator};

/// Margin to ±π below which eigenphases are treated as folded.
pub const FOLDING_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    FirstOrder,
    Exact,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::FirstOrder => "first-order",
            Provenance::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EffectiveCouplings {
    pub couplings: CouplingMatrix,
    pub provenance: Provenance,
    /// `arg(J'_13 J'_32 J'_21)` for three ions.
    pub flux: Option<f64>,
}

impl EffectiveCouplings {
    fn new(couplings: CouplingMatrix, provenance: Provenance) -> Self {
        let flux = couplings.loop_flux();
        Self { couplings, provenance, flux }
    }
}

/// `(1/T) ∫₀ᵀ e^{2i(χ_i − χ_j)} dt` in closed form.
pub fn pair_average(protocol: &DriveProtocol, i: usize, j: usize) -> C64 {
    let prof = chi_profile(protocol);
    let mut acc = ZERO;
    for (k, d) in protocol.durations().iter().enumerate() {
        let phi0 = 2.0 * (prof.values[k][i] - prof.values[k][j]);
        let slope = 2.0 * (prof.slopes[k][i] - prof.slopes[k][j]);
        acc += linear_phase_integral(phi0, slope, *d);
    }
    acc / protocol.period()
}

fn check_size(j: &CouplingMatrix, protocol: &DriveProtocol) -> Result<()> {
    if j.n() != protocol.n_ions() {
        return Err(Error::DimensionMismatch { expected: protocol.n_ions(), got: j.n() });
    }
    Ok(())
}

/// First-order (time-averaged) couplings `J'_ij = J_ij ⟨e^{2i(χ_i − χ_j)}⟩`.
pub fn averaged_couplings(j: &CouplingMatrix, protocol: &DriveProtocol) -> Result<EffectiveCouplings> {
    check_size(j, protocol)?;
    let n = j.n();
    let mut m = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let v = j.get(a, b) * pair_average(protocol, a, b);
            m[(a, b)] = v;
            m[(b, a)] = v.conj();
        }
    }
    Ok(EffectiveCouplings::new(CouplingMatrix::from_complex(m)?, Provenance::FirstOrder))
}

/// Constant generators `H_XX(J) + Σ_i k_i μ0 σ_i^z` of each segment, in the
/// frame rotating with `B0` only.
pub fn segment_generators(j: &CouplingMatrix, protocol: &DriveProtocol) -> Result<Vec<DMatrix<C64>>> {
    check_size(j, protocol)?;
    let hxx = build_xx(j)?;
    let mu0 = protocol.mu0();
    Ok(protocol
        .segments()
        .iter()
        .map(|s| {
            let f: Vec<f64> = s.multipliers.iter().map(|&k| k as f64 * mu0).collect();
            hxx.add(&build_field(&f)).to_dense()
        })
        .collect())
}

/// Diagonal of `Ũ(t)† = exp(+i Σ_i χ_i(t) σ_i^z)`, the map from the `B0`
/// frame into the drive frame.
pub fn drive_frame_phases(protocol: &DriveProtocol, t: f64) -> Vec<C64> {
    let chi = chi_profile(protocol).eval_all(t);
    let n = chi.len();
    (0..1usize << n)
        .map(|s| {
            let arg: f64 = (0..n).map(|i| if is_excited(n, s, i) { chi[i] } else { -chi[i] }).sum();
            C64::from_polar(1.0, arg)
        })
        .collect()
}

/// One-period propagator in the drive frame, `Ũ(T)† Π_k exp(−i H_k d_k)`.
pub fn floquet_operator(j: &CouplingMatrix, protocol: &DriveProtocol) -> Result<DMatrix<C64>> {
    let gens = segment_generators(j, protocol)?;
    let dim = gens[0].nrows();
    let mut u = DMatrix::<C64>::identity(dim, dim);
    for (h, d) in gens.iter().zip(protocol.durations()) {
        u = expm_hermitian(h, d) * u;
    }
    let frame = drive_frame_phases(protocol, protocol.period());
    for r in 0..dim {
        for c in 0..dim {
            u[(r, c)] *= frame[r];
        }
    }
    Ok(u)
}

/// `H_eff` with `U'(T) = exp(−i H_eff T)` on the principal branch.
pub fn exact_effective_hamiltonian(j: &CouplingMatrix, protocol: &DriveProtocol) -> Result<SpinOperator> {
    let u = floquet_operator(j, protocol)?;
    let h = principal_generator(&u, protocol.period(), FOLDING_MARGIN)?;
    // Drop round-off so the sparse form keeps the block structure.
    let scale = h.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let h = h.map(|v| if v.norm() < 1e-13 * scale { ZERO } else { v });
    Ok(SpinOperator::from_dense(j.n(), &h))
}

/// Pairwise couplings read off the single-excitation block of `H_eff`.
pub fn effective_couplings_from(h_eff: &SpinOperator) -> Result<EffectiveCouplings> {
    let mut block = single_excitation_block(h_eff)?;
    for k in 0..block.nrows() {
        block[(k, k)] = ZERO;
    }
    Ok(EffectiveCouplings::new(CouplingMatrix::from_complex(block)?, Provenance::Exact))
}

pub fn exact_effective_couplings(j: &CouplingMatrix, protocol: &DriveProtocol) -> Result<EffectiveCouplings> {
    effective_couplings_from(&exact_effective_hamiltonian(j, protocol)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyReport {
    pub mu0_over_jrms: f64,
    /// `max_ij ||J'_exact| − |J'_avg|| / |J'_avg|`.
    pub amp_error: f64,
    /// `max_ij |arg(J'_exact / J'_avg)|`, wrapped to `[0, π]`.
    pub phase_error: f64,
}

/// Compare two coupling sets pair by pair. Pairs whose averaged value
/// vanishes are skipped.
pub fn compare_couplings(avg: &CouplingMatrix, exact: &CouplingMatrix, mu0_over_jrms: f64) -> DiscrepancyReport {
    let n = avg.n();
    let floor = 1e-9 * avg.j_rms.max(f64::MIN_POSITIVE);
    let (mut amp, mut phase) = (0.0f64, 0.0f64);
    for a in 0..n {
        for b in (a + 1)..n {
            let (x, y) = (avg.get(a, b), exact.get(a, b));
            if x.norm() <= floor {
                continue;
            }
            amp = amp.max((y.norm() - x.norm()).abs() / x.norm());
            phase = phase.max(wrap_phase(y.arg() - x.arg()).abs());
        }
    }
    DiscrepancyReport { mu0_over_jrms, amp_error: amp, phase_error: phase }
}

/// Discrepancy between averaged and exact couplings for each drive strength
/// on the grid. `Δ` follows each `μ0` so `μ0Δ = π` throughout.
pub fn coupling_discrepancy(
    j: &CouplingMatrix,
    protocol: &DriveProtocol,
    mu0_grid: &[f64],
) -> Result<Vec<DiscrepancyReport>> {
    mu0_grid
        .par_iter()
        .map(|&mu| {
            let scale = DriveScale::new(protocol.j_rms(), mu, protocol.b0_over_jrms());
            let p = protocol.with_scale(&scale)?;
            let avg = averaged_couplings(j, &p)?;
            let exact = exact_effective_couplings(j, &p)?;
            Ok(compare_couplings(&avg.couplings, &exact.couplings, mu))
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn discrepancy_csv(reports: &[DiscrepancyReport]) -> String {
    let mut s = String::from("mu0_over_jrms,amp_error,phase_error\n");
    for r in reports {
        s.push_str(&format!("{},{:e},{:e}\n", r.mu0_over_jrms, r.amp_error, r.phase_error));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::protocol::{double_well_protocol, flux_protocol, Segment};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn couplings(j12: f64, j13: f64, j23: f64) -> CouplingMatrix {
        CouplingMatrix::from_pairs(
            3,
            &[((0, 1), C64::new(j12, 0.0)), ((0, 2), C64::new(j13, 0.0)), ((1, 2), C64::new(j23, 0.0))],
        )
        .unwrap()
    }

    fn custom(segs: Vec<Segment>, tau: f64, mu0: f64) -> DriveProtocol {
        let s = DriveScale::new(1.0, mu0, 1.0);
        DriveProtocol::new(s.delta(), mu0, 1.0, tau, segs).unwrap()
    }

    /// Adaptive Simpson on a complex integrand.
    fn simpson(f: &dyn Fn(f64) -> C64, a: f64, b: f64, tol: f64) -> C64 {
        fn rec(f: &dyn Fn(f64) -> C64, a: f64, b: f64, fa: C64, fm: C64, fb: C64, whole: C64, tol: f64, depth: u32) -> C64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            let diff = left + right - whole;
            if depth == 0 || diff.norm() <= 15.0 * tol {
                return left + right + diff / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 40)
    }

    fn quadrature_average(p: &DriveProtocol, i: usize, j: usize) -> C64 {
        let prof = chi_profile(p);
        let bp = p.breakpoints();
        let f = |t: f64| C64::from_polar(1.0, 2.0 * (prof.eval(i, t) - prof.eval(j, t)));
        // Pre-split into seven pieces so the initial Simpson nodes cannot alias
        // with the integrand's period.
        let total: C64 = bp
            .windows(2)
            .flat_map(|w| {
                let h = (w[1] - w[0]) / 7.0;
                (0..7).map(move |k| (w[0] + k as f64 * h, w[0] + (k + 1) as f64 * h))
            })
            .map(|(a, b)| simpson(&f, a, b, 1e-14 * p.period()))
            .sum();
        total / p.period()
    }

    #[test]
    fn equal_potentials_leave_coupling_unchanged() {
        let p = custom(vec![Segment::new(1.0, &[1, 1, 3])], 0.0, 20.0);
        let j = couplings(1.0, 0.5, 0.7);
        let a = averaged_couplings(&j, &p).unwrap();
        assert!((a.couplings.get(0, 1) - C64::new(1.0, 0.0)).norm() < 1e-14);
        for (x, y) in [(0, 2), (1, 2)] {
            assert!(a.couplings.get(x, y).norm() < 1e-14);
        }
    }

    #[test]
    fn detuned_full_interval_suppresses_exactly() {
        for m in 1..=4 {
            let p = custom(vec![Segment::new(1.0, &[m, 0])], 0.0, 20.0);
            assert!(pair_average(&p, 0, 1).norm() < 1e-14, "m = {m}");
        }
    }

    #[test]
    fn rule_two_half_amplitude_and_phase() {
        for q in [2, 3, 4, 8] {
            for m in 1..q {
                let tau = 1.0 / q as f64;
                // Potentials differ by m μ0 during τ, equal over the rest of
                // the window, and by μ0 off-window to suppress.
                let p = custom(
                    vec![
                        Segment::new(tau, &[m, 0]),
                        Segment::new(1.0, &[0, 0]),
                        Segment::new(1.0 - tau, &[1, 0]),
                    ],
                    tau,
                    20.0,
                );
                let a = pair_average(&p, 0, 1);
                let oracle = quadrature_average(&p, 0, 1);
                assert!((a - oracle).norm() < 1e-10);
                if m == 1 {
                    let expect = C64::from_polar(0.5, 2.0 * PI * tau);
                    assert!((a - expect).norm() < 1e-12, "q={q}: {a} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn undriven_h_eff_is_h_xx() {
        let s = DriveScale::new(1.0, 20.0, 1.0);
        let p = DriveProtocol::undriven(3, &s).unwrap();
        let j = couplings(0.3, 0.2, 0.25);
        let h = exact_effective_hamiltonian(&j, &p).unwrap().to_dense();
        assert!(max_abs(&(h - build_xx(&j).unwrap().to_dense())) < 1e-12);
    }

    #[test]
    fn flux_protocol_twenty_jrms_discrepancy() {
        let j = couplings(2.0, 1.0, 2.0);
        let s = DriveScale::new(j.j_rms, 20.0, 1.0);
        let p = flux_protocol(0.25, &s).unwrap();
        let avg = averaged_couplings(&j, &p).unwrap();
        let ex = exact_effective_couplings(&j, &p).unwrap();
        let r = compare_couplings(&avg.couplings, &ex.couplings, 20.0);
        assert!(r.amp_error < 0.1 && r.phase_error < 0.1, "{r:?}");
        assert!((avg.flux.unwrap() - PI / 2.0).abs() < 1e-12);
        assert!((ex.flux.unwrap() - PI / 2.0).abs() < 0.2);
    }

    #[test]
    fn h_eff_generates_stroboscopic_evolution() {
        let j = couplings(2.0, 1.0, 2.0);
        let s = DriveScale::new(j.j_rms, 10.0, 1.0);
        let p = flux_protocol(1.0 / 3.0, &s).unwrap();
        let u = floquet_operator(&j, &p).unwrap();
        let h = exact_effective_hamiltonian(&j, &p).unwrap().to_dense();
        assert!(max_abs(&(&h - h.adjoint())) < 1e-10);
        let again = expm_hermitian(&h, p.period());
        assert!(max_abs(&(again - u)) < 1e-10);
    }

    #[test]
    fn h_eff_conserves_excitations() {
        let j = couplings(2.0, 1.0, 2.0);
        let s = DriveScale::new(j.j_rms, 5.0, 1.0);
        let p = flux_protocol(0.25, &s).unwrap();
        let h = exact_effective_hamiltonian(&j, &p).unwrap().to_dense();
        let nz = build_field(&[1.0, 1.0, 1.0]).to_dense();
        assert!(max_abs(&(&h * &nz - &nz * &h)) < 1e-10);
    }

    #[test]
    fn double_well_exact_matches_average_at_strong_drive() {
        let j = couplings(1.8, 1.0, 1.8);
        let s = DriveScale::new(j.j_rms, 80.0, 1.0);
        let p = double_well_protocol(1.0 / 3.0, &s).unwrap();
        let avg = averaged_couplings(&j, &p).unwrap();
        let ex = exact_effective_couplings(&j, &p).unwrap();
        assert!((avg.couplings.get(0, 2) - ex.couplings.get(0, 2)).norm() < 0.05 * avg.couplings.get(0, 2).norm());
    }

    #[test]
    fn discrepancy_shrinks_with_drive() {
        let j = couplings(2.0, 1.0, 2.0);
        let s = DriveScale::new(j.j_rms, 20.0, 1.0);
        let p = flux_protocol(0.25, &s).unwrap();
        let grid = [5.0, 10.0, 20.0, 40.0, 80.0];
        let r = coupling_discrepancy(&j, &p, &grid).unwrap();
        let amp: Vec<f64> = r.iter().map(|x| x.amp_error).collect();
        let slope = log_log_slope(&grid, &amp);
        assert!((slope + 1.0).abs() < 0.15, "slope {slope}");
        assert!(discrepancy_csv(&r).starts_with("mu0_over_jrms,amp_error,phase_error\n"));
    }

    #[test]
    fn log_log_slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        assert!((log_log_slope(&x, &y) + 1.5).abs() < 1e-12);
    }

    fn arb_protocol() -> impl Strategy<Value = DriveProtocol> {
        (
            0.0f64..0.95,
            prop::collection::vec((prop::sample::select(vec![1.0, 2.0, 3.0, -1.0, -2.0]), prop::collection::vec(-2i32..=3, 3)), 1..6),
            1.0f64..40.0,
        )
            .prop_map(|(tau, raw, mu0)| {
                let tau = tau.max(0.05);
                let segs = raw
                    .into_iter()
                    .map(|(u, k)| {
                        let units = match u {
                            x if x > 0.0 => x,
                            -1.0 => tau,
                            _ => 1.0 - tau,
                        };
                        Segment { units, multipliers: k }
                    })
                    .collect();
                let s = DriveScale::new(1.0, mu0, 1.0);
                DriveProtocol::new(s.delta(), mu0, 1.0, tau, segs)
            })
            .prop_filter_map("valid", |p| p.ok())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn closed_form_matches_quadrature(p in arb_protocol()) {
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let a = pair_average(&p, i, j);
                let b = quadrature_average(&p, i, j);
                prop_assert!((a - b).norm() < 1e-10, "{a} vs {b}");
                prop_assert!(a.norm() <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn common_phase_shift_is_invisible(p in arb_protocol(), shift in -3i32..=3) {
            let segs: Vec<Segment> = p
                .segments()
                .iter()
                .map(|s| Segment { units: s.units, multipliers: s.multipliers.iter().map(|k| k + shift).collect() })
                .collect();
            let q = DriveProtocol::new(p.delta(), p.mu0_over_jrms(), p.b0_over_jrms(), p.tau_over_delta(), segs).unwrap();
            let j = couplings(1.0, 0.6, 0.8);
            let a = averaged_couplings(&j, &p).unwrap().couplings;
            let b = averaged_couplings(&j, &q).unwrap().couplings;
            prop_assert!(max_abs(&(a.values - b.values)) < 1e-13);
        }
    }
}
