// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! First-order averaged couplings against the exact stroboscopic generator,
//! for growing drive strength.

use ionflux::chain::{spin_spin_couplings, ModeData, TrapSpec};
use ionflux::floquet::{averaged_couplings, coupling_discrepancy, exact_effective_couplings, log_log_slope};
use ionflux::protocol::{flux_protocol, DriveScale};

fn main() -> ionflux::Result<()> {
    let spec = TrapSpec::reference();
    let j = spin_spin_couplings(&ModeData::compute(&spec)?, &spec)?;
    let protocol = flux_protocol(0.25, &DriveScale::new(j.j_rms, 20.0, 1.0))?;

    let avg = averaged_couplings(&j, &protocol)?;
    let exact = exact_effective_couplings(&j, &protocol)?;
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let (x, y) = (avg.couplings.get(a, b), exact.couplings.get(a, b));
        println!(
            "J'_{}{}: averaged {:.2} e^{{i{:+.4}}}, exact {:.2} e^{{i{:+.4}}} (rad/s)",
            a + 1,
            b + 1,
            x.norm(),
            x.arg(),
            y.norm(),
            y.arg()
        );
    }
    println!("loop flux: averaged {:+.4}, exact {:+.4}", avg.flux.unwrap_or(0.0), exact.flux.unwrap_or(0.0));

    let grid = [5.0, 10.0, 20.0, 40.0, 80.0];
    let reports = coupling_discrepancy(&j, &protocol, &grid)?;
    for r in &reports {
        println!("μ0 = {:>4} J_rms: amplitude {:.3e}, phase {:.3e}", r.mu0_over_jrms, r.amp_error, r.phase_error);
    }
    let amp: Vec<f64> = reports.iter().map(|r| r.amp_error).collect();
    let phase: Vec<f64> = reports.iter().map(|r| r.phase_error).collect();
    println!("log-log slopes: amplitude {:.3}, phase {:.3}", log_log_slope(&grid, &amp), log_log_slope(&grid, &phase));
    Ok(())
}
