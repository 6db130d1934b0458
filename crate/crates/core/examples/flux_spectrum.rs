// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Single-excitation spectrum and equilibrium chiral currents of a uniform
//! triangle as the flux is threaded through it.

use std::f64::consts::PI;

use ionflux::observables::{flux_grid, flux_scan};

fn main() -> ionflux::Result<()> {
    let scan = flux_scan(1.0, &flux_grid(25))?;
    println!("{:>8} {:>24} {:>30}", "Φ/π", "energies / |J'|", "currents");
    for k in 0..scan.flux.len() {
        let e = &scan.energies[k];
        let i = &scan.currents[k];
        println!(
            "{:>8.3} [{:+.3} {:+.3} {:+.3}] [{:+.3e} {:+.3e} {:+.3e}]",
            scan.flux[k] / PI,
            e[0],
            e[1],
            e[2],
            i[0],
            i[1],
            i[2]
        );
    }
    Ok(())
}
