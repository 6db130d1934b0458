// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Normal modes and Ising couplings of the reference three-ion chain.

use std::f64::consts::PI;

use ionflux::chain::{detunings, spin_spin_couplings, ModeData, TrapSpec};

fn main() -> ionflux::Result<()> {
    let spec = TrapSpec::reference();
    let modes = ModeData::compute(&spec)?;
    let j = spin_spin_couplings(&modes, &spec)?;
    let hz = |w: f64| w / (2.0 * PI);

    println!("equilibrium positions (units of ℓ): {:?}", modes.positions);
    for (m, (w, d)) in modes.mode_freqs.iter().zip(detunings(&modes, &spec)).enumerate() {
        println!("mode {m}: ω/2π = {:.4} MHz, δ/2π = {:.2} kHz", hz(*w) * 1e-6, hz(d) * 1e-3);
    }
    println!("J_12/2π = {:.2} Hz", hz(j.get(0, 1).re));
    println!("J_13/2π = {:.2} Hz", hz(j.get(0, 2).re));
    println!("J_23/2π = {:.2} Hz", hz(j.get(1, 2).re));
    println!("J_rms/2π = {:.2} Hz, J_12/J_13 = {:.3}", hz(j.j_rms), j.get(0, 1).re / j.get(0, 2).re);
    Ok(())
}
