// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! The freeze-out drive leaves a two-level system between the edge ions.
//! Their relative phase is read from the wave function and from the
//! correlators. Add `dicke` as the first argument to include the
//! spin–phonon tier (about 15 s).

use ionflux::config::{RunConfig, Tier};
use ionflux::experiments::double_well;

fn main() -> ionflux::Result<()> {
    let mut cfg = RunConfig { tau_over_delta: 1.0 / 3.0, ..RunConfig::default() };
    if std::env::args().nth(1).as_deref() == Some("dicke") {
        cfg.tiers.push(Tier::Dicke);
    }
    let run = double_well(&cfg)?;
    println!("expected |Δφ| plateaus: {:.4} and {:.4}", run.expected.0, run.expected.1);
    println!("T_osc = π/|J'_13| = {:.3} ms, fitted {:.3} ms", run.t_osc * 1e3, run.measured_rabi_period() * 1e3);
    println!("max center population {:.2e}", run.max_center_population());
    println!("Ising wave function plateaus: {:.4?}", run.ising_plateaus());
    if let (Some(wf), Some(corr)) = (run.dicke_wf_plateaus(), run.dicke_corr_plateaus()) {
        println!("Dicke wave function plateaus: {wf:.4?}");
        println!("Dicke correlator plateaus: {corr:.4?}");
    }
    Ok(())
}
