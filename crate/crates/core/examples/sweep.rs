// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Sweep the first potential drop τ/Δ and collect the loop flux of each run
//! from its metadata sidecar.

use ionflux::config::RunConfig;
use ionflux::experiments::{sweep, Action};

fn main() -> ionflux::Result<()> {
    let out = std::env::temp_dir().join("ionflux-sweep-example");
    let values: Vec<String> = ["0", "1/8", "1/4", "1/3"].iter().map(|s| s.to_string()).collect();
    let report = sweep("tau_over_delta", &values, &RunConfig::default(), Action::Couplings, &out)?;
    for e in &report.entries {
        let meta = std::fs::read_to_string(e.dir.join("metadata.toml"))?;
        let flux = meta.lines().find(|l| l.starts_with("derived.loop_flux")).unwrap_or("derived.loop_flux = ?");
        println!("τ/Δ = {:>4}: {flux}  [{}]", e.value, &e.config_hash[..12]);
    }
    println!("index written to {}", out.join("index.csv").display());
    Ok(())
}
