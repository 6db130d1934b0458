// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Load a config from text, override one key, and print the echo that goes
//! into every metadata sidecar.

use ionflux::config::RunConfig;

const TEXT: &str = r#"
[trap]
omega_z_hz = 0.9e6
delta_com_hz = 80.0e3

[protocol]
kind = "flux"
tau_over_delta = "1/4"

[run]
tiers = ["ising", "xx", "h_eff"]
window_jrms = 10
"#;

fn main() -> ionflux::Result<()> {
    let mut cfg = RunConfig::from_text(TEXT)?;
    cfg.set("fock.n_max", "6")?;
    print!("{}", cfg.to_text());
    println!("sha256 {}", cfg.hash());
    match RunConfig::from_text("protocol.tau_over_delta = 1.5") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
