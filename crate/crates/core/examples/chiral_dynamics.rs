// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! An excitation released on ion 1 circulates 1→3→2 at Φ = π/2 and the other
//! way at Φ = −π/2. Spin-only tiers, so this runs in well under a second.

use ionflux::chain::{spin_spin_couplings, ModeData, TrapSpec};
use ionflux::evolve::{evolve_spin, SampleGrid, SpinTier};
use ionflux::floquet::averaged_couplings;
use ionflux::observables::{chirality_witness, revival_time, Trajectory, TrajectoryLabel};
use ionflux::protocol::{flux_protocol, DriveScale};
use ionflux::spin::SpinState;

fn main() -> ionflux::Result<()> {
    let spec = TrapSpec::reference();
    let j = spin_spin_couplings(&ModeData::compute(&spec)?, &spec)?;
    let scale = DriveScale::new(j.j_rms, 20.0, 1.0);
    let psi0 = SpinState::single_excitation(3, 0);

    for (name, tau) in [("Φ = +π/2", 0.25), ("Φ = −π/2", 0.75), ("Φ = 0", 0.0)] {
        let protocol = flux_protocol(tau, &scale)?;
        let avg = averaged_couplings(&j, &protocol)?;
        let jbar = [(0, 1), (0, 2), (1, 2)].iter().map(|&(a, b)| avg.couplings.get(a, b).norm()).sum::<f64>() / 3.0;
        let t_rev = revival_time(jbar);
        let grid = SampleGrid::covering(protocol.period(), t_rev, 8);
        for tier in [SpinTier::Ising, SpinTier::Xx] {
            let states = evolve_spin(tier, &j, &protocol, &psi0, &grid)?;
            let label = TrajectoryLabel { tier: tier.as_str().into(), frame: "lab".into() };
            let traj = Trajectory::from_states(label, &grid, &states, Some(&avg.couplings), j.j_rms)?;
            let w = chirality_witness(&traj, t_rev);
            let last = traj.pops.last().expect("non-empty grid");
            println!(
                "{name} {:>5}: {:?}, t3* = {:.2} ms, t2* = {:.2} ms, pop_1(T') = {:.3}",
                tier.as_str(),
                w.chirality,
                w.t3_star * 1e3,
                w.t2_star * 1e3,
                last[0]
            );
        }
    }
    Ok(())
}
