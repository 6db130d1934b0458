// Copyright 2026 ionflux Contributors
// SPDX-License-Identifier: Apache-2.0

//! Full spin–phonon propagation over a short window, compared with the
//! Ising tier at the stroboscopic times. Takes a few seconds.

use ionflux::chain::{spin_spin_couplings, ModeData, TrapSpec};
use ionflux::dicke::{evolve_dicke, DickeSystem, EvolutionPlan, FockSpec, Frame, FullState};
use ionflux::evolve::{evolve_spin, SampleGrid, SpinTier};
use ionflux::observables::{trajectory_deviation, Trajectory, TrajectoryLabel};
use ionflux::protocol::{flux_protocol, DriveScale};
use ionflux::spin::SpinState;

fn main() -> ionflux::Result<()> {
    let spec = TrapSpec::reference();
    let modes = ModeData::compute(&spec)?;
    let j = spin_spin_couplings(&modes, &spec)?;
    let protocol = flux_protocol(0.25, &DriveScale::new(j.j_rms, 20.0, 1.0))?;
    let grid = SampleGrid::stroboscopic(protocol.period(), 6, 2);
    let psi0 = SpinState::single_excitation(3, 0);

    let fock = FockSpec::new(4);
    let system = DickeSystem::new(&modes, &spec, fock, Frame::Rotating)?;
    println!("Hilbert space dimension {}", system.dim());
    let out = evolve_dicke(&system, &FullState::vacuum(&psi0, fock)?, &protocol, &EvolutionPlan::new(grid.clone()))?;
    println!("{} Krylov steps, max norm drift {:.2e}", out.steps, out.max_norm_drift);

    let label = |t: &str| TrajectoryLabel { tier: t.into(), frame: "rwa".into() };
    let dicke = Trajectory::from_density(label("dicke"), &grid, out.rho, out.phonons, None, j.j_rms)?;
    let states = evolve_spin(SpinTier::Ising, &j, &protocol, &psi0, &grid)?;
    let ising = Trajectory::from_states(label("ising"), &grid, &states, None, j.j_rms)?;
    for (k, (t, dev)) in trajectory_deviation(&ising, &dicke)?.into_iter().enumerate() {
        println!(
            "t = {:.3} ms: pops dicke {:.4?}, ising {:.4?}, deviation {dev:.2e}, n_ph {:.4}",
            t * 1e3,
            dicke.pops[2 * k],
            ising.pops[2 * k],
            dicke.phonons[2 * k]
        );
    }
    Ok(())
}
