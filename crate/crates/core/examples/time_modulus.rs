//! Time-translation modulus `ω(h)` of a heat run with rough initial data.

use kkmembrane::experiments::rough_heat;
use kkmembrane::monitors::{species_states, time_translation_modulus};
use kkmembrane::parabolic::simulate;

fn main() -> kkmembrane::Result<()> {
    let cfg = rough_heat();
    let traj = simulate(&cfg)?.into_result()?;
    let states = species_states(&traj, 0)?;
    let rep = time_translation_modulus(&traj.mesh.volumes(), &states, cfg.dt, &[2, 4, 8, 16, 32])?;
    for (h, w) in rep.h.iter().zip(&rep.omega) {
        println!("h = {h:.3e}: omega = {w:.6e}");
    }
    println!("fitted exponent {:.4}", rep.slope.unwrap_or(f64::NAN));
    Ok(())
}
