//! Two species annihilating on contact across a membrane, with the key estimate
//! and the truncated energy bound evaluated along the run.

use kkmembrane::experiments::standard_annihilation;
use kkmembrane::monitors::{key_estimate_check, species_operator, species_sources, species_states, truncation_energy_check};
use kkmembrane::parabolic::simulate;

fn main() -> kkmembrane::Result<()> {
    let cfg = standard_annihilation(64);
    let traj = simulate(&cfg)?.into_result()?;
    for r in traj.records.iter().step_by(200) {
        println!(
            "t = {:.3}: mass {:.6}, dual norm {:.6}, E(t) {:.6}, min {:.2e}",
            r.t,
            r.total_mass,
            r.dual_norm_u.unwrap_or(f64::NAN),
            r.e_t.unwrap_or(f64::NAN),
            r.min_value
        );
    }
    let key = key_estimate_check(&traj, &cfg)?;
    println!(
        "key estimate: worst E(t)/bound = {:.4}, C1 = {:.4e}; sum int int u^2 = {:.4} <= C3 = {:.4}",
        key.worst_ratio, key.c1, key.sq_integral, key.c3
    );
    let op = species_operator(&traj.mesh, &cfg, 0)?;
    let states = species_states(&traj, 0)?;
    let sources = species_sources(&traj, 0)?;
    for b in [4.0, 8.0, 16.0] {
        let r = truncation_energy_check(&op, &states, &sources, &traj.dts, b, 0.1)?;
        println!("truncation b = {b}: {:.4} <= {:.4} ({})", r.lhs, r.rhs, if r.holds { "holds" } else { "fails" });
    }
    Ok(())
}
