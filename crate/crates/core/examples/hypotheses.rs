//! Sampling check of growth, mass control, quasi-positivity and the local Lipschitz
//! bound for the built-in reactions and for a system that violates them.

use kkmembrane::reactions::{builtin_annihilation, builtin_transport_demo, check_hypotheses, check_system, ReactionSystem};

fn main() -> kkmembrane::Result<()> {
    let systems = [builtin_annihilation(), builtin_transport_demo(&[1.0, 0.5, 0.2, 0.8, 0.3])?];
    for sys in &systems {
        let r = check_system(sys, 10.0, 100_000)?;
        println!(
            "{}: growth {:.4}, mass control {:.4}, lipschitz {:.4}, quasi-positive {} -> {}",
            r.label,
            r.growth,
            r.mass_control,
            r.lipschitz,
            r.quasi_positive,
            if r.passed() { "pass" } else { "fail" }
        );
    }
    let loss = ReactionSystem::new("constant loss", 2, None, |_, out| {
        out[0] = -1.0;
        out[1] = 0.0;
    });
    let r = check_hypotheses(&loss, 10.0, 100_000)?;
    println!("constant loss: {:?}", r.failures);
    Ok(())
}
