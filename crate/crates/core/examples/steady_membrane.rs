//! Stationary 1D profile through a membrane, compared with the series-resistance
//! closed form `J = (a − c)/(L₁/D₁ + L₂/D₂ + 1/k)`.

use std::sync::Arc;

use kkmembrane::mesh::build_interval_mesh;
use kkmembrane::parabolic::{steady_closed_form, steady_state};

fn main() -> kkmembrane::Result<()> {
    for (d, k) in [([1.0, 1.0], 1.0), ([1.0, 0.25], 1.0), ([1.0, 1.0], 1e6)] {
        let mesh = Arc::new(build_interval_mesh(1.0, 1.0, 16, 16)?);
        let s = steady_state(&mesh, d, k, 1.0, 0.0)?;
        let (j, jump) = steady_closed_form((1.0, 1.0), d, k, 1.0, 0.0);
        println!(
            "D = {d:?}, k = {k:e}: flux {:.12} (exact {j:.12}), jump {:.12} (exact {jump:.12}), traces ({:.6}, {:.6})",
            s.flux, s.jump, s.traces.0, s.traces.1
        );
    }
    Ok(())
}
