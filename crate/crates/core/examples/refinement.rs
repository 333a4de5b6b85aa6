//! Self-convergence of the transient scheme and exactness of the steady fixture.

use kkmembrane::experiments::{dt_refinement, smooth_heat, steady_refinement, transient_refinement};

fn main() -> kkmembrane::Result<()> {
    for r in steady_refinement(&[4, 16, 64, 256])? {
        println!("steady, {:>3} cells per side: max error {:.2e}", r.cells, r.max_error);
    }
    let t = transient_refinement(&smooth_heat(8, 0.02), 5)?;
    println!("h and dt refined together: differences {:?}, orders {:?}", t.differences, t.orders);
    let d = dt_refinement(&smooth_heat(32, 0.02), 5)?;
    println!("dt only: differences {:?}, orders {:?}", d.differences, d.orders);
    Ok(())
}
