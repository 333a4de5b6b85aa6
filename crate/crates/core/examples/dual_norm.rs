//! The `(H¹)*` norm of a datum through the membrane elliptic problem, by CG and by a
//! direct banded factorization.

use std::sync::Arc;

use kkmembrane::elliptic::assemble;
use kkmembrane::mesh::build_rect_mesh;
use kkmembrane::monitors::DirectDualNorm;
use kkmembrane::Field;

fn main() -> kkmembrane::Result<()> {
    let mesh = Arc::new(build_rect_mesh(1.0, 1.0, 1.0, 16, 16, 16)?);
    let op = assemble(&mesh, 1.0, 0.5)?;
    let direct = DirectDualNorm::new(op.clone())?;
    let f = Field::from_fn(mesh.cell_count(), |i| {
        let [x, y] = mesh.cells()[i].center;
        (3.0 * x).sin() * y + 0.1
    });
    let cg = op.dual_norm(&f)?;
    let lu = direct.norm(&f)?;
    println!("dual norm: CG {cg:.15e}, direct {lu:.15e}");
    println!("homogeneity: |2f| / |f| = {:.15}", op.dual_norm(&f.scaled(2.0))? / cg);
    let w = op.solve_poisson(&f, 1e-12)?;
    println!("Poisson solve: {} CG iterations, residual {:.2e}", w.iterations, w.residual);
    Ok(())
}
