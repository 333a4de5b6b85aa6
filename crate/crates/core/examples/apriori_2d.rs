//! Weighted gradient, `L^β` gradient and membrane trace norms of a 2D run on three meshes.

use kkmembrane::experiments::{apriori_2d, apriori_study, max_successive_change};

fn main() -> kkmembrane::Result<()> {
    let rows = apriori_study(&[apriori_2d(16), apriori_2d(32), apriori_2d(64)], 0.4, 1.5)?;
    for r in &rows {
        println!(
            "{:>5} cells: weighted {:.6}, grad^1.5 {:.6}, trace^1.5 {:.6}",
            r.cells, r.weighted_gradient, r.lbeta_gradient, r.lbeta_trace
        );
    }
    let col = |f: fn(&kkmembrane::experiments::AprioriRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    println!(
        "largest successive change: {:.3e} {:.3e} {:.3e}",
        max_successive_change(&col(|r| r.weighted_gradient)),
        max_successive_change(&col(|r| r.lbeta_gradient)),
        max_successive_change(&col(|r| r.lbeta_trace))
    );
    Ok(())
}
