//! Solutions of the regularized problem for increasing levels `n` form a Cauchy
//! sequence in `L¹(Q_T)` on tall spike data.

use kkmembrane::experiments::{regularization_sweep, tall_spike};

fn main() -> kkmembrane::Result<()> {
    let table = regularization_sweep(&tall_spike(None), &[1, 4, 16, 64])?;
    for (k, d) in table.d.iter().enumerate() {
        println!("n = {:>2} -> {:>2}: d = {d:?}", table.levels[k], table.levels[k + 1]);
    }
    println!("decreasing: {}", table.passed());
    Ok(())
}
