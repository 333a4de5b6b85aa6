//! Membrane Poincaré constants under refinement and for increasing permeability.

use kkmembrane::experiments::poincare_study;

fn main() -> kkmembrane::Result<()> {
    let table = poincare_study(&[0.1, 1.0, 10.0], &[64, 128, 256])?;
    for (k, row) in table.permeabilities.iter().zip(&table.constants) {
        println!("k = {k:>4}: {row:?}");
    }
    println!("finest-pair changes: {:?}", table.finest_changes());
    println!("decreasing in k: {}", table.decreasing_in_k());
    Ok(())
}
