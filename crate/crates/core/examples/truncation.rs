//! The C² truncation `T_b` and its first two derivatives.

use kkmembrane::reactions::make_truncation;

fn main() -> kkmembrane::Result<()> {
    let t = make_truncation(6.0)?;
    println!("sigma      T        T'       T''");
    for k in 0..=16 {
        let s = 0.5 * f64::from(k);
        println!("{s:5.2}  {:8.5}  {:7.5}  {:8.5}", t.value(s), t.derivative(s), t.second_derivative(s));
    }
    Ok(())
}
