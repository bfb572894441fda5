//! Builds a small partial circulant codebook and checks the FFT products
//! against the dense matrix.

use nalgebra::DVector;
use ura::codebook::{Codebook, CodebookConfig};
use ura::Complex64;

fn main() -> ura::Result<()> {
    let cb = Codebook::build(CodebookConfig::new(8, 64, 1.0, 7))?;
    println!(
        "n0 = {}, 2^J = {}, column energy = {:.2}",
        cb.num_rows(),
        cb.num_columns(),
        cb.mean_column_energy()
    );

    let v: Vec<Complex64> = (0..cb.num_columns())
        .map(|j| Complex64::new((j as f64 * 0.3).sin(), (j as f64 * 0.7).cos()))
        .collect();
    let fast = cb.matvec(&v)?;
    let dense = cb.dense()?;
    let slow = &dense * DVector::from_vec(v);
    let err = fast
        .iter()
        .zip(slow.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    println!("max |FFT - dense| for A v: {err:.2e}");

    let u: Vec<Complex64> = (0..cb.num_rows()).map(|t| Complex64::new(1.0, t as f64 / 64.0)).collect();
    let fast = cb.adjoint_matvec(&u)?;
    let slow = dense.adjoint() * DVector::from_vec(u);
    let err = fast
        .iter()
        .zip(slow.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    println!("max |FFT - dense| for A^H u: {err:.2e}");
    Ok(())
}
