//! Spectrum of the assembled operator F = -J d/dt + L(t) on a truncated
//! grid, with residual certificates and the gap midpoints used to place the
//! asymptotic Hessians B0 and B_inf.

use homoclinic_lab::discretize::{assemble, make_grid, spectrum, Window};
use homoclinic_lab::model::desk_l;

fn main() -> homoclinic_lab::Result<()> {
    let grid = make_grid(12.0, 600)?;
    let op = assemble(&desk_l(), &grid)?;
    let decomp = spectrum(&op, Window::Range(-6.5, 6.5))?;
    println!("grid: T = {}, n = {}, h = {:.5}", grid.t, grid.n, grid.h);
    println!("eigenvalues in [-6.5, 6.5] (with residuals):");
    for (lam, res) in decomp.lambdas.iter().zip(&decomp.residuals) {
        println!("  {lam:>10.4}   residual {res:.2e}");
    }
    let l1 = decomp.lambda_signed(1).unwrap();
    let lm1 = decomp.lambda_signed(-1).unwrap();
    println!("zero-gap midpoint (B0 candidate):  {:.4}", 0.5 * (l1 + lm1));
    let l3 = decomp.lambda_signed(3).unwrap();
    let l4 = decomp.lambda_signed(4).unwrap();
    println!("third positive gap midpoint (B_inf candidate): {:.4}", 0.5 * (l3 + l4));
    Ok(())
}
