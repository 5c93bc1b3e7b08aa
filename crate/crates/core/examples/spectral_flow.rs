//! Spectral flow of the pencil theta -> A - theta B with crossing operators:
//! an independent route to the relative index via mu = -Sf.

use homoclinic_lab::discretize::{assemble, make_grid, multiplier};
use homoclinic_lab::index::{relative_index, spectral_flow, FlowPath};
use homoclinic_lab::model::{desk_l, SymMatFn};

fn main() -> homoclinic_lab::Result<()> {
    let grid = make_grid(7.0, 120)?;
    let a = assemble(&desk_l(), &grid)?;
    let b = 4.2;
    let bm = multiplier(&SymMatFn::scalar(2, move |_| b)?, &grid)?;
    let pair = relative_index(&a, &bm, None)?;
    let path = FlowPath::pencil(&a.mat.to_dense(), &bm.mat.to_dense());
    let (sf, crossings) = spectral_flow(&path, 120, None)?;
    println!("B = {b} I on a {}-dimensional truncation", a.mat.n);
    println!("inertia route:      mu = {}, nu = {}", pair.mu, pair.nu);
    println!("spectral flow:      Sf = {sf}");
    for c in &crossings {
        println!(
            "  crossing at theta = {:.6}  kernel dim {}  signature {:+}{}",
            c.theta,
            c.kernel_dim,
            c.signature,
            if c.endpoint { "  (endpoint)" } else { "" }
        );
    }
    assert_eq!(pair.mu, -sf);
    println!("mu == -Sf holds exactly.");
    Ok(())
}
