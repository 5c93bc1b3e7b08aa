//! The time-reversal transformation R~(t,z) = -R(-t,z), L~(t) = -L(-t) and
//! its exact integer index relation
//! mu_F~(-B_inf(-.)) - mu_F~(-B_0(-.)) = mu_F(B_0) - mu_F(B_inf).

use homoclinic_lab::discretize::{assemble, make_grid, multiplier};
use homoclinic_lab::index::relative_index;
use homoclinic_lab::model::{desk_l, SymMatFn};
use homoclinic_lab::potentials::reverse_matfn;

fn main() -> homoclinic_lab::Result<()> {
    let grid = make_grid(8.0, 240)?;
    let l = desk_l();
    let l_rev = reverse_matfn(&l);
    let a = assemble(&l, &grid)?;
    let a_rev = assemble(&l_rev, &grid)?;

    let (b0, binf) = (0.0f64, 4.2f64);
    let mu = |a: &_, b: f64| -> homoclinic_lab::Result<i64> {
        let bm = multiplier(&SymMatFn::scalar(2, move |_| b)?, &grid)?;
        Ok(relative_index(a, &bm, None)?.mu)
    };
    let mu0 = mu(&a, b0)?;
    let muinf = mu(&a, binf)?;
    // constants are even in t, so -B(-t) = -B
    let mu0_rev = mu(&a_rev, -b0)?;
    let muinf_rev = mu(&a_rev, -binf)?;
    println!("original:  mu(B0) = {mu0}, mu(B_inf) = {muinf}");
    println!("reversed:  mu(-B0) = {mu0_rev}, mu(-B_inf) = {muinf_rev}");
    println!(
        "identity:  {} == {}  ({})",
        muinf_rev - mu0_rev,
        mu0 - muinf,
        if muinf_rev - mu0_rev == mu0 - muinf { "exact" } else { "FAIL" }
    );
    Ok(())
}
