//! Linear Hamiltonian systems: symplectic fundamental solutions, the
//! decaying subspace from the singular value gap, J-transversality, and the
//! ODE-side nullity crosscheck against the operator-side nu.

use homoclinic_lab::discretize::make_grid;
use homoclinic_lab::linear::{
    fundamental_solution, j_transversality, nullity_crosscheck, stable_subspace,
};
use homoclinic_lab::model::{desk_l, SymMatFn};
use ndarray::arr2;

fn main() -> homoclinic_lab::Result<()> {
    // rotation: W(t) = exp(tJ), no decay
    let rot = SymMatFn::constant(ndarray::Array2::eye(2))?;
    let p = fundamental_solution(&rot, 20.0, 1e-3)?;
    println!("rotation: symplectic defect {:.2e}, det W(T) = {:.10}", p.defect, p.final_det()?);
    println!("          stable dim = {}", stable_subspace(&p, 1e-6)?.dim);

    // hyperbolic: one decaying direction, J-transversal
    let hyp = SymMatFn::constant(arr2(&[[1.0, 0.0], [0.0, -1.0]]))?;
    let p = fundamental_solution(&hyp, 20.0, 1e-3)?;
    let s = stable_subspace(&p, 1e-6)?;
    println!(
        "hyperbolic: stable dim = {} (basis ({:+.4}, {:+.4})), J-transversal: {}",
        s.dim,
        s.basis[[0, 0]],
        s.basis[[1, 0]],
        j_transversality(&s)?
    );

    // nullity crosscheck on the desk instance: a gap B gives nu = 0 on both routes
    let grid = make_grid(10.0, 400)?;
    let rep = nullity_crosscheck(&desk_l(), &SymMatFn::scalar(2, |_| 2.49)?, &grid)?;
    println!(
        "nullity crosscheck (gap B): operator nu = {}, ODE intersection = {}, agree = {}",
        rep.nu_index, rep.intersection_dim, rep.agree
    );
    Ok(())
}
