//! Validating the standing hypotheses on a problem instance: the (L1)
//! crossing witness for L(t), the (R0)/(R1) checks and asymptotic pinches for
//! R, and a counterexample operator that admits no (L1) witness from the
//! candidate set.

use homoclinic_lab::model::{
    candidate_p_set, desk_l, desk_l1_witness, rotation_counterexample, validate_l1, validate_r,
    Asymptotic, L1Witness,
};
use homoclinic_lab::potentials::Remark13Potential;

fn main() -> homoclinic_lab::Result<()> {
    let times: Vec<f64> = (1..=40).map(|k| k as f64 * 0.5).flat_map(|t| [t, -t]).collect();
    let rep = validate_l1(&desk_l(), &desk_l1_witness(), &times)?;
    println!("(L1) on the desk operator: {}", if rep.all_pass() { "pass" } else { "FAIL" });

    let r = Remark13Potential::new(2, 0.4, 3.6, (1.0, 5.0))?;
    let pts: Vec<(f64, Vec<f64>)> = (0..30)
        .map(|k| {
            let a = k as f64 * 0.7;
            (a.sin() * 3.0, vec![a.cos() * (0.2 + 0.3 * k as f64), a.sin() * 0.8])
        })
        .collect();
    let b0 = homoclinic_lab::model::SymMatFn::scalar(2, |_| 3.6)?;
    let rep = validate_r(
        &r,
        &Asymptotic::OneSided { b_inf: b0, plus: true, r0: 5.0 },
        &pts,
    )?;
    for c in &rep.checks {
        println!("  {:28} {}  (worst {:.2e})", c.name, if c.pass { "pass" } else { "FAIL" }, c.worst);
    }

    // the rotation-type operator admits no witness among the candidates
    let bad = rotation_counterexample();
    let mut found = false;
    for p in candidate_p_set(2) {
        let w = L1Witness { p, c: 0.5, alpha: 1.0, t0: 2.0 };
        if validate_l1(&bad, &w, &times).map(|r| r.all_pass()).unwrap_or(false) {
            found = true;
        }
    }
    println!(
        "rotation counterexample: witness found = {found} (expected false; (L1) genuinely fails)"
    );
    Ok(())
}
