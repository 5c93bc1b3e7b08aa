//! Orchestration: builds a problem from a RunConfig, runs the staged
//! pipeline (spectrum -> indices -> flow crosscheck -> reduction -> search ->
//! verification), and persists JSON/CSV outputs.

use crate::config::RunConfig;
use crate::discretize::{assemble, make_grid, multiplier, spectrum, DiscreteOperator, Grid, Window};
use crate::index::{relative_index, spectral_flow, FlowPath, IndexPair};
use crate::linalg::sym_eig;
use crate::model::{desk_l, Potential, SymMatFn};
use crate::orbits::{
    self, eigendirection_seeds, guarantee, lift, newton_search, random_seeds, verify_multiplicity,
    FarField, GuaranteeInput,
};
use crate::potentials::{self, remark13_example, QuadraticPotential};
use crate::reduction::{build_reduction, choose_beta};
use crate::{Error, Result};
use serde_json::{json, Value};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

pub struct ProblemSetup {
    pub l: SymMatFn,
    pub r: Arc<dyn Potential>,
    pub grid: Grid,
    pub op: DiscreteOperator,
    /// full certified eigenvalue list, ascending
    pub eigenvalues: Vec<f64>,
    pub b0: f64,
    pub binf: f64,
    pub even: bool,
    pub gamma: Option<f64>,
}

pub fn build_problem(cfg: &RunConfig) -> Result<ProblemSetup> {
    let l = match cfg.problem.operator.as_str() {
        "desk" => desk_l(),
        other => return Err(Error::Config(format!("unknown operator {other:?}"))),
    };
    let grid = make_grid(cfg.grid.t, cfg.grid.n)?;
    let op = assemble(&l, &grid)?;
    let mut w = op.mat.eigenvalues()?;
    w.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let radii = (cfg.problem.radii[0], cfg.problem.radii[1]);
    match cfg.problem.family.as_str() {
        "quadratic" => {
            let b = cfg.problem.b;
            Ok(ProblemSetup {
                l,
                r: Arc::new(QuadraticPotential { dim: 2, b }),
                grid,
                op,
                eigenvalues: w,
                b0: b,
                binf: b,
                even: true,
                gamma: None,
            })
        }
        fam @ ("remark13" | "truncated") => {
            let p = w.iter().filter(|&&x| x < 0.0).count();
            let l_abs = p as i64 - 1 + cfg.problem.l;
            if l_abs < 0 || (l_abs as usize) + cfg.problem.i + 1 >= w.len() {
                return Err(Error::Config(format!(
                    "problem.l/problem.i: gap indices out of range (zero gap at {p})"
                )));
            }
            let base = remark13_example(2, &w, l_abs as usize, cfg.problem.i, radii)?;
            let (b0, binf) = (base.b0, base.binf);
            let r: Arc<dyn Potential> = if fam == "truncated" {
                let m_k = cfg.problem.m_k.unwrap();
                let gamma = match cfg.problem.gamma {
                    Some(g) => g,
                    None => default_gamma(binf, &w),
                };
                Arc::new(potentials::truncate(Arc::new(base), m_k, gamma, radii.1, binf)?)
            } else {
                Arc::new(base)
            };
            let gamma = if fam == "truncated" {
                Some(cfg.problem.gamma.unwrap_or_else(|| default_gamma(binf, &w)))
            } else {
                None
            };
            Ok(ProblemSetup { l, r, grid, op, eigenvalues: w, b0, binf, even: true, gamma })
        }
        other => Err(Error::Config(format!("unknown family {other:?}"))),
    }
}

/// gamma default: max B_inf eigenvalue + 1, nudged off the spectrum so the
/// constant problem F - gamma I has no eigenvalue within the null window.
pub fn default_gamma(binf_max: f64, eigenvalues: &[f64]) -> f64 {
    let scale = eigenvalues.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let tol = 1e-8 * (1.0 + scale);
    let mut gamma = binf_max + 1.0;
    while eigenvalues.iter().any(|&x| (x - gamma).abs() <= 10.0 * tol) {
        gamma += 0.01;
    }
    gamma
}

fn write_out(out: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(name), content)?;
    Ok(())
}

fn write_json(out: &Path, name: &str, v: &Value) -> Result<()> {
    write_out(out, name, &format!("{}\n", serde_json::to_string_pretty(v).unwrap()))
}

#[derive(serde::Serialize)]
pub struct StageRecord {
    pub name: String,
    pub seconds: f64,
    pub certificates: Vec<String>,
    pub output: Value,
}

#[derive(serde::Serialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub stages: Vec<StageRecord>,
}

impl RunRecord {
    pub fn new(config: RunConfig) -> Self {
        RunRecord { config, stages: Vec::new() }
    }

    /// append-only: stages are only ever pushed
    pub fn push(&mut self, name: &str, started: Instant, certificates: Vec<String>, output: Value) {
        self.stages.push(StageRecord {
            name: name.into(),
            seconds: started.elapsed().as_secs_f64(),
            certificates,
            output,
        });
    }
}

pub fn cmd_spectrum(cfg: &RunConfig, out: &Path, refine: bool) -> Result<Value> {
    let setup = build_problem(cfg)?;
    let decomp = spectrum(&setup.op, Window::Range(-6.0, 6.0))?;
    let mut csv = String::from("index,lambda,residual\n");
    for (k, (&lam, &res)) in decomp.lambdas.iter().zip(&decomp.residuals).enumerate() {
        csv.push_str(&format!("{k},{lam:.12e},{res:.3e}\n"));
    }
    write_out(out, "spectrum.csv", &csv)?;
    let mut certs = vec![format!(
        "residuals <= 1e-8(1+|lambda|) for all {} pairs in window",
        decomp.lambdas.len()
    )];
    if refine {
        let rcfg = refined(cfg);
        let rsetup = build_problem(&rcfg)?;
        let shift = decomp
            .lambdas
            .iter()
            .map(|&lam| {
                rsetup
                    .eigenvalues
                    .iter()
                    .map(|&x| (x - lam).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max);
        certs.push(format!("grid-stability: max eigenvalue shift {shift:.3e} under n -> 2n"));
    }
    let summary = json!({
        "window": [-6.0, 6.0],
        "count": decomp.lambdas.len(),
        "eigenvalues": decomp.lambdas,
        "b0_gap_midpoint": setup.b0,
        "binf_gap_midpoint": setup.binf,
        "certificates": certs,
    });
    write_json(out, "spectrum.json", &summary)?;
    Ok(summary)
}

fn refined(cfg: &RunConfig) -> RunConfig {
    let mut c = cfg.clone();
    c.grid.n *= 2;
    c
}

fn index_of_scalar(setup: &ProblemSetup, b: f64, tol_null: Option<f64>) -> Result<IndexPair> {
    let bm = multiplier(&SymMatFn::scalar(2, move |_| b)?, &setup.grid)?;
    relative_index(&setup.op, &bm, tol_null)
}

pub fn cmd_index(cfg: &RunConfig, out: &Path, refine: bool) -> Result<Value> {
    let setup = build_problem(cfg)?;
    let tol_null = cfg.tolerances.tol_null;
    let p0 = index_of_scalar(&setup, setup.b0, tol_null)?;
    let pinf = index_of_scalar(&setup, setup.binf, tol_null)?;
    let mut certs: Vec<String> =
        vec!["tol-stability: integers stable under tol_null -> tol_null/10".into()];
    if refine {
        let rsetup = build_problem(&refined(cfg))?;
        let r0 = index_of_scalar(&rsetup, setup.b0, tol_null)?;
        let rinf = index_of_scalar(&rsetup, setup.binf, tol_null)?;
        if r0 != p0 || rinf != pinf {
            return Err(Error::Unconverged(format!(
                "index changed under n -> 2n: {p0:?}/{pinf:?} vs {r0:?}/{rinf:?}"
            )));
        }
        certs.push("grid-stability: integers unchanged under n -> 2n".into());
    }
    let mut notes = Vec::new();
    if p0.nu > 0 || pinf.nu > 0 {
        notes.push(
            "nu >= 1: consider the epsilon shift B - eps I (indices recomputed downstream)"
                .to_string(),
        );
    }
    let v = json!({
        "b0": {"value": setup.b0, "mu": p0.mu, "nu": p0.nu},
        "binf": {"value": setup.binf, "mu": pinf.mu, "nu": pinf.nu},
        "certificates": certs,
        "notes": notes,
    });
    write_json(out, "index.json", &v)?;
    Ok(v)
}

/// The flow crosscheck runs on a coarsened copy of the instance (dense path
/// eigensolves), where mu = -Sf is still an exact integer identity.
pub fn cmd_flow(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let mut c = cfg.clone();
    c.grid.n = c.grid.n.min(240);
    let setup = build_problem(&c)?;
    let a = setup.op.mat.to_dense();
    let binf = setup.binf;
    let bm = multiplier(&SymMatFn::scalar(2, move |_| binf)?, &setup.grid)?;
    let b = bm.mat.to_dense();
    let pair = relative_index(&setup.op, &bm, c.tolerances.tol_null)?;
    let (sf, crossings) = spectral_flow(&FlowPath::pencil(&a, &b), 120, c.tolerances.tol_null)?;
    let v = json!({
        "grid_n": c.grid.n,
        "b": binf,
        "mu_inertia": pair.mu,
        "spectral_flow": sf,
        "agree": pair.mu == -sf,
        "crossings": crossings,
    });
    write_json(out, "flow.json", &v)?;
    Ok(v)
}

pub fn cmd_reduce(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let setup = build_problem(cfg)?;
    let decomp = spectrum(&setup.op, Window::Range(0.0, 0.0))?;
    let (beta, cert) = choose_beta(setup.r.bound_c(), setup.gamma.unwrap_or(0.0), &decomp)?;
    let rp = build_reduction(&setup.op, setup.r.clone(), beta, None)?;
    let probe = random_seeds(rp.d0, 1, 0.5, cfg.search.seed)
        .pop()
        .unwrap();
    let aux = rp.auxiliary_solve(&probe, None)?;
    let v = json!({
        "beta": beta,
        "certificate": cert,
        "d0": rp.d0,
        "dim_eminus_x0": rp.dim_eminus_x0,
        "eps": rp.eps,
        "probe_contraction": aux.contraction,
        "probe_iterations": aux.iterations,
    });
    write_json(out, "reduce.json", &v)?;
    Ok(v)
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<Value> {
    let setup = build_problem(cfg)?;
    let tol_null = cfg.tolerances.tol_null;
    let p0 = index_of_scalar(&setup, setup.b0, tol_null)?;
    let pinf = index_of_scalar(&setup, setup.binf, tol_null)?;
    let bound = guarantee(&GuaranteeInput {
        mu0: p0.mu,
        nu0: p0.nu,
        far: FarField::OneSided { muinf: pinf.mu, nuinf: pinf.nu },
        even: setup.even,
        n: setup.op.dim / 2,
    });
    let decomp = spectrum(&setup.op, Window::Range(0.0, 0.0))?;
    let (beta, _) = choose_beta(setup.r.bound_c(), setup.gamma.unwrap_or(0.0), &decomp)?;
    let rp = build_reduction(&setup.op, setup.r.clone(), beta, None)?;
    let lo = setup.b0.min(setup.binf);
    let hi = setup.b0.max(setup.binf);
    let mut seeds = vec![vec![0.0; rp.d0]];
    seeds.extend(eigendirection_seeds(&rp, &cfg.search.amps, (lo, hi)));
    seeds.extend(random_seeds(rp.d0, cfg.search.random, 1.0, cfg.search.seed));
    let found = newton_search(&rp, &seeds, cfg.search.max_iter, true)?;
    let orbits: Vec<orbits::Orbit> = found
        .iter()
        .filter_map(|x| lift(&rp, x, cfg.tolerances.tol_orbit, None).ok())
        .collect();
    let report = verify_multiplicity(bound, &orbits, setup.even, setup.grid.h, seeds.len());
    // orbit dumps
    let mut csv = String::from("orbit,l2_norm,sup_norm,residual,mu,nu,m_minus,m_zero\n");
    for (k, o) in report.orbits.iter().enumerate() {
        csv.push_str(&format!(
            "{k},{:.6e},{:.6e},{:.3e},{},{},{},{}\n",
            o.l2_norm, o.sup_norm, o.residual, o.index_pair.mu, o.index_pair.nu, o.morse.0, o.morse.1
        ));
        let mut dump = String::from("t,z1,z2\n");
        for (i, t) in setup.grid.nodes().into_iter().enumerate() {
            dump.push_str(&format!("{t:.6},{:.9e},{:.9e}\n", o.z[2 * i], o.z[2 * i + 1]));
        }
        write_out(out, &format!("orbit_{k}.csv"), &dump)?;
    }
    write_out(out, "orbits.csv", &csv)?;
    let identity_ok = report
        .orbits
        .iter()
        .all(|o| o.morse_identity_holds(rp.dim_eminus_x0));
    let v = json!({
        "indices": {"mu0": p0.mu, "nu0": p0.nu, "muinf": pinf.mu, "nuinf": pinf.nu},
        "guarantee": bound,
        "beta": beta,
        "d0": rp.d0,
        "dim_eminus_x0": rp.dim_eminus_x0,
        "seeds_used": report.seeds_used,
        "found_distinct_nontrivial": report.found,
        "pass": report.pass,
        "diagnostic": report.diagnostic,
        "theorem_2_5_identity": identity_ok,
        "orbits": report.orbits.iter().map(|o| json!({
            "l2_norm": o.l2_norm,
            "sup_norm": o.sup_norm,
            "residual": o.residual,
            "mu": o.index_pair.mu,
            "nu": o.index_pair.nu,
            "m_minus": o.morse.0,
            "m_zero": o.morse.1,
        })).collect::<Vec<_>>(),
    });
    write_json(out, "search.json", &v)?;
    Ok(v)
}

pub fn cmd_linear(cfg: &RunConfig, out: &Path) -> Result<Value> {
    use crate::linear::{fundamental_solution, nullity_crosscheck, stable_subspace};
    let rot = SymMatFn::constant(ndarray::Array2::eye(2))?;
    let path = fundamental_solution(&rot, 20.0, 1e-3)?;
    let defect = path.defect;
    let hyp = SymMatFn::new(2, |_| {
        ndarray::arr2(&[[1.0, 0.0], [0.0, -1.0]])
    })?;
    let sdim = stable_subspace(&fundamental_solution(&hyp, 20.0, 1e-3)?, 1e-6)?.dim;
    // the nullity crosscheck runs at a coarsened copy of the instance
    let mut c = cfg.clone();
    c.grid.n = c.grid.n.min(400);
    c.grid.t = c.grid.t.min(10.0);
    let setup = build_problem(&c)?;
    let b0 = setup.b0;
    let gap = nullity_crosscheck(&setup.l, &SymMatFn::scalar(2, move |_| b0)?, &setup.grid)?;
    let v = json!({
        "rotation_defect": defect,
        "hyperbolic_stable_dim": sdim,
        "nullity_crosscheck_gap_b": gap,
    });
    write_json(out, "linear.json", &v)?;
    Ok(v)
}

pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<Value> {
    use crate::potentials::{eta, eta_d1, eta_d2};
    let mut props = Vec::new();
    // eta C2 junctions
    let vals = [
        eta(1.0 + 1e-9),
        eta_d1(1.0 + 1e-9),
        eta_d2(1.0 + 1e-9),
        (eta(2.0 + 1e-9) - 1.0 / 9.0).abs(),
        (eta_d1(2.0 + 1e-9) - 2.0 / 9.0).abs(),
        eta_d2(2.0 + 1e-9).abs(),
    ];
    let eta_ok = vals.iter().all(|v| v.abs() < 1e-6);
    props.push(json!({"name": "eta-c2-junctions", "pass": eta_ok, "measured": vals.to_vec()}));
    // index/flow agreement on small random pencils
    let mut agree = true;
    {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.search.seed.wrapping_add(17));
        for _ in 0..5 {
            let n = 8;
            let mut a = ndarray::Array2::<f64>::zeros((n, n));
            let mut b = ndarray::Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in 0..=i {
                    let u = rng.gen_range(-1.0..1.0);
                    a[[i, j]] = u;
                    a[[j, i]] = u;
                    let w = rng.gen_range(-1.0..1.0);
                    b[[i, j]] = w;
                    b[[j, i]] = w;
                }
            }
            let (wa, _) = sym_eig(&a, false)?;
            let (wab, _) = sym_eig(&(&a - &b), false)?;
            if wa.iter().chain(&wab).any(|&x| x.abs() < 1e-3) {
                continue;
            }
            let mu = wab.iter().filter(|&&x| x < 0.0).count() as i64
                - wa.iter().filter(|&&x| x < 0.0).count() as i64;
            let (sf, _) = spectral_flow(&FlowPath::pencil(&a, &b), 60, None)?;
            agree &= mu == -sf;
        }
    }
    props.push(json!({"name": "index-flow-agreement", "pass": agree}));
    let all_pass = eta_ok && agree;
    let v = json!({"properties": props, "all_pass": all_pass});
    write_json(out, "verify.json", &v)?;
    Ok(v)
}

pub fn cmd_report(out: &Path) -> Result<Value> {
    let mut sections = serde_json::Map::new();
    for name in [
        "spectrum.json",
        "index.json",
        "flow.json",
        "reduce.json",
        "search.json",
        "linear.json",
        "verify.json",
    ] {
        let p = out.join(name);
        if p.exists() {
            let text = std::fs::read_to_string(&p)?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("bad JSON in {name}: {e}")))?;
            sections.insert(name.trim_end_matches(".json").to_string(), v);
        }
    }
    let v = Value::Object(sections);
    write_json(out, "report.json", &v)?;
    Ok(v)
}

/// Runs the named stages in dependency order, recording wall-clock and
/// certificates per stage, and writes run.json.
pub fn run_stages(
    cfg: &RunConfig,
    stages: &[String],
    out: &Path,
    refine: bool,
) -> Result<RunRecord> {
    let mut rec = RunRecord::new(cfg.clone());
    let order = ["spectrum", "index", "flow", "reduce", "solve", "linear", "verify", "report"];
    for &name in &order {
        if !stages.iter().any(|s| s == name) {
            continue;
        }
        let t = Instant::now();
        let out_v = match name {
            "spectrum" => cmd_spectrum(cfg, out, refine)?,
            "index" => cmd_index(cfg, out, refine)?,
            "flow" => cmd_flow(cfg, out)?,
            "reduce" => cmd_reduce(cfg, out)?,
            "solve" => cmd_solve(cfg, out)?,
            "linear" => cmd_linear(cfg, out)?,
            "verify" => cmd_verify(cfg, out)?,
            "report" => cmd_report(out)?,
            _ => unreachable!(),
        };
        let certs = out_v
            .get("certificates")
            .and_then(|c| c.as_array())
            .map(|a| a.iter().filter_map(|x| x.as_str().map(String::from)).collect())
            .unwrap_or_default();
        rec.push(name, t, certs, out_v);
    }
    write_json(
        out,
        "run.json",
        &serde_json::to_value(&rec).map_err(|e| Error::Config(e.to_string()))?,
    )?;
    Ok(rec)
}
