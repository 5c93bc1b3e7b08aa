//! Critical points of the reduced functional, lifted to homoclinic orbits
//! with certified residuals and both index computations, plus the
//! existence/multiplicity guarantees of the twisted-index theorems.

use crate::discretize::DiscreteOperator;
use crate::index::{relative_index, IndexPair};
use crate::linalg::{sym_eig, SymBand};
use crate::linear::solve_dense;
use crate::reduction::{reduced_inertia, ReducedProblem};
use crate::{Error, Result};
use ndarray::Array2;

#[derive(Clone, Debug, serde::Serialize)]
pub struct Orbit {
    /// X0 coordinates of the critical point
    pub x: Vec<f64>,
    /// full grid function
    pub z: Vec<f64>,
    /// |A z - grad R(., z)|_{L2}
    pub residual: f64,
    pub l2_norm: f64,
    pub sup_norm: f64,
    /// (m_minus, m_zero) of a_hess at x
    pub morse: (usize, usize),
    /// relative index of the Hessian multiplier along the orbit
    pub index_pair: IndexPair,
    /// which truncation R_k produced it, if any
    pub k_tag: Option<usize>,
}

impl Orbit {
    /// Theorem 2.5 identity, as exact integers.
    pub fn morse_identity_holds(&self, dim_eminus_x0: usize) -> bool {
        self.morse.0 as i64 == dim_eminus_x0 as i64 + self.index_pair.mu
            && self.morse.1 == self.index_pair.nu
    }
}

pub fn default_tol_orbit(h: f64) -> f64 {
    // 10 tol_fp at unit scale, relaxed by the grid constant of the residual
    1e-6_f64.max(1e-8 / h)
}

fn l2_dist(a: &[f64], b: &[f64], h: f64, flip: bool) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(&u, &v)| {
            let w = if flip { u + v } else { u - v };
            w * w
        })
        .sum();
    h.sqrt() * s.sqrt()
}

/// Damped Newton with line search on |a_grad|; accepts at
/// tol_crit = 1e-9 (1 + |x|). With deflation on, duplicates (by tol_distinct
/// on the lifted X0 part) are filtered and each nontrivial find re-seeds once
/// along its lowest-|eigenvalue| Hessian direction.
pub fn newton_search(
    rp: &ReducedProblem,
    seeds: &[Vec<f64>],
    max_iter: usize,
    deflation: bool,
) -> Result<Vec<Vec<f64>>> {
    let h = rp.op.grid.h;
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    let mut queue: Vec<Vec<f64>> = seeds.to_vec();
    let mut reseeds_left = 4usize;
    let mut qi = 0;
    while qi < queue.len() {
        let seed = queue[qi].clone();
        qi += 1;
        if seed.len() != rp.d0 {
            return Err(Error::DimMismatch(format!(
                "seed has {} coords, d0 = {}",
                seed.len(),
                rp.d0
            )));
        }
        match newton_from(rp, &seed, max_iter) {
            Ok(Some(x)) => {
                let xnorm_l2 = h.sqrt() * x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let tol_d = 1e-3 * xnorm_l2.max(1.0);
                let dup = deflation
                    && accepted.iter().any(|y| {
                        l2_dist(&x, y, h, false) <= tol_d || l2_dist(&x, y, h, true) <= tol_d
                    });
                if !dup {
                    if deflation && xnorm_l2 > 1e-3 && reseeds_left > 0 {
                        if let Some(extra) = reseed_direction(rp, &x) {
                            queue.push(extra);
                            reseeds_left -= 1;
                        }
                    }
                    accepted.push(x);
                }
            }
            Ok(None) => {} // max_iter exhausted: seed skipped
            Err(Error::NotContracting(_)) | Err(Error::NoConvergence(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(accepted)
}

fn reseed_direction(rp: &ReducedProblem, x: &[f64]) -> Option<Vec<f64>> {
    let hess = rp.a_hess(x, None).ok()?;
    let (w, v) = sym_eig(&hess, true).ok()?;
    let v = v?;
    let k = (0..w.len()).min_by(|&i, &j| w[i].abs().partial_cmp(&w[j].abs()).unwrap())?;
    let amp = 0.3 * (1.0 + x.iter().map(|u| u * u).sum::<f64>().sqrt());
    Some((0..x.len()).map(|i| x[i] + amp * v[[i, k]]).collect())
}

fn newton_from(rp: &ReducedProblem, seed: &[f64], max_iter: usize) -> Result<Option<Vec<f64>>> {
    let mut x = seed.to_vec();
    let mut warm: Option<Vec<f64>> = None;
    for _ in 0..max_iter {
        let (g, aux) = rp.a_grad(&x, warm.as_deref())?;
        warm = Some(aux.z);
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ng = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if ng < 1e-9 * (1.0 + xnorm) {
            return Ok(Some(x));
        }
        let hess = rp.a_hess(&x, warm.as_deref())?;
        let scale = hess.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let reg = &hess + &(Array2::<f64>::eye(rp.d0) * (1e-12 * (1.0 + scale)));
        let mut grhs = Array2::zeros((rp.d0, 1));
        for i in 0..rp.d0 {
            grhs[[i, 0]] = -g[i];
        }
        let dx = match solve_dense(&reg, &grhs) {
            Ok(d) => (0..rp.d0).map(|i| d[[i, 0]]).collect::<Vec<f64>>(),
            Err(_) => g.iter().map(|v| -v).collect(),
        };
        let mut lam = 1.0;
        let mut best = x.clone();
        for _ in 0..20 {
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + lam * b).collect();
            match rp.a_grad(&cand, warm.as_deref()) {
                Ok((g2, aux2)) => {
                    let ng2 = g2.iter().map(|v| v * v).sum::<f64>().sqrt();
                    best = cand;
                    if ng2 < ng * (1.0 - 1e-4 * lam) || ng2 < 1e-12 {
                        warm = Some(aux2.z);
                        break;
                    }
                }
                Err(_) => {}
            }
            lam *= 0.5;
        }
        x = best;
    }
    Ok(None)
}

/// The Hessian of R along an orbit as a block-diagonal multiplier.
pub fn orbit_multiplier(rp: &ReducedProblem, z: &[f64]) -> DiscreteOperator {
    let nd = rp.r.dim();
    let mut mat = SymBand::zeros(rp.op.mat.n, nd - 1);
    for (i, t) in rp.op.grid.nodes().into_iter().enumerate() {
        let b = rp.r.hess(t, &z[i * nd..(i + 1) * nd]);
        for a in 0..nd {
            for c in 0..=a {
                mat.set(i * nd + a, i * nd + c, 0.5 * (b[[a, c]] + b[[c, a]]));
            }
        }
    }
    DiscreteOperator { grid: rp.op.grid, dim: rp.op.dim, mat }
}

/// Lifts an accepted critical point to a certified Orbit: auxiliary solve,
/// residual check against tol_orbit, Morse counts of a_hess, and the relative
/// index of the orbit's Hessian multiplier.
pub fn lift(rp: &ReducedProblem, x: &[f64], tol_orbit: f64, k_tag: Option<usize>) -> Result<Orbit> {
    let aux = rp.auxiliary_solve(x, None)?;
    let residual = rp.lift_residual(&aux.z);
    if residual > tol_orbit {
        return Err(Error::Unconverged(format!(
            "lift residual {residual:.3e} above tol_orbit {tol_orbit:.3e}"
        )));
    }
    let h = rp.op.grid.h;
    let l2_norm = h.sqrt() * aux.z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nd = rp.r.dim();
    let sup_norm = (0..rp.op.grid.n)
        .map(|i| {
            aux.z[i * nd..(i + 1) * nd]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0f64, f64::max);
    let hess = rp.a_hess(x, Some(&aux.z))?;
    let morse = reduced_inertia(&hess)?;
    let bop = orbit_multiplier(rp, &aux.z);
    let index_pair = relative_index(&rp.op, &bop, None)?;
    Ok(Orbit {
        x: x.to_vec(),
        z: aux.z,
        residual,
        l2_norm,
        sup_norm,
        morse,
        index_pair,
        k_tag,
    })
}

/// Seeds along X0 eigendirections whose eigenvalue lies in `window`,
/// at +-amp grid amplitude each.
pub fn eigendirection_seeds(rp: &ReducedProblem, amps: &[f64], window: (f64, f64)) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for k in 0..rp.d0 {
        if rp.lam0[k] <= window.0 || rp.lam0[k] >= window.1 {
            continue;
        }
        let sup = rp.v0.column(k).iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        for &amp in amps {
            for sgn in [1.0, -1.0] {
                let mut x = vec![0.0; rp.d0];
                x[k] = sgn * amp / sup;
                out.push(x);
            }
        }
    }
    out
}

pub fn random_seeds(d0: usize, count: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..d0).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect()
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub enum FarField {
    /// two-sided pinch B1 <= hess R <= B2; mu1 = mu_F(K B1)
    TwoSided { mu1: i64 },
    /// one-sided pinch at infinity; (mu, nu) of K B_inf
    OneSided { muinf: i64, nuinf: usize },
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct GuaranteeInput {
    pub mu0: i64,
    pub nu0: usize,
    pub far: FarField,
    pub even: bool,
    /// half phase dimension N
    pub n: usize,
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct GuaranteeBound {
    /// lower bound on nontrivial orbits; for `pairs` it counts +- pairs
    pub count: i64,
    pub pairs: bool,
    pub theorem: &'static str,
}

/// The strongest applicable lower bound from the twisted-index theorems.
/// When nu(K B_inf) != 0 the substitution mu -> mu + nu is applied first.
pub fn guarantee(g: &GuaranteeInput) -> GuaranteeBound {
    match g.far {
        FarField::TwoSided { mu1 } => {
            let lo = g.mu0;
            let hi = g.mu0 + g.nu0 as i64;
            if mu1 >= lo && mu1 <= hi {
                GuaranteeBound { count: 0, pairs: false, theorem: "1.2 (hypothesis fails)" }
            } else if (mu1 - g.mu0).abs() >= g.n as i64 {
                GuaranteeBound { count: 2, pairs: false, theorem: "1.2 (two-orbit clause)" }
            } else {
                GuaranteeBound { count: 1, pairs: false, theorem: "1.2" }
            }
        }
        FarField::OneSided { muinf, nuinf } => {
            let m = if nuinf != 0 { muinf + nuinf as i64 } else { muinf };
            if g.even {
                let pairs = ((m - g.mu0).abs() - 1).max(0);
                GuaranteeBound { count: pairs, pairs: true, theorem: "1.4" }
            } else if m >= g.mu0 + 2 {
                GuaranteeBound { count: 1, pairs: false, theorem: "1.3" }
            } else {
                GuaranteeBound { count: 0, pairs: false, theorem: "1.3 (hypothesis fails)" }
            }
        }
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SearchReport {
    pub orbits: Vec<Orbit>,
    pub seeds_used: usize,
    pub guarantee: GuaranteeBound,
    /// distinct nontrivial orbits, +- pairs counted once for even R
    pub found: i64,
    pub pass: bool,
    pub diagnostic: Option<String>,
}

/// Count distinct nontrivial orbits (pairs counted once when `even`).
pub fn count_distinct(orbits: &[Orbit], even: bool, h: f64) -> i64 {
    let nontrivial: Vec<&Orbit> = orbits.iter().filter(|o| o.l2_norm > 1e-3).collect();
    let mut counted: Vec<&Orbit> = Vec::new();
    for o in nontrivial {
        let tol = 1e-3 * o.l2_norm.max(1.0);
        let dup = counted.iter().any(|c| {
            l2_dist(&o.z, &c.z, h, false) <= tol || (even && l2_dist(&o.z, &c.z, h, true) <= tol)
        });
        if !dup {
            counted.push(o);
        }
    }
    counted.len() as i64
}

pub fn verify_multiplicity(
    bound: GuaranteeBound,
    orbits: &[Orbit],
    even: bool,
    h: f64,
    seeds_used: usize,
) -> SearchReport {
    let found = count_distinct(orbits, even, h);
    let pass = found >= bound.count;
    SearchReport {
        orbits: orbits.to_vec(),
        seeds_used,
        guarantee: bound,
        found,
        pass,
        diagnostic: if pass {
            None
        } else {
            Some("guarantee unmet - enlarge seed set".into())
        },
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct AprioriReport {
    /// (M_k, max sup_norm among qualifying orbits) per truncation run
    pub per_k: Vec<(usize, f64)>,
    /// max relative sup_norm variation across matched orbit chains
    pub max_variation: f64,
    /// overall bound c = sup over k
    pub bound: f64,
    pub bounded: bool,
}

/// Lemma 3.5 surrogate: among orbits with mu <= muinf - 1, sup norms must not
/// grow across an increasing-M_k truncation family. Matched orbits (nearest in
/// L2) must agree in sup_norm within 1 percent.
pub fn apriori_bound_check(runs: &[(usize, Vec<Orbit>)], muinf: i64, h: f64) -> AprioriReport {
    let qualifying: Vec<(usize, Vec<&Orbit>)> = runs
        .iter()
        .map(|(mk, os)| {
            (
                *mk,
                os.iter()
                    .filter(|o| o.l2_norm > 1e-3 && o.index_pair.mu <= muinf - 1)
                    .collect(),
            )
        })
        .collect();
    let per_k: Vec<(usize, f64)> = qualifying
        .iter()
        .map(|(mk, os)| (*mk, os.iter().map(|o| o.sup_norm).fold(0.0f64, f64::max)))
        .collect();
    let mut max_variation = 0.0f64;
    if let Some((_, first)) = qualifying.first() {
        for o in first {
            let mut lo = o.sup_norm;
            let mut hi = o.sup_norm;
            for (_, os) in qualifying.iter().skip(1) {
                let nearest = os.iter().min_by(|a, b| {
                    l2_dist(&a.z, &o.z, h, false)
                        .partial_cmp(&l2_dist(&b.z, &o.z, h, false))
                        .unwrap()
                });
                if let Some(m) = nearest {
                    if l2_dist(&m.z, &o.z, h, false) <= 1e-2 * o.l2_norm.max(1.0) {
                        lo = lo.min(m.sup_norm);
                        hi = hi.max(m.sup_norm);
                    }
                }
            }
            if hi > 0.0 {
                max_variation = max_variation.max((hi - lo) / hi);
            }
        }
    }
    let bound = per_k.iter().map(|&(_, s)| s).fold(0.0f64, f64::max);
    AprioriReport {
        per_k,
        max_variation,
        bound,
        bounded: max_variation <= 1e-2,
    }
}

/// Tail decay surrogate for a certified orbit: sup of |z| over |t| >= frac*T
/// relative to the overall sup norm.
pub fn tail_ratio(rp: &ReducedProblem, orbit: &Orbit, frac: f64) -> f64 {
    let nd = rp.r.dim();
    let cutoff = frac * rp.op.grid.t;
    let mut tail = 0.0f64;
    for (i, t) in rp.op.grid.nodes().into_iter().enumerate() {
        if t.abs() >= cutoff {
            let m = orbit.z[i * nd..(i + 1) * nd]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            tail = tail.max(m);
        }
    }
    tail / orbit.sup_norm.max(f64::MIN_POSITIVE)
}
