//! Problem data: the coefficient matrix L(t), the nonlinearity R(t,z), and
//! sampled checks of the structural hypotheses (L1), (R0), (R1), (R_inf).

use crate::linalg::sym_eig;
use crate::{Error, Result};
use ndarray::Array2;
use std::sync::Arc;

/// Time-indexed symmetric matrix function t -> L(t).
/// Evaluations are symmetrized; the constructor rejects generators whose
/// asymmetry defect exceeds 1e-12 of scale on a probe set.
#[derive(Clone)]
pub struct SymMatFn {
    dim: usize,
    f: Arc<dyn Fn(f64) -> Array2<f64> + Send + Sync>,
}

impl SymMatFn {
    pub fn new<F>(dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Array2<f64> + Send + Sync + 'static,
    {
        if dim < 2 || dim % 2 != 0 {
            return Err(Error::InvalidArg(format!("dim must be even and >= 2, got {dim}")));
        }
        for &t in &[-7.3, -1.0, 0.0, 0.5, 2.0, 11.0] {
            let m = f(t);
            if m.dim() != (dim, dim) {
                return Err(Error::DimMismatch(format!(
                    "generator returned {:?}, expected ({dim},{dim})",
                    m.dim()
                )));
            }
            let mut scale: f64 = 0.0;
            let mut defect: f64 = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    scale = scale.max(m[[i, j]].abs());
                    defect = defect.max((m[[i, j]] - m[[j, i]]).abs());
                }
            }
            if defect > 1e-12 * (1.0 + scale) {
                return Err(Error::InvalidArg(format!(
                    "generator asymmetric at t={t}: defect {defect:.3e}"
                )));
            }
        }
        Ok(SymMatFn { dim, f: Arc::new(f) })
    }

    pub fn constant(m: Array2<f64>) -> Result<Self> {
        let dim = m.nrows();
        Self::new(dim, move |_| m.clone())
    }

    /// g(t) * I_dim.
    pub fn scalar<G>(dim: usize, g: G) -> Result<Self>
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(dim, move |t| Array2::eye(dim) * g(t))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, t: f64) -> Array2<f64> {
        let m = (self.f)(t);
        let mut s = Array2::zeros((self.dim, self.dim));
        for i in 0..self.dim {
            for j in 0..self.dim {
                s[[i, j]] = 0.5 * (m[[i, j]] + m[[j, i]]);
            }
        }
        s
    }
}

/// The standard symplectic matrix J with blocks [[0, -I_N], [I_N, 0]].
pub fn std_j(dim: usize) -> Array2<f64> {
    assert!(dim % 2 == 0);
    let nh = dim / 2;
    let mut j = Array2::zeros((dim, dim));
    for k in 0..nh {
        j[[k, nh + k]] = -1.0;
        j[[nh + k, k]] = 1.0;
    }
    j
}

/// The nonlinearity R(t,z) with analytic derivatives and its declared (R1)
/// bound constant.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: f64, z: &[f64]) -> f64;
    fn grad(&self, t: f64, z: &[f64]) -> Vec<f64>;
    fn hess(&self, t: f64, z: &[f64]) -> Array2<f64>;
    /// The constant c of (R1): |hess| <= c in spectral norm.
    fn bound_c(&self) -> f64;
    /// R(t,-z) = R(t,z).
    fn even(&self) -> bool {
        false
    }
    /// (R0): grad R(t,0) = 0 declared.
    fn grad_zero_at_origin(&self) -> bool {
        true
    }
}

#[derive(Clone, Debug)]
pub struct L1Witness {
    pub p: Array2<f64>,
    pub c: f64,
    pub alpha: f64,
    pub t0: f64,
}

/// Asymptotic Hessian pinches declared for R.
#[derive(Clone)]
pub enum Asymptotic {
    /// (R_inf): B1 <= hess R <= B2 for all (t,z).
    TwoSided { b1: SymMatFn, b2: SymMatFn },
    /// (R+-_inf): +-hess R >= +-B_inf for |z| >= r0.
    OneSided { b_inf: SymMatFn, plus: bool, r0: f64 },
    None,
}

pub struct ProblemSpec {
    pub l: SymMatFn,
    pub r: Arc<dyn Potential>,
    pub l1_witness: Option<L1Witness>,
    pub asymptotic: Asymptotic,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub pass: bool,
    /// Worst sampled violation magnitude (0 when clean).
    pub worst: f64,
    pub detail: String,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    pub samples: String,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn min_eig(m: &Array2<f64>) -> f64 {
    sym_eig(m, false).map(|(w, _)| w[0]).unwrap_or(f64::NEG_INFINITY)
}

fn spectral_norm(m: &Array2<f64>) -> f64 {
    sym_eig(m, false)
        .map(|(w, _)| w.iter().fold(0.0f64, |a, &x| a.max(x.abs())))
        .unwrap_or(f64::INFINITY)
}

/// (L1) check: sym(P L(t)) - c |t|^alpha I >= 0 for sampled |t| >= t0.
pub fn validate_l1(l: &SymMatFn, w: &L1Witness, sample_times: &[f64]) -> Result<HypothesisReport> {
    if w.p.dim() != (l.dim(), l.dim()) {
        return Err(Error::DimMismatch(format!(
            "witness P is {:?}, L is {}x{}",
            w.p.dim(),
            l.dim(),
            l.dim()
        )));
    }
    if sample_times.is_empty() || !sample_times.iter().any(|t| t.abs() >= w.t0) {
        return Err(Error::InvalidArg(
            "sample_times must be nonempty and include |t| >= t0".into(),
        ));
    }
    let dim = l.dim();
    let mut worst = 0.0f64;
    let mut pass = true;
    for &t in sample_times {
        if t.abs() < w.t0 {
            continue;
        }
        let pl = w.p.dot(&l.eval(t));
        let mut m = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                m[[i, j]] = 0.5 * (pl[[i, j]] + pl[[j, i]]);
            }
            m[[i, i]] -= w.c * t.abs().powf(w.alpha);
        }
        let tol = 1e-9 * (1.0 + spectral_norm(&m));
        let me = min_eig(&m);
        if me < -tol {
            pass = false;
            worst = worst.max(-me);
        }
    }
    Ok(HypothesisReport {
        checks: vec![HypothesisCheck {
            name: "L1".into(),
            pass,
            worst,
            detail: format!("c={}, alpha={}, t0={}", w.c, w.alpha, w.t0),
        }],
        samples: format!("{} time samples", sample_times.len()),
    })
}

/// (R1)/(R0)/evenness and, where declared, the asymptotic Hessian pinches.
pub fn validate_r(
    r: &dyn Potential,
    asym: &Asymptotic,
    sample_pts: &[(f64, Vec<f64>)],
) -> Result<HypothesisReport> {
    if sample_pts.is_empty() {
        return Err(Error::InvalidArg("sample_pts must be nonempty".into()));
    }
    let mut checks = Vec::new();
    let dim = r.dim();

    let mut worst_r1 = 0.0f64;
    for (t, z) in sample_pts {
        let h = r.hess(*t, z);
        let norm = spectral_norm(&h);
        worst_r1 = worst_r1.max((norm - r.bound_c()).max(0.0));
    }
    let tol = 1e-9 * (1.0 + r.bound_c());
    checks.push(HypothesisCheck {
        name: "R1".into(),
        pass: worst_r1 <= tol,
        worst: worst_r1,
        detail: format!("bound_c = {}", r.bound_c()),
    });

    if r.grad_zero_at_origin() {
        let mut worst = 0.0f64;
        for (t, _) in sample_pts {
            let g = r.grad(*t, &vec![0.0; dim]);
            worst = worst.max(g.iter().fold(0.0f64, |a, &x| a.max(x.abs())));
        }
        checks.push(HypothesisCheck {
            name: "R0".into(),
            pass: worst <= 1e-12,
            worst,
            detail: "grad R(t,0) = 0".into(),
        });
    }

    if r.even() {
        let mut worst = 0.0f64;
        for (t, z) in sample_pts {
            let zm: Vec<f64> = z.iter().map(|v| -v).collect();
            worst = worst.max((r.value(*t, z) - r.value(*t, &zm)).abs());
        }
        checks.push(HypothesisCheck {
            name: "even".into(),
            pass: worst <= 1e-12 * (1.0 + worst),
            worst,
            detail: "R(t,-z) = R(t,z)".into(),
        });
    }

    match asym {
        Asymptotic::TwoSided { b1, b2 } => {
            let mut worst = 0.0f64;
            for (t, z) in sample_pts {
                let h = r.hess(*t, z);
                let lo = min_eig(&(&h - &b1.eval(*t)));
                let hi = min_eig(&(&b2.eval(*t) - &h));
                worst = worst.max((-lo).max(-hi).max(0.0));
            }
            let tol = 1e-9 * (1.0 + r.bound_c());
            checks.push(HypothesisCheck {
                name: "R_inf".into(),
                pass: worst <= tol,
                worst,
                detail: "B1 <= hess R <= B2".into(),
            });
        }
        Asymptotic::OneSided { b_inf, plus, r0 } => {
            let mut worst = 0.0f64;
            for (t, z) in sample_pts {
                let zn: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                if zn < *r0 {
                    continue;
                }
                let h = r.hess(*t, z);
                let d = if *plus { &h - &b_inf.eval(*t) } else { &b_inf.eval(*t) - &h };
                worst = worst.max((-min_eig(&d)).max(0.0));
            }
            let tol = 1e-9 * (1.0 + r.bound_c());
            checks.push(HypothesisCheck {
                name: if *plus { "R+_inf".into() } else { "R-_inf".into() },
                pass: worst <= tol,
                worst,
                detail: format!("one-sided pinch for |z| >= {r0}"),
            });
        }
        Asymptotic::None => {}
    }

    Ok(HypothesisReport {
        checks,
        samples: format!("{} (t,z) samples", sample_pts.len()),
    })
}

/// Certifies user-supplied derivatives: max relative error of grad against a
/// central difference of value, and of hess against a central difference of
/// grad, over the given points.
pub fn finite_diff_consistency(
    r: &dyn Potential,
    pts: &[(f64, Vec<f64>)],
    h: f64,
) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::InvalidArg("step must be positive".into()));
    }
    let dim = r.dim();
    let mut worst = 0.0f64;
    for (t, z) in pts {
        let g = r.grad(*t, z);
        let hs = r.hess(*t, z);
        for k in 0..dim {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[k] += h;
            zm[k] -= h;
            let vp = r.value(*t, &zp);
            let vm = r.value(*t, &zm);
            if !vp.is_finite() || !vm.is_finite() {
                return Err(Error::InvalidArg(format!("non-finite value at t={t}")));
            }
            let fd = (vp - vm) / (2.0 * h);
            worst = worst.max((fd - g[k]).abs() / (1.0 + g[k].abs()));
            let gp = r.grad(*t, &zp);
            let gm = r.grad(*t, &zm);
            for i in 0..dim {
                let fdh = (gp[i] - gm[i]) / (2.0 * h);
                worst = worst.max((fdh - hs[[i, k]]).abs() / (1.0 + hs[[i, k]].abs()));
            }
        }
    }
    Ok(worst)
}

/// The desk coefficient matrix: L(t) = (1+4|t|) diag(1,-1) + 1.2 tanh(t) sigma1.
/// Satisfies (L1) with P = diag(1,-1), c = 4, alpha = 1, t0 = 0, and has
/// discrete simple spectrum after discretization.
pub fn desk_l() -> SymMatFn {
    SymMatFn::new(2, |t| {
        let a = 1.0 + 4.0 * t.abs();
        let b = 1.2 * t.tanh();
        ndarray::arr2(&[[a, b], [b, -a]])
    })
    .unwrap()
}

pub fn desk_l1_witness() -> L1Witness {
    L1Witness {
        p: ndarray::arr2(&[[1.0, 0.0], [0.0, -1.0]]),
        c: 4.0,
        alpha: 1.0,
        t0: 0.0,
    }
}

/// The rotation family |t| [[cos 2t, sin 2t], [sin 2t, -cos 2t]]: no constant
/// P witnesses (L1) for it.
pub fn rotation_counterexample() -> SymMatFn {
    SymMatFn::new(2, |t| {
        let a = t.abs();
        let (s, c) = (2.0 * t).sin_cos();
        ndarray::arr2(&[[a * c, a * s], [a * s, -a * c]])
    })
    .unwrap()
}

/// Candidate constant matrices for an (L1) witness search in dim 2.
pub fn candidate_p_set(dim: usize) -> Vec<Array2<f64>> {
    assert_eq!(dim, 2);
    let i = Array2::eye(2);
    let j = std_j(2);
    let d = ndarray::arr2(&[[1.0, 0.0], [0.0, -1.0]]);
    vec![i.clone(), -i, j.clone(), -j, d]
}
