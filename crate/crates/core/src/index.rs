//! The relative Morse index pair (mu, nu): by matrix inertia in the common
//! truncation, and independently by spectral flow along the pencil
//! theta -> A - theta B with crossing operators.

use crate::discretize::DiscreteOperator;
use crate::linalg::{sym_eig, sym_eig_gen};
use crate::{Error, Result};
use ndarray::Array2;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct IndexPair {
    pub mu: i64,
    pub nu: usize,
}

pub fn default_tol_null(scale: f64) -> f64 {
    1e-8 * (1.0 + scale)
}

/// Eigenvalue counts (below -tol, within +-tol, above +tol).
pub fn inertia(m: &Array2<f64>, tol_null: f64) -> Result<(usize, usize, usize)> {
    let (w, _) = sym_eig(m, false)?;
    Ok(counts(&w, tol_null))
}

pub fn counts(w: &[f64], tol: f64) -> (usize, usize, usize) {
    let neg = w.iter().filter(|&&x| x < -tol).count();
    let pos = w.iter().filter(|&&x| x > tol).count();
    (neg, w.len() - neg - pos, pos)
}

/// mu = n_minus(A-B) - n_minus(A), nu = n_zero(A-B), both in the same
/// truncation. Integer outputs must be stable under tol_null -> tol_null/10,
/// otherwise the computation is flagged unconverged.
pub fn relative_index(
    a: &DiscreteOperator,
    b: &DiscreteOperator,
    tol_null: Option<f64>,
) -> Result<IndexPair> {
    if a.size() != b.size() || a.dim != b.dim {
        return Err(Error::DimMismatch(format!(
            "operators have sizes {} and {}",
            a.size(),
            b.size()
        )));
    }
    let amb = a.mat.sub(&b.mat);
    let wa = a.mat.eigenvalues()?;
    let wab = amb.eigenvalues()?;
    let scale = wa
        .iter()
        .chain(&wab)
        .fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let tol = tol_null.unwrap_or_else(|| default_tol_null(scale));
    let pair_at = |t: f64| -> IndexPair {
        let (na, _, _) = counts(&wa, t);
        let (nab, zab, _) = counts(&wab, t);
        IndexPair { mu: nab as i64 - na as i64, nu: zab }
    };
    let p = pair_at(tol);
    let p10 = pair_at(tol / 10.0);
    if p != p10 {
        return Err(Error::Unconverged(format!(
            "index pair unstable under tol_null/10: {p:?} vs {p10:?}"
        )));
    }
    Ok(p)
}

/// A continuous path theta in [0,1] -> symmetric matrix.
#[derive(Clone)]
pub struct FlowPath {
    pub size: usize,
    f: Arc<dyn Fn(f64) -> Array2<f64> + Send + Sync>,
}

impl FlowPath {
    pub fn new<F>(size: usize, f: F) -> Self
    where
        F: Fn(f64) -> Array2<f64> + Send + Sync + 'static,
    {
        FlowPath { size, f: Arc::new(f) }
    }

    /// The linear pencil theta -> A - theta B.
    pub fn pencil(a: &Array2<f64>, b: &Array2<f64>) -> Self {
        assert_eq!(a.dim(), b.dim());
        let a = a.clone();
        let b = b.clone();
        FlowPath::new(a.nrows(), move |th| &a - &(&b * th))
    }

    pub fn eval(&self, theta: f64) -> Array2<f64> {
        let m = (self.f)(theta);
        0.5 * (&m + &m.t())
    }

    /// central finite-difference path derivative
    pub fn deriv(&self, theta: f64) -> Array2<f64> {
        let fnorm = self
            .eval(theta)
            .iter()
            .fold(0.0f64, |a, &x| a.max(x.abs()));
        let h = 1e-5 * (1.0 + fnorm);
        let lo = (theta - h).max(0.0);
        let hi = (theta + h).min(1.0);
        (self.eval(hi) - self.eval(lo)) / (hi - lo)
    }

    /// path shifted by +eps * I
    pub fn shifted(&self, eps: f64) -> FlowPath {
        let f = self.f.clone();
        let size = self.size;
        FlowPath::new(size, move |th| {
            let mut m = f(th);
            for i in 0..size {
                m[[i, i]] += eps;
            }
            m
        })
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct Crossing {
    pub theta: f64,
    pub kernel_dim: usize,
    /// dim H+(C_r) - dim H-(C_r) of the crossing operator
    pub signature: i64,
    /// true when this crossing sits at theta = 0 or 1 and contributes through
    /// the printed endpoint terms instead of its signature
    pub endpoint: bool,
}

fn spec_norm(m: &Array2<f64>) -> f64 {
    sym_eig(m, false)
        .map(|(w, _)| w.iter().fold(0.0f64, |a, &x| a.max(x.abs())))
        .unwrap_or(0.0)
}

/// Crossing operator P_theta (dF/dtheta) P_theta restricted to the kernel;
/// returns (kernel_dim, eigenvalues of C_r).
fn crossing_operator(path: &FlowPath, theta: f64, window: f64) -> Result<(usize, Vec<f64>)> {
    let m = path.eval(theta);
    let (w, v) = sym_eig(&m, true)?;
    let v = v.unwrap();
    let kidx: Vec<usize> = (0..w.len()).filter(|&k| w[k].abs() <= window).collect();
    let kd = kidx.len();
    if kd == 0 {
        return Ok((0, vec![]));
    }
    let df = path.deriv(theta);
    let mut c = Array2::zeros((kd, kd));
    for (i, &ki) in kidx.iter().enumerate() {
        let dvi = df.dot(&v.column(ki));
        for (j, &kj) in kidx.iter().enumerate() {
            c[[i, j]] = v.column(kj).dot(&dvi);
        }
    }
    let c = 0.5 * (&c + &c.t());
    let (cw, _) = sym_eig(&c, false)?;
    Ok((kd, cw))
}

/// Spectral flow over [lo, hi] in path time, by a Lipschitz-safe walk along
/// the minimum |eigenvalue| curve: a step of d/(1.5 Lip) can never jump across
/// a zero, so no crossing is skipped. At each located crossing the printed
/// formula is applied: interior crossings contribute sign C_r, an endpoint
/// kernel at lo contributes -dim H-(C_r), at hi +dim H+(C_r).
pub fn spectral_flow_range(
    path: &FlowPath,
    lo: f64,
    hi: f64,
    steps: usize,
    tol_null: Option<f64>,
) -> Result<(i64, Vec<Crossing>)> {
    let scale = (0..=4)
        .map(|k| spec_norm(&path.eval(lo + (hi - lo) * k as f64 / 4.0)))
        .fold(0.0f64, f64::max);
    let tol = tol_null.unwrap_or_else(|| default_tol_null(scale));
    let lip = (0..=4)
        .map(|k| spec_norm(&path.deriv(lo + (hi - lo) * k as f64 / 4.0)))
        .fold(1e-12f64, f64::max)
        * 1.2;
    let mut sf: i64 = 0;
    let mut crossings = Vec::new();
    let min_abs_eig = |theta: f64| -> Result<f64> {
        let (w, _) = sym_eig(&path.eval(theta), false)?;
        Ok(w.iter().fold(f64::INFINITY, |a, &x| a.min(x.abs())))
    };

    let handle_endpoint = |theta: f64, at_lo: bool, sf: &mut i64, out: &mut Vec<Crossing>| -> Result<()> {
        let (kd, cw) = crossing_operator(path, theta, tol)?;
        if kd == 0 {
            return Ok(());
        }
        let (cn, cz, cp) = counts(&cw, tol);
        if cz > 0 {
            return Err(Error::Unconverged(format!(
                "non-regular endpoint crossing at theta={theta}"
            )));
        }
        if at_lo {
            *sf -= cn as i64;
        } else {
            *sf += cp as i64;
        }
        out.push(Crossing {
            theta,
            kernel_dim: kd,
            signature: cp as i64 - cn as i64,
            endpoint: true,
        });
        Ok(())
    };

    handle_endpoint(lo, true, &mut sf, &mut crossings)?;
    handle_endpoint(hi, false, &mut sf, &mut crossings)?;

    let mut theta = lo;
    // clear a possible endpoint kernel before walking
    if min_abs_eig(theta)? <= tol {
        theta += ((hi - lo) * 1e-4).max(2.0 * tol / lip);
    }
    let budget = steps.max(2) * 200;
    let mut iters = 0usize;
    while theta < hi {
        iters += 1;
        if iters > budget {
            return Err(Error::NoConvergence("spectral flow step budget exhausted".into()));
        }
        let d = min_abs_eig(theta)?;
        if d > tol {
            let step = (d / (1.5 * lip)).max((hi - lo) * 1e-12);
            let next = (theta + step).min(hi);
            if next >= hi {
                // the walk reached the far endpoint without an interior crossing
                if min_abs_eig(hi)? > tol || (hi - theta) * lip < tol {
                    break;
                }
            }
            theta = next;
            continue;
        }
        // crossing located at theta (within ctol / lip)
        if (theta - lo).abs() * lip < 10.0 * tol || (hi - theta).abs() * lip < 10.0 * tol {
            // endpoint kernels were already handled
            theta += 2.0 * tol / lip;
            continue;
        }
        let (kd, cw) = crossing_operator(path, theta, 20.0 * tol)?;
        let (cn, cz, cp) = counts(&cw, tol);
        if cz > 0 || kd == 0 {
            return Err(Error::Unconverged(format!(
                "non-regular crossing at theta={theta:.8} (kernel of C_r nontrivial)"
            )));
        }
        sf += cp as i64 - cn as i64;
        crossings.push(Crossing {
            theta,
            kernel_dim: kd,
            signature: cp as i64 - cn as i64,
            endpoint: false,
        });
        // step past: crossing eigenvalues move at >= min|eig C_r|
        let cmin = cw.iter().fold(f64::INFINITY, |a, &x| a.min(x.abs()));
        let mut delta = 5.0 * tol / cmin.max(1e-12);
        for _ in 0..60 {
            if theta + delta >= hi || min_abs_eig(theta + delta)? > tol {
                break;
            }
            delta *= 2.0;
        }
        theta += delta;
    }
    crossings.sort_by(|a, b| a.theta.partial_cmp(&b.theta).unwrap());
    Ok((sf, crossings))
}

/// Spectral flow over the full path [0,1]. Non-regular crossings are retried
/// once on the epsilon-shifted path (which leaves sf unchanged).
pub fn spectral_flow(
    path: &FlowPath,
    steps: usize,
    tol_null: Option<f64>,
) -> Result<(i64, Vec<Crossing>)> {
    match spectral_flow_range(path, 0.0, 1.0, steps, tol_null) {
        Err(Error::Unconverged(_)) => {
            let scale = spec_norm(&path.eval(0.0)).max(spec_norm(&path.eval(1.0)));
            let eps = smallest_nonzero_endpoint_eig(path)?.map(|m| 0.25 * m);
            let eps = eps.unwrap_or(1e-6 * (1.0 + scale));
            let shifted = path.shifted(eps);
            spectral_flow_range(&shifted, 0.0, 1.0, steps, tol_null)
        }
        other => other,
    }
}

fn smallest_nonzero_endpoint_eig(path: &FlowPath) -> Result<Option<f64>> {
    let mut best = f64::INFINITY;
    for th in [0.0, 1.0] {
        let (w, _) = sym_eig(&path.eval(th), false)?;
        let scale = w.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        for &x in &w {
            if x.abs() > default_tol_null(scale) {
                best = best.min(x.abs());
            }
        }
    }
    Ok(if best.is_finite() { Some(best) } else { None })
}

/// Shifts the path by +eps * I. Spectral flow is invariant for eps below half
/// the smallest nonzero endpoint eigenvalue magnitude (checked).
pub fn regularize(path: &FlowPath, eps: f64) -> Result<FlowPath> {
    if eps < 0.0 {
        return Err(Error::InvalidArg("eps must be >= 0".into()));
    }
    if eps == 0.0 {
        return Ok(path.clone());
    }
    if let Some(m) = smallest_nonzero_endpoint_eig(path)? {
        if eps >= 0.5 * m {
            return Err(Error::InvalidArg(format!(
                "eps = {eps} would move an endpoint eigenvalue across zero (half-gap {})",
                0.5 * m
            )));
        }
    }
    Ok(path.shifted(eps))
}

/// The monotone-flow sum: sum over theta in [0,1) of dim ker(A - theta B) for
/// B >= 0 with trivial kernel, via the generalized eigenproblem A v = theta B v.
/// Equals relative_index(A, B).mu.
pub fn monotone_count(a: &Array2<f64>, b: &Array2<f64>, tol_null: Option<f64>) -> Result<usize> {
    let (wb, _) = sym_eig(b, false)?;
    let bscale = wb.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    let tol = tol_null.unwrap_or_else(|| default_tol_null(bscale));
    if wb.iter().any(|&x| x <= tol) {
        return Err(Error::InvalidArg(
            "B must be positive semidefinite with trivial kernel".into(),
        ));
    }
    let th = sym_eig_gen(a, b)?;
    Ok(th.iter().filter(|&&x| x >= -1e-10 && x < 1.0 - 1e-10).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::Grid;
    use crate::linalg::SymBand;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn op_from_diag(d: &[f64]) -> DiscreteOperator {
        let n = d.len();
        let mut mat = SymBand::zeros(n, 1);
        for (i, &v) in d.iter().enumerate() {
            mat.set(i, i, v);
        }
        DiscreteOperator { grid: Grid { t: 1.0, n, h: 1.0 }, dim: 1, mat }
    }

    #[test]
    fn inertia_examples() {
        let m = arr2(&[[-2.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 3.0]]);
        assert_eq!(inertia(&m, 1e-10).unwrap(), (1, 1, 1));
        let z = Array2::<f64>::zeros((4, 4));
        assert_eq!(inertia(&z, 1e-10).unwrap(), (0, 4, 0));
    }

    #[test]
    fn inertia_matches_dense_oracle_on_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let mut m = Array2::<f64>::zeros((20, 20));
            for i in 0..20 {
                for j in 0..=i {
                    let v = rng.gen_range(-1.0..1.0);
                    m[[i, j]] = v;
                    m[[j, i]] = v;
                }
            }
            let (w, _) = sym_eig(&m, false).unwrap();
            let (n, z, p) = inertia(&m, 1e-10).unwrap();
            assert_eq!(n, w.iter().filter(|&&x| x < -1e-10).count());
            assert_eq!(z, 0);
            assert_eq!(p, 20 - n);
        }
    }

    #[test]
    fn relative_index_examples() {
        let a = op_from_diag(&[-3.0, -1.0, 1.0, 3.0]);
        let b2 = op_from_diag(&[2.0, 2.0, 2.0, 2.0]);
        assert_eq!(relative_index(&a, &b2, None).unwrap(), IndexPair { mu: 1, nu: 0 });
        let b0 = op_from_diag(&[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(relative_index(&a, &b0, None).unwrap(), IndexPair { mu: 0, nu: 0 });
        let b1 = op_from_diag(&[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(relative_index(&a, &b1, None).unwrap(), IndexPair { mu: 0, nu: 1 });
    }

    #[test]
    fn flow_simple_crossings() {
        let p = FlowPath::new(2, |th| arr2(&[[1.0 - 2.0 * th, 0.0], [0.0, 5.0]]));
        let (sf, cr) = spectral_flow(&p, 40, None).unwrap();
        assert_eq!(sf, -1);
        assert_eq!(cr.len(), 1);
        assert!((cr[0].theta - 0.5).abs() < 1e-6);
        assert_eq!(cr[0].signature, -1);

        let c = FlowPath::new(2, |_| arr2(&[[2.0, 0.3], [0.3, -1.0]]));
        let (sf, cr) = spectral_flow(&c, 40, None).unwrap();
        assert_eq!(sf, 0);
        assert!(cr.is_empty());

        let up = FlowPath::new(1, |th| arr2(&[[2.0 * th - 1.0]]));
        let (sf, _) = spectral_flow(&up, 40, None).unwrap();
        assert_eq!(sf, 1);
    }

    #[test]
    fn flow_equals_minus_relative_index_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..10 {
            let n = 6 + (trial % 3) * 4;
            let mut a = Array2::<f64>::zeros((n, n));
            let mut b = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in 0..=i {
                    let v = rng.gen_range(-1.0..1.0);
                    a[[i, j]] = v;
                    a[[j, i]] = v;
                    let w = rng.gen_range(-1.0..1.0);
                    b[[i, j]] = w;
                    b[[j, i]] = w;
                }
            }
            let (wa, _) = sym_eig(&a, false).unwrap();
            let (wab, _) = sym_eig(&(&a - &b), false).unwrap();
            if wa.iter().any(|&x| x.abs() < 1e-3) || wab.iter().any(|&x| x.abs() < 1e-3) {
                continue; // endpoints must be nondegenerate
            }
            let mu = wab.iter().filter(|&&x| x < 0.0).count() as i64
                - wa.iter().filter(|&&x| x < 0.0).count() as i64;
            let (sf, _) = spectral_flow(&FlowPath::pencil(&a, &b), 60, None).unwrap();
            assert_eq!(mu, -sf, "trial {trial}: mu={mu}, sf={sf}");
        }
    }

    #[test]
    fn flow_catenation() {
        let p = FlowPath::new(2, |th| arr2(&[[1.0 - 2.0 * th, 0.1], [0.1, 3.0 - 8.0 * th]]));
        let (full, _) = spectral_flow_range(&p, 0.0, 1.0, 60, None).unwrap();
        let (lo, _) = spectral_flow_range(&p, 0.0, 0.5, 60, None).unwrap();
        let (hi, _) = spectral_flow_range(&p, 0.5, 1.0, 60, None).unwrap();
        assert_eq!(full, lo + hi);
    }

    #[test]
    fn regularize_invariance_and_rejection() {
        let p = FlowPath::new(2, |th| arr2(&[[1.0 - 2.0 * th, 0.0], [0.0, 5.0]]));
        let shifted = regularize(&p, 1e-4).unwrap();
        let (sf, _) = spectral_flow(&shifted, 40, None).unwrap();
        assert_eq!(sf, -1);
        let id = regularize(&p, 0.0).unwrap();
        assert_eq!(spectral_flow(&id, 40, None).unwrap().0, -1);
        assert!(regularize(&p, 10.0).is_err());
    }

    #[test]
    fn monotone_count_examples() {
        let a = arr2(&[[1.0, 0.0], [0.0, 3.0]]);
        let b = arr2(&[[2.0, 0.0], [0.0, 2.0]]);
        assert_eq!(monotone_count(&a, &b, None).unwrap(), 1);

        let an = arr2(&[[-1.0, 0.0], [0.0, -4.0]]);
        let i2 = Array2::eye(2);
        assert_eq!(monotone_count(&an, &i2, None).unwrap(), 0);

        let a3 = arr2(&[[0.2, 0.0, 0.0], [0.0, 0.4, 0.0], [0.0, 0.0, 5.0]]);
        let i3 = Array2::eye(3);
        assert_eq!(monotone_count(&a3, &i3, None).unwrap(), 2);

        let sing = Array2::<f64>::zeros((2, 2));
        assert!(monotone_count(&a, &sing, None).is_err());
    }

    #[test]
    fn monotone_count_matches_mu() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let n = 8;
            let mut a = Array2::<f64>::zeros((n, n));
            let mut g = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                for j in 0..=i {
                    let v = rng.gen_range(-1.0..1.0);
                    a[[i, j]] = v;
                    a[[j, i]] = v;
                }
                for j in 0..n {
                    g[[i, j]] = rng.gen_range(-1.0..1.0);
                }
            }
            let b = g.t().dot(&g) + Array2::<f64>::eye(n) * 0.05; // B > 0
            let cnt = monotone_count(&a, &b, None).unwrap();
            let (wa, _) = sym_eig(&a, false).unwrap();
            let (wab, _) = sym_eig(&(&a - &b), false).unwrap();
            let mu = wab.iter().filter(|&&x| x < -1e-10).count() as i64
                - wa.iter().filter(|&&x| x < -1e-10).count() as i64;
            assert_eq!(cnt as i64, mu);
        }
    }

    #[test]
    fn additivity_by_inertia_telescoping() {
        let a = op_from_diag(&[-3.0, -1.0, 0.5, 2.0, 4.0]);
        let b1 = op_from_diag(&[1.0, 1.0, 1.0, 1.0, 1.0]);
        let b2 = op_from_diag(&[0.7, 0.7, 0.7, 0.7, 0.7]);
        let b12 = op_from_diag(&[1.7, 1.7, 1.7, 1.7, 1.7]);
        let amb1 = DiscreteOperator {
            grid: a.grid,
            dim: 1,
            mat: a.mat.sub(&b1.mat),
        };
        let lhs = relative_index(&a, &b12, None).unwrap().mu;
        let rhs = relative_index(&a, &b1, None).unwrap().mu
            + relative_index(&amb1, &b2, None).unwrap().mu;
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn unstable_index_is_flagged() {
        // an eigenvalue planted between tol/10 and tol
        let a = op_from_diag(&[1.0, -1.0, 5e-9]);
        let b = op_from_diag(&[0.0, 0.0, 0.0]);
        let r = relative_index(&a, &b, Some(1e-8));
        assert!(matches!(r, Err(Error::Unconverged(_))));
    }
}
