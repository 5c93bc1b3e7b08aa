//! Linear Hamiltonian systems zdot = J B(t) z: symplectic fundamental
//! solutions by the implicit midpoint rule, decaying subspaces from the
//! singular value gap of W(T), and the ODE-side nullity cross-check.

use crate::linalg::svd;
use crate::model::{std_j, SymMatFn};
use crate::potentials::reverse_matfn;
use crate::{Error, Result};
use ndarray::Array2;

/// General dense solve A X = RHS via LU (dgesv).
pub fn solve_dense(a: &Array2<f64>, rhs: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows() as i32;
    let nrhs = rhs.ncols() as i32;
    let mut af: Vec<f64> = Vec::with_capacity((n * n) as usize);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            af.push(a[[i, j]]);
        }
    }
    let mut bf: Vec<f64> = Vec::with_capacity((n * nrhs) as usize);
    for j in 0..rhs.ncols() {
        for i in 0..rhs.nrows() {
            bf.push(rhs[[i, j]]);
        }
    }
    let mut ipiv = vec![0i32; n as usize];
    let mut info = 0;
    unsafe {
        lapack::dgesv(n, nrhs, &mut af, n, &mut ipiv, &mut bf, n, &mut info);
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dgesv", info });
    }
    let mut out = Array2::zeros(rhs.dim());
    for j in 0..rhs.ncols() {
        for i in 0..rhs.nrows() {
            out[[i, j]] = bf[j * n as usize + i];
        }
    }
    Ok(out)
}

fn det(a: &Array2<f64>) -> Result<f64> {
    let n = a.nrows() as i32;
    let mut af: Vec<f64> = Vec::with_capacity((n * n) as usize);
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            af.push(a[[i, j]]);
        }
    }
    let mut ipiv = vec![0i32; n as usize];
    let mut info = 0;
    unsafe {
        lapack::dgetrf(n, n, &mut af, n, &mut ipiv, &mut info);
    }
    if info < 0 {
        return Err(Error::Lapack { routine: "dgetrf", info });
    }
    let mut d = 1.0;
    for i in 0..n as usize {
        d *= af[i * n as usize + i];
        if ipiv[i] != (i + 1) as i32 {
            d = -d;
        }
    }
    Ok(d)
}

#[derive(Clone)]
pub struct SymplecticPath {
    pub times: Vec<f64>,
    /// W(times[k]); W(0) = I exactly
    pub w: Vec<Array2<f64>>,
    /// max over sampled times of ||W^T J W - J||_max
    pub defect: f64,
}

impl SymplecticPath {
    pub fn final_w(&self) -> &Array2<f64> {
        self.w.last().unwrap()
    }

    pub fn final_det(&self) -> Result<f64> {
        det(self.final_w())
    }
}

pub const TOL_SYMP: f64 = 1e-8;

/// Integrates Wdot = J B(t) W on [0, T] with the implicit midpoint rule
/// (symplectic for linear systems up to round-off). If the symplectic defect
/// exceeds tol_symp the step is halved and the path recomputed, up to 4 times.
pub fn fundamental_solution(b: &SymMatFn, t_end: f64, h: f64) -> Result<SymplecticPath> {
    if t_end <= 0.0 || h <= 0.0 {
        return Err(Error::InvalidArg("need T > 0 and h > 0".into()));
    }
    let mut h = h;
    for _ in 0..5 {
        let path = integrate(b, t_end, h)?;
        if path.defect <= TOL_SYMP {
            return Ok(path);
        }
        h *= 0.5;
    }
    Err(Error::NoConvergence(
        "symplectic defect above tolerance after 4 step halvings".into(),
    ))
}

fn integrate(b: &SymMatFn, t_end: f64, h: f64) -> Result<SymplecticPath> {
    let dim = b.dim();
    let j = std_j(dim);
    let nsteps = (t_end / h).ceil() as usize;
    let h = t_end / nsteps as f64;
    let eye = Array2::<f64>::eye(dim);
    let mut w = Array2::<f64>::eye(dim);
    let mut times = Vec::with_capacity(nsteps + 1);
    let mut ws = Vec::with_capacity(nsteps + 1);
    times.push(0.0);
    ws.push(w.clone());
    let mut defect = 0.0f64;
    // symplectic defect on a log-spaced subsample; the final W is always checked
    let check_every = (nsteps / 50).max(1);
    for k in 0..nsteps {
        let tm = (k as f64 + 0.5) * h;
        let jb = j.dot(&b.eval(tm));
        let lhs = &eye - &(&jb * (h / 2.0));
        let rhs = (&eye + &(&jb * (h / 2.0))).dot(&w);
        w = solve_dense(&lhs, &rhs)?;
        times.push((k + 1) as f64 * h);
        ws.push(w.clone());
        if (k + 1) % check_every == 0 || k + 1 == nsteps {
            // compare in relative scale: entries of W can grow exponentially
            let wjw = w.t().dot(&j).dot(&w);
            let scale = 1.0 + w.iter().fold(0.0f64, |a, &x| a.max(x.abs())).powi(2);
            let d = (&wjw - &j).iter().fold(0.0f64, |a, &x| a.max(x.abs())) / scale;
            defect = defect.max(d);
        }
    }
    Ok(SymplecticPath { times, w: ws, defect })
}

#[derive(Clone, Debug)]
pub struct StableSubspace {
    /// orthonormal columns spanning the decaying directions at t = 0
    pub basis: Array2<f64>,
    pub dim: usize,
    /// max |W(T) v| over unit v in the span
    pub decay: f64,
}

/// Right singular vectors of W(T) with singular value below
/// max(decay_tol, sigma_max * 1e-12) span the decaying directions.
/// Flagged inconclusive unless the singular values separate by >= 1e3
/// across the threshold.
pub fn stable_subspace(path: &SymplecticPath, decay_tol: f64) -> Result<StableSubspace> {
    let wt = path.final_w();
    let n2 = wt.nrows();
    let (_, s, vt) = svd(wt)?;
    let smax = s.iter().cloned().fold(0.0f64, f64::max);
    let thr = decay_tol.max(smax * 1e-12);
    let below: Vec<usize> = (0..n2).filter(|&k| s[k] <= thr).collect();
    let min_above = s
        .iter()
        .filter(|&&x| x > thr)
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let max_below = below.iter().map(|&k| s[k]).fold(0.0f64, f64::max);
    let floor = max_below.max(thr * 1e-3);
    if min_above.is_finite() {
        let ratio = min_above / floor.max(f64::MIN_POSITIVE);
        if ratio < 1e3 {
            return Err(Error::Inconclusive(ratio));
        }
    }
    let dim = below.len();
    let mut basis = Array2::zeros((n2, dim));
    for (c, &k) in below.iter().enumerate() {
        for i in 0..n2 {
            basis[[i, c]] = vt[[k, i]];
        }
    }
    Ok(StableSubspace { basis, dim, decay: max_below })
}

/// Lemma 3.1 invariant: J maps the stable subspace transversally,
/// rank [basis | J basis] = 2 dim.
pub fn j_transversality(s: &StableSubspace) -> Result<bool> {
    if s.dim == 0 {
        return Ok(true);
    }
    let n2 = s.basis.nrows();
    let j = std_j(n2);
    let jb = j.dot(&s.basis);
    let mut m = Array2::zeros((n2, 2 * s.dim));
    for c in 0..s.dim {
        for i in 0..n2 {
            m[[i, c]] = s.basis[[i, c]];
            m[[i, s.dim + c]] = jb[[i, c]];
        }
    }
    let (_, sv, _) = svd(&m)?;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let rank = sv.iter().filter(|&&x| x > 1e-10 * (1.0 + smax)).count();
    Ok(rank == 2 * s.dim)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct NullityReport {
    pub nu_index: usize,
    pub intersection_dim: usize,
    pub agree: bool,
    pub min_principal_angle: f64,
}

/// Dimension of the intersection of two orthonormal-column spans, counted by
/// principal angles below angle_tol; also returns the smallest angle.
pub fn subspace_intersection(
    a: &Array2<f64>,
    b: &Array2<f64>,
    angle_tol: f64,
) -> Result<(usize, f64)> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return Ok((0, std::f64::consts::FRAC_PI_2));
    }
    let m = a.t().dot(b);
    let (_, s, _) = svd(&m.to_owned())?;
    let mut count = 0;
    let mut min_angle = std::f64::consts::FRAC_PI_2;
    for &c in &s {
        let angle = c.clamp(-1.0, 1.0).acos();
        min_angle = min_angle.min(angle);
        if angle < angle_tol {
            count += 1;
        }
    }
    Ok((count, min_angle))
}

/// Cross-validates nu from the truncated operator against the ODE picture:
/// kernel directions of F - B are homoclinics of zdot = J C(t) z with
/// C = B - L, detected as the intersection at t = 0 of the forward-decaying
/// and backward-decaying subspaces (two integrations, the backward one on the
/// time-reversed coefficient).
pub fn nullity_crosscheck(
    l: &SymMatFn,
    b: &SymMatFn,
    grid: &crate::discretize::Grid,
) -> Result<NullityReport> {
    let a = crate::discretize::assemble(l, grid)?;
    let bm = crate::discretize::multiplier(b, grid)?;
    let nu_index = crate::index::relative_index(&a, &bm, None)?.nu;

    let lc = l.clone();
    let bc = b.clone();
    let dim = l.dim();
    let c = SymMatFn::new(dim, move |t| bc.eval(t) - lc.eval(t))?;
    let c_rev = reverse_matfn(&c);
    // keep exp growth representable: coefficient norms here grow linearly in t
    let t_int = grid.t.min(12.0);
    let h = 2e-3;
    let fwd = stable_subspace(&fundamental_solution(&c, t_int, h)?, 1e-6)?;
    let bwd = stable_subspace(&fundamental_solution(&c_rev, t_int, h)?, 1e-6)?;
    let (intersection_dim, min_principal_angle) =
        subspace_intersection(&fwd.basis, &bwd.basis, 1e-2)?;
    Ok(NullityReport {
        nu_index,
        intersection_dim,
        agree: nu_index == intersection_dim,
        min_principal_angle,
    })
}
