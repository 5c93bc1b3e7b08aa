//! Explicit nonlinearity constructions: the C2 cutoff eta, the truncations
//! R_k, the Remark-1.3 gap-midpoint family, the epsilon shift, time reversal,
//! and the averaged-Hessian interpolation matrix.

use crate::model::{Asymptotic, Potential, ProblemSpec, SymMatFn};
use crate::{Error, Result};
use ndarray::Array2;
use std::sync::Arc;

/// The printed C2 cutoff:
///   eta(s) = 0                                 on [0,1)
///          = (2/9)(s-1)^3 - (1/9)(s-1)^4       on [1,2)
///          = 1 - 128/(9(12+s^2))               on [2,inf)
pub fn eta(s: f64) -> f64 {
    assert!(s >= 0.0, "eta needs s >= 0");
    if s < 1.0 {
        0.0
    } else if s < 2.0 {
        let u = s - 1.0;
        (2.0 / 9.0) * u.powi(3) - (1.0 / 9.0) * u.powi(4)
    } else {
        1.0 - 128.0 / (9.0 * (12.0 + s * s))
    }
}

pub fn eta_d1(s: f64) -> f64 {
    assert!(s >= 0.0);
    if s < 1.0 {
        0.0
    } else if s < 2.0 {
        let u = s - 1.0;
        (2.0 / 3.0) * u * u - (4.0 / 9.0) * u.powi(3)
    } else {
        let d = 12.0 + s * s;
        256.0 * s / (9.0 * d * d)
    }
}

pub fn eta_d2(s: f64) -> f64 {
    assert!(s >= 0.0);
    if s < 1.0 {
        0.0
    } else if s < 2.0 {
        let u = s - 1.0;
        (4.0 / 3.0) * u - (4.0 / 3.0) * u * u
    } else {
        let d = 12.0 + s * s;
        256.0 / (9.0 * d * d) - 1024.0 * s * s / (9.0 * d * d * d)
    }
}

/// C2 quintic bridge with flat ends: 0 -> 1 on [0,1].
fn smooth5(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    }
}
fn smooth5_d1(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        30.0 * u * u * (1.0 - u) * (1.0 - u)
    }
}
fn smooth5_d2(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
    }
}

/// Radial gap-midpoint potential of Remark 1.3:
/// R(t,z) = delta(|z|) (1/2) B0 |z|^2 + (1 - delta(|z|)) (1/2) Binf |z|^2,
/// with a C2 bridge delta running (in log radius) from 1 at r_in to 0 at r_out.
pub struct Remark13Potential {
    dim: usize,
    pub b0: f64,
    pub binf: f64,
    pub r_in: f64,
    pub r_out: f64,
    bound: f64,
}

impl Remark13Potential {
    pub fn new(dim: usize, b0: f64, binf: f64, radii: (f64, f64)) -> Result<Self> {
        let (r_in, r_out) = radii;
        if !(r_in > 0.0 && r_out > r_in) {
            return Err(Error::InvalidArg(format!("bad bridge radii ({r_in},{r_out})")));
        }
        let mut p = Remark13Potential { dim, b0, binf, r_in, r_out, bound: 0.0 };
        // numeric (R1) constant: max of the two radial Hessian branches
        let mut worst: f64 = b0.abs().max(binf.abs());
        let m = 20000;
        for k in 0..=m {
            let r = r_in * 0.5 + (2.0 * r_out - 0.5 * r_in) * k as f64 / m as f64;
            let (q, q1, q2) = p.q(r);
            let g1 = q + 0.5 * q1 * r;
            // radial Hessian eigenvalue: d^2/dr^2 of (1/2) q(r) r^2
            let g2 = q + 2.0 * q1 * r + 0.5 * q2 * r * r;
            worst = worst.max(g1.abs()).max(g2.abs());
        }
        p.bound = worst * (1.0 + 1e-6);
        Ok(p)
    }

    /// q(r) = B0 + (Binf-B0) * smooth5(log(r/r_in)/log(r_out/r_in)) and its
    /// first two r-derivatives. delta(|z|) = 1 - smooth5(...).
    fn q(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.r_in {
            return (self.b0, 0.0, 0.0);
        }
        if r >= self.r_out {
            return (self.binf, 0.0, 0.0);
        }
        let lk = (self.r_out / self.r_in).ln();
        let u = (r / self.r_in).ln() / lk;
        let d = self.binf - self.b0;
        let q = self.b0 + d * smooth5(u);
        let q1 = d * smooth5_d1(u) / (lk * r);
        let q2 = d * (smooth5_d2(u) / (lk * lk) - smooth5_d1(u) / lk) / (r * r);
        (q, q1, q2)
    }
}

impl Potential for Remark13Potential {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _t: f64, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        let (q, _, _) = self.q(r2.sqrt());
        0.5 * q * r2
    }
    fn grad(&self, _t: f64, z: &[f64]) -> Vec<f64> {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        let (q, q1, _) = self.q(r);
        let g1 = q + 0.5 * q1 * r;
        z.iter().map(|v| g1 * v).collect()
    }
    fn hess(&self, _t: f64, z: &[f64]) -> Array2<f64> {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        let (q, q1, q2) = self.q(r);
        let g1 = q + 0.5 * q1 * r;
        let gp = 1.5 * q1 + 0.5 * q2 * r; // d g1 / dr
        let mut h = Array2::eye(self.dim) * g1;
        if r > 1e-14 {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    h[[i, j]] += gp * r * (z[i] / r) * (z[j] / r);
                }
            }
        }
        h
    }
    fn bound_c(&self) -> f64 {
        self.bound
    }
    fn even(&self) -> bool {
        true
    }
}

/// Builds the Remark 1.3 potential from a spectrum: B0 is the midpoint of the
/// gap (lambda_l, lambda_{l+1}) and Binf the midpoint of the gap
/// (lambda_{l+i}, lambda_{l+i+1}) (indices 0-based into the ascending list).
pub fn remark13_example(
    dim: usize,
    spectrum: &[f64],
    l: usize,
    i: usize,
    radii: (f64, f64),
) -> Result<Remark13Potential> {
    if spectrum.len() < l + i + 2 {
        return Err(Error::InvalidArg(format!(
            "spectrum has {} entries, need at least {}",
            spectrum.len(),
            l + i + 2
        )));
    }
    let scale = spectrum.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let tol = 2.0 * 1e-8 * (1.0 + scale);
    let gap0 = spectrum[l + 1] - spectrum[l];
    let gap1 = spectrum[l + i + 1] - spectrum[l + i];
    if i > 0 && (gap0 < tol || gap1 < tol) {
        return Err(Error::InvalidArg(format!(
            "degenerate spectral gap (widths {gap0:.3e}, {gap1:.3e})"
        )));
    }
    let b0 = 0.5 * (spectrum[l] + spectrum[l + 1]);
    let binf = 0.5 * (spectrum[l + i] + spectrum[l + i + 1]);
    Remark13Potential::new(dim, b0, binf, radii)
}

/// The truncation R_k = R + eta_k(|z|) (gamma/2 |z|^2 - R) of Eq. (2.8),
/// with eta_k(s) = eta(s/M_k); equals R exactly for |z| <= M_k and becomes
/// gamma-quadratic at infinity.
pub struct TruncatedPotential {
    base: Arc<dyn Potential>,
    pub m_k: f64,
    pub gamma: f64,
    bound: f64,
}

/// `r0` is the radius beyond which the base potential is declared quadratic /
/// pinched (the R0 of (R+-_inf)); M_k must exceed it. `binf_max` is the top of
/// the asymptotic Hessian: gamma must strictly exceed it (Lemma 3.3(3)).
pub fn truncate(
    base: Arc<dyn Potential>,
    m_k: f64,
    gamma: f64,
    r0: f64,
    binf_max: f64,
) -> Result<TruncatedPotential> {
    if m_k <= r0 {
        return Err(Error::InvalidArg(format!("M_k = {m_k} must exceed R0 = {r0}")));
    }
    if gamma <= binf_max {
        return Err(Error::InvalidArg(format!(
            "gamma = {gamma} must exceed max eigenvalue {binf_max} of B_inf"
        )));
    }
    let mut p = TruncatedPotential { base, m_k, gamma, bound: 0.0 };
    // sampled uniform Hessian bound (Eq. 2.2'): lattice max of spectral norm
    let dim = p.base.dim();
    let mut worst: f64 = p.base.bound_c().max(gamma.abs());
    let dirs: Vec<Vec<f64>> = (0..dim.max(3))
        .map(|k| {
            (0..dim)
                .map(|i| ((k * dim + i + 1) as f64 * 0.7391).sin())
                .collect::<Vec<f64>>()
        })
        .collect();
    for d in &dirs {
        let nrm: f64 = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        for k in 1..=120 {
            let r = 3.0 * m_k * k as f64 / 120.0;
            let z: Vec<f64> = d.iter().map(|v| v / nrm * r).collect();
            let h = p.hess(0.0, &z);
            let (w, _) = crate::linalg::sym_eig(&h, false)?;
            worst = worst.max(w.iter().fold(0.0f64, |a, &x| a.max(x.abs())));
        }
    }
    p.bound = worst * (1.0 + 1e-6);
    Ok(p)
}

impl TruncatedPotential {
    /// Sampled sup of |grad R_k - gamma z| (the C_k of Eq. 2.4).
    pub fn c_k_estimate(&self) -> f64 {
        let dim = self.base.dim();
        let mut worst = 0.0f64;
        for kd in 0..dim {
            for k in 0..=200 {
                let r = 4.0 * self.m_k * k as f64 / 200.0;
                let mut z = vec![0.0; dim];
                z[kd] = r;
                let g = self.grad(0.0, &z);
                let s: f64 = g
                    .iter()
                    .zip(&z)
                    .map(|(gi, zi)| (gi - self.gamma * zi).powi(2))
                    .sum();
                worst = worst.max(s.sqrt());
            }
        }
        worst
    }
}

impl Potential for TruncatedPotential {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn value(&self, t: f64, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        let e = eta(r / self.m_k);
        let rv = self.base.value(t, z);
        rv + e * (0.5 * self.gamma * r2 - rv)
    }
    fn grad(&self, t: f64, z: &[f64]) -> Vec<f64> {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        let g = self.base.grad(t, z);
        if r / self.m_k < 1.0 || r < 1e-14 {
            return g;
        }
        let e = eta(r / self.m_k);
        let e1 = eta_d1(r / self.m_k) / self.m_k;
        let w = 0.5 * self.gamma * r2 - self.base.value(t, z);
        (0..z.len())
            .map(|i| g[i] + e1 * w * z[i] / r + e * (self.gamma * z[i] - g[i]))
            .collect()
    }
    fn hess(&self, t: f64, z: &[f64]) -> Array2<f64> {
        let dim = self.base.dim();
        let r2: f64 = z.iter().map(|v| v * v).sum();
        let r = r2.sqrt();
        let hb = self.base.hess(t, z);
        if r / self.m_k < 1.0 || r < 1e-14 {
            return hb;
        }
        let e = eta(r / self.m_k);
        let e1 = eta_d1(r / self.m_k) / self.m_k;
        let e2 = eta_d2(r / self.m_k) / (self.m_k * self.m_k);
        let w = 0.5 * self.gamma * r2 - self.base.value(t, z);
        let g = self.base.grad(t, z);
        let gz: Vec<f64> = (0..dim).map(|i| self.gamma * z[i] - g[i]).collect();
        let mut h = Array2::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                let zi = z[i] / r;
                let zj = z[j] / r;
                let id = if i == j { 1.0 } else { 0.0 };
                h[[i, j]] = hb[[i, j]]
                    + e2 * w * zi * zj
                    + e1 * (zi * gz[j] + gz[i] * zj)
                    + e1 * w * (id - zi * zj) / r
                    + e * (self.gamma * id - hb[[i, j]]);
            }
        }
        h
    }
    fn bound_c(&self) -> f64 {
        self.bound
    }
    fn even(&self) -> bool {
        self.base.even()
    }
    fn grad_zero_at_origin(&self) -> bool {
        self.base.grad_zero_at_origin()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftDirection {
    /// B + eps I: mu gains the old nullity.
    Plus,
    /// B - eps I (the Remark 1.4 shift): mu unchanged, nu becomes 0.
    Minus,
}

pub fn epsilon_shift(b: &SymMatFn, eps: f64, dir: ShiftDirection) -> Result<SymMatFn> {
    if eps < 0.0 {
        return Err(Error::InvalidArg("eps must be >= 0".into()));
    }
    let b = b.clone();
    let s = match dir {
        ShiftDirection::Plus => eps,
        ShiftDirection::Minus => -eps,
    };
    let dim = b.dim();
    SymMatFn::new(dim, move |t| {
        let mut m = b.eval(t);
        for i in 0..dim {
            m[[i, i]] += s;
        }
        m
    })
}

/// Globally quadratic R(t,z) = (1/2) b |z|^2; its Hessian is exactly b I, so
/// reduction identities that are exact in the quadratic case can be checked
/// to integer precision against it.
pub struct QuadraticPotential {
    pub dim: usize,
    pub b: f64,
}

impl Potential for QuadraticPotential {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _t: f64, z: &[f64]) -> f64 {
        0.5 * self.b * z.iter().map(|v| v * v).sum::<f64>()
    }
    fn grad(&self, _t: f64, z: &[f64]) -> Vec<f64> {
        z.iter().map(|v| self.b * v).collect()
    }
    fn hess(&self, _t: f64, _z: &[f64]) -> Array2<f64> {
        Array2::eye(self.dim) * self.b
    }
    fn bound_c(&self) -> f64 {
        self.b.abs()
    }
    fn even(&self) -> bool {
        true
    }
}

struct ReversedPotential(Arc<dyn Potential>);

impl Potential for ReversedPotential {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, t: f64, z: &[f64]) -> f64 {
        -self.0.value(-t, z)
    }
    fn grad(&self, t: f64, z: &[f64]) -> Vec<f64> {
        self.0.grad(-t, z).into_iter().map(|v| -v).collect()
    }
    fn hess(&self, t: f64, z: &[f64]) -> Array2<f64> {
        -self.0.hess(-t, z)
    }
    fn bound_c(&self) -> f64 {
        self.0.bound_c()
    }
    fn even(&self) -> bool {
        self.0.even()
    }
    fn grad_zero_at_origin(&self) -> bool {
        self.0.grad_zero_at_origin()
    }
}

/// Reverses a coefficient matrix: B~(t) = -B(-t).
pub fn reverse_matfn(b: &SymMatFn) -> SymMatFn {
    let b = b.clone();
    SymMatFn::new(b.dim(), move |t| -b.eval(-t)).unwrap()
}

/// The Remark 2.7 transformation: R~(t,z) = -R(-t,z), L~(t) = -L(-t).
/// z~(t) = z(-t) maps solutions of one problem onto the other; applying it
/// twice is the identity.
pub fn time_reverse(spec: &ProblemSpec) -> ProblemSpec {
    let asymptotic = match &spec.asymptotic {
        Asymptotic::TwoSided { b1, b2 } => Asymptotic::TwoSided {
            // order flips under negation
            b1: reverse_matfn(b2),
            b2: reverse_matfn(b1),
        },
        Asymptotic::OneSided { b_inf, plus, r0 } => Asymptotic::OneSided {
            b_inf: reverse_matfn(b_inf),
            plus: !*plus,
            r0: *r0,
        },
        Asymptotic::None => Asymptotic::None,
    };
    ProblemSpec {
        l: reverse_matfn(&spec.l),
        r: Arc::new(ReversedPotential(spec.r.clone())),
        l1_witness: None,
        asymptotic,
    }
}

fn adaptive_simpson<F: Fn(f64) -> Array2<f64>>(
    f: &F,
    a: f64,
    b: f64,
    fa: &Array2<f64>,
    fm: &Array2<f64>,
    fb: &Array2<f64>,
    tol: f64,
    depth: usize,
) -> Array2<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let whole = (fa + &(fm * 4.0) + fb) * ((b - a) / 6.0);
    let left = (fa + &(&flm * 4.0) + fm) * ((m - a) / 6.0);
    let right = (fm + &(&frm * 4.0) + fb) * ((b - m) / 6.0);
    let refined = &left + &right;
    let err = (&refined - &whole).iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    if depth == 0 || err < 15.0 * tol {
        &refined + &((&refined - &whole) / 15.0)
    } else {
        let l = adaptive_simpson(f, a, m, fa, &flm, fm, tol / 2.0, depth - 1);
        let r = adaptive_simpson(f, m, b, fm, &frm, fb, tol / 2.0, depth - 1);
        l + r
    }
}

/// The interpolation matrix C(t) of Eq. (C_n): the s-average of
/// hess R(t, s z(t)) where |z(t)| >= r0/eps, and B1(t) elsewhere.
/// Returns one matrix per grid node.
pub fn averaged_hessian(
    r: &dyn Potential,
    ts: &[f64],
    zs: &[Vec<f64>],
    eps: f64,
    b1: &SymMatFn,
    r0: f64,
) -> Result<Vec<Array2<f64>>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArg("need 0 < eps < 1".into()));
    }
    assert_eq!(ts.len(), zs.len());
    let mut out = Vec::with_capacity(ts.len());
    for (t, z) in ts.iter().zip(zs) {
        let zn: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if zn < r0 / eps {
            out.push(b1.eval(*t));
        } else {
            let f = |s: f64| {
                let zz: Vec<f64> = z.iter().map(|v| s * v).collect();
                r.hess(*t, &zz)
            };
            let fa = f(0.0);
            let fm = f(0.5);
            let fb = f(1.0);
            out.push(adaptive_simpson(&f, 0.0, 1.0, &fa, &fm, &fb, 1e-8, 30));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use crate::model::desk_l;

    #[test]
    fn eta_printed_values() {
        assert_eq!(eta(0.5), 0.0);
        assert_abs_diff_eq!(eta(1.5), 1.0 / 48.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eta(2.0), 1.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eta_d1(2.0), 2.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eta_d2(2.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn eta_c2_junctions_by_one_sided_differences() {
        // second-order one-sided stencils from each side of both junctions
        for &s in &[1.0f64, 2.0] {
            for &sgn in &[1.0f64, -1.0] {
                let h = 5e-4 * sgn;
                let d1 = (-3.0 * eta(s) + 4.0 * eta(s + h) - eta(s + 2.0 * h)) / (2.0 * h);
                let d2 = (2.0 * eta(s) - 5.0 * eta(s + h) + 4.0 * eta(s + 2.0 * h)
                    - eta(s + 3.0 * h))
                    / (h * h);
                assert!((d1 - eta_d1(s)).abs() < 1e-6, "eta' one-sided at {s}: {d1}");
                assert!((d2 - eta_d2(s)).abs() < 1e-6, "eta'' one-sided at {s}: {d2}");
            }
            // values themselves are continuous
            let vl = eta(s - 1e-9);
            let vr = eta(s + 1e-9);
            assert!((vl - eta(s)).abs() < 1e-6 && (vr - eta(s)).abs() < 1e-6);
        }
    }

    #[test]
    fn eta_monotone_bounded() {
        let mut prev = -1.0;
        for k in 0..=4000 {
            let s = 6.0 * k as f64 / 4000.0;
            let v = eta(s);
            assert!((0.0..=1.0).contains(&v));
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        assert!(eta(1000.0) > 0.99998);
    }

    #[test]
    fn remark13_gap_midpoints() {
        let spec = [-2.0, -0.5, 1.0, 2.5, 4.0];
        let p = remark13_example(2, &spec, 1, 2, (1.0, 2.0)).unwrap();
        assert_abs_diff_eq!(p.b0, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(p.binf, 3.25, epsilon = 1e-15);
        // radial, even, grad vanishes at 0
        assert_eq!(p.grad(0.0, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert_abs_diff_eq!(
            p.value(0.0, &[0.4, 0.3]),
            p.value(0.0, &[-0.4, -0.3]),
            epsilon = 1e-15
        );
        // inside r_in it is exactly (1/2) B0 |z|^2
        assert_abs_diff_eq!(p.value(0.0, &[0.6, 0.0]), 0.5 * 0.25 * 0.36, epsilon = 1e-14);
        // far out it is exactly (1/2) Binf |z|^2
        assert_abs_diff_eq!(p.value(0.0, &[5.0, 0.0]), 0.5 * 3.25 * 25.0, epsilon = 1e-12);
    }

    #[test]
    fn remark13_i0_globally_quadratic() {
        let spec = [-2.0, -0.5, 1.0, 2.5, 4.0];
        let p = remark13_example(2, &spec, 1, 0, (1.0, 2.0)).unwrap();
        assert_eq!(p.b0, p.binf);
        for r in [0.3, 1.5, 4.0] {
            assert_abs_diff_eq!(p.value(0.0, &[r, 0.0]), 0.5 * p.b0 * r * r, epsilon = 1e-12);
        }
    }

    #[test]
    fn remark13_derivatives_consistent() {
        let p = remark13_example(2, &[-2.0, -0.5, 1.0, 2.5, 4.0], 1, 2, (1.0, 2.0)).unwrap();
        let pts: Vec<(f64, Vec<f64>)> = vec![
            (0.0, vec![0.5, 0.2]),
            (0.0, vec![1.1, 0.4]),
            (0.0, vec![1.3, -0.9]),
            (0.0, vec![2.5, 1.0]),
        ];
        let err = crate::model::finite_diff_consistency(&p, &pts, 1e-4).unwrap();
        assert!(err <= 1e-6, "fd error {err}");
    }

    #[test]
    fn truncation_identity_region_and_quadratic_tail() {
        let base: Arc<dyn Potential> =
            Arc::new(remark13_example(2, &[-2.0, -0.5, 1.0, 2.5, 4.0], 1, 2, (1.0, 2.0)).unwrap());
        let rk = truncate(base.clone(), 5.0, 4.25, 2.0, 3.25).unwrap();
        // exact identity for |z| <= M_k
        for r in [0.5, 1.7, 2.5, 4.9] {
            let z = [r, 0.0];
            assert_eq!(rk.value(0.0, &z), base.value(0.0, &z));
            assert_eq!(rk.grad(0.0, &z), base.grad(0.0, &z));
        }
        // Hessian -> gamma I far out
        let h = rk.hess(0.0, &[50.0, 0.0]);
        assert!((h[[0, 0]] - 4.25).abs() < 0.05);
        assert!((h[[1, 1]] - 4.25).abs() < 0.05);
        // C_k estimate finite
        assert!(rk.c_k_estimate().is_finite());
        // chained derivatives consistent across the cutoff region
        let pts: Vec<(f64, Vec<f64>)> =
            vec![(0.0, vec![6.0, 1.0]), (0.0, vec![8.5, -3.0]), (0.0, vec![11.0, 0.5])];
        let err = crate::model::finite_diff_consistency(&rk, &pts, 1e-4).unwrap();
        assert!(err <= 1e-5, "fd error {err}");
    }

    #[test]
    fn truncation_rejects_bad_parameters() {
        let base: Arc<dyn Potential> =
            Arc::new(remark13_example(2, &[-2.0, -0.5, 1.0, 2.5, 4.0], 1, 2, (1.0, 2.0)).unwrap());
        assert!(truncate(base.clone(), 1.5, 4.25, 2.0, 3.25).is_err()); // M_k <= R0
        assert!(truncate(base, 5.0, 3.0, 2.0, 3.25).is_err()); // gamma <= Binf
    }

    #[test]
    fn truncation_uniform_hessian_bound() {
        let base: Arc<dyn Potential> =
            Arc::new(remark13_example(2, &[-2.0, -0.5, 1.0, 2.5, 4.0], 1, 2, (1.0, 2.0)).unwrap());
        let shared = base.bound_c() + 4.25 + 3.0; // one constant for the whole family
        for mk in [5.0, 10.0, 20.0] {
            let rk = truncate(base.clone(), mk, 4.25, 2.0, 3.25).unwrap();
            assert!(rk.bound_c() <= shared, "M_k={mk}: {} > {shared}", rk.bound_c());
        }
    }

    #[test]
    fn epsilon_shift_directions() {
        let b = SymMatFn::constant(Array2::eye(2) * 2.0).unwrap();
        let bm = epsilon_shift(&b, 0.5, ShiftDirection::Minus).unwrap();
        assert_abs_diff_eq!(bm.eval(0.0)[[0, 0]], 1.5, epsilon = 1e-15);
        let bp = epsilon_shift(&b, 0.5, ShiftDirection::Plus).unwrap();
        assert_abs_diff_eq!(bp.eval(0.0)[[0, 0]], 2.5, epsilon = 1e-15);
        let b0 = epsilon_shift(&b, 0.0, ShiftDirection::Minus).unwrap();
        assert_abs_diff_eq!(b0.eval(0.0)[[1, 1]], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn time_reverse_is_involution() {
        let spec = ProblemSpec {
            l: desk_l(),
            r: Arc::new(
                remark13_example(2, &[-2.0, -0.5, 1.0, 2.5, 4.0], 1, 2, (1.0, 2.0)).unwrap(),
            ),
            l1_witness: None,
            asymptotic: Asymptotic::None,
        };
        let twice = time_reverse(&time_reverse(&spec));
        for &t in &[-3.0, 0.0, 1.7] {
            let a = spec.l.eval(t);
            let b = twice.l.eval(t);
            for i in 0..2 {
                for j in 0..2 {
                    assert_abs_diff_eq!(a[[i, j]], b[[i, j]], epsilon = 1e-14);
                }
            }
            let z = [0.3, -1.2];
            assert_abs_diff_eq!(spec.r.value(t, &z), twice.r.value(t, &z), epsilon = 1e-14);
        }
    }

    #[test]
    fn averaged_hessian_branches() {
        let p = remark13_example(2, &[-2.0, -0.5, 1.0, 2.5, 4.0], 1, 2, (1.0, 2.0)).unwrap();
        let b1 = SymMatFn::constant(Array2::eye(2) * -1.0).unwrap();
        // z = 0 -> B1 branch everywhere
        let c = averaged_hessian(&p, &[0.0, 1.0], &[vec![0.0; 2], vec![0.0; 2]], 0.5, &b1, 2.0)
            .unwrap();
        assert_abs_diff_eq!(c[0][[0, 0]], -1.0, epsilon = 1e-14);
        // quadratic potential -> average equals the constant Hessian
        let q = Remark13Potential::new(2, 3.0, 3.0, (1.0, 2.0)).unwrap();
        let c2 = averaged_hessian(&q, &[0.0], &[vec![9.0, 0.0]], 0.5, &b1, 2.0).unwrap();
        assert_abs_diff_eq!(c2[0][[0, 0]], 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(c2[0][[0, 1]], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn averaged_hessian_sandwich() {
        let p = remark13_example(2, &[-2.0, -0.5, 1.0, 2.5, 4.0], 1, 2, (1.0, 2.0)).unwrap();
        // numeric two-sided pinch of the radial Hessian branches
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..=4000 {
            let r = 4.0 * k as f64 / 4000.0 + 1e-6;
            let h = p.hess(0.0, &[r, 0.0]);
            let (w, _) = crate::linalg::sym_eig(&h, false).unwrap();
            lo = lo.min(w[0]);
            hi = hi.max(w[1]);
        }
        let b1 = SymMatFn::constant(Array2::eye(2) * lo).unwrap();
        let eps = 0.3;
        let c = p.bound_c();
        let ts = [0.0, 0.0, 0.0];
        let zs = vec![vec![0.5, 0.0], vec![7.0, 1.0], vec![20.0, -3.0]];
        let cn = averaged_hessian(&p, &ts, &zs, eps, &b1, 2.0).unwrap();
        for m in &cn {
            let (w, _) = crate::linalg::sym_eig(m, false).unwrap();
            let lo_bound = lo - eps * (lo.abs() + c);
            let hi_bound = hi + eps * (c + hi.abs());
            assert!(w[0] >= lo_bound - 1e-9 && w[1] <= hi_bound + 1e-9);
        }
    }
}
