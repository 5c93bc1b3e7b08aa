//! Finite-dimensional surrogates of F = -J d/dt + L(t) on a truncated grid
//! with zero boundary (the decay surrogate), spectra with residual
//! certificates, and the discrete L2 / E / Lp norm calculus.

use crate::linalg::SymBand;
use crate::model::SymMatFn;
use crate::{Error, Result};
use ndarray::Array2;

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct Grid {
    /// half-width: nodes live in (-T, T)
    pub t: f64,
    /// interior point count
    pub n: usize,
    /// spacing 2T/(n+1)
    pub h: f64,
}

impl Grid {
    pub fn node(&self, i: usize) -> f64 {
        -self.t + (i + 1) as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// one grid refinement step of the convergence protocol (n -> 2n)
    pub fn refined(&self) -> Grid {
        make_grid(self.t, 2 * self.n).unwrap()
    }

    /// one truncation extension step (T -> 1.5T at comparable h)
    pub fn extended(&self) -> Grid {
        make_grid(1.5 * self.t, (3 * self.n) / 2).unwrap()
    }
}

pub fn make_grid(t: f64, n: usize) -> Result<Grid> {
    if t <= 0.0 {
        return Err(Error::InvalidArg("grid half-width must be positive".into()));
    }
    if n < 3 {
        return Err(Error::InvalidArg(format!("need n >= 3 interior points, got {n}")));
    }
    Ok(Grid { t, n, h: 2.0 * t / (n as f64 + 1.0) })
}

/// Symmetric banded matrix over a grid; represents either the assembled
/// operator F or a multiplication operator.
#[derive(Clone)]
pub struct DiscreteOperator {
    pub grid: Grid,
    /// 2N
    pub dim: usize,
    pub mat: SymBand,
}

impl DiscreteOperator {
    pub fn size(&self) -> usize {
        self.dim * self.grid.n
    }
}

/// D (x) (-J) + blockdiag(L(t_i)), with D the antisymmetric central
/// difference under zero boundary conditions. Exactly symmetric by
/// construction.
pub fn assemble(l: &SymMatFn, grid: &Grid) -> Result<DiscreteOperator> {
    let dim = l.dim();
    let nh = dim / 2;
    let n = grid.n;
    let kd = 3 * nh; // diag blocks reach 2N-1, the -J/2h coupling reaches 3N
    let mut mat = SymBand::zeros(dim * n, kd.max(dim - 1));
    let j = crate::model::std_j(dim);
    for i in 0..n {
        let li = l.eval(grid.node(i));
        let b = i * dim;
        for r in 0..dim {
            for c in 0..=r {
                mat.set(b + r, b + c, li[[r, c]]);
            }
        }
        if i + 1 < n {
            // lower coupling block (i+1, i) of D (x) (-J) is +J/(2h)
            for r in 0..dim {
                for c in 0..dim {
                    let v = j[[r, c]] / (2.0 * grid.h);
                    if v != 0.0 {
                        mat.set(b + dim + r, b + c, v);
                    }
                }
            }
        }
    }
    Ok(DiscreteOperator { grid: *grid, dim, mat })
}

/// blockdiag(B(t_i)).
pub fn multiplier(b: &SymMatFn, grid: &Grid) -> Result<DiscreteOperator> {
    let dim = b.dim();
    let n = grid.n;
    let mut mat = SymBand::zeros(dim * n, dim - 1);
    for i in 0..n {
        let bi = b.eval(grid.node(i));
        for r in 0..dim {
            for c in 0..=r {
                mat.set(i * dim + r, i * dim + c, bi[[r, c]]);
            }
        }
    }
    Ok(DiscreteOperator { grid: *grid, dim, mat })
}

#[derive(Clone, Copy, Debug)]
pub enum Window {
    Range(f64, f64),
    /// k eigenvalues nearest zero
    NearZero(usize),
    All,
}

/// Eigen-decomposition restricted to a window. `all` always holds the full
/// certified eigenvalue list, so the lambda_{+-k} numbering of Remark 1.3 is
/// recoverable; vectors (L2-normalized with weight h) exist for the selection.
pub struct EigenDecomp {
    pub all: Vec<f64>,
    pub sel_idx: Vec<usize>,
    pub lambdas: Vec<f64>,
    /// columns are eigenvectors of the selection, L2-normalized (weight h)
    pub vectors: Array2<f64>,
    pub residuals: Vec<f64>,
    pub h: f64,
}

impl EigenDecomp {
    /// count of negative eigenvalues in the full truncated spectrum
    pub fn n_neg_total(&self, tol: f64) -> usize {
        self.all.iter().filter(|&&x| x < -tol).count()
    }

    /// lambda_{+k} / lambda_{-k} of the Remark 1.3 numbering (k >= 1)
    pub fn lambda_signed(&self, k: i64) -> Option<f64> {
        assert!(k != 0);
        let pos: Vec<f64> = self.all.iter().copied().filter(|&x| x >= 0.0).collect();
        let neg: Vec<f64> = self.all.iter().copied().filter(|&x| x < 0.0).collect();
        if k > 0 {
            pos.get((k - 1) as usize).copied()
        } else {
            neg.iter().rev().nth((-k - 1) as usize).copied()
        }
    }
}

/// All eigenpairs in the window, residual-certified:
/// ||A v - lambda v|| <= 1e-8 (1+|lambda|) ||v||.
pub fn spectrum(a: &DiscreteOperator, window: Window) -> Result<EigenDecomp> {
    let all = a.mat.eigenvalues()?;
    let sel_idx: Vec<usize> = match window {
        Window::Range(lo, hi) => {
            if hi < lo {
                return Err(Error::InvalidArg("empty window: hi < lo".into()));
            }
            (0..all.len()).filter(|&k| all[k] >= lo && all[k] <= hi).collect()
        }
        Window::NearZero(k) => {
            if k < 1 {
                return Err(Error::InvalidArg("need k >= 1".into()));
            }
            let mut idx: Vec<usize> = (0..all.len()).collect();
            idx.sort_by(|&i, &j| all[i].abs().partial_cmp(&all[j].abs()).unwrap());
            let mut sel: Vec<usize> = idx.into_iter().take(k).collect();
            sel.sort_unstable();
            sel
        }
        Window::All => (0..all.len()).collect(),
    };
    let lambdas: Vec<f64> = sel_idx.iter().map(|&k| all[k]).collect();
    let mut vectors = a.mat.eigenvectors_for(&lambdas)?;
    // 2-normalized -> L2(weight h)-normalized
    let scale = 1.0 / a.grid.h.sqrt();
    vectors.mapv_inplace(|v| v * scale);
    let mut residuals = Vec::with_capacity(lambdas.len());
    for (k, &lam) in lambdas.iter().enumerate() {
        let col: Vec<f64> = vectors.column(k).to_vec();
        let av = a.mat.matvec(&col);
        let mut r2 = 0.0;
        let mut v2 = 0.0;
        for (x, y) in av.iter().zip(&col) {
            r2 += (x - lam * y).powi(2);
            v2 += y * y;
        }
        let res = (r2 / v2).sqrt();
        if res > 1e-8 * (1.0 + lam.abs()) {
            return Err(Error::NoConvergence(format!(
                "eigenpair residual {res:.3e} at lambda={lam:.6}"
            )));
        }
        residuals.push(res);
    }
    Ok(EigenDecomp { all, sel_idx, lambdas, vectors, residuals, h: a.grid.h })
}

/// Checkerboard energy of a grid function with `dim` components per node:
/// sum |z_{i+1} - z_i|^2 over sum |z_{i+1} + z_i|^2. The antisymmetric
/// central difference carries, besides the branch that approximates the
/// differential operator, a spurious branch whose eigenvectors alternate
/// sign from node to node; the ratio separates the two by orders of
/// magnitude (smooth << 1, checkerboard >> 1).
pub fn oscillation_ratio(z: &[f64], dim: usize) -> f64 {
    let n = z.len() / dim;
    let mut d = 0.0;
    let mut s = 0.0;
    for i in 0..n.saturating_sub(1) {
        for c in 0..dim {
            let (a, b) = (z[(i + 1) * dim + c], z[i * dim + c]);
            d += (a - b) * (a - b);
            s += (a + b) * (a + b);
        }
    }
    d / s.max(f64::MIN_POSITIVE)
}

pub fn l2_norm(z: &[f64], h: f64) -> f64 {
    (h * z.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct Norms {
    pub l2: f64,
    pub e_norm: f64,
    pub lp: f64,
}

/// Norm calculus against an eigen-decomposition:
/// e_norm^2 = sum (1+|lambda_k|) c_k^2 over eigen-coefficients.
/// The decomposition must span z to relative completeness 1 - 1e-8.
/// lp is the pointwise-Euclidean Lp norm (`dim` components per node).
pub fn norms(z: &[f64], decomp: &EigenDecomp, dim: usize, p: f64) -> Result<Norms> {
    let l2 = l2_norm(z, decomp.h);
    if l2 == 0.0 {
        return Ok(Norms { l2: 0.0, e_norm: 0.0, lp: 0.0 });
    }
    let mut e2 = 0.0;
    let mut cov = 0.0;
    for (k, &lam) in decomp.lambdas.iter().enumerate() {
        let c: f64 = decomp.h * decomp.vectors.column(k).dot(&ndarray::aview1(z));
        e2 += (1.0 + lam.abs()) * c * c;
        cov += c * c;
    }
    if cov < (1.0 - 1e-8) * l2 * l2 {
        return Err(Error::InvalidArg(format!(
            "eigenbasis covers only {:.6} of ||z||^2",
            cov / (l2 * l2)
        )));
    }
    let n = z.len() / dim;
    let mut sp = 0.0;
    for i in 0..n {
        let mut r2 = 0.0;
        for d in 0..dim {
            r2 += z[i * dim + d] * z[i * dim + d];
        }
        sp += r2.sqrt().powf(p);
    }
    let lp = decomp.h.powf(1.0 / p) * sp.powf(1.0 / p);
    Ok(Norms { l2, e_norm: e2.sqrt(), lp })
}

/// (discrete integral of |z|^2 over |t| > R) / ||z||_E^2.
pub fn tail_mass(z: &[f64], decomp: &EigenDecomp, grid: &Grid, dim: usize, r: f64) -> Result<f64> {
    if r <= 0.0 || r >= grid.t {
        return Err(Error::InvalidArg(format!("need 0 < R < T, got R={r}, T={}", grid.t)));
    }
    let nrm = norms(z, decomp, dim, 2.0)?;
    if nrm.e_norm == 0.0 {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for i in 0..grid.n {
        if grid.node(i).abs() > r {
            for d in 0..dim {
                s += z[i * dim + d] * z[i * dim + d];
            }
        }
    }
    Ok(grid.h * s / (nrm.e_norm * nrm.e_norm))
}
