//! Thin LAPACK layer: dense symmetric eigensolves, banded symmetric
//! eigenvalues, banded LU, SVD, generalized symmetric eigensolve, and
//! inverse-iteration eigenvectors for banded matrices.

use crate::{Error, Result};
use ndarray::{Array1, Array2, ShapeBuilder};

/// Symmetric banded matrix, lower storage, column-major:
/// `ab[d + j*(kd+1)] = A[j+d, j]` for `d = 0..=kd`.
#[derive(Clone, Debug)]
pub struct SymBand {
    pub n: usize,
    pub kd: usize,
    ab: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, kd: usize) -> Self {
        SymBand { n, kd, ab: vec![0.0; n * (kd + 1)] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i >= j { (j, i) } else { (i, j) };
        if hi - lo > self.kd {
            0.0
        } else {
            self.ab[(hi - lo) + lo * (self.kd + 1)]
        }
    }

    /// Sets A[i,j] (and A[j,i]). Panics outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let (lo, hi) = if i >= j { (j, i) } else { (i, j) };
        assert!(hi - lo <= self.kd, "entry ({i},{j}) outside bandwidth {}", self.kd);
        self.ab[(hi - lo) + lo * (self.kd + 1)] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let old = self.get(i, j);
        self.set(i, j, old + v);
    }

    /// A - B, keeping the larger bandwidth.
    pub fn sub(&self, other: &SymBand) -> SymBand {
        assert_eq!(self.n, other.n);
        let kd = self.kd.max(other.kd);
        let mut out = SymBand::zeros(self.n, kd);
        for j in 0..self.n {
            for d in 0..=kd {
                if j + d < self.n {
                    out.ab[d + j * (kd + 1)] = self.get(j + d, j) - other.get(j + d, j);
                }
            }
        }
        out
    }

    pub fn shifted(&self, sigma: f64) -> SymBand {
        let mut out = self.clone();
        for j in 0..self.n {
            out.ab[j * (self.kd + 1)] += sigma;
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        let ld = self.kd + 1;
        for j in 0..self.n {
            let xj = x[j];
            y[j] += self.ab[j * ld] * xj;
            for d in 1..=self.kd {
                let i = j + d;
                if i >= self.n {
                    break;
                }
                let v = self.ab[d + j * ld];
                y[i] += v * xj;
                y[j] += v * x[i];
            }
        }
        y
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for j in 0..self.n {
            for d in 0..=self.kd {
                if j + d < self.n {
                    let v = self.ab[d + j * (self.kd + 1)];
                    a[[j + d, j]] = v;
                    a[[j, j + d]] = v;
                }
            }
        }
        a
    }

    /// Infinity-norm estimate (used for scale-aware tolerances).
    pub fn norm_est(&self) -> f64 {
        let mut best: f64 = 0.0;
        for j in 0..self.n {
            let mut s = 0.0;
            for i in j.saturating_sub(self.kd)..(j + self.kd + 1).min(self.n) {
                s += self.get(i, j).abs();
            }
            best = best.max(s);
        }
        best
    }

    /// All eigenvalues, ascending (dsbevd, jobz='N').
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.n as i32;
        let kd = self.kd as i32;
        let ldab = kd + 1;
        let mut ab = self.ab.clone();
        let mut w = vec![0.0; self.n];
        let mut z = vec![0.0; 1];
        let mut info = 0;
        // workspace query
        let mut wkopt = [0.0f64];
        let mut iwkopt = [0i32];
        unsafe {
            lapack::dsbevd(
                b'N', b'L', n, kd, &mut ab, ldab, &mut w, &mut z, 1, &mut wkopt, -1,
                &mut iwkopt, -1, &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Lapack { routine: "dsbevd(query)", info });
        }
        let lwork = wkopt[0] as i32;
        let liwork = iwkopt[0].max(1);
        let mut work = vec![0.0; lwork.max(1) as usize];
        let mut iwork = vec![0i32; liwork as usize];
        unsafe {
            lapack::dsbevd(
                b'N', b'L', n, kd, &mut ab, ldab, &mut w, &mut z, 1, &mut work, lwork,
                &mut iwork, liwork, &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Lapack { routine: "dsbevd", info });
        }
        Ok(w)
    }

    /// Eigenvectors for the given (ascending, certified-by-dsbevd) eigenvalues,
    /// by inverse iteration on a banded LU. Nearly degenerate eigenvalues are
    /// grouped into clusters and resolved by subspace iteration with
    /// orthogonalization, so multiplicity > 1 is handled. Returned columns are
    /// 2-normalized and pairwise orthogonal.
    pub fn eigenvectors_for(&self, lambdas: &[f64]) -> Result<Array2<f64>> {
        let n = self.n;
        let scale = 1.0 + self.norm_est();
        let mut out = Array2::zeros((n, lambdas.len()));
        let mut accepted: Vec<(f64, Array1<f64>)> = Vec::new();

        // cluster consecutive targets closer than ctol; near-degenerate pairs
        // are resolved by Rayleigh-Ritz inside the cluster
        let ctol = 1e-5 * scale;
        let mut clusters: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for k in 1..=lambdas.len() {
            let split = k == lambdas.len() || (lambdas[k] - lambdas[k - 1]).abs() > ctol;
            if split {
                clusters.push((start, k));
                start = k;
            }
        }

        let mut rng_state: u64 = 0x9e3779b97f4a7c15;
        let mut next_rand = move || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };

        for &(c0, c1) in &clusters {
            let m = c1 - c0;
            let mid = lambdas[c0..c1].iter().sum::<f64>() / m as f64;
            let mut jitter = 1e-8 * scale;
            let mut lu = loop {
                match BandLU::factor_shifted(self, -(mid + jitter)) {
                    Ok(lu) => break lu,
                    Err(_) => {
                        jitter *= 7.3;
                        if jitter > 1e-2 * scale {
                            return Err(Error::NoConvergence(
                                "inverse iteration shift kept hitting the spectrum".into(),
                            ));
                        }
                    }
                }
            };
            let mut xs: Vec<Array1<f64>> =
                (0..m).map(|_| Array1::from_shape_fn(n, |_| next_rand())).collect();
            let neighbors: Vec<&(f64, Array1<f64>)> = accepted
                .iter()
                .filter(|(l, _)| (l - mid).abs() < 0.05 * scale.min(1.0) + 1e-3 * scale)
                .collect();
            let mut ok = false;
            for _round in 0..12 {
                for x in xs.iter_mut() {
                    let y = lu.solve(x.as_slice().unwrap());
                    *x = Array1::from(y);
                }
                // project out previously accepted nearby eigenvectors
                for x in xs.iter_mut() {
                    for (_, v) in &neighbors {
                        let c = x.dot(v);
                        x.scaled_add(-c, v);
                    }
                }
                // modified Gram-Schmidt within the cluster
                for i in 0..m {
                    for j in 0..i {
                        let (a, b) = xs.split_at_mut(i);
                        let c = b[0].dot(&a[j]);
                        b[0].scaled_add(-c, &a[j]);
                    }
                    let nrm = xs[i].dot(&xs[i]).sqrt();
                    if nrm < 1e-300 {
                        xs[i] = Array1::from_shape_fn(n, |_| next_rand());
                    } else {
                        xs[i].mapv_inplace(|v| v / nrm);
                    }
                }
                // Rayleigh-Ritz within the cluster: rotate to the eigenbasis
                // of X^T A X so pair members separate even when the shift
                // cannot distinguish them
                if m > 1 {
                    let axs: Vec<Vec<f64>> =
                        xs.iter().map(|x| self.matvec(x.as_slice().unwrap())).collect();
                    let mut hsmall = Array2::zeros((m, m));
                    for i in 0..m {
                        for j in 0..m {
                            hsmall[[i, j]] =
                                xs[i].iter().zip(&axs[j]).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                    let hsym = 0.5 * (&hsmall + &hsmall.t());
                    if let Ok((_, Some(q))) = sym_eig(&hsym, true) {
                        let old = xs.clone();
                        for (i, x) in xs.iter_mut().enumerate() {
                            let mut acc = Array1::<f64>::zeros(n);
                            for (j, o) in old.iter().enumerate() {
                                acc.scaled_add(q[[j, i]], o);
                            }
                            *x = acc;
                        }
                    }
                }
                // residual check against the individual target eigenvalues
                let mut worst: f64 = 0.0;
                for (i, x) in xs.iter().enumerate() {
                    let ax = self.matvec(x.as_slice().unwrap());
                    let lam = lambdas[c0 + i];
                    let mut r = 0.0;
                    for (k, &a) in ax.iter().enumerate() {
                        let d = a - lam * x[k];
                        r += d * d;
                    }
                    worst = worst.max(r.sqrt() / (1.0 + lam.abs()));
                }
                if worst <= 1e-8 {
                    ok = true;
                    break;
                }
                if worst > 1e-2 && _round >= 3 {
                    // shift may sit too close to one cluster member; re-jitter
                    jitter *= 3.7;
                    if let Ok(f) = BandLU::factor_shifted(self, -(mid + jitter)) {
                        lu = f;
                    }
                }
            }
            if !ok {
                return Err(Error::NoConvergence(format!(
                    "inverse iteration failed near lambda={mid:.6}"
                )));
            }
            for (i, x) in xs.into_iter().enumerate() {
                out.column_mut(c0 + i).assign(&x);
                accepted.push((lambdas[c0 + i], x));
            }
        }
        Ok(out)
    }
}

/// LU factorization of a general banded matrix (dgbtrf/dgbtrs).
#[derive(Clone)]
pub struct BandLU {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<i32>,
}

impl BandLU {
    /// Factors A + sigma*I for a symmetric banded A.
    pub fn factor_shifted(a: &SymBand, sigma: f64) -> Result<Self> {
        let n = a.n;
        let kl = a.kd;
        let ku = a.kd;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for j in 0..n {
            let lo = j.saturating_sub(ku);
            let hi = (j + kl + 1).min(n);
            for i in lo..hi {
                let mut v = a.get(i, j);
                if i == j {
                    v += sigma;
                }
                ab[kl + ku + i - j + j * ldab] = v;
            }
        }
        let mut ipiv = vec![0i32; n];
        let mut info = 0;
        unsafe {
            lapack::dgbtrf(
                n as i32, n as i32, kl as i32, ku as i32, &mut ab, ldab as i32, &mut ipiv,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Lapack { routine: "dgbtrf", info });
        }
        Ok(BandLU { n, kl, ku, ab, ipiv })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = rhs.to_vec();
        self.solve_in_place_multi(&mut b, 1);
        b
    }

    /// Solves for `nrhs` right-hand sides stored column-major in `b`.
    pub fn solve_in_place_multi(&self, b: &mut [f64], nrhs: usize) {
        assert_eq!(b.len(), self.n * nrhs);
        let ldab = (2 * self.kl + self.ku + 1) as i32;
        let mut info = 0;
        unsafe {
            lapack::dgbtrs(
                b'N', self.n as i32, self.kl as i32, self.ku as i32, nrhs as i32, &self.ab,
                ldab, &self.ipiv, b, self.n as i32, &mut info,
            );
        }
        assert_eq!(info, 0, "dgbtrs info={info}");
    }
}

fn to_col_major(a: &Array2<f64>) -> Vec<f64> {
    let (m, n) = a.dim();
    let mut v = vec![0.0; m * n];
    for j in 0..n {
        for i in 0..m {
            v[i + j * m] = a[[i, j]];
        }
    }
    v
}

/// Dense symmetric eigensolve (dsyevd). Returns ascending eigenvalues and,
/// if requested, the matrix whose k-th column is the k-th eigenvector.
pub fn sym_eig(a: &Array2<f64>, vectors: bool) -> Result<(Vec<f64>, Option<Array2<f64>>)> {
    let (m, n) = a.dim();
    assert_eq!(m, n, "sym_eig needs a square matrix");
    if n == 0 {
        return Ok((vec![], if vectors { Some(Array2::zeros((0, 0))) } else { None }));
    }
    let jobz = if vectors { b'V' } else { b'N' };
    let mut amat = to_col_major(a);
    let mut w = vec![0.0; n];
    let mut info = 0;
    let mut wkopt = [0.0f64];
    let mut iwkopt = [0i32];
    unsafe {
        lapack::dsyevd(
            jobz, b'L', n as i32, &mut amat, n as i32, &mut w, &mut wkopt, -1, &mut iwkopt,
            -1, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dsyevd(query)", info });
    }
    let lwork = wkopt[0] as i32;
    let liwork = iwkopt[0].max(1);
    let mut work = vec![0.0; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        lapack::dsyevd(
            jobz, b'L', n as i32, &mut amat, n as i32, &mut w, &mut work, lwork, &mut iwork,
            liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dsyevd", info });
    }
    let vecs = if vectors {
        Some(Array2::from_shape_vec((n, n).f(), amat).unwrap())
    } else {
        None
    };
    Ok((w, vecs))
}

/// Thin SVD (dgesdd): returns (U, s, Vt) with U: m x k, Vt: k x n, k = min(m,n).
pub fn svd(a: &Array2<f64>) -> Result<(Array2<f64>, Vec<f64>, Array2<f64>)> {
    let (m, n) = a.dim();
    let k = m.min(n);
    if k == 0 {
        return Ok((Array2::zeros((m, 0)), vec![], Array2::zeros((0, n))));
    }
    let mut amat = to_col_major(a);
    let mut s = vec![0.0; k];
    let mut u = vec![0.0; m * k];
    let mut vt = vec![0.0; k * n];
    let mut iwork = vec![0i32; 8 * k];
    let mut info = 0;
    let mut wkopt = [0.0f64];
    unsafe {
        lapack::dgesdd(
            b'S', m as i32, n as i32, &mut amat, m as i32, &mut s, &mut u, m as i32,
            &mut vt, k as i32, &mut wkopt, -1, &mut iwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dgesdd(query)", info });
    }
    let lwork = wkopt[0] as i32;
    let mut work = vec![0.0; lwork.max(1) as usize];
    unsafe {
        lapack::dgesdd(
            b'S', m as i32, n as i32, &mut amat, m as i32, &mut s, &mut u, m as i32,
            &mut vt, k as i32, &mut work, lwork, &mut iwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dgesdd", info });
    }
    let u = Array2::from_shape_vec((m, k).f(), u).unwrap();
    let vt = Array2::from_shape_vec((k, n).f(), vt).unwrap();
    Ok((u, s, vt))
}

/// Generalized symmetric eigenproblem A v = lambda B v with B positive
/// definite (dsygvd, itype=1). Returns ascending eigenvalues.
pub fn sym_eig_gen(a: &Array2<f64>, b: &Array2<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    assert_eq!(a.dim(), b.dim());
    if n == 0 {
        return Ok(vec![]);
    }
    let mut amat = to_col_major(a);
    let mut bmat = to_col_major(b);
    let mut w = vec![0.0; n];
    let mut info = 0;
    let mut wkopt = [0.0f64];
    let mut iwkopt = [0i32];
    unsafe {
        lapack::dsygvd(
            &[1], b'N', b'L', n as i32, &mut amat, n as i32, &mut bmat, n as i32, &mut w,
            &mut wkopt, -1, &mut iwkopt, -1, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dsygvd(query)", info });
    }
    let lwork = wkopt[0] as i32;
    let liwork = iwkopt[0].max(1);
    let mut work = vec![0.0; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        lapack::dsygvd(
            &[1], b'N', b'L', n as i32, &mut amat, n as i32, &mut bmat, n as i32, &mut w,
            &mut work, lwork, &mut iwork, liwork, &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack { routine: "dsygvd", info });
    }
    Ok(w)
}
