//! Dense-free linear algebra kernels for the 1D/radial discretizations:
//! compensated summation, banded LU with partial pivoting, and a
//! Sturm-sequence bisection eigensolver for symmetric tridiagonal pencils.

// index-style loops match the band-storage arithmetic here
#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

/// Compensated sum (Kahan with Neumaier's correction, which also survives
/// terms larger than the running sum).
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// General banded matrix in LAPACK band storage with `kl` extra rows for
/// pivoting fill. Entry (i, j) lives at band row `kl + ku + i - j`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.kl + self.ku >= j && j + self.kl >= i);
        (self.kl + self.ku + i - j) + j * self.ldab
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.kl + self.ku >= j && j + self.kl >= i {
            self.ab[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// In-place LU factorization with partial pivoting (gbtrf-style).
    /// Returns the pivot vector; fails on an exactly singular pivot.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let kv = kl + ku;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot search in column j, rows j..=j+km
            let mut jp = 0usize;
            let mut pmax = self.ab[kv + j * self.ldab].abs();
            for p in 1..=km {
                let v = self.ab[kv + p + j * self.ldab].abs();
                if v > pmax {
                    pmax = v;
                    jp = p;
                }
            }
            ipiv[j] = j + jp;
            if pmax == 0.0 {
                return Err(Error::SolverFailure(format!(
                    "banded LU: zero pivot at column {j}"
                )));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = (kv + j + jp - c) + c * self.ldab;
                    let b = (kv + j - c).wrapping_add(c * self.ldab);
                    // row j entry exists for c >= j only when c - j <= kv + kl; here c <= ju <= j + kv
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let piv = self.ab[kv + j * self.ldab];
                for p in 1..=km {
                    self.ab[kv + p + j * self.ldab] /= piv;
                }
                for c in (j + 1)..=ju {
                    let ujc = self.ab[(kv + j - c) + c * self.ldab];
                    if ujc != 0.0 {
                        for p in 1..=km {
                            let l = self.ab[kv + p + j * self.ldab];
                            self.ab[(kv + j + p - c) + c * self.ldab] -= l * ujc;
                        }
                    }
                }
            }
        }
        Ok(BandLu { mat: self, ipiv })
    }
}

/// Factored banded matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    mat: BandMatrix,
    ipiv: Vec<usize>,
}

impl BandLu {
    /// Smallest |U_jj| relative to the largest; a conditioning probe.
    pub fn min_pivot_ratio(&self) -> f64 {
        let kv = self.mat.kl + self.mat.ku;
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for j in 0..self.mat.n {
            let p = self.mat.ab[kv + j * self.mat.ldab].abs();
            lo = lo.min(p);
            hi = hi.max(p);
        }
        if hi == 0.0 {
            0.0
        } else {
            lo / hi
        }
    }

    pub fn solve(&self, b: &mut [f64]) {
        let n = self.mat.n;
        let (kl, ku) = (self.mat.kl, self.mat.ku);
        let kv = kl + ku;
        let ldab = self.mat.ldab;
        // L solve with row interchanges
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            for q in 1..=km {
                b[j + q] -= self.mat.ab[kv + q + j * ldab] * b[j];
            }
        }
        // U backsolve
        for j in (0..n).rev() {
            let cmax = (j + kv).min(n - 1);
            let mut s = b[j];
            for c in (j + 1)..=cmax {
                s -= self.mat.ab[(kv + j - c) + c * ldab] * b[c];
            }
            b[j] = s / self.mat.ab[kv + j * ldab];
        }
    }
}

/// Symmetric tridiagonal matrix given by its diagonal and off-diagonal.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len());
        SymTridiag { diag, off }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    fn pivmin(&self) -> f64 {
        let emax2 = self
            .off
            .iter()
            .map(|e| e * e)
            .fold(0.0f64, f64::max)
            .max(1.0);
        f64::MIN_POSITIVE * emax2
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0usize;
        let mut q = self.diag[0] - x;
        if q.abs() <= pivmin || q.is_nan() {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.n() {
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q;
            if q.abs() <= pivmin || q.is_nan() {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        let pad = (hi - lo).abs() * 1e-12 + 1e-12;
        (lo - pad, hi + pad)
    }

    /// The `k`-th smallest eigenvalue (1-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        assert!(k >= 1 && k <= self.n());
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..140 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) >= k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) + 1e-300 {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// The `k` smallest eigenvalues in ascending order.
    pub fn smallest_eigenvalues(&self, k: usize) -> Vec<f64> {
        (1..=k.min(self.n())).map(|j| self.eigenvalue(j)).collect()
    }

    /// Eigenvector by shifted inverse iteration; orthogonalized against
    /// `cluster` mates when the eigenvalue is numerically repeated.
    pub fn eigenvector(&self, lambda: f64, cluster: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.n();
        let scale = self
            .diag
            .iter()
            .chain(self.off.iter())
            .fold(0.0f64, |a, &v| a.max(v.abs()))
            .max(1.0);
        let mut shift = lambda;
        for attempt in 0..4 {
            let mut band = BandMatrix::zeros(n, 1, 1);
            for i in 0..n {
                band.set(i, i, self.diag[i] - shift);
                if i + 1 < n {
                    band.set(i, i + 1, self.off[i]);
                    band.set(i + 1, i, self.off[i]);
                }
            }
            let lu = match band.factor() {
                Ok(lu) => lu,
                Err(_) => {
                    shift = lambda + scale * f64::EPSILON * 10f64.powi(attempt + 1);
                    continue;
                }
            };
            // deterministic quasi-random start vector
            let mut v: Vec<f64> = (0..n)
                .map(|i| {
                    let x = ((i as u64)
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407))
                        >> 11;
                    (x as f64) / (u64::MAX >> 11) as f64 - 0.5
                })
                .collect();
            normalize(&mut v);
            for _ in 0..5 {
                lu.solve(&mut v);
                for w in cluster {
                    let d = dot(&v, w);
                    for (vi, wi) in v.iter_mut().zip(w) {
                        *vi -= d * wi;
                    }
                }
                let norm = norm2(&v);
                if !norm.is_finite() || norm == 0.0 {
                    break;
                }
                for vi in v.iter_mut() {
                    *vi /= norm;
                }
                let r = self.residual(lambda, &v);
                if r <= 1e3 * f64::EPSILON * scale {
                    return Ok(v);
                }
            }
            let r = self.residual(lambda, &v);
            if r <= 1e-8 * scale && norm2(&v).is_finite() {
                return Ok(v);
            }
            shift = lambda + scale * f64::EPSILON * 10f64.powi(attempt + 1);
        }
        Err(Error::SolverFailure(format!(
            "inverse iteration failed to converge at lambda = {lambda}"
        )))
    }

    fn residual(&self, lambda: f64, v: &[f64]) -> f64 {
        self.apply(v)
            .iter()
            .zip(v)
            .map(|(tv, vi)| (tv - lambda * vi).abs())
            .fold(0.0, f64::max)
    }
}

/// Generalized symmetric pencil `A x = lambda B x` with tridiagonal `A`
/// and positive diagonal `B`, reduced by congruence to standard form.
pub struct GeneralizedTridiag {
    standard: SymTridiag,
    b_inv_sqrt: Vec<f64>,
}

impl GeneralizedTridiag {
    pub fn new(a: &SymTridiag, b_diag: &[f64]) -> Result<Self> {
        if b_diag.len() != a.n() {
            return Err(Error::SolverFailure("pencil size mismatch".into()));
        }
        if b_diag.iter().any(|&b| b <= 0.0) {
            return Err(Error::SolverFailure(
                "generalized pencil needs a positive diagonal right side".into(),
            ));
        }
        let s: Vec<f64> = b_diag.iter().map(|b| 1.0 / b.sqrt()).collect();
        let n = a.n();
        let diag: Vec<f64> = (0..n).map(|i| a.diag[i] * s[i] * s[i]).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| a.off[i] * s[i] * s[i + 1]).collect();
        Ok(GeneralizedTridiag {
            standard: SymTridiag::new(diag, off),
            b_inv_sqrt: s,
        })
    }

    pub fn count_below(&self, x: f64) -> usize {
        self.standard.count_below(x)
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.standard.eigenvalue(k)
    }

    pub fn n(&self) -> usize {
        self.standard.n()
    }

    /// The `k` smallest eigenpairs; eigenvectors are B-orthonormal.
    pub fn smallest_eigenpairs(&self, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let k = k.min(self.n());
        let values = self.standard.smallest_eigenvalues(k);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for (j, &lambda) in values.iter().enumerate() {
            let cluster: Vec<Vec<f64>> = (0..j)
                .filter(|&i| (values[i] - lambda).abs() <= 1e-8 * scale)
                .map(|i| {
                    // cluster mates back in standard coordinates
                    vectors[i]
                        .iter()
                        .zip(&self.b_inv_sqrt)
                        .map(|(x, s)| x / s)
                        .collect()
                })
                .collect();
            let v = self.standard.eigenvector(lambda, &cluster)?;
            vectors.push(v.iter().zip(&self.b_inv_sqrt).map(|(x, s)| x * s).collect());
        }
        Ok((values, vectors))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: &mut [f64]) {
    let n = norm2(a);
    if n > 0.0 {
        for x in a.iter_mut() {
            *x /= n;
        }
    }
}
