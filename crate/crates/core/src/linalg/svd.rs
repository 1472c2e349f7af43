//! Thin SVD: one-sided Jacobi for narrow matrices, Golub–Kahan–Reinsch otherwise.
//!
//! Both routes share the output contract: `r = min(rows, cols)` triplets,
//! singular values descending, and each left singular vector flipped so its
//! largest-magnitude entry is positive (lowest index wins ties).

use alloc::vec;
use alloc::vec::Vec;

use super::{norm2, orthonormal_complement, Matrix};
use crate::error::{Error, Result};

/// Widest (post-transpose) matrix handled by the Jacobi route.
pub const JACOBI_MAX_COLS: usize = 64;

const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    /// `rows × r`, orthonormal columns.
    pub u: Matrix,
    /// `r` values, non-negative and descending.
    pub sigma: Vec<f64>,
    /// `cols × r`, orthonormal columns.
    pub v: Matrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U · diag(σ) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let (m, n, r) = (self.u.rows(), self.v.rows(), self.sigma.len());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for l in 0..r {
                let a = self.u[(i, l)] * self.sigma[l];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * self.v[(j, l)];
                }
            }
        }
        Matrix::from_raw(m, n, out)
    }
}

/// Thin SVD, routed by the narrow dimension.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    if a.rows().min(a.cols()) <= JACOBI_MAX_COLS {
        svd_jacobi(a)
    } else {
        svd_golub_kahan(a)
    }
}

pub fn svd_jacobi(a: &Matrix) -> Result<SvdResult> {
    with_tall(a, jacobi_tall)
}

pub fn svd_golub_kahan(a: &Matrix) -> Result<SvdResult> {
    with_tall(a, golub_kahan_tall)
}

/// Raw factors of a tall matrix: `u` columns (length rows), sigma, `v` columns (length cols).
struct Factors {
    u: Vec<Vec<f64>>,
    sigma: Vec<f64>,
    v: Vec<Vec<f64>>,
}

fn with_tall(a: &Matrix, kernel: fn(&Matrix) -> Factors) -> Result<SvdResult> {
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("svd input contains non-finite entries"));
    }
    let (rows, cols) = a.shape();
    let f = if rows >= cols {
        kernel(a)
    } else {
        let t = kernel(&a.transpose());
        Factors { u: t.v, sigma: t.sigma, v: t.u }
    };
    Ok(finalize(f, rows, cols))
}

/// Sorts descending (stable), applies the sign convention, packs into matrices.
fn finalize(mut f: Factors, rows: usize, cols: usize) -> SvdResult {
    let r = f.sigma.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| f.sigma[j].partial_cmp(&f.sigma[i]).unwrap_or(core::cmp::Ordering::Equal));

    let mut u = vec![0.0; rows * r];
    let mut v = vec![0.0; cols * r];
    let mut sigma = Vec::with_capacity(r);
    for (l, &src) in order.iter().enumerate() {
        let uc = &mut f.u[src];
        let vc = &mut f.v[src];
        let mut best = 0;
        for (i, x) in uc.iter().enumerate() {
            if x.abs() > uc[best].abs() {
                best = i;
            }
        }
        if uc[best] < 0.0 {
            uc.iter_mut().for_each(|x| *x = -*x);
            vc.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..rows {
            u[i * r + l] = uc[i];
        }
        for j in 0..cols {
            v[j * r + l] = vc[j];
        }
        sigma.push(f.sigma[src].max(0.0));
    }
    SvdResult { u: Matrix::from_raw(rows, r, u), sigma, v: Matrix::from_raw(cols, r, v) }
}

/// One-sided (Hestenes) Jacobi on a tall matrix.
fn jacobi_tall(a: &Matrix) -> Factors {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut al = 0.0;
                    let mut be = 0.0;
                    let mut ga = 0.0;
                    for k in 0..m {
                        al += cp[k] * cp[k];
                        be += cq[k] * cq[k];
                        ga += cp[k] * cq[k];
                    }
                    (al, be, ga)
                };
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta.abs() > 1e150 {
                    0.5 / zeta
                } else {
                    zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    let mut u: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (j, mut c) in cols.into_iter().enumerate() {
        let s = sigma[j];
        if s > 0.0 && s.is_normal() {
            c.iter_mut().for_each(|x| *x /= s);
            if c.iter().all(|x| x.is_finite()) {
                u.push(c);
                continue;
            }
        }
        missing.push(j);
        u.push(Vec::new());
    }
    complete_columns(&mut u, &missing, m);
    Factors { u, sigma, v }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the listed (empty) columns with an orthonormal completion of the rest.
fn complete_columns(u: &mut [Vec<f64>], missing: &[usize], dim: usize) {
    if missing.is_empty() {
        return;
    }
    let present: Vec<Vec<f64>> = u.iter().filter(|c| !c.is_empty()).cloned().collect();
    let extra = orthonormal_complement(&present, dim, missing.len());
    for (&j, col) in missing.iter().zip(extra) {
        u[j] = col;
    }
}

/// Golub–Kahan bidiagonalization followed by implicit-shift QR on the
/// bidiagonal (the LINPACK `dsvdc` scheme). Requires `rows >= cols`.
#[allow(clippy::needless_range_loop)]
fn golub_kahan_tall(arg: &Matrix) -> Factors {
    let (m, n) = arg.shape();
    let mut a: Vec<Vec<f64>> = arg.iter_rows().map(|r| r.to_vec()).collect();
    let nu = n;
    let mut s = vec![0.0; n.min(m + 1)];
    let mut uu = vec![vec![0.0; nu]; m];
    let mut vv = vec![vec![0.0; n]; n];
    let mut e = vec![0.0; n];
    let mut work = vec![0.0; m];

    let nct = (m - 1).min(n);
    let nrt = n.saturating_sub(2).min(m);
    for k in 0..nct.max(nrt) {
        if k < nct {
            s[k] = 0.0;
            for i in k..m {
                s[k] = libm::hypot(s[k], a[i][k]);
            }
            if s[k] != 0.0 {
                if a[k][k] < 0.0 {
                    s[k] = -s[k];
                }
                for i in k..m {
                    a[i][k] /= s[k];
                }
                a[k][k] += 1.0;
            }
            s[k] = -s[k];
        }
        for j in k + 1..n {
            if k < nct && s[k] != 0.0 {
                let mut t = 0.0;
                for i in k..m {
                    t += a[i][k] * a[i][j];
                }
                t = -t / a[k][k];
                for i in k..m {
                    a[i][j] += t * a[i][k];
                }
            }
            e[j] = a[k][j];
        }
        if k < nct {
            for i in k..m {
                uu[i][k] = a[i][k];
            }
        }
        if k < nrt {
            e[k] = 0.0;
            for i in k + 1..n {
                e[k] = libm::hypot(e[k], e[i]);
            }
            if e[k] != 0.0 {
                if e[k + 1] < 0.0 {
                    e[k] = -e[k];
                }
                for i in k + 1..n {
                    e[i] /= e[k];
                }
                e[k + 1] += 1.0;
            }
            e[k] = -e[k];
            if k + 1 < m && e[k] != 0.0 {
                for i in k + 1..m {
                    work[i] = 0.0;
                }
                for j in k + 1..n {
                    for i in k + 1..m {
                        work[i] += e[j] * a[i][j];
                    }
                }
                for j in k + 1..n {
                    let t = -e[j] / e[k + 1];
                    for i in k + 1..m {
                        a[i][j] += t * work[i];
                    }
                }
            }
            for i in k + 1..n {
                vv[i][k] = e[i];
            }
        }
    }

    let mut p = n.min(m + 1);
    if nct < n {
        s[nct] = a[nct][nct];
    }
    if m < p {
        s[p - 1] = 0.0;
    }
    if nrt + 1 < p {
        e[nrt] = a[nrt][p - 1];
    }
    e[p - 1] = 0.0;

    for j in nct..nu {
        for i in 0..m {
            uu[i][j] = 0.0;
        }
        uu[j][j] = 1.0;
    }
    for k in (0..nct).rev() {
        if s[k] != 0.0 {
            for j in k + 1..nu {
                let mut t = 0.0;
                for i in k..m {
                    t += uu[i][k] * uu[i][j];
                }
                t = -t / uu[k][k];
                for i in k..m {
                    uu[i][j] += t * uu[i][k];
                }
            }
            for i in k..m {
                uu[i][k] = -uu[i][k];
            }
            uu[k][k] += 1.0;
            for i in 0..k {
                uu[i][k] = 0.0;
            }
        } else {
            for i in 0..m {
                uu[i][k] = 0.0;
            }
            uu[k][k] = 1.0;
        }
    }

    for k in (0..n).rev() {
        if k < nrt && e[k] != 0.0 {
            for j in k + 1..n {
                let mut t = 0.0;
                for i in k + 1..n {
                    t += vv[i][k] * vv[i][j];
                }
                t = -t / vv[k + 1][k];
                for i in k + 1..n {
                    vv[i][j] += t * vv[i][k];
                }
            }
        }
        for i in 0..n {
            vv[i][k] = 0.0;
        }
        vv[k][k] = 1.0;
    }

    let pp = p - 1;
    let eps = f64::EPSILON;
    let tiny = libm::pow(2.0, -966.0);
    let mut guard = 0usize;
    let guard_limit = 100 * n.max(1) * n.max(1) + 1000;
    while p > 0 {
        guard += 1;
        if guard > guard_limit {
            break;
        }
        // Locate the negligible e[k] / s[k] and classify the step.
        let mut k: isize = p as isize - 2;
        while k >= 0 {
            let ku = k as usize;
            if e[ku].abs() <= tiny + eps * (s[ku].abs() + s[ku + 1].abs()) {
                e[ku] = 0.0;
                break;
            }
            k -= 1;
        }
        let kase;
        if k == p as isize - 2 {
            kase = 4;
        } else {
            let mut ks: isize = p as isize - 1;
            while ks > k {
                let ksu = ks as usize;
                let t = (if ks != p as isize { e[ksu].abs() } else { 0.0 })
                    + (if ks != k + 1 { e[ksu - 1].abs() } else { 0.0 });
                if s[ksu].abs() <= tiny + eps * t {
                    s[ksu] = 0.0;
                    break;
                }
                ks -= 1;
            }
            if ks == k {
                kase = 3;
            } else if ks == p as isize - 1 {
                kase = 1;
            } else {
                kase = 2;
                k = ks;
            }
        }
        let k = (k + 1) as usize;

        match kase {
            1 => {
                let mut f = e[p - 2];
                e[p - 2] = 0.0;
                let mut j = p - 2;
                loop {
                    let t = libm::hypot(s[j], f);
                    let cs = s[j] / t;
                    let sn = f / t;
                    s[j] = t;
                    if j != k {
                        f = -sn * e[j - 1];
                        e[j - 1] *= cs;
                    }
                    for row in vv.iter_mut() {
                        let t = cs * row[j] + sn * row[p - 1];
                        row[p - 1] = -sn * row[j] + cs * row[p - 1];
                        row[j] = t;
                    }
                    if j == k {
                        break;
                    }
                    j -= 1;
                }
            }
            2 => {
                let mut f = e[k - 1];
                e[k - 1] = 0.0;
                for j in k..p {
                    let t = libm::hypot(s[j], f);
                    let cs = s[j] / t;
                    let sn = f / t;
                    s[j] = t;
                    f = -sn * e[j];
                    e[j] *= cs;
                    for row in uu.iter_mut() {
                        let t = cs * row[j] + sn * row[k - 1];
                        row[k - 1] = -sn * row[j] + cs * row[k - 1];
                        row[j] = t;
                    }
                }
            }
            3 => {
                let scale = s[p - 1]
                    .abs()
                    .max(s[p - 2].abs())
                    .max(e[p - 2].abs())
                    .max(s[k].abs())
                    .max(e[k].abs());
                let sp = s[p - 1] / scale;
                let spm1 = s[p - 2] / scale;
                let epm1 = e[p - 2] / scale;
                let sk = s[k] / scale;
                let ek = e[k] / scale;
                let b = ((spm1 + sp) * (spm1 - sp) + epm1 * epm1) / 2.0;
                let c = (sp * epm1) * (sp * epm1);
                let mut shift = 0.0;
                if b != 0.0 || c != 0.0 {
                    shift = libm::sqrt(b * b + c);
                    if b < 0.0 {
                        shift = -shift;
                    }
                    shift = c / (b + shift);
                }
                let mut f = (sk + sp) * (sk - sp) + shift;
                let mut g = sk * ek;
                for j in k..p - 1 {
                    let t = libm::hypot(f, g);
                    let cs = f / t;
                    let sn = g / t;
                    if j != k {
                        e[j - 1] = t;
                    }
                    f = cs * s[j] + sn * e[j];
                    e[j] = cs * e[j] - sn * s[j];
                    g = sn * s[j + 1];
                    s[j + 1] *= cs;
                    for row in vv.iter_mut() {
                        let t = cs * row[j] + sn * row[j + 1];
                        row[j + 1] = -sn * row[j] + cs * row[j + 1];
                        row[j] = t;
                    }
                    let t = libm::hypot(f, g);
                    let cs = f / t;
                    let sn = g / t;
                    s[j] = t;
                    f = cs * e[j] + sn * s[j + 1];
                    s[j + 1] = -sn * e[j] + cs * s[j + 1];
                    g = sn * e[j + 1];
                    e[j + 1] *= cs;
                    if j < m - 1 {
                        for row in uu.iter_mut() {
                            let t = cs * row[j] + sn * row[j + 1];
                            row[j + 1] = -sn * row[j] + cs * row[j + 1];
                            row[j] = t;
                        }
                    }
                }
                e[p - 2] = f;
            }
            _ => {
                let mut k = k;
                if s[k] <= 0.0 {
                    s[k] = if s[k] < 0.0 { -s[k] } else { 0.0 };
                    for row in vv.iter_mut().take(pp + 1) {
                        row[k] = -row[k];
                    }
                }
                while k < pp {
                    if s[k] >= s[k + 1] {
                        break;
                    }
                    s.swap(k, k + 1);
                    if k < n - 1 {
                        for row in vv.iter_mut() {
                            row.swap(k, k + 1);
                        }
                    }
                    if k < m - 1 {
                        for row in uu.iter_mut() {
                            row.swap(k, k + 1);
                        }
                    }
                    k += 1;
                }
                p -= 1;
            }
        }
    }

    let u = (0..nu).map(|j| uu.iter().map(|r| r[j]).collect()).collect();
    let v = (0..n).map(|j| vv.iter().map(|r| r[j]).collect()).collect();
    s.truncate(n);
    Factors { u, sigma: s, v }
}
