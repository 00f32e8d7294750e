//! Dense linear-algebra helpers: deterministic thin SVD, rank truncation,
//! singular-value soft thresholding, spectral norms.
//!
//! All SVD-derived quantities in the crate go through [`thin_svd`] so that
//! ordering and sign conventions are fixed in exactly one place.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, RidgeError};

/// Thin SVD with singular values sorted descending and a deterministic sign
/// convention: the first entry of each left singular vector with magnitude
/// above 1e-12 is made positive (the right vector is flipped along with it).
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// Left singular vectors, one column per singular value (n x r).
    pub u: DMatrix<f64>,
    /// Singular values, descending (length r = min(n, m)).
    pub sigma: DVector<f64>,
    /// Right singular vectors transposed (r x m).
    pub v_t: DMatrix<f64>,
}

impl ThinSvd {
    /// Reassemble `U * diag(sigma) * V^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.u.clone();
        for (c, mut col) in scaled.column_iter_mut().enumerate() {
            col *= self.sigma[c];
        }
        &scaled * &self.v_t
    }

    /// Keep only the leading `rank` singular triples.
    pub fn truncated(&self, rank: usize) -> ThinSvd {
        let r = rank.min(self.sigma.len());
        ThinSvd {
            u: self.u.columns(0, r).into_owned(),
            sigma: self.sigma.rows(0, r).into_owned(),
            v_t: self.v_t.rows(0, r).into_owned(),
        }
    }
}

/// One-sided Jacobi SVD of an n x m matrix with n >= m: rotate column pairs
/// until they are mutually orthogonal, accumulating the rotations into V.
/// Then sigma_i = ||w_i|| and u_i = w_i / sigma_i (zero columns stay zero).
/// Backward stable, and W = U Sigma with M = W V^T holds by construction.
fn jacobi_svd_tall(mut w: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let m = w.ncols();
    let n = w.nrows();
    let mut v = DMatrix::<f64>::identity(m, m);
    let tol = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..m {
            for j in (i + 1)..m {
                let mut a = 0.0;
                let mut b = 0.0;
                let mut c = 0.0;
                for r in 0..n {
                    let wi = w[(r, i)];
                    let wj = w[(r, j)];
                    a += wi * wi;
                    b += wj * wj;
                    c += wi * wj;
                }
                if a == 0.0 || b == 0.0 || c.abs() <= tol * (a * b).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * c);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for r in 0..n {
                    let wi = w[(r, i)];
                    let wj = w[(r, j)];
                    w[(r, i)] = cs * wi - sn * wj;
                    w[(r, j)] = sn * wi + cs * wj;
                }
                for r in 0..m {
                    let vi = v[(r, i)];
                    let vj = v[(r, j)];
                    v[(r, i)] = cs * vi - sn * vj;
                    v[(r, j)] = sn * vi + cs * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigma = DVector::zeros(m);
    let mut u = DMatrix::zeros(n, m);
    for i in 0..m {
        let norm = w.column(i).norm();
        sigma[i] = norm;
        if norm > 0.0 {
            u.set_column(i, &(w.column(i) / norm));
        }
    }
    (u, sigma, v)
}

/// Compute the thin SVD of `m` with deterministic ordering and signs.
/// Tall inputs are QR-reduced first so the Jacobi sweeps run on the small
/// square factor.
pub fn thin_svd(m: &DMatrix<f64>) -> ThinSvd {
    let (n, cols) = m.shape();
    let (u, sigma, v) = if n >= cols {
        if n > cols {
            let qr = m.clone().qr();
            let q = qr.q();
            let (ur, sigma, v) = jacobi_svd_tall(qr.r());
            (q * ur, sigma, v)
        } else {
            jacobi_svd_tall(m.clone())
        }
    } else {
        // wide: decompose the transpose and swap the factors
        let qr = m.transpose().qr();
        let (ur, sigma, v) = jacobi_svd_tall(qr.r());
        (v, sigma, qr.q() * ur)
    };

    let r = sigma.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap());

    let mut u_sorted = DMatrix::zeros(u.nrows(), r);
    let mut vt_sorted = DMatrix::zeros(r, v.nrows());
    let mut s_sorted = DVector::zeros(r);
    for (dst, &src) in order.iter().enumerate() {
        s_sorted[dst] = sigma[src];
        let mut ucol = u.column(src).into_owned();
        let mut vrow = v.column(src).transpose().into_owned();
        if let Some(lead) = ucol.iter().position(|x| x.abs() > 1e-12) {
            if ucol[lead] < 0.0 {
                ucol.neg_mut();
                vrow.neg_mut();
            }
        }
        u_sorted.set_column(dst, &ucol);
        vt_sorted.set_row(dst, &vrow);
    }
    ThinSvd {
        u: u_sorted,
        sigma: s_sorted,
        v_t: vt_sorted,
    }
}

/// Best rank-`k` approximation in Frobenius norm.
pub fn truncate_to_rank(m: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let max_rank = m.nrows().min(m.ncols());
    if k > max_rank {
        return Err(RidgeError::argument(format!(
            "rank {k} exceeds min(rows, cols) = {max_rank}"
        )));
    }
    Ok(thin_svd(m).truncated(k).reconstruct())
}

/// Proximal operator of `tau * ||.||_*`: shrink each singular value by `tau`.
pub fn singular_value_threshold(m: &DMatrix<f64>, tau: f64) -> (DMatrix<f64>, f64) {
    let mut svd = thin_svd(m);
    let mut nuclear = 0.0;
    for s in svd.sigma.iter_mut() {
        *s = (*s - tau).max(0.0);
        nuclear += *s;
    }
    (svd.reconstruct(), nuclear)
}

/// Spectral norm via the Gram matrix of the smaller side.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = if m.ncols() <= m.nrows() {
        m.transpose() * m
    } else {
        m * m.transpose()
    };
    let eig = gram.symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b)).max(0.0).sqrt()
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    DVector::from_vec(ev)
}

/// `||A A^T - I||_F` for a k x d matrix with supposedly orthonormal rows.
pub fn row_orthonormality_defect(a: &DMatrix<f64>) -> f64 {
    let k = a.nrows();
    let gram = a * a.transpose();
    (gram - DMatrix::identity(k, k)).norm()
}
