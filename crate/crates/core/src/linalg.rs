//! Small dense linear-algebra helpers shared by fitting and bias code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance for the pivoted-QR rank test.
pub const RANK_TOL: f64 = 1e-10;

/// Numerical rank from the diagonal of a column-pivoted QR factorization.
pub fn rank(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 {
        return 0;
    }
    let scale = m.norm();
    if scale == 0.0 {
        return 0;
    }
    let r = m.clone().col_piv_qr().r();
    let k = r.nrows().min(r.ncols());
    (0..k).filter(|&i| r[(i, i)].abs() > RANK_TOL * scale).count()
}

/// Inverse of a symmetric positive-definite matrix. Falls back to an
/// eigenvalue-clipped pseudo-inverse (with a warning) if Cholesky fails.
pub fn spd_inverse(m: &DMatrix<f64>, label: &str) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular(format!("{label} has non-finite entries")));
    }
    if let Some(chol) = m.clone().cholesky() {
        return Ok(chol.inverse());
    }
    log::warn!("{label} is not positive definite; using an eigenvalue-clipped pseudo-inverse");
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    if top <= 0.0 {
        return Err(Error::Singular(format!("{label} has no positive eigenvalues")));
    }
    let floor = top * 1e-12;
    let inv_vals = eig.eigenvalues.map(|v| if v > floor { 1.0 / v } else { 0.0 });
    let q = &eig.eigenvectors;
    Ok(q * DMatrix::from_diagonal(&inv_vals) * q.transpose())
}

/// Weighted least-squares coefficients of `y` on `x` with weights `w`,
/// solved through a column-pivoted QR of `sqrt(W) X`.
pub fn weighted_least_squares(x: &DMatrix<f64>, w: &[f64], y: &[f64]) -> Result<DVector<f64>> {
    let (n, p) = x.shape();
    if w.len() != n || y.len() != n {
        return Err(Error::Dimension(format!(
            "weighted regression with {n} rows, {} weights, {} responses",
            w.len(),
            y.len()
        )));
    }
    if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::Singular("weights must be finite and nonnegative".into()));
    }
    let mut a = x.clone();
    let mut b = DVector::from_column_slice(y);
    for i in 0..n {
        let s = w[i].sqrt();
        a.row_mut(i).scale_mut(s);
        b[i] *= s;
    }
    if rank(&a) < p {
        return Err(Error::Singular("weighted cross-product is rank deficient".into()));
    }
    let qr = a.col_piv_qr();
    let qtb = qr.q().transpose() * b;
    let r = qr.r();
    let mut z = r
        .solve_upper_triangular(&qtb.rows(0, p).into_owned())
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))?;
    qr.p().inv_permute_rows(&mut z);
    Ok(z)
}

/// `X^T diag(w) X`
pub fn weighted_crossprod(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let p = x.ncols();
    let mut out = DMatrix::zeros(p, p);
    for (i, &wi) in w.iter().enumerate() {
        for r in 0..p {
            let a = wi * x[(i, r)];
            if a == 0.0 {
                continue;
            }
            for s in r..p {
                out[(r, s)] += a * x[(i, s)];
            }
        }
    }
    for r in 0..p {
        for s in 0..r {
            out[(r, s)] = out[(s, r)];
        }
    }
    out
}

/// `X^T v`
pub fn xt_vec(x: &DMatrix<f64>, v: &[f64]) -> DVector<f64> {
    x.tr_mul(&DVector::from_column_slice(v))
}
