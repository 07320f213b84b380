//! Dense factorizations used by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold on triangular-factor diagonals for numerical rank.
pub const RANK_TOL: f64 = 1e-10;

/// Number of diagonal entries of `r` above `RANK_TOL` times the largest.
pub fn triangular_rank(r: &DMatrix<f64>) -> usize {
    let k = r.nrows().min(r.ncols());
    let diag: Vec<f64> = (0..k).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    diag.iter().filter(|&&d| d > RANK_TOL * max).count()
}

/// Orthonormal basis of the nullspace of the m×P matrix `a`, from a full QR
/// factorization of `aᵀ`. Returns P×(P−m). Fails if `a` is not of full row
/// rank.
pub fn nullspace(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, p) = a.shape();
    if m == 0 {
        return Ok(DMatrix::identity(p, p));
    }
    if m > p {
        return Err(Error::RankDeficient(format!(
            "{m} constraints on {p} coefficients"
        )));
    }
    let qr = a.transpose().qr();
    let rank = triangular_rank(&qr.r());
    if rank < m {
        return Err(Error::RankDeficient(format!(
            "constraint matrix has rank {rank}, expected {m}"
        )));
    }
    let mut qt = DMatrix::identity(p, p);
    qr.q_tr_mul(&mut qt);
    Ok(qt.rows(m, p - m).transpose())
}

/// Least-squares solution of `x·b ≈ y` by Householder QR, together with
/// the inverse of the triangular factor (so that (xᵀx)⁻¹ = R⁻¹R⁻ᵀ).
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coef: DVector<f64>,
    pub r_inv: DMatrix<f64>,
}

pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LeastSquares> {
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "response has {} rows, design has {n}",
            y.len()
        )));
    }
    if d == 0 {
        return Ok(LeastSquares {
            coef: DVector::zeros(0),
            r_inv: DMatrix::zeros(0, 0),
        });
    }
    if n < d {
        return Err(Error::RankDeficient(format!(
            "{n} observations for {d} identified parameters"
        )));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let rank = triangular_rank(&r);
    if rank < d {
        return Err(Error::RankDeficient(format!(
            "reduced design has rank {rank}, expected {d}"
        )));
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, d).into_owned();
    let coef = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(d, d))
        .ok_or_else(|| Error::Numerical("singular triangular factor".into()))?;
    Ok(LeastSquares { coef, r_inv })
}

/// Solves the symmetric positive-definite system `m·z = b`.
pub fn solve_spd(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))?;
    Ok(chol.solve(b))
}

/// Inverse of a symmetric positive-definite matrix.
pub fn inverse_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("matrix is not positive definite".into()))?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
