//! Lasso by ADMM over the split `Qφ = z`: the φ-update is a ridge-type
//! solve in nullspace coordinates, the z-update soft-thresholds the masked
//! coordinates.

use nalgebra::{DMatrix, DVector};

use super::{PenaltyKind, Problem};
use crate::error::{Error, Result};

const MAX_ITER: usize = 10_000;
const TOL: f64 = 1e-6;
const RHO_RATIO: f64 = 10.0;

/// ADMM state carried between neighbouring λ values.
#[derive(Debug, Clone, PartialEq)]
pub struct Warm {
    z: DVector<f64>,
    /// Scaled dual variable.
    u: DVector<f64>,
    rho: f64,
}

pub(super) struct Output {
    pub coefficients: DVector<f64>,
    pub iterations: usize,
    pub warm: Warm,
}

fn factor(gram: &DMatrix<f64>, rho: f64) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let d = gram.nrows();
    (gram * 2.0 + DMatrix::identity(d, d) * rho)
        .cholesky()
        .ok_or_else(|| Error::Numerical("ADMM system is not positive definite".into()))
}

pub(super) fn solve(problem: &Problem, lambda: f64, warm: Option<&Warm>) -> Result<Output> {
    let q = &problem.q;
    let (p, d) = q.shape();
    let mask = &problem.mask;
    let (mut z, mut u, mut rho) = match warm {
        Some(w) if w.z.len() == p => (w.z.clone(), w.u.clone(), w.rho),
        _ => (DVector::zeros(p), DVector::zeros(p), 1.0),
    };
    let mut chol = factor(&problem.gram, rho)?;
    let rhs0 = &problem.xqty * 2.0;
    let mut qphi = DVector::zeros(p);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=MAX_ITER {
        iterations = iter;
        let phi = chol.solve(&(&rhs0 + q.transpose() * (&z - &u) * rho));
        qphi = q * &phi;
        let z_old = z.clone();
        let v = &qphi + &u;
        let kappa = lambda / rho;
        for i in 0..p {
            z[i] = if mask[i] {
                v[i].signum() * (v[i].abs() - kappa).max(0.0)
            } else {
                v[i]
            };
        }
        let r = &qphi - &z;
        u += &r;
        let r_norm = r.norm();
        let s_norm = rho * (q.transpose() * (&z - &z_old)).norm();
        let eps_pri = TOL * ((p as f64).sqrt() + qphi.norm().max(z.norm()));
        let eps_dual = TOL * ((d as f64).sqrt() + rho * (q.transpose() * &u).norm());
        if r_norm < eps_pri && s_norm < eps_dual {
            converged = true;
            break;
        }
        let new_rho = if r_norm > RHO_RATIO * s_norm {
            rho * 2.0
        } else if s_norm > RHO_RATIO * r_norm {
            rho / 2.0
        } else {
            rho
        };
        if new_rho != rho {
            u *= rho / new_rho;
            rho = new_rho;
            chol = factor(&problem.gram, rho)?;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            detail: format!("ADMM residuals above tolerance at λ = {lambda}"),
        });
    }

    // qphi is feasible but only approximately sparse; z is sparse but only
    // approximately feasible. Re-solve exactly on z's support and keep the
    // best feasible candidate, preferring exact zeros on ties.
    let zero: Vec<usize> = (0..p).filter(|&i| mask[i] && z[i] == 0.0).collect();
    let signs = DVector::from_fn(p, |i, _| {
        if mask[i] && z[i] != 0.0 { z[i].signum() } else { 0.0 }
    });
    let mut candidates = Vec::new();
    if let Some(null) = problem.null_fit() {
        candidates.push(null);
    }
    if let Some(polished) = problem.restricted(&zero, &signs, lambda) {
        candidates.push(polished);
    }
    candidates.push(qphi);
    let objs: Vec<f64> = candidates
        .iter()
        .map(|c| problem.objective(c, PenaltyKind::Lasso, lambda))
        .collect();
    let best = objs.iter().cloned().fold(f64::INFINITY, f64::min);
    let slack = 1e-10 * (1.0 + best.abs());
    let pick = objs.iter().position(|&o| o <= best + slack).unwrap_or(objs.len() - 1);
    let coefficients = candidates.swap_remove(pick);

    Ok(Output {
        coefficients,
        iterations,
        warm: Warm { z, u, rho },
    })
}
