//! Lasso and ridge regression subject to linear identification
//! constraints, with solution paths and K-fold cross-validation.
//!
//! The objective is `‖y − Xθ‖² + λ·P(θ)` over `{θ : Aθ = 0}`, where `P`
//! is the L1 (lasso) or squared L2 (ridge) norm of the masked coordinates.

mod admm;
mod cv;
mod path;

use nalgebra::{DMatrix, DVector};

use crate::constraints::{nullspace_basis, ConstraintMatrix};
use crate::data::{DesignInfo, DesignMatrix, TermTag};
use crate::error::{Error, Result};
use crate::linalg;

pub use admm::Warm;
pub use cv::{cross_validate, penalized_path, select_lambda, PenalizedOptions, SelectionRule};
pub use path::{lambda_grid, solution_path, solution_path_masked, CvRecord, PathResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Lasso,
    Ridge,
}

impl PenaltyKind {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::Lasso => "lasso",
            PenaltyKind::Ridge => "ridge",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
    /// One flag per design column; `true` means the coefficient is penalized.
    pub mask: Vec<bool>,
}

impl PenaltySpec {
    /// Penalizes every column except the intercept.
    pub fn new(kind: PenaltyKind, lambda: f64, info: &DesignInfo) -> Self {
        Self {
            kind,
            lambda,
            mask: default_mask(info),
        }
    }

    fn validate(&self, info: &DesignInfo) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "penalty λ must be a finite non-negative number, got {}",
                self.lambda
            )));
        }
        validate_mask(&self.mask, info)
    }
}

pub fn default_mask(info: &DesignInfo) -> Vec<bool> {
    info.columns
        .iter()
        .map(|c| c.tag != TermTag::Intercept)
        .collect()
}

fn validate_mask(mask: &[bool], info: &DesignInfo) -> Result<()> {
    if mask.len() != info.n_columns() {
        return Err(Error::Dimension(format!(
            "penalty mask has {} entries, design has {} columns",
            mask.len(),
            info.n_columns()
        )));
    }
    if let Some(c) = info.column_of(TermTag::Intercept) {
        if mask[c] {
            return Err(Error::InvalidArgument("the intercept cannot be penalized".into()));
        }
    }
    Ok(())
}

/// A penalized fit on the scale of the design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedFit {
    pub coefficients: DVector<f64>,
    pub lambda: f64,
    /// Objective value at `coefficients`.
    pub objective: f64,
    /// ADMM iterations (0 for the closed-form ridge solve).
    pub iterations: usize,
    /// `max_i |(Aθ̂)_i|`.
    pub constraint_residual: f64,
    /// Solver state for warm-starting the next λ.
    pub warm: Option<Warm>,
}

pub fn objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    coefs: &DVector<f64>,
    kind: PenaltyKind,
    lambda: f64,
    mask: &[bool],
) -> f64 {
    let rss = (y - x * coefs).norm_squared();
    let pen: f64 = coefs
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(v, _)| match kind {
            PenaltyKind::Lasso => v.abs(),
            PenaltyKind::Ridge => v * v,
        })
        .sum();
    rss + lambda * pen
}

/// Shared quantities for repeated solves on one design.
#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub q: DMatrix<f64>,
    pub xq: DMatrix<f64>,
    pub gram: DMatrix<f64>,
    pub xqty: DVector<f64>,
    pub mask: Vec<bool>,
    pub a: DMatrix<f64>,
}

impl Problem {
    pub fn new(
        design: &DesignMatrix,
        y: &[f64],
        constraints: &ConstraintMatrix,
        mask: &[bool],
    ) -> Result<Self> {
        let n = design.n();
        if y.len() != n {
            return Err(Error::Dimension(format!(
                "response has {} values, design has {n} rows",
                y.len()
            )));
        }
        if constraints.p() != design.p() {
            return Err(Error::Dimension(format!(
                "constraints cover {} columns, design has {}",
                constraints.p(),
                design.p()
            )));
        }
        validate_mask(mask, &design.info)?;
        let q = nullspace_basis(constraints)?.q;
        let y = DVector::from_column_slice(y);
        let xq = &design.x * &q;
        let gram = xq.transpose() * &xq;
        let xqty = xq.transpose() * &y;
        Ok(Self {
            x: design.x.clone(),
            y,
            q,
            xq,
            gram,
            xqty,
            mask: mask.to_vec(),
            a: constraints.a.clone(),
        })
    }

    pub fn objective(&self, coefs: &DVector<f64>, kind: PenaltyKind, lambda: f64) -> f64 {
        objective(&self.x, &self.y, coefs, kind, lambda, &self.mask)
    }

    /// Exact ridge solution: least squares on `XQ` stacked over `√λ·(MQ)`
    /// with zero responses, `M` selecting the masked rows.
    pub fn ridge(&self, lambda: f64) -> Result<DVector<f64>> {
        let (n, d) = self.xq.shape();
        let masked: Vec<usize> = (0..self.mask.len()).filter(|&i| self.mask[i]).collect();
        let rows = if lambda > 0.0 { masked.len() } else { 0 };
        let root = lambda.sqrt();
        let aug = DMatrix::from_fn(n + rows, d, |i, j| {
            if i < n {
                self.xq[(i, j)]
            } else {
                root * self.q[(masked[i - n], j)]
            }
        });
        let mut rhs = DVector::zeros(n + rows);
        rhs.rows_mut(0, n).copy_from(&self.y);
        let phi = linalg::least_squares(&aug, &rhs)?.coef;
        Ok(&self.q * phi)
    }

    /// Least squares restricted to `θ_i = 0` for `i ∈ zero`, with the sign
    /// pattern `signs` (entries ±1, or 0 where no linear term applies)
    /// contributing `λ·Σ signs_i·θ_i`. Zeroed coordinates are set exactly.
    pub fn restricted(&self, zero: &[usize], signs: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
        let d = self.q.ncols();
        let n_basis = if zero.is_empty() {
            DMatrix::identity(d, d)
        } else {
            let b = DMatrix::from_fn(zero.len(), d, |i, j| self.q[(zero[i], j)]);
            let eig = (b.transpose() * &b).symmetric_eigen();
            let max = eig.eigenvalues.iter().cloned().fold(1.0, f64::max);
            let keep: Vec<usize> = (0..d)
                .filter(|&i| eig.eigenvalues[i] <= 1e-10 * max)
                .collect();
            DMatrix::from_fn(d, keep.len(), |i, j| eig.eigenvectors[(i, keep[j])])
        };
        let qn = &self.q * &n_basis;
        let mut theta = if qn.ncols() == 0 {
            DVector::zeros(self.q.nrows())
        } else {
            let w = &self.x * &qn;
            let lhs = w.transpose() * &w;
            let rhs = w.transpose() * &self.y - qn.transpose() * signs * (lambda / 2.0);
            let psi = linalg::solve_spd(&lhs, &rhs).ok()?;
            &qn * psi
        };
        for &i in zero {
            theta[i] = 0.0;
        }
        Some(theta)
    }

    /// The constrained least-squares fit with every masked coefficient zero.
    pub fn null_fit(&self) -> Option<DVector<f64>> {
        let zero: Vec<usize> = (0..self.mask.len()).filter(|&i| self.mask[i]).collect();
        self.restricted(&zero, &DVector::zeros(self.mask.len()), 0.0)
    }
}

/// Minimizes `‖y − Xθ‖² + λ·P(θ)` subject to `Aθ = 0`.
///
/// Ridge is solved in closed form in nullspace coordinates. Lasso uses ADMM
/// with a polishing step that re-solves exactly on the detected support.
pub fn fit_penalized(
    design: &DesignMatrix,
    y: &[f64],
    constraints: &ConstraintMatrix,
    penalty: &PenaltySpec,
) -> Result<PenalizedFit> {
    penalty.validate(&design.info)?;
    let problem = Problem::new(design, y, constraints, &penalty.mask)?;
    fit_problem(&problem, penalty.kind, penalty.lambda, None)
}

pub(crate) fn fit_problem(
    problem: &Problem,
    kind: PenaltyKind,
    lambda: f64,
    warm: Option<&Warm>,
) -> Result<PenalizedFit> {
    let (coefficients, iterations, warm) = match kind {
        PenaltyKind::Ridge => (problem.ridge(lambda)?, 0, None),
        PenaltyKind::Lasso => {
            let out = admm::solve(problem, lambda, warm)?;
            (out.coefficients, out.iterations, Some(out.warm))
        }
    };
    let constraint_residual = linalg::max_abs(&(&problem.a * &coefficients));
    Ok(PenalizedFit {
        objective: problem.objective(&coefficients, kind, lambda),
        coefficients,
        lambda,
        iterations,
        constraint_residual,
        warm,
    })
}

/// Smallest λ at which the lasso sets every masked coefficient to zero.
///
/// At the constrained null fit θ₀ the zero block is optimal iff some
/// multiplier ν makes `c − Aᵀν` vanish on unmasked coordinates and stay
/// within `[−λ, λ]` on masked ones, where `c = 2Xᵀ(y − Xθ₀)`. The smallest
/// such λ solves a linear program in (ν, t).
pub fn lambda_max(
    design: &DesignMatrix,
    y: &[f64],
    constraints: &ConstraintMatrix,
    mask: &[bool],
) -> Result<f64> {
    let problem = Problem::new(design, y, constraints, mask)?;
    lambda_max_problem(&problem)
}

pub(crate) fn lambda_max_problem(problem: &Problem) -> Result<f64> {
    use microlp::{ComparisonOp, OptimizationDirection, Problem as Lp};

    if !problem.mask.iter().any(|&m| m) {
        return Err(Error::InvalidArgument("no coefficient is penalized".into()));
    }
    let theta0 = problem
        .null_fit()
        .ok_or_else(|| Error::Numerical("null fit is not identified".into()))?;
    let c = problem.x.transpose() * (&problem.y - &problem.x * &theta0) * 2.0;
    let scale = linalg::max_abs(&c);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let c = c / scale;
    let a = &problem.a;
    let (m, p) = a.shape();

    let mut lp = Lp::new(OptimizationDirection::Minimize);
    let t = lp.add_var(1.0, (0.0, f64::INFINITY));
    let nu: Vec<_> = (0..m)
        .map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for i in 0..p {
        let at_nu = || nu.iter().enumerate().map(move |(r, &v)| (v, a[(r, i)]));
        if problem.mask[i] {
            // c_i − (Aᵀν)_i ≤ t and −(c_i − (Aᵀν)_i) ≤ t
            let upper: Vec<_> = at_nu().chain([(t, 1.0)]).collect();
            lp.add_constraint(upper.as_slice(), ComparisonOp::Ge, c[i]);
            let lower: Vec<_> = at_nu().map(|(v, w)| (v, -w)).chain([(t, 1.0)]).collect();
            lp.add_constraint(lower.as_slice(), ComparisonOp::Ge, -c[i]);
        } else {
            // Stationarity already holds here up to rounding; a small slack
            // keeps the LP feasible.
            let row: Vec<_> = at_nu().collect();
            lp.add_constraint(row.as_slice(), ComparisonOp::Le, c[i] + 1e-9);
            lp.add_constraint(row.as_slice(), ComparisonOp::Ge, c[i] - 1e-9);
        }
    }
    let solution = lp
        .solve()
        .map_err(|e| Error::Numerical(format!("λ_max linear program failed: {e}")))?
        .into_solution()
        .map_err(|_| Error::Numerical("λ_max linear program was interrupted".into()))?;
    Ok(solution.var_value(t) * scale)
}

/// Coefficients per unit of the original covariates: slopes fitted on
/// standardized columns are divided by the standardization scale.
pub fn to_original_scale(info: &DesignInfo, coefs: &DVector<f64>) -> DVector<f64> {
    let mut out = coefs.clone();
    for (c, col) in info.columns.iter().enumerate() {
        let j = match col.tag {
            TermTag::Continuous(j) | TermTag::CatCont(j, _, _) => j,
            _ => continue,
        };
        let name = &info.spec.continuous[j];
        if let Some((_, s)) = info.centering.get(name) {
            out[c] /= s;
        }
    }
    out
}
