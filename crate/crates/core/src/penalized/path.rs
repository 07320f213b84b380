//! Regularization paths over a log-spaced λ grid.

use std::fmt::Write as _;

use nalgebra::DVector;

use super::{
    default_mask, fit_problem, lambda_max_problem, to_original_scale, PenaltyKind, Problem,
    SelectionRule,
};
use crate::constraints::ConstraintMatrix;
use crate::data::DesignMatrix;
use crate::error::{Error, Result};

/// Cross-validation summary attached to a path.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CvRecord {
    pub folds: usize,
    /// Held-out mean squared error, indexed `[fold][λ]`.
    pub fold_errors: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// Standard error of the mean across folds.
    pub se: Vec<f64>,
    pub index_min: usize,
    pub index_1se: usize,
    pub lambda_min: f64,
    pub lambda_1se: f64,
    pub rule: SelectionRule,
}

impl CvRecord {
    pub fn selected_index(&self) -> usize {
        match self.rule {
            SelectionRule::Min => self.index_min,
            SelectionRule::OneSe => self.index_1se,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PathResult {
    pub kind: PenaltyKind,
    pub labels: Vec<String>,
    pub lambda_max: f64,
    /// Descending.
    pub lambdas: Vec<f64>,
    /// One coefficient vector per λ, per unit of the original covariates.
    pub coefficients: Vec<DVector<f64>>,
    /// Coefficients on the scale of the design the solver saw.
    pub design_coefficients: Vec<DVector<f64>>,
    /// `max_i |(Aθ̂)_i|` at each λ.
    pub constraint_residuals: Vec<f64>,
    /// Residual sum of squares at each λ.
    pub training_rss: Vec<f64>,
    pub cv: Option<CvRecord>,
}

impl PathResult {
    /// λ and coefficients chosen by cross-validation, if it was run.
    pub fn selected(&self) -> Option<(f64, &DVector<f64>)> {
        let i = self.cv.as_ref()?.selected_index();
        Some((self.lambdas[i], &self.coefficients[i]))
    }

    pub fn coefficient(&self, label: &str, index: usize) -> Option<f64> {
        let c = self.labels.iter().position(|l| l == label)?;
        Some(self.coefficients.get(index)?[c])
    }

    /// One row per λ: λ, original-scale coefficients, constraint residual,
    /// and the CV mean and standard error when available.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push_str(",constraint_residual,cv_mean,cv_se\n");
        for (i, lambda) in self.lambdas.iter().enumerate() {
            let _ = write!(out, "{lambda}");
            for v in self.coefficients[i].iter() {
                let _ = write!(out, ",{v}");
            }
            let _ = write!(out, ",{}", self.constraint_residuals[i]);
            match &self.cv {
                Some(cv) => {
                    let _ = writeln!(out, ",{},{}", cv.mean[i], cv.se[i]);
                }
                None => out.push_str(",,\n"),
            }
        }
        out
    }
}

/// `size` values log-spaced from `lambda_max` down to `1e-4·lambda_max`.
pub fn lambda_grid(lambda_max: f64, size: usize) -> Vec<f64> {
    let lo = (lambda_max * 1e-4).ln();
    let hi = lambda_max.ln();
    (0..size)
        .map(|i| {
            if i == 0 {
                lambda_max
            } else {
                (hi + (lo - hi) * i as f64 / (size - 1) as f64).exp()
            }
        })
        .collect()
}

/// Path over the default mask (everything but the intercept).
pub fn solution_path(
    design: &DesignMatrix,
    y: &[f64],
    constraints: &ConstraintMatrix,
    kind: PenaltyKind,
    grid_size: usize,
) -> Result<PathResult> {
    solution_path_masked(design, y, constraints, kind, grid_size, &default_mask(&design.info))
}

pub fn solution_path_masked(
    design: &DesignMatrix,
    y: &[f64],
    constraints: &ConstraintMatrix,
    kind: PenaltyKind,
    grid_size: usize,
    mask: &[bool],
) -> Result<PathResult> {
    if grid_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "λ grid needs at least 2 points, got {grid_size}"
        )));
    }
    check_response(y)?;
    let problem = Problem::new(design, y, constraints, mask)?;
    let lmax = lambda_max_problem(&problem)?;
    if !(lmax > 0.0) {
        return Err(Error::Data(
            "the unpenalized terms already fit the response exactly; every λ gives the same fit".into(),
        ));
    }
    let lambdas = lambda_grid(lmax, grid_size);
    let fits = run_path(&problem, kind, &lambdas)?;
    let info = &design.info;
    Ok(PathResult {
        kind,
        labels: info.columns.iter().map(|c| c.label.clone()).collect(),
        lambda_max: lmax,
        coefficients: fits.iter().map(|f| to_original_scale(info, &f.coefficients)).collect(),
        constraint_residuals: fits.iter().map(|f| f.constraint_residual).collect(),
        training_rss: fits
            .iter()
            .map(|f| (&problem.y - &problem.x * &f.coefficients).norm_squared())
            .collect(),
        design_coefficients: fits.into_iter().map(|f| f.coefficients).collect(),
        lambdas,
        cv: None,
    })
}

pub(super) fn run_path(
    problem: &Problem,
    kind: PenaltyKind,
    lambdas: &[f64],
) -> Result<Vec<super::PenalizedFit>> {
    let mut fits: Vec<super::PenalizedFit> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let warm = fits.last().and_then(|f| f.warm.as_ref());
        fits.push(fit_problem(problem, kind, lambda, warm)?);
    }
    Ok(fits)
}

fn check_response(y: &[f64]) -> Result<()> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if !(ss > 0.0) {
        return Err(Error::Data("response has zero variance".into()));
    }
    Ok(())
}
