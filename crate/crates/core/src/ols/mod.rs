//! Constrained least squares and the shared fit result type.

mod render;
mod summary;

pub(crate) use render::{fixed3, layout, Line};
pub use render::{render_comparison, render_csv, render_json, render_table, ComparisonColumn};
pub use summary::{summarize, CategoricalSummary, CoefficientRow, CoefficientTable, RowStatus, TermKind};

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::constraints::{nullspace_basis, ConstraintMatrix};
use crate::data::{Dataset, DesignMatrix, ProportionTable, Term, TermTag};
use crate::error::{Error, Result};
use crate::glm::Family;
use crate::linalg;

/// Reference distribution for Wald statistics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(rename_all = "snake_case", tag = "distribution")]
pub enum Reference {
    StudentT { df: usize },
    Normal,
}

/// A fitted constrained model. Coefficients are in full (overparametrized)
/// coordinates aligned with the design columns.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub design: DesignMatrix,
    pub y: DVector<f64>,
    pub constraints: ConstraintMatrix,
    /// Orthonormal basis of the constraint nullspace.
    pub basis: DMatrix<f64>,
    /// Proportions the constraints were built from, if any.
    pub proportions: Option<ProportionTable>,
    pub coefficients: DVector<f64>,
    pub reduced: DVector<f64>,
    pub vcov: DMatrix<f64>,
    /// Fitted means on the response scale.
    pub fitted: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Residual variance (gaussian) or the fixed dispersion 1.
    pub sigma2: f64,
    pub rss: f64,
    pub df_residual: usize,
    /// Number of identified parameters, P − m.
    pub n_params: usize,
    pub family: Family,
    pub reference: Reference,
    pub deviance: f64,
    pub iterations: usize,
}

impl FitResult {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn std_errors(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.vcov.nrows(),
            self.vcov.diagonal().iter().map(|v| v.max(0.0).sqrt()),
        )
    }

    /// Coefficient for the column labelled `label`, e.g. `race[B]`.
    pub fn coef(&self, label: &str) -> Option<f64> {
        self.column(label).map(|c| self.coefficients[c])
    }

    pub fn std_error(&self, label: &str) -> Option<f64> {
        self.column(label).map(|c| self.vcov[(c, c)].max(0.0).sqrt())
    }

    pub fn column(&self, label: &str) -> Option<usize> {
        self.design.info.columns.iter().position(|c| c.label == label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.design.info.columns.iter().map(|c| c.label.as_str())
    }

    /// Reduced design `XQ`.
    pub fn reduced_design(&self) -> DMatrix<f64> {
        &self.design.x * &self.basis
    }

    pub fn with_proportions(mut self, props: Option<ProportionTable>) -> Self {
        self.proportions = props;
        self
    }
}

/// Least squares subject to `Aθ = 0`, solved as an unconstrained problem in
/// nullspace coordinates `θ = Qθ_Q` by QR of `XQ`.
pub fn fit_ols(design: &DesignMatrix, y: &[f64], constraints: &ConstraintMatrix) -> Result<FitResult> {
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
    let basis = nullspace_basis(constraints)?.q;
    let d = basis.ncols();
    if n <= d {
        return Err(Error::RankDeficient(format!(
            "{n} observations for {d} identified parameters; need more observations than parameters"
        )));
    }
    let y = DVector::from_column_slice(y);
    let xq = &design.x * &basis;
    let ls = linalg::least_squares(&xq, &y)?;
    let mut coefficients = &basis * &ls.coef;
    let w = &basis * &ls.r_inv;
    let mut vcov = &w * w.transpose();
    constraints.zero_pinned(&mut coefficients, &mut vcov);
    let fitted = &design.x * &coefficients;
    let residuals = &y - &fitted;
    let rss = residuals.norm_squared();
    let df_residual = n - d;
    let sigma2 = rss / df_residual as f64;
    vcov *= sigma2;

    Ok(FitResult {
        design: design.clone(),
        y,
        constraints: constraints.clone(),
        basis,
        proportions: None,
        coefficients,
        reduced: ls.coef,
        vcov,
        fitted,
        residuals,
        sigma2,
        rss,
        df_residual,
        n_params: d,
        family: Family::Gaussian,
        reference: Reference::StudentT { df: df_residual },
        deviance: rss,
        iterations: 1,
    })
}

/// Predicted means for `newdata`, applying the fit's centering and level
/// coding.
pub fn predict(fit: &FitResult, newdata: &Dataset) -> Result<DVector<f64>> {
    let x = fit.design.info.rows_for(newdata)?;
    let eta = x * &fit.coefficients;
    Ok(eta.map(|e| fit.family.inverse_link(e)))
}

/// The x-effect for one combination of groups: the main slope plus the
/// interaction coefficient of each categorical that modifies `x`.
///
/// `groups` maps categorical names to level labels; every modifier of `x`
/// must be present, other model categoricals are ignored.
pub fn group_specific_slope(
    fit: &FitResult,
    x: &str,
    groups: &BTreeMap<String, String>,
) -> Result<f64> {
    let info = &fit.design.info;
    let spec = &info.spec;
    let j = spec
        .continuous_index(x)
        .ok_or_else(|| Error::InvalidArgument(format!("'{x}' is not a continuous model term")))?;
    for name in groups.keys() {
        if spec.categorical_index(name).is_none() {
            return Err(Error::InvalidArgument(format!(
                "'{name}' is not a categorical model term"
            )));
        }
    }
    let modifiers: Vec<usize> = info
        .terms
        .iter()
        .filter_map(|t| match *t {
            Term::CatCont(jj, k) if jj == j => Some(k),
            _ => None,
        })
        .collect();
    if modifiers.is_empty() && !groups.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "'{x}' has no categorical modifiers, so group levels do not apply"
        )));
    }
    let main = info.column_of(TermTag::Continuous(j)).expect("continuous column");
    let mut slope = fit.coefficients[main];
    for k in modifiers {
        let name = &spec.categorical[k];
        let label = groups.get(name).ok_or_else(|| {
            Error::InvalidArgument(format!("no level given for modifier '{name}' of '{x}'"))
        })?;
        let l = info.levels[k].iter().position(|v| v == label).ok_or_else(|| {
            Error::InvalidArgument(format!("'{label}' is not a level of '{name}'"))
        })?;
        let col = info.column_of(TermTag::CatCont(j, k, l)).expect("cat-cont column");
        slope += fit.coefficients[col];
    }
    Ok(slope)
}
