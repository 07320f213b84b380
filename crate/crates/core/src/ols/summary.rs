use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::{FitResult, Reference};
use crate::constraints::Scheme;
use crate::data::{Term, TermTag};
use crate::error::{Error, Result};
use crate::glm::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Estimated,
    /// Pinned to zero by the identification (RGE reference level).
    Reference,
    /// Zero standard error with a nonzero or unpinned estimate; no p-value.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Intercept,
    Continuous,
    Categorical,
    CatCont,
    CatCat,
}

impl TermKind {
    pub fn is_interaction(self) -> bool {
        matches!(self, TermKind::CatCont | TermKind::CatCat)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CoefficientRow {
    pub label: String,
    pub display: String,
    pub term: String,
    pub kind: TermKind,
    /// Sample (or supplied) proportion of the level, for categorical mains.
    pub proportion: Option<f64>,
    pub estimate: f64,
    pub std_error: f64,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CategoricalSummary {
    pub name: String,
    pub levels: Vec<String>,
    pub proportions: Vec<f64>,
}

/// Inference for every coefficient of a fit.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CoefficientTable {
    pub response: String,
    pub formula: String,
    pub scheme: Scheme,
    pub family: Family,
    pub level: f64,
    pub reference: Reference,
    pub n: usize,
    pub n_params: usize,
    pub df_residual: usize,
    pub sigma2: f64,
    pub categoricals: Vec<CategoricalSummary>,
    pub rows: Vec<CoefficientRow>,
}

impl CoefficientTable {
    pub fn row(&self, label: &str) -> Option<&CoefficientRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

enum Dist {
    T(StudentsT),
    N(Normal),
}

impl Dist {
    fn two_sided_p(&self, stat: f64) -> f64 {
        let tail = match self {
            Dist::T(d) => d.sf(stat.abs()),
            Dist::N(d) => d.sf(stat.abs()),
        };
        (2.0 * tail).min(1.0)
    }

    fn quantile(&self, p: f64) -> f64 {
        match self {
            Dist::T(d) => d.inverse_cdf(p),
            Dist::N(d) => d.inverse_cdf(p),
        }
    }
}

/// Estimates, standard errors, Wald statistics, two-sided p-values and
/// `level` confidence intervals. OLS fits use Student-t with the residual
/// degrees of freedom; GLM fits use the normal reference.
pub fn summarize(fit: &FitResult, level: f64) -> Result<CoefficientTable> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level {level} is not in (0, 1)"
        )));
    }
    let dist = match fit.reference {
        Reference::StudentT { df } => {
            if df < 1 {
                return Err(Error::InvalidArgument(
                    "no residual degrees of freedom for inference".into(),
                ));
            }
            Dist::T(StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::Numerical(e.to_string()))?)
        }
        Reference::Normal => {
            Dist::N(Normal::new(0.0, 1.0).map_err(|e| Error::Numerical(e.to_string()))?)
        }
    };
    let crit = dist.quantile(0.5 + level / 2.0);
    let info = &fit.design.info;
    let pinned = fit.constraints.pinned_columns();

    let categoricals: Vec<CategoricalSummary> = info
        .spec
        .categorical
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let proportions = match fit.proportions.as_ref().and_then(|p| p.marginal(name).ok()) {
                Some(p) => p,
                None => {
                    let n = fit.design.n() as f64;
                    info.term_ranges[info.term_index(Term::CatMain(k)).expect("main term")]
                        .clone()
                        .map(|c| fit.design.x.column(c).sum() / n)
                        .collect()
                }
            };
            CategoricalSummary {
                name: name.clone(),
                levels: info.levels[k].clone(),
                proportions,
            }
        })
        .collect();

    let se = fit.std_errors();
    let rows = info
        .columns
        .iter()
        .enumerate()
        .map(|(c, col)| {
            let estimate = fit.coefficients[c];
            let std_error = se[c];
            let (kind, proportion) = match col.tag {
                TermTag::Intercept => (TermKind::Intercept, None),
                TermTag::Continuous(_) => (TermKind::Continuous, None),
                TermTag::CatMain(k, l) => (TermKind::Categorical, Some(categoricals[k].proportions[l])),
                TermTag::CatCont(..) => (TermKind::CatCont, None),
                TermTag::CatCat(..) => (TermKind::CatCat, None),
            };
            let degenerate = std_error <= 16.0 * f64::EPSILON * estimate.abs().max(1.0);
            let status = if pinned[c] {
                RowStatus::Reference
            } else if degenerate {
                RowStatus::Degenerate
            } else {
                RowStatus::Estimated
            };
            let (statistic, p_value) = match status {
                RowStatus::Estimated => {
                    let t = estimate / std_error;
                    (Some(t), Some(dist.two_sided_p(t)))
                }
                _ => (None, None),
            };
            CoefficientRow {
                label: col.label.clone(),
                display: col.display.clone(),
                term: info.term_name(info.terms[col.term]),
                kind,
                proportion,
                estimate,
                std_error,
                statistic,
                p_value,
                ci_lower: estimate - crit * std_error,
                ci_upper: estimate + crit * std_error,
                status,
            }
        })
        .collect();

    Ok(CoefficientTable {
        response: info.spec.response.clone(),
        formula: info.spec.render(),
        scheme: fit.constraints.scheme,
        family: fit.family,
        level,
        reference: fit.reference,
        n: fit.n(),
        n_params: fit.n_params,
        df_residual: fit.df_residual,
        sigma2: fit.sigma2,
        categoricals,
        rows,
    })
}
