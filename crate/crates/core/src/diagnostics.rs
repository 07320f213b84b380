//! Checks for when adding categorical modifiers leaves main effects and
//! their standard errors unchanged: per-group scale statistics, the
//! residual-variance condition, and nested-model comparison reports.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::constraints::Scheme;
use crate::data::{Dataset, TermTag};
use crate::error::{Error, Result};
use crate::formula::ModelSpec;
use crate::linalg;
use crate::ols::{fixed3, layout, FitResult, Line};

/// Dispersion ratio below which a scale condition is reported as
/// approximately satisfied. Advisory only.
pub const NEAR_EQUAL_RATIO: f64 = 1.1;
/// Relative tolerance for treating a condition as exactly satisfied.
const EXACT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GroupScale {
    pub level: String,
    pub n: usize,
    pub mean: f64,
    /// n_r⁻¹·Σ_r x² − x̄_r².
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GroupScaleStats {
    pub variable: String,
    pub group: String,
    pub groups: Vec<GroupScale>,
    /// max_r σ̂²_r / min_r σ̂²_r.
    pub dispersion_ratio: f64,
    pub near_equal: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GroupCovariance {
    pub level: String,
    pub n: usize,
    pub means: Vec<f64>,
    /// n_r⁻¹·Σ_r (x_j − x̄_{r,j})(x_h − x̄_{r,h}).
    pub covariance: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CovarianceStats {
    pub variables: Vec<String>,
    pub group: String,
    pub groups: Vec<GroupCovariance>,
    /// max over groups and entries of |Ĉov_r − Ĉov_1|.
    pub max_discrepancy: f64,
    /// `max_discrepancy` divided by the largest |Ĉov_r| entry.
    pub relative_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GroupValue {
    pub level: String,
    pub n: usize,
    pub value: f64,
}

/// Per-group n_r⁻¹·Σ_r x₁·ê₁, with ê₁ the residuals of x₁ regressed on the
/// other continuous covariates and the group indicators.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PartialResidualStats {
    pub variable: String,
    pub group: String,
    pub regressors: Vec<String>,
    pub groups: Vec<GroupValue>,
    pub max_discrepancy: f64,
    pub relative_discrepancy: f64,
}

/// Group membership and level labels for one categorical.
struct Groups<'a> {
    codes: &'a [usize],
    levels: &'a [String],
    counts: Vec<usize>,
}

impl<'a> Groups<'a> {
    fn new(codes: &'a [usize], levels: &'a [String], name: &str) -> Result<Self> {
        let mut counts = vec![0; levels.len()];
        for &c in codes {
            counts[c] += 1;
        }
        if let Some(l) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyCell(format!(
                "level '{}' of '{name}' has no observations",
                levels[l]
            )));
        }
        Ok(Self { codes, levels, counts })
    }

    fn means(&self, x: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.levels.len()];
        for (&c, &v) in self.codes.iter().zip(x) {
            sums[c] += v;
        }
        sums.iter().zip(&self.counts).map(|(s, &n)| s / n as f64).collect()
    }
}

fn scale_stats(x: &[f64], groups: &Groups, variable: &str, group: &str) -> GroupScaleStats {
    let means = groups.means(x);
    let mut ss = vec![0.0; groups.levels.len()];
    for (&c, &v) in groups.codes.iter().zip(x) {
        // Same quantity as n_r⁻¹Σx² − x̄_r², without the cancellation.
        ss[c] += (v - means[c]).powi(2);
    }
    let stats: Vec<GroupScale> = (0..groups.levels.len())
        .map(|r| GroupScale {
            level: groups.levels[r].clone(),
            n: groups.counts[r],
            mean: means[r],
            variance: ss[r] / groups.counts[r] as f64,
        })
        .collect();
    let max = stats.iter().map(|s| s.variance).fold(f64::NEG_INFINITY, f64::max);
    let min = stats.iter().map(|s| s.variance).fold(f64::INFINITY, f64::min);
    let dispersion_ratio = if max == min { 1.0 } else { max / min };
    GroupScaleStats {
        variable: variable.to_string(),
        group: group.to_string(),
        groups: stats,
        dispersion_ratio,
        near_equal: dispersion_ratio < NEAR_EQUAL_RATIO,
    }
}

fn covariance_stats(xs: &[&[f64]], names: &[String], groups: &Groups, group: &str) -> CovarianceStats {
    let p = xs.len();
    let means: Vec<Vec<f64>> = xs.iter().map(|x| groups.means(x)).collect();
    let mut out: Vec<GroupCovariance> = (0..groups.levels.len())
        .map(|r| GroupCovariance {
            level: groups.levels[r].clone(),
            n: groups.counts[r],
            means: (0..p).map(|j| means[j][r]).collect(),
            covariance: DMatrix::zeros(p, p),
        })
        .collect();
    for (i, &c) in groups.codes.iter().enumerate() {
        let dev: Vec<f64> = (0..p).map(|j| xs[j][i] - means[j][c]).collect();
        let cov = &mut out[c].covariance;
        for j in 0..p {
            for h in 0..p {
                cov[(j, h)] += dev[j] * dev[h];
            }
        }
    }
    for g in &mut out {
        g.covariance /= g.n as f64;
    }
    let max_discrepancy = out
        .iter()
        .map(|g| (&g.covariance - &out[0].covariance).amax())
        .fold(0.0, f64::max);
    let scale = out.iter().map(|g| g.covariance.amax()).fold(0.0, f64::max);
    CovarianceStats {
        variables: names.to_vec(),
        group: group.to_string(),
        groups: out,
        max_discrepancy,
        relative_discrepancy: relative(max_discrepancy, scale),
    }
}

fn relative(discrepancy: f64, scale: f64) -> f64 {
    if discrepancy == 0.0 {
        0.0
    } else {
        discrepancy / scale
    }
}

fn partial_stats(
    x1: &[f64],
    others: &[&[f64]],
    names: (&str, &[String]),
    groups: &Groups,
    group: &str,
) -> Result<PartialResidualStats> {
    let n = x1.len();
    let l = groups.levels.len();
    // Group indicators span the intercept, so no separate constant column.
    let design = DMatrix::from_fn(n, others.len() + l, |i, j| {
        if j < others.len() {
            others[j][i]
        } else {
            (groups.codes[i] == j - others.len()) as u8 as f64
        }
    });
    let y = DVector::from_column_slice(x1);
    let fit = linalg::least_squares(&design, &y).map_err(|e| match e {
        Error::RankDeficient(msg) => Error::RankDeficient(format!(
            "auxiliary regression of '{}' on the other covariates: {msg}",
            names.0
        )),
        other => other,
    })?;
    let resid = &y - &design * &fit.coef;
    let mut sums = vec![0.0; l];
    for i in 0..n {
        sums[groups.codes[i]] += x1[i] * resid[i];
    }
    let values: Vec<GroupValue> = (0..l)
        .map(|r| GroupValue {
            level: groups.levels[r].clone(),
            n: groups.counts[r],
            value: sums[r] / groups.counts[r] as f64,
        })
        .collect();
    let max_discrepancy = values
        .iter()
        .map(|v| (v.value - values[0].value).abs())
        .fold(0.0, f64::max);
    let scale = values.iter().map(|v| v.value.abs()).fold(0.0, f64::max);
    Ok(PartialResidualStats {
        variable: names.0.to_string(),
        group: group.to_string(),
        regressors: names.1.to_vec(),
        groups: values,
        max_discrepancy,
        relative_discrepancy: relative(max_discrepancy, scale),
    })
}

/// Per-group scaled variances of `x` within the levels of `cat`.
pub fn equal_variance_stats(data: &Dataset, x: &str, cat: &str) -> Result<GroupScaleStats> {
    let values = data.continuous(x)?;
    let factor = data.factor(cat)?;
    let groups = Groups::new(factor.codes(), factor.levels(), cat)?;
    Ok(scale_stats(values, &groups, x, cat))
}

/// Per-group scaled covariance matrices of `xs` within the levels of `cat`.
pub fn equal_covariance_stats(data: &Dataset, xs: &[String], cat: &str) -> Result<CovarianceStats> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("no covariates given".into()));
    }
    let cols: Vec<&[f64]> = xs.iter().map(|x| data.continuous(x)).collect::<Result<_>>()?;
    let factor = data.factor(cat)?;
    let groups = Groups::new(factor.codes(), factor.levels(), cat)?;
    Ok(covariance_stats(&cols, xs, &groups, cat))
}

/// Per-group n_r⁻¹·Σ_r x₁·ê₁ for the auxiliary regression of `x1` on the
/// other continuous covariates of `spec` and `cat`.
pub fn partial_residual_covariance(
    data: &Dataset,
    spec: &ModelSpec,
    x1: &str,
    cat: &str,
) -> Result<PartialResidualStats> {
    if spec.continuous_index(x1).is_none() {
        return Err(Error::InvalidArgument(format!("'{x1}' is not a continuous term of the model")));
    }
    if spec.categorical_index(cat).is_none() {
        return Err(Error::InvalidArgument(format!("'{cat}' is not a categorical term of the model")));
    }
    let others: Vec<String> = spec.continuous.iter().filter(|x| *x != x1).cloned().collect();
    let cols: Vec<&[f64]> = others.iter().map(|x| data.continuous(x)).collect::<Result<_>>()?;
    let factor = data.factor(cat)?;
    let groups = Groups::new(factor.codes(), factor.levels(), cat)?;
    partial_stats(data.continuous(x1)?, &cols, (x1, &others), &groups, cat)
}

/// The residual-variance comparison between a main-only fit and a
/// cat-modified fit with `d_added` more identified parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct VarianceReduction {
    pub n: usize,
    pub d_main: usize,
    pub d_added: usize,
    pub rss_main: f64,
    pub rss: f64,
    /// ‖ê_M‖²/(n − d_M).
    pub s2_main: f64,
    /// ‖ê‖²/(n − d_M − d).
    pub s2: f64,
    /// (‖ê_M‖² − ‖ê‖²)/‖ê_M‖².
    pub relative_reduction: f64,
    /// d/(n − d_M).
    pub threshold: f64,
    /// Ŝ² ≤ Ŝ_M².
    pub holds: bool,
    /// relative_reduction ≥ threshold (the adjusted-R² form).
    pub adjusted_r2_holds: bool,
    /// Ŝ_M² − Ŝ².
    pub margin: f64,
}

impl VarianceReduction {
    pub fn from_parts(rss_main: f64, rss: f64, n: usize, d_main: usize, d_added: usize) -> Result<Self> {
        if d_added == 0 {
            return Err(Error::InvalidArgument(
                "the cat-modified model must have more identified parameters than the main-only model".into(),
            ));
        }
        if n <= d_main + d_added {
            return Err(Error::InvalidArgument(format!(
                "{n} observations leave no residual degrees of freedom for {} parameters",
                d_main + d_added
            )));
        }
        let s2_main = rss_main / (n - d_main) as f64;
        let s2 = rss / (n - d_main - d_added) as f64;
        let relative_reduction = (rss_main - rss) / rss_main;
        let threshold = d_added as f64 / (n - d_main) as f64;
        Ok(Self {
            n,
            d_main,
            d_added,
            rss_main,
            rss,
            s2_main,
            s2,
            relative_reduction,
            threshold,
            holds: s2 <= s2_main,
            adjusted_r2_holds: relative_reduction >= threshold,
            margin: s2_main - s2,
        })
    }
}

fn check_nested(main: &FitResult, cm: &FitResult) -> Result<()> {
    let (sm, sc) = (&main.design.info.spec, &cm.design.info.spec);
    if sm.response != sc.response || main.y != cm.y {
        return Err(Error::InvalidArgument(
            "fits are not on the same response data".into(),
        ));
    }
    if !sc.contains(sm) || sc == sm {
        return Err(Error::InvalidArgument(format!(
            "'{}' is not a strict sub-model of '{}'",
            sm.render(),
            sc.render()
        )));
    }
    Ok(())
}

pub fn variance_reduction_condition(fit_main: &FitResult, fit_cm: &FitResult) -> Result<VarianceReduction> {
    check_nested(fit_main, fit_cm)?;
    let d_added = fit_cm.n_params.checked_sub(fit_main.n_params).unwrap_or(0);
    VarianceReduction::from_parts(fit_main.rss, fit_cm.rss, fit_main.n(), fit_main.n_params, d_added)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Holds,
    /// Within the advisory near-equality band.
    Approximate,
    Violated,
}

impl Condition {
    fn from_ratio(ratio: f64) -> Self {
        if ratio - 1.0 <= EXACT_TOL {
            Condition::Holds
        } else if ratio < NEAR_EQUAL_RATIO {
            Condition::Approximate
        } else {
            Condition::Violated
        }
    }

    fn from_relative(discrepancy: f64) -> Self {
        Self::from_ratio(1.0 + discrepancy)
    }

    fn describe(self) -> &'static str {
        match self {
            Condition::Holds => "holds",
            Condition::Approximate => "approximately holds",
            Condition::Violated => "violated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Precondition {
    pub description: String,
    /// Dispersion ratio (scale conditions) or 1 + relative discrepancy
    /// (covariance conditions); 1 means exact equality.
    pub statistic: f64,
    pub condition: Condition,
}

/// What the identification theory says about a main effect's change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Preconditions hold exactly; the estimate cannot change.
    Unchanged,
    /// Preconditions hold approximately; small changes are expected.
    NearlyUnchanged,
    /// No invariance result applies; the change is reported as observed.
    NotCovered,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct InvarianceRow {
    pub label: String,
    pub estimate_main: f64,
    pub estimate: f64,
    pub delta: f64,
    pub se_main: f64,
    pub se: f64,
    /// SE / SE_M; absent when the main-only SE is zero (reference rows).
    pub se_ratio: Option<f64>,
    pub expectation: Expectation,
    /// True when the theory guarantees SE ≤ SE_M for this row: the estimate
    /// is exactly invariant and the residual-variance condition holds.
    pub se_not_larger: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct InvarianceReport {
    pub main_formula: String,
    pub cm_formula: String,
    pub scheme_main: Scheme,
    pub scheme_cm: Scheme,
    pub added_terms: Vec<String>,
    pub rows: Vec<InvarianceRow>,
    pub preconditions: Vec<Precondition>,
    pub variance_reduction: VarianceReduction,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompareOptions {
    /// Allow fits with different identification schemes (for contrasting
    /// ABC with RGE or STZ). No invariance result is claimed for them.
    pub allow_mixed_schemes: bool,
}

/// Recovers centered covariate values (original units) and group codes of
/// the fit's data from its design matrix.
fn design_columns(fit: &FitResult) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let info = &fit.design.info;
    let x = &fit.design.x;
    let spec = &info.spec;
    let cont: Vec<Vec<f64>> = (0..spec.continuous.len())
        .map(|j| {
            let col = info.column_of(TermTag::Continuous(j)).expect("continuous column");
            let scale = info.centering.get(&spec.continuous[j]).map_or(1.0, |(_, s)| s);
            x.column(col).iter().map(|v| v * scale).collect()
        })
        .collect();
    let codes: Vec<Vec<usize>> = (0..spec.categorical.len())
        .map(|k| {
            let cols: Vec<usize> = (0..info.levels[k].len())
                .map(|l| info.column_of(TermTag::CatMain(k, l)).expect("indicator column"))
                .collect();
            (0..fit.n())
                .map(|i| cols.iter().position(|&c| x[(i, c)] != 0.0).expect("one level per row"))
                .collect()
        })
        .collect();
    (cont, codes)
}

fn centered(fit: &FitResult) -> bool {
    let (cont, _) = design_columns(fit);
    cont.iter().all(|c| {
        let mean = c.iter().sum::<f64>() / c.len() as f64;
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        mean.abs() <= 1e-10 * scale.max(1.0)
    })
}

/// Term-level differences between nested specs: added cat-cont and
/// cat-cat terms, and whether the main terms agree.
fn added_terms(main: &ModelSpec, cm: &ModelSpec) -> (Vec<(String, String)>, Vec<(String, String)>, bool) {
    let cc: Vec<_> = cm.cat_cont.iter().filter(|t| !main.cat_cont.contains(t)).cloned().collect();
    let kk: Vec<_> = cm.cat_cat.iter().filter(|t| !main.cat_cat.contains(t)).cloned().collect();
    let same_mains = main.continuous == cm.continuous && main.categorical == cm.categorical;
    (cc, kk, same_mains)
}

/// Compares the main effects shared by a main-only fit and a cat-modified
/// fit of the same response, attaching the statistics that decide whether
/// they should coincide.
pub fn compare_nested(fit_main: &FitResult, fit_cm: &FitResult, opts: CompareOptions) -> Result<InvarianceReport> {
    let (scheme_main, scheme_cm) = (fit_main.constraints.scheme, fit_cm.constraints.scheme);
    if scheme_main != scheme_cm && !opts.allow_mixed_schemes {
        return Err(Error::InvalidArgument(format!(
            "fits use different identifications ({scheme_main} and {scheme_cm}); enable mixed schemes to compare them anyway"
        )));
    }
    check_nested(fit_main, fit_cm)?;
    let variance_reduction = variance_reduction_condition(fit_main, fit_cm)?;
    let sm = &fit_main.design.info.spec;
    let sc = &fit_cm.design.info.spec;
    let (cc, kk, same_mains) = added_terms(sm, sc);
    let main_only = sm.cat_cont.is_empty() && sm.cat_cat.is_empty();
    let abc = scheme_main == Scheme::Abc && scheme_cm == Scheme::Abc;

    let info = &fit_cm.design.info;
    let mut added: Vec<String> = cc.iter().map(|(x, c)| format!("{x}:{c}")).collect();
    added.extend(kk.iter().map(|(a, b)| format!("{a}:{b}")));

    let (cont, codes) = design_columns(fit_cm);
    let mut preconditions = Vec::new();
    let mut notes = Vec::new();
    // Labels whose invariance follows from the theory, with the condition
    // that supports it and whether the SE result also applies.
    let mut covered: Vec<(String, Condition, bool)> = Vec::new();

    if !abc {
        notes.push(format!(
            "identifications are {scheme_main} and {scheme_cm}; main-effect invariance is only established under ABC"
        ));
    } else if !main_only || !same_mains {
        notes.push(
            "the smaller model is not the main-only version of the larger one; no invariance result applies".into(),
        );
    } else if cc.is_empty() {
        if centered(fit_cm) {
            covered.push(("(Intercept)".into(), Condition::Holds, sc.continuous.is_empty()));
        }
        if sc.continuous.is_empty() {
            for col in &info.columns {
                if let TermTag::CatMain(..) = col.tag {
                    covered.push((col.label.clone(), Condition::Holds, true));
                }
            }
            notes.push("only categorical-categorical interactions were added; all main effects are unchanged".into());
        } else {
            notes.push(
                "categorical-categorical interactions with continuous covariates present: only the intercept is guaranteed unchanged (centered covariates)".into(),
            );
        }
    } else if !kk.is_empty() || sc.categorical.len() != 1 {
        notes.push(
            "categorical-continuous interactions with more than one categorical or alongside categorical-categorical interactions: no invariance result applies".into(),
        );
    } else {
        let cat = &sc.categorical[0];
        let groups = Groups::new(&codes[0], &info.levels[0], cat)?;
        let modified: BTreeSet<&str> = cc.iter().map(|(x, _)| x.as_str()).collect();
        for x in &modified {
            let j = sc.continuous_index(x).expect("modified covariate");
            let s = scale_stats(&cont[j], &groups, x, cat);
            preconditions.push(Precondition {
                description: format!("equal variance of {x} across {cat}"),
                statistic: s.dispersion_ratio,
                condition: Condition::from_ratio(s.dispersion_ratio),
            });
        }
        if sc.continuous.len() == 1 {
            let x = &sc.continuous[0];
            covered.push((x.clone(), preconditions[0].condition, true));
        } else if modified.len() == sc.continuous.len() {
            let cols: Vec<&[f64]> = cont.iter().map(|c| c.as_slice()).collect();
            let s = covariance_stats(&cols, &sc.continuous, &groups, cat);
            let condition = Condition::from_relative(s.relative_discrepancy);
            preconditions.push(Precondition {
                description: format!("equal covariance of all continuous covariates across {cat}"),
                statistic: 1.0 + s.relative_discrepancy,
                condition,
            });
            for x in &sc.continuous {
                covered.push((x.clone(), condition, true));
            }
        } else if modified.len() == 1 {
            let x1 = *modified.iter().next().expect("one modified covariate");
            let j = sc.continuous_index(x1).expect("modified covariate");
            let others: Vec<String> = sc.continuous.iter().filter(|x| *x != x1).cloned().collect();
            let other_cols: Vec<&[f64]> = (0..sc.continuous.len())
                .filter(|&h| h != j)
                .map(|h| cont[h].as_slice())
                .collect();
            let s = partial_stats(&cont[j], &other_cols, (x1, &others), &groups, cat)?;
            let condition = Condition::from_relative(s.relative_discrepancy);
            preconditions.push(Precondition {
                description: format!(
                    "equal covariance of {x1} with its residuals on the other covariates, across {cat}"
                ),
                statistic: 1.0 + s.relative_discrepancy,
                condition,
            });
            covered.push((x1.to_string(), condition, true));
        } else {
            notes.push(
                "several but not all continuous covariates are modified: no invariance result applies".into(),
            );
        }
    }

    if !variance_reduction.holds {
        notes.push("residual variance is larger in the cat-modified model; standard errors may increase".into());
    }

    let se_main = fit_main.std_errors();
    let se_cm = fit_cm.std_errors();
    let mut rows = Vec::new();
    for (c, col) in fit_main.design.info.columns.iter().enumerate() {
        if !matches!(col.tag, TermTag::Intercept | TermTag::Continuous(_) | TermTag::CatMain(..)) {
            continue;
        }
        let Some(k) = fit_cm.column(&col.label) else { continue };
        let (em, e) = (fit_main.coefficients[c], fit_cm.coefficients[k]);
        let (sem, se) = (se_main[c], se_cm[k]);
        let (expectation, se_claim) = match covered.iter().find(|(l, _, _)| *l == col.label) {
            Some((_, Condition::Holds, se_ok)) => (Expectation::Unchanged, *se_ok),
            Some((_, Condition::Approximate, _)) => (Expectation::NearlyUnchanged, false),
            _ => (Expectation::NotCovered, false),
        };
        rows.push(InvarianceRow {
            label: col.label.clone(),
            estimate_main: em,
            estimate: e,
            delta: (e - em).abs(),
            se_main: sem,
            se,
            se_ratio: (sem > 0.0).then(|| se / sem),
            expectation,
            se_not_larger: se_claim && variance_reduction.holds,
        });
    }

    Ok(InvarianceReport {
        main_formula: sm.render(),
        cm_formula: sc.render(),
        scheme_main,
        scheme_cm,
        added_terms: added,
        rows,
        preconditions,
        variance_reduction,
        notes,
    })
}

fn sci(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-3 && v.abs() < 1e4 {
        format!("{v:.4}")
    } else {
        format!("{v:.2e}")
    }
}

impl InvarianceReport {
    pub fn render_text(&self) -> String {
        let vr = &self.variance_reduction;
        let mut out = String::new();
        out.push_str(&format!("Main-only:     {} ({})\n", self.main_formula, self.scheme_main));
        out.push_str(&format!("Cat-modified:  {} ({})\n", self.cm_formula, self.scheme_cm));
        out.push_str(&format!("Added terms:   {}\n\n", self.added_terms.join(", ")));

        let lines = self
            .rows
            .iter()
            .map(|r| {
                Line::Cells(vec![
                    r.label.clone(),
                    format!("{} ({})", fixed3(r.estimate_main), fixed3(r.se_main)),
                    format!("{} ({})", fixed3(r.estimate), fixed3(r.se)),
                    sci(r.delta),
                    r.se_ratio.map_or("NA".into(), |v| format!("{v:.4}")),
                    match r.expectation {
                        Expectation::Unchanged => "unchanged",
                        Expectation::NearlyUnchanged => "nearly unchanged",
                        Expectation::NotCovered => "not covered",
                    }
                    .into(),
                ])
            })
            .collect();
        let header = ["Term", "Main-only", "Cat-modified", "|delta|", "SE ratio", "Expected"]
            .map(String::from)
            .to_vec();
        out.push_str(&layout(header, 1, lines));

        out.push_str(&format!(
            "\nResidual variance: S_M^2 = {}, S^2 = {} (n = {}, d_M = {}, d = {}); S^2 <= S_M^2 {}\n",
            sci(vr.s2_main),
            sci(vr.s2),
            vr.n,
            vr.d_main,
            vr.d_added,
            if vr.holds { "holds" } else { "fails" }
        ));
        out.push_str(&format!(
            "Adjusted R^2 form: {} >= {} {}\n",
            sci(vr.relative_reduction),
            sci(vr.threshold),
            if vr.adjusted_r2_holds { "holds" } else { "fails" }
        ));
        for p in &self.preconditions {
            out.push_str(&format!(
                "Condition: {} {} (statistic {:.4})\n",
                p.description,
                p.condition.describe(),
                p.statistic
            ));
        }
        for n in &self.notes {
            out.push_str(&format!("Note: {n}\n"));
        }
        out
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Numerical(format!("CSV rendering failed: {e}"));
        w.write_record([
            "label",
            "estimate_main",
            "estimate",
            "delta",
            "se_main",
            "se",
            "se_ratio",
            "expectation",
            "se_not_larger",
        ])
        .map_err(io)?;
        for r in &self.rows {
            let expectation = match r.expectation {
                Expectation::Unchanged => "unchanged",
                Expectation::NearlyUnchanged => "nearly_unchanged",
                Expectation::NotCovered => "not_covered",
            };
            w.write_record([
                r.label.clone(),
                r.estimate_main.to_string(),
                r.estimate.to_string(),
                r.delta.to_string(),
                r.se_main.to_string(),
                r.se.to_string(),
                r.se_ratio.map(|v| v.to_string()).unwrap_or_default(),
                expectation.to_string(),
                r.se_not_larger.to_string(),
            ])
            .map_err(io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::Numerical(format!("CSV rendering failed: {e}")))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }
}
