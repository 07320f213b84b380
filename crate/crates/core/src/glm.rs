//! Constrained generalized linear models fitted by IRLS in nullspace
//! coordinates.

use nalgebra::{DMatrix, DVector};

use crate::constraints::{nullspace_basis, ConstraintMatrix};
use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::ols::{FitResult, Reference};

/// Exponential family with its canonical link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Normal errors, identity link.
    Gaussian,
    /// Bernoulli response in {0, 1}, logit link.
    Binomial,
    /// Counts, log link.
    Poisson,
}

const MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 10;
const DEVIANCE_TOL: f64 = 1e-10;
const SEPARATION_BOUND: f64 = 1e3;

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
            Family::Poisson => "poisson",
        }
    }

    pub fn link_name(self) -> &'static str {
        match self {
            Family::Gaussian => "identity",
            Family::Binomial => "logit",
            Family::Poisson => "log",
        }
    }

    pub fn link(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => mu,
            Family::Binomial => (mu / (1.0 - mu)).ln(),
            Family::Poisson => mu.ln(),
        }
    }

    pub fn inverse_link(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => eta,
            Family::Binomial => {
                if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                }
            }
            Family::Poisson => eta.exp(),
        }
    }

    /// dμ/dη.
    fn mu_eta(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Binomial => {
                let mu = self.inverse_link(eta);
                (mu * (1.0 - mu)).max(f64::MIN_POSITIVE)
            }
            Family::Poisson => eta.exp().max(f64::MIN_POSITIVE),
        }
    }

    fn variance(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Binomial => (mu * (1.0 - mu)).max(f64::MIN_POSITIVE),
            Family::Poisson => mu.max(f64::MIN_POSITIVE),
        }
    }

    fn validate(self, y: &[f64]) -> Result<()> {
        let bad = match self {
            Family::Gaussian => y.iter().position(|v| !v.is_finite()),
            Family::Binomial => y.iter().position(|&v| v != 0.0 && v != 1.0),
            Family::Poisson => y.iter().position(|&v| !(v >= 0.0) || v.fract() != 0.0),
        };
        match bad {
            None => Ok(()),
            Some(i) => Err(Error::Data(format!(
                "response value {} at row {} is outside the {} support",
                y[i],
                i + 1,
                self.name()
            ))),
        }
    }

    /// Unit deviance summed over observations.
    pub fn deviance(self, y: &[f64], mu: &[f64]) -> f64 {
        let xlogx = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
        y.iter()
            .zip(mu)
            .map(|(&y, &m)| match self {
                Family::Gaussian => (y - m).powi(2),
                Family::Binomial => 2.0 * (xlogx(y, m) + xlogx(1.0 - y, 1.0 - m)),
                Family::Poisson => 2.0 * (xlogx(y, m) - (y - m)),
            })
            .sum()
    }

    /// Negative log-likelihood as a function of the linear predictor, up to
    /// terms that do not depend on it. The gaussian case uses unit variance.
    pub fn negative_log_likelihood(self, y: &[f64], eta: &[f64]) -> f64 {
        y.iter()
            .zip(eta)
            .map(|(&y, &e)| match self {
                Family::Gaussian => 0.5 * (y - e).powi(2),
                Family::Binomial => {
                    // log(1 + exp(e)) computed without overflow
                    let softplus = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
                    softplus - y * e
                }
                Family::Poisson => e.exp() - y * e,
            })
            .sum()
    }
}

/// The unconstrained problem in nullspace coordinates: design `XQ` and the
/// response.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    pub xq: DMatrix<f64>,
    pub y: DVector<f64>,
    pub family: Family,
}

impl ReducedProblem {
    pub fn new(xq: DMatrix<f64>, y: DVector<f64>, family: Family) -> Self {
        Self { xq, y, family }
    }

    pub fn negative_log_likelihood(&self, theta_q: &DVector<f64>) -> f64 {
        let eta = &self.xq * theta_q;
        self.family
            .negative_log_likelihood(self.y.as_slice(), eta.as_slice())
    }

    /// Gradient of [`Self::negative_log_likelihood`]: `−(XQ)ᵀ(y − μ)`.
    pub fn gradient(&self, theta_q: &DVector<f64>) -> DVector<f64> {
        let eta = &self.xq * theta_q;
        let resid = DVector::from_iterator(
            self.y.len(),
            self.y.iter().zip(eta.iter()).map(|(&y, &e)| y - self.family.inverse_link(e)),
        );
        -(self.xq.transpose() * resid)
    }
}

fn means(family: Family, eta: &DVector<f64>) -> DVector<f64> {
    eta.map(|e| family.inverse_link(e))
}

/// Maximum likelihood subject to `Aθ = 0`, by iteratively reweighted least
/// squares over nullspace coordinates. Every iterate satisfies the
/// constraints because it is of the form `Qθ_Q`.
pub fn fit_glm(
    design: &DesignMatrix,
    y: &[f64],
    constraints: &ConstraintMatrix,
    family: Family,
) -> Result<FitResult> {
    let n = design.n();
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "response has {} values, design has {n} rows",
            y.len()
        )));
    }
    family.validate(y)?;
    let basis = nullspace_basis(constraints)?.q;
    let d = basis.ncols();
    if n <= d {
        return Err(Error::RankDeficient(format!(
            "{n} observations for {d} identified parameters; need more observations than parameters"
        )));
    }
    let yv = DVector::from_column_slice(y);
    let xq = &design.x * &basis;

    // Starting values: a working response from a safeguarded initial mean.
    let mut theta = DVector::zeros(d);
    let mut eta = DVector::zeros(n);
    let mut mu = match family {
        Family::Gaussian => DVector::zeros(n),
        Family::Binomial => yv.map(|v| (v + 0.5) / 2.0),
        Family::Poisson => yv.map(|v| v + 0.5),
    };
    if family != Family::Gaussian {
        eta = mu.map(|m| family.link(m));
    }
    let mut deviance = family.deviance(y, mu.as_slice());
    let mut first = true;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=MAX_ITER {
        iterations = iter;
        let mut z = DVector::zeros(n);
        let mut sw = DVector::zeros(n);
        for i in 0..n {
            let g = family.mu_eta(eta[i]);
            z[i] = eta[i] + (y[i] - mu[i]) / g;
            sw[i] = (g * g / family.variance(mu[i])).sqrt();
        }
        let wx = DMatrix::from_fn(n, d, |i, j| sw[i] * xq[(i, j)]);
        let wz = z.component_mul(&sw);
        let mut candidate = linalg::least_squares(&wx, &wz)?.coef;
        let mut cand_eta = &xq * &candidate;
        let mut cand_mu = means(family, &cand_eta);
        let mut cand_dev = family.deviance(y, cand_mu.as_slice());

        // The first step starts from a mean, not a coefficient vector, so
        // there is nothing to back off towards.
        if !first {
            let mut halvings = 0;
            while !(cand_dev <= deviance * (1.0 + 1e-12) + 1e-300) && halvings < MAX_HALVINGS {
                candidate = (&candidate + &theta) * 0.5;
                cand_eta = &xq * &candidate;
                cand_mu = means(family, &cand_eta);
                cand_dev = family.deviance(y, cand_mu.as_slice());
                halvings += 1;
            }
            if !cand_dev.is_finite() {
                return Err(Error::Numerical("deviance is not finite".into()));
            }
        }

        let change = (cand_dev - deviance).abs() / (cand_dev.abs() + 0.1);
        let decreasing = cand_dev < deviance;
        theta = candidate;
        eta = cand_eta;
        mu = cand_mu;
        deviance = cand_dev;

        let full = &basis * &theta;
        if decreasing && linalg::max_abs(&full) > SEPARATION_BOUND {
            return Err(Error::Separation(format!(
                "coefficients exceed {SEPARATION_BOUND} in magnitude while the deviance keeps decreasing"
            )));
        }
        if !first && change < DEVIANCE_TOL {
            converged = true;
            break;
        }
        first = false;
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            detail: format!("relative deviance change still above {DEVIANCE_TOL}"),
        });
    }
    // Fitted means pinned at the boundary signal an infinite MLE even when
    // the deviance change has become negligible.
    let boundary = match family {
        Family::Gaussian => false,
        Family::Binomial => mu.iter().any(|&m| m.min(1.0 - m) < 1e-9),
        Family::Poisson => mu.iter().any(|&m| m < 1e-9),
    };
    if boundary {
        return Err(Error::Separation(
            "fitted means reach the boundary of the parameter space".into(),
        ));
    }

    let mut coefficients = &basis * &theta;
    let fitted = mu;
    let residuals = &yv - &fitted;
    let rss = residuals.norm_squared();
    let df_residual = n - d;
    let sigma2 = match family {
        Family::Gaussian => rss / df_residual as f64,
        _ => 1.0,
    };
    let mut info = DMatrix::zeros(d, d);
    for i in 0..n {
        let g = family.mu_eta(eta[i]);
        let w = g * g / family.variance(fitted[i]);
        let row = xq.row(i);
        info += w * row.transpose() * row;
    }
    let inv = linalg::inverse_spd(&info)?;
    let mut vcov = &basis * inv * basis.transpose() * sigma2;
    constraints.zero_pinned(&mut coefficients, &mut vcov);

    Ok(FitResult {
        design: design.clone(),
        y: yv,
        constraints: constraints.clone(),
        basis,
        proportions: None,
        coefficients,
        reduced: theta,
        vcov,
        fitted,
        residuals,
        sigma2,
        rss,
        df_residual,
        n_params: d,
        family,
        reference: Reference::Normal,
        deviance,
        iterations,
    })
}

/// A coefficient on the ratio scale.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RatioRow {
    pub label: String,
    pub ratio: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// Exponentiated coefficients and confidence limits for log and logit
/// links.
///
/// Under abundance-based constraints a main effect on this scale is the
/// proportion-weighted geometric mean of the group-specific odds ratios
/// (logit) or rate ratios (log).
pub fn effect_scale(fit: &FitResult, level: f64) -> Result<Vec<RatioRow>> {
    if fit.family == Family::Gaussian {
        return Err(Error::InvalidArgument(
            "ratio scale needs a log or logit link; the gaussian family uses the identity link".into(),
        ));
    }
    let table = crate::ols::summarize(fit, level)?;
    Ok(table
        .rows
        .iter()
        .map(|r| RatioRow {
            label: r.label.clone(),
            ratio: r.estimate.exp(),
            ci_lower: r.ci_lower.exp(),
            ci_upper: r.ci_upper.exp(),
        })
        .collect())
}
