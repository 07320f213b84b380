//! Monte-Carlo harness: generate a dataset per replication, fit the
//! main-only and cat-modified models under each identification, and
//! summarize estimates, intervals and their agreement across models.

mod generate;
mod report;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::constraints::Scheme;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{fit_formula, FitOptions};
use crate::ols::summarize;

pub use generate::{
    cell_mean, gen_cat_cont, gen_multi, gen_two_way, sample_variance, standardized_t, Truth,
    MULTI_ACTIVE, MULTI_P, RACE_LEVELS, RACE_PROBS, SEX_GIVEN_RACE, SEX_LEVELS,
};
pub use report::{Aggregate, CoefficientSet, Comparison};

/// Largest sample size at which the multi-covariate cat-modified model
/// leaves out race:sex.
pub const MULTI_SMALL_N: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    TwoWay,
    CatCont,
    Multi,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::TwoWay => "two_way",
            Study::CatCont => "cat_cont",
            Study::Multi => "multi",
        }
    }
}

impl std::str::FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_way" => Ok(Study::TwoWay),
            "cat_cont" => Ok(Study::CatCont),
            "multi" => Ok(Study::Multi),
            _ => Err(Error::InvalidArgument(format!(
                "unknown study '{s}' (expected two_way, cat_cont or multi)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelClass {
    MainOnly,
    CatModified,
}

impl ModelClass {
    pub fn name(self) -> &'static str {
        match self {
            ModelClass::MainOnly => "main_only",
            ModelClass::CatModified => "cat_modified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StudyConfig {
    pub study: Study,
    pub n: usize,
    pub gamma: f64,
    /// Spread of the race-A and race-C covariate distributions.
    pub sigma_ac: f64,
    pub replications: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub models: Vec<ModelClass>,
    /// Confidence level of the reported intervals.
    pub level: f64,
}

impl StudyConfig {
    /// Defaults: σ_ac = 1, both models, 95% intervals, and ABC/RGE/STZ
    /// (ABC/RGE for the multi-covariate study, whose truth is not STZ).
    pub fn new(study: Study, n: usize, gamma: f64, replications: usize, seed: u64) -> Self {
        let schemes = match study {
            Study::Multi => vec![Scheme::Abc, Scheme::Rge],
            _ => vec![Scheme::Abc, Scheme::Rge, Scheme::Stz],
        };
        Self {
            study,
            n,
            gamma,
            sigma_ac: 1.0,
            replications,
            seed,
            schemes,
            models: vec![ModelClass::MainOnly, ModelClass::CatModified],
            level: 0.95,
        }
    }

    pub fn with_sigma_ac(mut self, sigma_ac: f64) -> Self {
        self.sigma_ac = sigma_ac;
        self
    }

    pub fn with_schemes(mut self, schemes: &[Scheme]) -> Self {
        self.schemes = schemes.to_vec();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n < 1 {
            return bad("sample size must be at least 1".into());
        }
        if self.replications < 1 {
            return bad("need at least one replication".into());
        }
        if !self.gamma.is_finite() {
            return bad(format!("gamma must be finite, got {}", self.gamma));
        }
        if !(self.sigma_ac > 0.0 && self.sigma_ac.is_finite()) {
            return bad(format!("sigma_ac must be positive, got {}", self.sigma_ac));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("confidence level {} is not in (0, 1)", self.level));
        }
        if self.schemes.is_empty() || self.models.is_empty() {
            return bad("need at least one identification and one model".into());
        }
        Ok(())
    }

    /// The two formulas plus any notes about how they were chosen.
    pub fn formulas(&self) -> (String, String, Vec<String>) {
        match self.study {
            Study::TwoWay => ("y ~ race + sex".into(), "y ~ race*sex".into(), vec![]),
            Study::CatCont => ("y ~ x + race".into(), "y ~ x*race".into(), vec![]),
            Study::Multi => {
                let xs = (1..=MULTI_P).map(|j| format!("x{j}")).collect::<Vec<_>>().join(" + ");
                let main = format!("y ~ {xs} + sex + race");
                if self.n <= MULTI_SMALL_N {
                    let note = format!(
                        "n = {} <= {MULTI_SMALL_N}: race:sex dropped from the cat-modified model to avoid rank deficiency",
                        self.n
                    );
                    (main, format!("y ~ ({xs})*race + sex"), vec![note])
                } else {
                    (main, format!("y ~ ({xs} + sex)*race"), vec![])
                }
            }
        }
    }

    /// Labels of the main effects compared between the two models.
    pub fn main_effects(&self) -> Vec<String> {
        match self.study {
            Study::TwoWay => ["race[B]", "race[C]", "race[D]", "sex[vv]"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            Study::CatCont => vec!["x".into()],
            Study::Multi => (1..=MULTI_P).map(|j| format!("x{j}")).collect(),
        }
    }

    /// Dataset and truth for replication `index`. Each replication draws
    /// from its own ChaCha stream of the configured seed.
    pub fn generate(&self, index: usize) -> (Dataset, Truth) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        match self.study {
            Study::TwoWay => generate::two_way_with(&mut rng, self.n, self.gamma),
            Study::CatCont => generate::cat_cont_with(&mut rng, self.n, self.gamma, self.sigma_ac),
            Study::Multi => generate::multi_with(&mut rng, self.n, self.gamma, self.sigma_ac),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CoefficientRecord {
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
    /// Pinned to zero by the identification.
    pub pinned: bool,
    /// True value, when the generating coefficients satisfy the scheme.
    pub truth: Option<f64>,
}

impl CoefficientRecord {
    pub fn covered(&self) -> Option<bool> {
        self.truth.map(|t| self.lower <= t && t <= self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FitRecord {
    pub scheme: Scheme,
    pub model: ModelClass,
    pub coefficients: Vec<CoefficientRecord>,
}

impl FitRecord {
    pub fn get(&self, label: &str) -> Option<&CoefficientRecord> {
        self.coefficients.iter().find(|c| c.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Replication {
    pub index: usize,
    /// One record per configured (scheme, model) pair; empty on failure.
    pub fits: Vec<FitRecord>,
    pub error: Option<String>,
}

impl Replication {
    pub fn fit(&self, scheme: Scheme, model: ModelClass) -> Option<&FitRecord> {
        self.fits.iter().find(|f| f.scheme == scheme && f.model == model)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SimulationReport {
    pub config: StudyConfig,
    pub formula_main: String,
    pub formula_cm: String,
    pub notes: Vec<String>,
    pub replications: Vec<Replication>,
    pub failed: usize,
    pub aggregates: Vec<Aggregate>,
    pub comparisons: Vec<Comparison>,
}

impl SimulationReport {
    pub fn aggregate(&self, scheme: Scheme, model: ModelClass, set: CoefficientSet) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.scheme == scheme && a.model == model && a.set == set)
    }

    pub fn comparison(&self, scheme: Scheme) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.scheme == scheme)
    }

    pub fn successful(&self) -> impl Iterator<Item = &Replication> {
        self.replications.iter().filter(|r| r.error.is_none())
    }
}

fn fit_one(
    config: &StudyConfig,
    data: &Dataset,
    truth: &Truth,
    formula: &str,
    scheme: Scheme,
    model: ModelClass,
) -> Result<FitRecord> {
    let opts = FitOptions::default().with_identification(scheme);
    let fit = fit_formula(data, formula, &opts)?;
    let centering = &fit.design.info.centering;
    let means: Vec<(String, f64)> = centering
        .variables
        .iter()
        .cloned()
        .zip(centering.centers.iter().copied())
        .collect();
    let truth = truth.centered(&means);
    let table = summarize(&fit, config.level)?;
    let pinned = fit.constraints.pinned_columns();
    let known = truth.satisfies.contains(&scheme);
    let coefficients = table
        .rows
        .iter()
        .zip(pinned)
        .map(|(row, pinned)| CoefficientRecord {
            label: row.label.clone(),
            estimate: row.estimate,
            std_error: row.std_error,
            lower: row.ci_lower,
            upper: row.ci_upper,
            pinned,
            truth: (known && !pinned).then(|| truth.coefficient(&row.label)),
        })
        .collect();
    Ok(FitRecord {
        scheme,
        model,
        coefficients,
    })
}

fn run_one(config: &StudyConfig, formulas: (&str, &str), index: usize) -> Replication {
    let (data, truth) = config.generate(index);
    let mut fits = Vec::new();
    for &scheme in &config.schemes {
        for &model in &config.models {
            let formula = match model {
                ModelClass::MainOnly => formulas.0,
                ModelClass::CatModified => formulas.1,
            };
            match fit_one(config, &data, &truth, formula, scheme, model) {
                Ok(f) => fits.push(f),
                Err(e) => {
                    return Replication {
                        index,
                        fits: Vec::new(),
                        error: Some(format!("{} {}: {e}", scheme.name(), model.name())),
                    }
                }
            }
        }
    }
    Replication {
        index,
        fits,
        error: None,
    }
}

/// Runs every replication (in parallel) and aggregates in replication
/// order, so the report does not depend on the thread count. A replication
/// in which any fit fails is kept with its error and left out of the
/// aggregates.
pub fn run_replications(config: &StudyConfig) -> Result<SimulationReport> {
    config.validate()?;
    let (formula_main, formula_cm, notes) = config.formulas();
    let replications: Vec<Replication> = (0..config.replications)
        .into_par_iter()
        .map(|i| run_one(config, (&formula_main, &formula_cm), i))
        .collect();
    let failed = replications.iter().filter(|r| r.error.is_some()).count();
    let main_effects = config.main_effects();
    let aggregates = report::aggregates(config, &replications, &main_effects);
    let comparisons = report::comparisons(config, &replications, &main_effects);
    Ok(SimulationReport {
        config: config.clone(),
        formula_main,
        formula_cm,
        notes,
        replications,
        failed,
        aggregates,
        comparisons,
    })
}
