//! Formula-to-fit pipeline: validate, center, build the design and the
//! constraints, then fit.

use crate::constraints::{build_constraints, ConstraintMatrix, Identification};
use crate::data::{
    build_design, center_continuous, compute_proportions, Centering, Dataset, DesignMatrix,
    ProportionTable,
};
use crate::error::{Error, Result};
use crate::formula::{parse_formula, validate_spec, Formula, ModelSpec};
use crate::glm::{fit_glm, Family};
use crate::ols::{fit_ols, FitResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preprocess {
    /// Subtract each continuous covariate's sample mean.
    pub center: bool,
    /// Also divide by the sample standard deviation (implies centering).
    pub standardize: bool,
}

impl Default for Preprocess {
    fn default() -> Self {
        Self {
            center: true,
            standardize: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub identification: Identification,
    pub family: Family,
    pub preprocess: Preprocess,
    /// Population proportions to use instead of the sample proportions.
    pub population: Option<ProportionTable>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            identification: Identification::Abc,
            family: Family::Gaussian,
            preprocess: Preprocess::default(),
            population: None,
        }
    }
}

impl FitOptions {
    pub fn with_identification(mut self, id: impl Into<Identification>) -> Self {
        self.identification = id.into();
        self
    }
}

/// Everything needed to fit, with any hierarchy warnings.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub design: DesignMatrix,
    pub y: Vec<f64>,
    pub constraints: ConstraintMatrix,
    pub proportions: Option<ProportionTable>,
    pub family: Family,
    pub warnings: Vec<String>,
}

impl Prepared {
    pub fn fit(&self) -> Result<FitResult> {
        let fit = match self.family {
            Family::Gaussian => fit_ols(&self.design, &self.y, &self.constraints)?,
            f => fit_glm(&self.design, &self.y, &self.constraints, f)?,
        };
        Ok(fit.with_proportions(self.proportions.clone()))
    }
}

pub fn resolve(data: &Dataset, formula: &str) -> Result<(ModelSpec, Vec<String>)> {
    let parsed: Formula = parse_formula(formula)?;
    let v = validate_spec(&parsed, &data.schema())?;
    Ok((v.spec, v.warnings))
}

/// Builds design and constraints for an already resolved spec.
pub fn prepare_spec(data: &Dataset, spec: &ModelSpec, opts: &FitOptions) -> Result<Prepared> {
    let centering = if opts.preprocess.center || opts.preprocess.standardize {
        None
    } else {
        Some(Centering::identity(&[]))
    };
    let (data_t, centering) = match centering {
        Some(c) => (data.clone(), c),
        None => center_continuous(data, &spec.continuous, opts.preprocess.standardize)?,
    };
    let design = build_design(spec, &data_t, centering)?;
    let proportions = match (&opts.population, spec.categorical.is_empty()) {
        (_, true) => None,
        (Some(p), false) => Some(p.clone()),
        (None, false) => Some(compute_proportions(&data_t, &spec.categorical)?),
    };
    let constraints = build_constraints(&design.info, proportions.as_ref(), &opts.identification)?;
    let y = data.continuous(&spec.response)?.to_vec();
    if y.len() != design.n() {
        return Err(Error::Dimension("response length differs from design".into()));
    }
    Ok(Prepared {
        design,
        y,
        constraints,
        proportions,
        family: opts.family,
        warnings: Vec::new(),
    })
}

pub fn prepare(data: &Dataset, formula: &str, opts: &FitOptions) -> Result<Prepared> {
    let (spec, warnings) = resolve(data, formula)?;
    let mut prepared = prepare_spec(data, &spec, opts)?;
    prepared.warnings = warnings;
    Ok(prepared)
}

/// Parses, validates and fits `formula` on `data`.
pub fn fit_formula(data: &Dataset, formula: &str, opts: &FitOptions) -> Result<FitResult> {
    prepare(data, formula, opts)?.fit()
}
