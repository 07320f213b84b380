//! K-fold cross-validation for penalized fits. Each fold rebuilds the
//! whole estimator on its training rows: centering and scaling, sample
//! proportions, and therefore the constraint matrix.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::path::run_path;
use super::{default_mask, solution_path, CvRecord, PathResult, PenaltyKind, Problem};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::formula::ModelSpec;
use crate::glm::Family;
use crate::model::{prepare_spec, FitOptions, Prepared, Preprocess};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// λ with the smallest mean CV error.
    Min,
    /// Largest λ whose mean CV error is within one standard error of the
    /// minimum.
    OneSe,
}

#[derive(Debug, Clone)]
pub struct PenalizedOptions {
    pub kind: PenaltyKind,
    pub folds: usize,
    pub rule: SelectionRule,
    pub seed: u64,
    pub grid_size: usize,
    pub fit: FitOptions,
}

impl Default for PenalizedOptions {
    fn default() -> Self {
        Self {
            kind: PenaltyKind::Lasso,
            folds: 10,
            rule: SelectionRule::OneSe,
            seed: 1,
            grid_size: 50,
            fit: FitOptions {
                preprocess: Preprocess {
                    center: true,
                    standardize: true,
                },
                ..FitOptions::default()
            },
        }
    }
}

fn prepare(data: &Dataset, spec: &ModelSpec, opts: &PenalizedOptions) -> Result<Prepared> {
    if opts.fit.family != Family::Gaussian {
        return Err(Error::InvalidArgument(format!(
            "penalized fits use squared-error loss; the {} family is not supported",
            opts.fit.family.name()
        )));
    }
    prepare_spec(data, spec, &opts.fit)
}

/// Regularization path on the full data, without cross-validation.
pub fn penalized_path(data: &Dataset, spec: &ModelSpec, opts: &PenalizedOptions) -> Result<PathResult> {
    let full = prepare(data, spec, opts)?;
    solution_path(&full.design, &full.y, &full.constraints, opts.kind, opts.grid_size)
}

/// Indices `(min, one_se)` into a descending λ grid. Ties go to the larger λ.
pub fn select_lambda(mean: &[f64], se: &[f64]) -> (usize, usize) {
    let mut best = 0;
    for (i, &m) in mean.iter().enumerate() {
        if m < mean[best] {
            best = i;
        }
    }
    let threshold = mean[best] + se[best];
    let one_se = mean.iter().position(|&m| m <= threshold).unwrap_or(best);
    (best, one_se)
}

/// Full-data path plus K-fold cross-validation over the same λ grid.
///
/// Folds come from a seeded permutation (row `perm[i]` goes to fold
/// `i mod K`). The objective is a sum over observations, so each fold uses
/// λ·n_train/n to match the penalty-to-loss ratio of the full fit.
pub fn cross_validate(data: &Dataset, spec: &ModelSpec, opts: &PenalizedOptions) -> Result<PathResult> {
    let n = data.n();
    let k = opts.folds;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "{k} folds requested for {n} observations"
        )));
    }
    let mut path = penalized_path(data, spec, opts)?;

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed));
    let mut assignment = vec![0; n];
    for (i, &row) in perm.iter().enumerate() {
        assignment[row] = i % k;
    }

    let lambdas = path.lambdas.clone();
    let fold_errors: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|fold| fold_error(data, spec, opts, &assignment, fold, &lambdas))
        .collect::<Result<_>>()?;

    let nl = lambdas.len();
    let kf = k as f64;
    let mean: Vec<f64> = (0..nl)
        .map(|l| fold_errors.iter().map(|e| e[l]).sum::<f64>() / kf)
        .collect();
    let se: Vec<f64> = (0..nl)
        .map(|l| {
            let ss: f64 = fold_errors.iter().map(|e| (e[l] - mean[l]).powi(2)).sum();
            (ss / (kf - 1.0)).sqrt() / kf.sqrt()
        })
        .collect();
    let (index_min, index_1se) = select_lambda(&mean, &se);
    path.cv = Some(CvRecord {
        folds: k,
        fold_errors,
        mean,
        se,
        index_min,
        index_1se,
        lambda_min: lambdas[index_min],
        lambda_1se: lambdas[index_1se],
        rule: opts.rule,
    });
    Ok(path)
}

fn fold_error(
    data: &Dataset,
    spec: &ModelSpec,
    opts: &PenalizedOptions,
    assignment: &[usize],
    fold: usize,
    lambdas: &[f64],
) -> Result<Vec<f64>> {
    let (train_rows, test_rows): (Vec<usize>, Vec<usize>) =
        (0..data.n()).partition(|&i| assignment[i] != fold);
    let label = |e: Error| match e {
        Error::EmptyCell(msg) => Error::EmptyCell(format!(
            "cross-validation fold {} training data: {msg}",
            fold + 1
        )),
        other => other,
    };
    let train = data.subset(&train_rows)?;
    let test = data.subset(&test_rows)?;
    let prepared = prepare(&train, spec, opts).map_err(label)?;
    let problem = Problem::new(
        &prepared.design,
        &prepared.y,
        &prepared.constraints,
        &default_mask(&prepared.design.info),
    )?;
    let ratio = train_rows.len() as f64 / data.n() as f64;
    let scaled: Vec<f64> = lambdas.iter().map(|l| l * ratio).collect();
    let fits = run_path(&problem, opts.kind, &scaled)?;

    let x_test = prepared.design.info.rows_for(&test)?;
    let y_test = test.continuous(&spec.response)?;
    Ok(fits
        .iter()
        .map(|f| {
            let pred = &x_test * &f.coefficients;
            pred.iter()
                .zip(y_test)
                .map(|(p, y)| (y - p).powi(2))
                .sum::<f64>()
                / y_test.len() as f64
        })
        .collect())
}
