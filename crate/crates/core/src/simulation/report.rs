//! Aggregate metrics and CSV export for simulation reports.

use std::path::{Path, PathBuf};

use super::{CoefficientRecord, FitRecord, ModelClass, Replication, SimulationReport, StudyConfig};
use crate::constraints::Scheme;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSet {
    /// The study's main effects (see `StudyConfig::main_effects`).
    Main,
    /// Every coefficient of the cat-modified model not pinned by the
    /// identification; terms a smaller model omits count as fixed zeros.
    All,
}

impl CoefficientSet {
    pub fn name(self) -> &'static str {
        match self {
            CoefficientSet::Main => "main",
            CoefficientSet::All => "all",
        }
    }
}

/// Metrics for one (scheme, model, coefficient set) over the successful
/// replications.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Aggregate {
    pub scheme: Scheme,
    pub model: ModelClass,
    pub set: CoefficientSet,
    pub fits: usize,
    /// sqrt of the mean over replications of the per-replication mean
    /// squared error; `None` when the truth is not expressed in this scheme.
    pub rmse: Option<f64>,
    pub mean_width: f64,
    /// Share of (replication, coefficient) intervals covering the truth.
    pub coverage: Option<f64>,
    /// Median SE over the coefficients the model actually estimates.
    pub median_se: f64,
}

/// Cat-modified versus main-only main effects under one scheme.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Comparison {
    pub scheme: Scheme,
    pub fits: usize,
    /// Mean of SE(cat-modified) / SE(main-only) over replications and main
    /// effects.
    pub mean_se_ratio: f64,
    pub median_abs_delta: f64,
    pub max_abs_delta: f64,
    /// Share of replications in which every main-effect SE grows.
    pub se_larger_fraction: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Coefficients scored for `fit` in `set`. For `All` the universe is the
/// cat-modified fit's unpinned coefficients (when that fit exists), and a
/// coefficient the model leaves out counts as a fixed zero with a
/// zero-width interval.
fn scored(
    fit: &FitRecord,
    cm: Option<&FitRecord>,
    set: CoefficientSet,
    main: &[String],
) -> Vec<CoefficientRecord> {
    match set {
        CoefficientSet::Main => fit
            .coefficients
            .iter()
            .filter(|c| main.contains(&c.label))
            .cloned()
            .collect(),
        CoefficientSet::All => {
            let universe = cm.unwrap_or(fit);
            universe
                .coefficients
                .iter()
                .filter(|c| !c.pinned)
                .map(|u| match fit.get(&u.label) {
                    Some(c) => c.clone(),
                    None => CoefficientRecord {
                        label: u.label.clone(),
                        estimate: 0.0,
                        std_error: 0.0,
                        lower: 0.0,
                        upper: 0.0,
                        pinned: false,
                        truth: u.truth,
                    },
                })
                .collect()
        }
    }
}

pub(super) fn aggregates(config: &StudyConfig, reps: &[Replication], main: &[String]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for &scheme in &config.schemes {
        for &model in &config.models {
            for set in [CoefficientSet::Main, CoefficientSet::All] {
                let mut mse = Vec::new();
                let mut widths = Vec::new();
                let mut ses = Vec::new();
                let (mut covered, mut known, mut fits) = (0usize, 0usize, 0usize);
                for rep in reps {
                    let Some(fit) = rep.fit(scheme, model) else {
                        continue;
                    };
                    fits += 1;
                    let cm = rep.fit(scheme, ModelClass::CatModified);
                    let mut sq = Vec::new();
                    for c in scored(fit, cm, set, main) {
                        widths.push(c.upper - c.lower);
                        if fit.get(&c.label).is_some() {
                            ses.push(c.std_error);
                        }
                        if let Some(t) = c.truth {
                            sq.push((c.estimate - t).powi(2));
                            known += 1;
                            covered += usize::from(c.covered() == Some(true));
                        }
                    }
                    if !sq.is_empty() {
                        mse.push(mean(&sq));
                    }
                }
                out.push(Aggregate {
                    scheme,
                    model,
                    set,
                    fits,
                    rmse: (!mse.is_empty()).then(|| mean(&mse).sqrt()),
                    mean_width: mean(&widths),
                    coverage: (known > 0).then(|| covered as f64 / known as f64),
                    median_se: median(ses),
                });
            }
        }
    }
    out
}

pub(super) fn comparisons(config: &StudyConfig, reps: &[Replication], main: &[String]) -> Vec<Comparison> {
    let both = config.models.contains(&ModelClass::MainOnly)
        && config.models.contains(&ModelClass::CatModified);
    if !both {
        return Vec::new();
    }
    let mut out = Vec::new();
    for &scheme in &config.schemes {
        let mut ratios = Vec::new();
        let mut deltas = Vec::new();
        let (mut fits, mut larger) = (0usize, 0usize);
        for rep in reps {
            let (Some(m), Some(cm)) = (
                rep.fit(scheme, ModelClass::MainOnly),
                rep.fit(scheme, ModelClass::CatModified),
            ) else {
                continue;
            };
            fits += 1;
            let mut all_larger = true;
            for label in main {
                let (Some(a), Some(b)) = (m.get(label), cm.get(label)) else {
                    continue;
                };
                ratios.push(b.std_error / a.std_error);
                deltas.push((b.estimate - a.estimate).abs());
                all_larger &= b.std_error > a.std_error;
            }
            larger += usize::from(all_larger);
        }
        out.push(Comparison {
            scheme,
            fits,
            mean_se_ratio: mean(&ratios),
            median_abs_delta: median(deltas.clone()),
            max_abs_delta: deltas.iter().copied().fold(f64::NAN, f64::max),
            se_larger_fraction: if fits == 0 {
                f64::NAN
            } else {
                larger as f64 / fits as f64
            },
        });
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Numerical(format!("CSV rendering failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Numerical(format!("CSV rendering failed: {e}"))
}

impl SimulationReport {
    /// One row per replication, scheme, model and coefficient; a failed
    /// replication gets a single row carrying its error.
    pub fn replications_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "replication", "scheme", "model", "label", "estimate", "std_error", "lower", "upper",
            "truth", "covered", "error",
        ])
        .map_err(csv_err)?;
        for rep in &self.replications {
            let index = rep.index.to_string();
            if let Some(e) = &rep.error {
                let mut row = vec![index.as_str(); 1];
                row.extend(["", "", "", "", "", "", "", "", ""]);
                row.push(e);
                w.write_record(&row).map_err(csv_err)?;
                continue;
            }
            for fit in &rep.fits {
                for c in &fit.coefficients {
                    let covered = c.covered().map(|b| u8::from(b).to_string()).unwrap_or_default();
                    w.write_record([
                        index.clone(),
                        fit.scheme.name().to_string(),
                        fit.model.name().to_string(),
                        c.label.clone(),
                        c.estimate.to_string(),
                        c.std_error.to_string(),
                        c.lower.to_string(),
                        c.upper.to_string(),
                        opt(c.truth),
                        covered,
                        String::new(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
        finish(w)
    }

    /// One row per scheme, model and coefficient set. The comparison columns
    /// are filled on the cat-modified main-effect rows.
    pub fn aggregate_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "scheme", "model", "coefficients", "fits", "failed", "rmse", "mean_width", "coverage",
            "median_se", "mean_se_ratio", "median_abs_delta", "max_abs_delta",
            "se_larger_fraction",
        ])
        .map_err(csv_err)?;
        for a in &self.aggregates {
            let cmp = (a.model == ModelClass::CatModified && a.set == CoefficientSet::Main)
                .then(|| self.comparison(a.scheme))
                .flatten();
            let c = |f: fn(&Comparison) -> f64| opt(cmp.map(f));
            w.write_record([
                a.scheme.name().to_string(),
                a.model.name().to_string(),
                a.set.name().to_string(),
                a.fits.to_string(),
                self.failed.to_string(),
                opt(a.rmse),
                a.mean_width.to_string(),
                opt(a.coverage),
                a.median_se.to_string(),
                c(|c| c.mean_se_ratio),
                c(|c| c.median_abs_delta),
                c(|c| c.max_abs_delta),
                c(|c| c.se_larger_fraction),
            ])
            .map_err(csv_err)?;
        }
        finish(w)
    }

    /// Short human-readable summary, one line per scheme and model.
    pub fn summary_lines(&self) -> Vec<String> {
        let cfg = &self.config;
        let mut lines = vec![format!(
            "{}: n = {}, gamma = {}, sigma_ac = {}, {} replications ({} failed), seed {}",
            cfg.study.name(),
            cfg.n,
            cfg.gamma,
            cfg.sigma_ac,
            cfg.replications,
            self.failed,
            cfg.seed
        )];
        let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        for a in self.aggregates.iter().filter(|a| a.set == CoefficientSet::Main) {
            let mut line = format!(
                "{} {}: main-effect RMSE {}, mean width {:.4}, coverage {}",
                a.scheme.name(),
                a.model.name(),
                f(a.rmse),
                a.mean_width,
                f(a.coverage)
            );
            if a.model == ModelClass::CatModified {
                if let Some(c) = self.comparison(a.scheme) {
                    line.push_str(&format!(
                        ", SE ratio {:.4}, median |delta| {:.3e}",
                        c.mean_se_ratio, c.median_abs_delta
                    ));
                }
            }
            lines.push(line);
        }
        lines
    }

    /// Writes `<study>_replications.csv` and `<study>_aggregate.csv` into
    /// `dir` and returns their paths.
    pub fn write_csv(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let name = self.config.study.name();
        let reps = dir.join(format!("{name}_replications.csv"));
        let agg = dir.join(format!("{name}_aggregate.csv"));
        for (path, body) in [(&reps, self.replications_csv()?), (&agg, self.aggregate_csv()?)] {
            std::fs::write(path, body)?;
        }
        Ok((reps, agg))
    }
}
