use std::collections::BTreeMap;
use std::fmt::Write as _;

use catmod_core::constraints::{Identification, Scheme};
use catmod_core::data::{load_csv, Dataset, TypeHints};
use catmod_core::diagnostics::{compare_nested, CompareOptions};
use catmod_core::formula::VarKind;
use catmod_core::glm::Family;
use catmod_core::model::{prepare_spec, resolve, FitOptions, Preprocess};
use catmod_core::ols::{
    render_comparison, render_csv, render_json, render_table, summarize, ComparisonColumn, FitResult,
};
use catmod_core::penalized::{cross_validate, PathResult, PenalizedOptions, PenaltyKind, SelectionRule};
use catmod_core::simulation::{run_replications, Study, StudyConfig};
use catmod_core::{Error, Result};

use crate::args::{
    DiagnoseArgs, FamilyArg, FitArgs, IdArg, ModelArgs, OutArg, PenaltyArg, RuleArg, SimulateArgs, StudyArg,
};

/// What a command produced: text for stdout and notes for stderr.
#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    pub notes: Vec<String>,
}

fn scheme(id: IdArg) -> Scheme {
    match id {
        IdArg::Abc => Scheme::Abc,
        IdArg::Rge => Scheme::Rge,
        IdArg::Stz => Scheme::Stz,
    }
}

fn identification(args: &ModelArgs) -> Result<Identification> {
    if args.references.is_empty() {
        return Ok(scheme(args.id).into());
    }
    if args.id != IdArg::Rge {
        return Err(Error::InvalidArgument("--ref only applies with --id rge".into()));
    }
    let mut references = BTreeMap::new();
    for r in &args.references {
        let (var, level) = r
            .split_once('=')
            .filter(|(v, l)| !v.is_empty() && !l.is_empty())
            .ok_or_else(|| Error::InvalidArgument(format!("--ref expects VAR=LEVEL, got '{r}'")))?;
        references.insert(var.trim().to_string(), level.trim().to_string());
    }
    Ok(Identification::Rge { references })
}

fn family(f: FamilyArg) -> Family {
    match f {
        FamilyArg::Gaussian => Family::Gaussian,
        FamilyArg::Binomial => Family::Binomial,
        FamilyArg::Poisson => Family::Poisson,
    }
}

fn fit_options(args: &ModelArgs) -> Result<FitOptions> {
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(Error::InvalidArgument(format!("--level {} is not in (0, 1)", args.level)));
    }
    Ok(FitOptions {
        family: family(args.family),
        preprocess: Preprocess {
            center: !args.no_center,
            standardize: args.standardize,
        },
        ..FitOptions::default().with_identification(identification(args)?)
    })
}

fn load(args: &ModelArgs) -> Result<Dataset> {
    let hints: TypeHints = args
        .factors
        .iter()
        .map(|f| (f.clone(), VarKind::Categorical))
        .collect();
    load_csv(&args.data, &hints)
}

fn fit_model(data: &Dataset, formula: &str, opts: &FitOptions, notes: &mut Vec<String>) -> Result<FitResult> {
    let (spec, warnings) = resolve(data, formula)?;
    notes.extend(warnings);
    prepare_spec(data, &spec, opts)?.fit()
}

pub fn fit(args: &FitArgs) -> Result<Output> {
    let opts = fit_options(&args.model)?;
    let data = load(&args.model)?;
    let mut out = Output::default();
    if let Some(kind) = args.penalty {
        return penalized(args, data, opts, kind);
    }
    let fit = fit_model(&data, &args.model.formula, &opts, &mut out.notes)?;
    let table = summarize(&fit, args.model.level)?;
    out.stdout = match args.model.out {
        OutArg::Table => render_table(&table),
        OutArg::Csv => render_csv(&table)?,
        OutArg::Json => render_json(&table)? + "\n",
    };
    Ok(out)
}

fn penalized(args: &FitArgs, data: Dataset, fit: FitOptions, kind: PenaltyArg) -> Result<Output> {
    if fit.family != Family::Gaussian {
        return Err(Error::InvalidArgument("penalized fits support only the gaussian family".into()));
    }
    let mut out = Output::default();
    let (spec, warnings) = resolve(&data, &args.model.formula)?;
    out.notes.extend(warnings);
    let opts = PenalizedOptions {
        kind: match kind {
            PenaltyArg::Lasso => PenaltyKind::Lasso,
            PenaltyArg::Ridge => PenaltyKind::Ridge,
        },
        folds: args.folds,
        rule: match args.rule {
            RuleArg::OneSe => SelectionRule::OneSe,
            RuleArg::Min => SelectionRule::Min,
        },
        seed: args.seed,
        grid_size: args.grid,
        fit,
    };
    let path = cross_validate(&data, &spec, &opts)?;
    out.stdout = match args.model.out {
        OutArg::Table => render_path(&path, &args.model.formula),
        OutArg::Csv => path.to_csv(),
        OutArg::Json => serde_json::to_string_pretty(&path)
            .map_err(|e| Error::Numerical(format!("JSON rendering failed: {e}")))?
            + "\n",
    };
    Ok(out)
}

fn render_path(path: &PathResult, formula: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{formula}; {} path over {} values of lambda", path.kind.name(), path.lambdas.len());
    let _ = writeln!(s, "lambda_max = {:.6}", path.lambda_max);
    if let Some(cv) = &path.cv {
        let _ = writeln!(
            s,
            "{}-fold CV: lambda_min = {:.6}, lambda_1se = {:.6}",
            cv.folds, cv.lambda_min, cv.lambda_1se
        );
    }
    if let Some((lambda, coefs)) = path.selected() {
        let _ = writeln!(s, "selected lambda = {lambda:.6}\n");
        let width = path.labels.iter().map(|l| l.len()).max().unwrap_or(8).max(8);
        let _ = writeln!(s, "{:<width$}  {:>10}", "Variable", "Estimate");
        for (label, v) in path.labels.iter().zip(coefs.iter()) {
            let _ = writeln!(s, "{label:<width$}  {v:>10.3}");
        }
    }
    s
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<Output> {
    let opts = fit_options(&args.model)?;
    let data = load(&args.model)?;
    let mut out = Output::default();
    let main = fit_model(&data, &args.model.formula, &opts, &mut out.notes)?;
    let cm = fit_model(&data, &args.formula_cm, &opts, &mut out.notes)?;
    let report = compare_nested(&main, &cm, CompareOptions::default())?;
    out.stdout = match args.model.out {
        OutArg::Table => {
            let tm = summarize(&main, args.model.level)?;
            let tc = summarize(&cm, args.model.level)?;
            let mut s = render_comparison(&[
                ComparisonColumn { name: "Main-only", table: &tm },
                ComparisonColumn { name: "Cat-modified", table: &tc },
            ]);
            s.push('\n');
            s.push_str(&report.render_text());
            s
        }
        OutArg::Csv => report.to_csv()?,
        OutArg::Json => serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Numerical(format!("JSON rendering failed: {e}")))?
            + "\n",
    };
    Ok(out)
}

pub fn simulate(args: &SimulateArgs) -> Result<Output> {
    let study = match args.study {
        StudyArg::TwoWay => Study::TwoWay,
        StudyArg::CatCont => Study::CatCont,
        StudyArg::Multi => Study::Multi,
    };
    let mut config = StudyConfig::new(study, args.n, args.gamma, args.reps, args.seed).with_sigma_ac(args.sigma_ac);
    config.level = args.level;
    if !args.id.is_empty() {
        let schemes: Vec<Scheme> = args.id.iter().map(|&i| scheme(i)).collect();
        config = config.with_schemes(&schemes);
    }
    let report = run_replications(&config)?;
    let (reps, agg) = report.write_csv(&args.out_dir)?;
    let mut out = Output {
        notes: report.notes.clone(),
        ..Output::default()
    };
    for line in report.summary_lines() {
        out.stdout.push_str(&line);
        out.stdout.push('\n');
    }
    let _ = writeln!(out.stdout, "wrote {}", reps.display());
    let _ = writeln!(out.stdout, "wrote {}", agg.display());
    Ok(out)
}
