use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "catmod", version, about = "Regression with abundance-based constraints for categorical covariates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and print its coefficient table.
    Fit(FitArgs),
    /// Compare a main-only model with a cat-modified model.
    Diagnose(DiagnoseArgs),
    /// Run a Monte-Carlo study and write CSV reports.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IdArg {
    Abc,
    Rge,
    Stz,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Binomial,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyArg {
    Lasso,
    Ridge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    #[value(name = "1se")]
    OneSe,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutArg {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyArg {
    #[value(name = "two_way")]
    TwoWay,
    #[value(name = "cat_cont")]
    CatCont,
    Multi,
}

/// Options shared by `fit` and `diagnose`.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Model formula, e.g. "y ~ x*race + sex".
    #[arg(long)]
    pub formula: String,
    /// Identification of the categorical coefficients.
    #[arg(long, value_enum, default_value = "abc")]
    pub id: IdArg,
    /// Reference level for a categorical under RGE, as VAR=LEVEL.
    #[arg(long = "ref", value_name = "VAR=LEVEL")]
    pub references: Vec<String>,
    /// Treat a column as categorical even if it is numeric.
    #[arg(long = "factor", value_name = "VAR")]
    pub factors: Vec<String>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyArg,
    /// Confidence level of the reported intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Center continuous covariates (the default).
    #[arg(long, overrides_with = "no_center")]
    pub center: bool,
    /// Leave continuous covariates uncentered.
    #[arg(long = "no-center")]
    pub no_center: bool,
    /// Scale continuous covariates to unit standard deviation.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, value_enum, default_value = "table")]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Fit a penalized path and pick λ by cross-validation.
    #[arg(long, value_enum)]
    pub penalty: Option<PenaltyArg>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, value_enum, default_value = "1se")]
    pub rule: RuleArg,
    /// Number of λ values on the path.
    #[arg(long, default_value_t = 50)]
    pub grid: usize,
    /// Seed for the cross-validation folds.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// The cat-modified formula; must contain every term of --formula.
    #[arg(long = "formula-cm")]
    pub formula_cm: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub study: StudyArg,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    /// Spread of the covariate in race groups A and C.
    #[arg(long = "sigma-ac", default_value_t = 1.0)]
    pub sigma_ac: f64,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Identifications to fit (repeatable); defaults depend on the study.
    #[arg(long, value_enum)]
    pub id: Vec<IdArg>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Directory for the CSV reports.
    #[arg(long = "out-dir", env = "CATMOD_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
}
