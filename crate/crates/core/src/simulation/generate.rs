//! Data-generating processes for the three simulation studies.

use indexmap::IndexMap;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal, StudentT};

use crate::constraints::Scheme;
use crate::data::{Column, Dataset, Factor};

pub const RACE_LEVELS: [&str; 4] = ["A", "B", "C", "D"];
pub const RACE_PROBS: [f64; 4] = [0.4, 0.3, 0.2, 0.1];
pub const SEX_LEVELS: [&str; 2] = ["uu", "vv"];
/// P(sex | race), one row per race level.
pub const SEX_GIVEN_RACE: [[f64; 2]; 4] = [[0.4, 0.6], [0.6, 0.4], [0.7, 0.3], [0.2, 0.8]];
/// Number of continuous covariates in the multi-covariate study.
pub const MULTI_P: usize = 10;
/// Covariates x1..x5 carry signal in the multi-covariate study.
pub const MULTI_ACTIVE: usize = 5;

const RACE_C: usize = 2;
const RACE_B: usize = 1;
const SEX_VV: usize = 1;

/// True mean function of a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    /// Nonzero coefficients by fit label; any other label is zero. Values
    /// are in the uncentered parametrization of the generating model.
    pub coefficients: IndexMap<String, f64>,
    /// Identifications whose constraints the coefficients satisfy (at the
    /// population proportions for ABC).
    pub satisfies: Vec<Scheme>,
    /// μ for every row.
    pub mean: Vec<f64>,
    /// Standard deviation of the errors.
    pub noise_sd: f64,
}

impl Truth {
    pub fn coefficient(&self, label: &str) -> f64 {
        self.coefficients.get(label).copied().unwrap_or(0.0)
    }

    /// The same mean function written for covariates centered at `means`
    /// (name, mean): the intercept absorbs m·α and each level effect absorbs
    /// m·γ of its cat-cont modifier. Slopes are unchanged.
    pub fn centered(&self, means: &[(String, f64)]) -> Truth {
        let mut coefficients = self.coefficients.clone();
        for (label, &value) in &self.coefficients {
            let (x, rest) = match label.split_once(':') {
                Some((x, rest)) => (x, Some(rest)),
                None => (label.as_str(), None),
            };
            let Some(&(_, m)) = means.iter().find(|(name, _)| name == x) else {
                continue;
            };
            let target = rest.unwrap_or("(Intercept)").to_string();
            *coefficients.entry(target).or_insert(0.0) += m * value;
        }
        coefficients.retain(|_, v| *v != 0.0);
        Truth {
            coefficients,
            ..self.clone()
        }
    }
}

/// Student-t with `df` degrees of freedom rescaled to unit variance.
pub fn standardized_t<R: Rng + ?Sized>(rng: &mut R, df: f64) -> f64 {
    let t: f64 = StudentT::new(df).expect("df > 2").sample(rng);
    t * ((df - 2.0) / df).sqrt()
}

fn draw_race_sex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (Vec<usize>, Vec<usize>) {
    let race_dist = WeightedIndex::new(RACE_PROBS).expect("valid weights");
    let sex_dist: Vec<_> = SEX_GIVEN_RACE
        .iter()
        .map(|w| WeightedIndex::new(w).expect("valid weights"))
        .collect();
    let mut race = Vec::with_capacity(n);
    let mut sex = Vec::with_capacity(n);
    for _ in 0..n {
        let r = race_dist.sample(rng);
        race.push(r);
        sex.push(sex_dist[r].sample(rng));
    }
    (race, sex)
}

fn factor(codes: Vec<usize>, levels: &[&str]) -> Column {
    let levels = levels.iter().map(|s| s.to_string()).collect();
    Column::Categorical(Factor::new(codes, levels).expect("codes in range"))
}

/// A covariate whose distribution depends on race; `sigma_ac` scales the
/// spread in groups A and C.
fn race_dependent_x<R: Rng + ?Sized>(rng: &mut R, race: usize, sigma_ac: f64) -> f64 {
    match race {
        0 => {
            let z: f64 = rng.sample(StandardNormal);
            5.0 + sigma_ac * z
        }
        1 => 12f64.sqrt() * rng.random::<f64>(),
        2 => -5.0 + sigma_ac * standardized_t(rng, 8.0),
        _ => Gamma::new(1.0, 1.0).expect("valid gamma").sample(rng),
    }
}

pub(crate) fn two_way_with<R: Rng + ?Sized>(rng: &mut R, n: usize, gamma: f64) -> (Dataset, Truth) {
    let (race, sex) = draw_race_sex(rng, n);
    let mean: Vec<f64> = race
        .iter()
        .zip(&sex)
        .map(|(&r, &s)| cell_mean(r, s, gamma))
        .collect();
    let y = mean.iter().map(|m| m + standardized_t(rng, 4.0)).collect();

    let mut data = Dataset::new();
    data.push("race", factor(race, &RACE_LEVELS)).expect("fresh column");
    data.push("sex", factor(sex, &SEX_LEVELS)).expect("fresh column");
    data.push_continuous("y", y).expect("fresh column");

    let mut coefficients = IndexMap::new();
    coefficients.insert("(Intercept)".to_string(), 1.0);
    coefficients.insert("race[C]".to_string(), -1.0);
    coefficients.insert("race[B]:sex[vv]".to_string(), gamma);
    let truth = Truth {
        coefficients,
        satisfies: vec![Scheme::Rge],
        mean,
        noise_sd: 1.0,
    };
    (data, truth)
}

/// μ(r, s) of the two-way study for race code `r` and sex code `s`.
pub fn cell_mean(race: usize, sex: usize, gamma: f64) -> f64 {
    let mut m = 1.0;
    if race == RACE_C {
        m -= 1.0;
    }
    if race == RACE_B && sex == SEX_VV {
        m += gamma;
    }
    m
}

pub(crate) fn cat_cont_with<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    gamma: f64,
    sigma_ac: f64,
) -> (Dataset, Truth) {
    let (race, _) = draw_race_sex(rng, n);
    let x: Vec<f64> = race.iter().map(|&r| race_dependent_x(rng, r, sigma_ac)).collect();
    let mean: Vec<f64> = race
        .iter()
        .zip(&x)
        .map(|(&r, &x)| {
            let mut m = 1.0 + x;
            if r == RACE_C {
                m -= 1.0;
            }
            if r == RACE_B {
                m += gamma * x;
            }
            m
        })
        .collect();
    let y = mean.iter().map(|m| m + standardized_t(rng, 4.0)).collect();

    let mut data = Dataset::new();
    data.push_continuous("x", x).expect("fresh column");
    data.push("race", factor(race, &RACE_LEVELS)).expect("fresh column");
    data.push_continuous("y", y).expect("fresh column");

    let mut coefficients = IndexMap::new();
    coefficients.insert("(Intercept)".to_string(), 1.0);
    coefficients.insert("x".to_string(), 1.0);
    coefficients.insert("race[C]".to_string(), -1.0);
    coefficients.insert("x:race[B]".to_string(), gamma);
    let truth = Truth {
        coefficients,
        satisfies: vec![Scheme::Rge],
        mean,
        noise_sd: 1.0,
    };
    (data, truth)
}

pub(crate) fn multi_with<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    gamma: f64,
    sigma_ac: f64,
) -> (Dataset, Truth) {
    let (race, sex) = draw_race_sex(rng, n);
    let mut xs: Vec<Vec<f64>> = (0..MULTI_P).map(|_| Vec::with_capacity(n)).collect();
    for &r in &race {
        for (j, x) in xs.iter_mut().enumerate() {
            // x1, x3, ... depend on race; x2, x4, ... are standard normal.
            let v = if j % 2 == 0 {
                race_dependent_x(rng, r, sigma_ac)
            } else {
                rng.sample(StandardNormal)
            };
            x.push(v);
        }
    }

    let mut coefficients = IndexMap::new();
    coefficients.insert("(Intercept)".to_string(), 1.0);
    for j in 1..=MULTI_ACTIVE {
        coefficients.insert(format!("x{j}"), 1.0);
    }
    coefficients.insert("race[B]".to_string(), 1.0);
    coefficients.insert("race[C]".to_string(), -1.0);
    coefficients.insert("race[D]".to_string(), -1.0);
    if gamma != 0.0 {
        for j in 1..=MULTI_ACTIVE {
            coefficients.insert(format!("x{j}:race[B]"), gamma);
            coefficients.insert(format!("x{j}:race[C]"), -gamma);
            coefficients.insert(format!("x{j}:race[D]"), -gamma);
        }
    }

    let race_main = [0.0, 1.0, -1.0, -1.0];
    let modifier = [0.0, gamma, -gamma, -gamma];
    let mean: Vec<f64> = (0..n)
        .map(|i| {
            let r = race[i];
            let mut m = 1.0 + race_main[r];
            for x in xs.iter().take(MULTI_ACTIVE) {
                m += (1.0 + modifier[r]) * x[i];
            }
            m
        })
        .collect();
    let noise_sd = sample_variance(&mean).sqrt();
    let y = mean
        .iter()
        .map(|m| {
            let e: f64 = rng.sample(StandardNormal);
            m + noise_sd * e
        })
        .collect();

    let mut data = Dataset::new();
    for (j, x) in xs.into_iter().enumerate() {
        data.push_continuous(format!("x{}", j + 1), x).expect("fresh column");
    }
    data.push("sex", factor(sex, &SEX_LEVELS)).expect("fresh column");
    data.push("race", factor(race, &RACE_LEVELS)).expect("fresh column");
    data.push_continuous("y", y).expect("fresh column");

    let truth = Truth {
        coefficients,
        satisfies: vec![Scheme::Rge, Scheme::Abc],
        mean,
        noise_sd,
    };
    (data, truth)
}

/// Sample variance with the n − 1 divisor (0 for fewer than two values).
pub fn sample_variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two categorical covariates: race (A–D) and sex (uu, vv) with dependent
/// assignment, mean 1 − 1{C} + γ·1{B, vv}, and unit-variance t₄ errors.
pub fn gen_two_way(n: usize, gamma: f64, seed: u64) -> (Dataset, Truth) {
    two_way_with(&mut seeded(seed), n, gamma)
}

/// Race plus a race-dependent covariate x, mean 1 + x − 1{C} + γ·x·1{B},
/// unit-variance t₄ errors.
pub fn gen_cat_cont(n: usize, gamma: f64, sigma_ac: f64, seed: u64) -> (Dataset, Truth) {
    cat_cont_with(&mut seeded(seed), n, gamma, sigma_ac)
}

/// Race, sex and ten covariates with race-specific slopes on x1..x5 and a
/// signal-to-noise ratio of one.
pub fn gen_multi(n: usize, gamma: f64, sigma_ac: f64, seed: u64) -> (Dataset, Truth) {
    multi_with(&mut seeded(seed), n, gamma, sigma_ac)
}
