#![allow(dead_code)]

use catmod_core::constraints::{Identification, Scheme};
use catmod_core::data::Dataset;
use catmod_core::model::{fit_formula, FitOptions};
use catmod_core::ols::FitResult;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random data with continuous columns `x1..`, categoricals `c1..` with the
/// given level counts (levels `L0`, `L1`, ...) and a response `y`. The first
/// rows run through every combination of categorical levels, so no level or
/// cell is empty when `n` is at least the number of combinations.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, n_cont: usize, levels: &[usize]) -> Dataset {
    let cells: usize = levels.iter().product();
    assert!(n >= cells);
    let mut codes: Vec<Vec<usize>> = vec![Vec::with_capacity(n); levels.len()];
    for i in 0..n {
        let mut rest = i;
        for (k, &l) in levels.iter().enumerate() {
            let code = if i < cells {
                let c = rest % l;
                rest /= l;
                c
            } else {
                // Unequal level frequencies.
                let u: f64 = rng.random();
                ((u * u) * l as f64) as usize
            };
            codes[k].push(code.min(l - 1));
        }
    }
    let mut d = Dataset::new();
    let mut y = vec![0.0; n];
    for j in 0..n_cont {
        let shift = normal(rng);
        let x: Vec<f64> = (0..n)
            .map(|i| shift + (1.0 + codes.first().map_or(0, |c| c[i]) as f64) * normal(rng))
            .collect();
        let b = normal(rng);
        for i in 0..n {
            y[i] += b * x[i];
        }
        d.push_continuous(format!("x{}", j + 1), x).unwrap();
    }
    for (k, c) in codes.iter().enumerate() {
        let effects: Vec<f64> = (0..levels[k]).map(|_| normal(rng)).collect();
        for i in 0..n {
            y[i] += effects[c[i]];
        }
        let labels: Vec<String> = c.iter().map(|&v| format!("L{v}")).collect();
        d.push_categorical(format!("c{}", k + 1), &labels).unwrap();
    }
    for v in &mut y {
        *v += normal(rng);
    }
    d.push_continuous("y", y).unwrap();
    d
}

pub fn fit(data: &Dataset, formula: &str, scheme: Scheme) -> FitResult {
    fit_formula(data, formula, &FitOptions::default().with_identification(scheme)).unwrap()
}

pub fn fit_id(data: &Dataset, formula: &str, id: Identification) -> FitResult {
    fit_formula(data, formula, &FitOptions::default().with_identification(id)).unwrap()
}

/// Equality-constrained least squares via the Lagrangian saddle-point
/// system [XᵀX Aᵀ; A 0][θ; ν] = [Xᵀy; 0], solved by full-pivot LU.
pub fn kkt_solve(x: &DMatrix<f64>, y: &DVector<f64>, a: &DMatrix<f64>) -> DVector<f64> {
    let p = x.ncols();
    let m = a.nrows();
    let mut k = DMatrix::zeros(p + m, p + m);
    k.view_mut((0, 0), (p, p)).copy_from(&(x.transpose() * x));
    k.view_mut((0, p), (p, m)).copy_from(&a.transpose());
    k.view_mut((p, 0), (m, p)).copy_from(a);
    let mut rhs = DVector::zeros(p + m);
    rhs.rows_mut(0, p).copy_from(&(x.transpose() * y));
    let sol = k.full_piv_lu().solve(&rhs).expect("KKT system is nonsingular");
    sol.rows(0, p).into_owned()
}

pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

/// Largest absolute difference over the coefficients shared by label.
pub fn shared_delta(a: &FitResult, b: &FitResult, labels: &[&str]) -> f64 {
    labels
        .iter()
        .map(|l| (a.coef(l).unwrap() - b.coef(l).unwrap()).abs())
        .fold(0.0, f64::max)
}

/// Labels of the intercept, continuous and categorical main columns.
pub fn main_labels(fit: &FitResult) -> Vec<String> {
    use catmod_core::data::TermTag;
    fit.design
        .info
        .columns
        .iter()
        .filter(|c| matches!(c.tag, TermTag::Intercept | TermTag::Continuous(_) | TermTag::CatMain(..)))
        .map(|c| c.label.clone())
        .collect()
}
