mod common;

use catmod_core::constraints::Scheme;
use catmod_core::data::Dataset;
use catmod_core::diagnostics::equal_variance_stats;
use catmod_core::model::{prepare, FitOptions, Preprocess};
use catmod_core::simulation::*;
use catmod_core::ErrorKind;
use nalgebra::DVector;
use proptest::prelude::*;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn group_values<'a>(data: &'a Dataset, x: &str, level: &str) -> Vec<f64> {
    let f = data.factor("race").unwrap();
    let code = f.level_index(level).unwrap();
    data.continuous(x)
        .unwrap()
        .iter()
        .zip(f.codes())
        .filter(|(_, &c)| c == code)
        .map(|(&v, _)| v)
        .collect()
}

/// X·θ over the design of `formula`, with θ read from the truth by label.
fn implied_mean(data: &Dataset, formula: &str, truth: &Truth, center: bool) -> DVector<f64> {
    let opts = FitOptions {
        preprocess: Preprocess {
            center,
            standardize: false,
        },
        ..FitOptions::default()
    }
    .with_identification(Scheme::Rge);
    let prepared = prepare(data, formula, &opts).unwrap();
    let info = &prepared.design.info;
    let means: Vec<(String, f64)> = info
        .centering
        .variables
        .iter()
        .cloned()
        .zip(info.centering.centers.iter().copied())
        .collect();
    let truth = truth.centered(&means);
    for label in truth.coefficients.keys() {
        assert!(info.columns.iter().any(|c| &c.label == label), "no column {label}");
    }
    let theta = DVector::from_iterator(
        info.columns.len(),
        info.columns.iter().map(|c| truth.coefficient(&c.label)),
    );
    &prepared.design.x * theta
}

fn assert_mean_matches(implied: &DVector<f64>, truth: &Truth) {
    let diff = implied
        .iter()
        .zip(&truth.mean)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-10, "coefficients disagree with the mean by {diff}");
}

#[test]
fn two_way_cell_means() {
    assert_eq!(cell_mean(0, 0, 0.7), 1.0);
    assert_eq!(cell_mean(2, 1, 0.7), 0.0);
    assert_eq!(cell_mean(1, 1, 0.7), 1.7);
    assert_eq!(cell_mean(1, 0, 0.7), 1.0);
}

#[test]
fn sex_is_balanced_marginally() {
    let uu: f64 = RACE_PROBS.iter().zip(SEX_GIVEN_RACE).map(|(p, s)| p * s[0]).sum();
    assert!((uu - 0.5).abs() < 1e-15);
}

#[test]
fn two_way_proportions_converge() {
    let (data, truth) = gen_two_way(100_000, 1.5, 11);
    let race = data.factor("race").unwrap();
    assert_eq!(race.levels(), RACE_LEVELS);
    let counts = race.counts();
    for (c, p) in counts.iter().zip(RACE_PROBS) {
        assert!((*c as f64 / 1e5 - p).abs() < 0.01);
    }
    let sex = data.factor("sex").unwrap();
    assert!((sex.counts()[0] as f64 / 1e5 - 0.5).abs() < 0.01);
    // Joint cell frequencies follow P(race)·P(sex | race).
    let mut cells = [[0usize; 2]; 4];
    for (&r, &s) in race.codes().iter().zip(sex.codes()) {
        cells[r][s] += 1;
    }
    for r in 0..4 {
        for s in 0..2 {
            let expected = RACE_PROBS[r] * SEX_GIVEN_RACE[r][s];
            assert!((cells[r][s] as f64 / 1e5 - expected).abs() < 0.01);
        }
    }
    assert_mean_matches(&implied_mean(&data, "y ~ race*sex", &truth, false), &truth);
}

#[test]
fn standardized_t_has_unit_variance() {
    let mut r = common::rng(5);
    for df in [4.0, 8.0] {
        let draws: Vec<f64> = (0..400_000).map(|_| standardized_t(&mut r, df)).collect();
        let v = sample_variance(&draws);
        assert!((v - 1.0).abs() < 0.05, "df {df}: variance {v}");
    }
}

#[test]
fn cat_cont_group_moments() {
    let (data, _) = gen_cat_cont(100_000, 0.0, 1.5, 3);
    let a = group_values(&data, "x", "A");
    assert!((mean(&a) - 5.0).abs() < 0.05 * 5.0);
    assert!((sample_variance(&a) / 2.25 - 1.0).abs() < 0.05);
    let c = group_values(&data, "x", "C");
    assert!((mean(&c) + 5.0).abs() < 0.05 * 5.0);
    assert!((sample_variance(&c) / 2.25 - 1.0).abs() < 0.05);
}

#[test]
fn unit_sigma_gives_equal_population_variances() {
    let (data, _) = gen_cat_cont(100_000, 0.0, 1.0, 4);
    let stats = equal_variance_stats(&data, "x", "race").unwrap();
    for g in &stats.groups {
        assert!((g.variance - 1.0).abs() < 0.05, "{}: {}", g.level, g.variance);
    }
}

#[test]
fn cat_cont_truth_slopes() {
    let gamma = 1.5;
    let (data, truth) = gen_cat_cont(400, gamma, 1.0, 8);
    for level in RACE_LEVELS {
        let slope = truth.coefficient("x") + truth.coefficient(&format!("x:race[{level}]"));
        let expected = if level == "B" { 1.0 + gamma } else { 1.0 };
        assert_eq!(slope, expected);
    }
    for center in [false, true] {
        assert_mean_matches(&implied_mean(&data, "y ~ x*race", &truth, center), &truth);
    }
}

#[test]
fn multi_truth_satisfies_both_identifications() {
    let (data, truth) = gen_multi(600, 1.5, 1.0, 21);
    let race_main: f64 = RACE_LEVELS
        .iter()
        .zip(RACE_PROBS)
        .map(|(l, p)| p * truth.coefficient(&format!("race[{l}]")))
        .sum();
    assert!(race_main.abs() < 1e-15);
    for j in 1..=MULTI_P {
        let m: f64 = RACE_LEVELS
            .iter()
            .zip(RACE_PROBS)
            .map(|(l, p)| p * truth.coefficient(&format!("x{j}:race[{l}]")))
            .sum();
        assert!(m.abs() < 1e-15);
        let expected = if j <= MULTI_ACTIVE { 1.0 } else { 0.0 };
        assert_eq!(truth.coefficient(&format!("x{j}")), expected);
    }
    assert!(truth.coefficients.keys().all(|k| !k.contains("sex")));
    assert!(truth.satisfies.contains(&Scheme::Abc) && truth.satisfies.contains(&Scheme::Rge));

    let snr = sample_variance(&truth.mean) / truth.noise_sd.powi(2);
    assert!((snr - 1.0).abs() < 1e-6);
    let resid: Vec<f64> = data
        .continuous("y")
        .unwrap()
        .iter()
        .zip(&truth.mean)
        .map(|(y, m)| y - m)
        .collect();
    assert!((sample_variance(&resid).sqrt() / truth.noise_sd - 1.0).abs() < 0.1);

    let xs = (1..=MULTI_P).map(|j| format!("x{j}")).collect::<Vec<_>>().join(" + ");
    let formula = format!("y ~ ({xs} + sex)*race");
    for center in [false, true] {
        assert_mean_matches(&implied_mean(&data, &formula, &truth, center), &truth);
    }
}

#[test]
fn generators_are_pure_functions_of_the_seed() {
    assert_eq!(gen_multi(80, 1.0, 1.0, 9), gen_multi(80, 1.0, 1.0, 9));
    assert_ne!(gen_two_way(80, 1.0, 9).0, gen_two_way(80, 1.0, 10).0);
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let config = StudyConfig::new(Study::CatCont, 150, 1.5, 24, 7);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_replications(&config).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a, b);
    assert_eq!(a.replications_csv().unwrap(), b.replications_csv().unwrap());
    assert_eq!(a.aggregate_csv().unwrap(), b.aggregate_csv().unwrap());
    let c = run_replications(&StudyConfig { seed: 8, ..config.clone() }).unwrap();
    assert_ne!(a.replications_csv().unwrap(), c.replications_csv().unwrap());
}

#[test]
fn two_way_abc_main_effects_are_invariant() {
    for gamma in [0.0, 1.5] {
        let report = run_replications(&StudyConfig::new(Study::TwoWay, 300, gamma, 40, 3)).unwrap();
        assert_eq!(report.failed, 0);
        let abc = report.comparison(Scheme::Abc).unwrap();
        assert_eq!(abc.fits, 40);
        assert!(abc.max_abs_delta < 1e-8, "{}", abc.max_abs_delta);
        for scheme in [Scheme::Rge, Scheme::Stz] {
            assert!(report.comparison(scheme).unwrap().max_abs_delta > 1e-3);
        }
    }
}

/// The main-only slope is the pooled within-group slope Σ S_r b_r / Σ S_r
/// and the ABC cat-modified slope is Σ π̂_r b_r, with b_r the per-group
/// least-squares slope and S_r the within-group sum of squares of x.
#[test]
fn cat_cont_delta_matches_group_slope_decomposition() {
    let config = StudyConfig::new(Study::CatCont, 250, 1.5, 3, 12).with_sigma_ac(1.5);
    let report = run_replications(&config).unwrap();
    for rep in &report.replications {
        let (data, _) = config.generate(rep.index);
        let n = data.n() as f64;
        let (mut pooled_num, mut pooled_den, mut abc) = (0.0, 0.0, 0.0);
        let y_all = data.continuous("y").unwrap();
        let race = data.factor("race").unwrap();
        for (code, level) in RACE_LEVELS.iter().enumerate() {
            let x = group_values(&data, "x", level);
            let y: Vec<f64> = y_all
                .iter()
                .zip(race.codes())
                .filter(|(_, &c)| c == code)
                .map(|(&v, _)| v)
                .collect();
            let (mx, my) = (mean(&x), mean(&y));
            let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
            let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
            let b = sxy / sxx;
            pooled_num += sxx * b;
            pooled_den += sxx;
            abc += x.len() as f64 / n * b;
        }
        let main = rep.fit(Scheme::Abc, ModelClass::MainOnly).unwrap().get("x").unwrap();
        let cm = rep.fit(Scheme::Abc, ModelClass::CatModified).unwrap().get("x").unwrap();
        assert!((main.estimate - pooled_num / pooled_den).abs() < 1e-10);
        assert!((cm.estimate - abc).abs() < 1e-10);
    }
}

#[test]
fn failed_replications_are_counted_not_fatal() {
    // With 30 rows the rare race D / sex uu cell is often empty.
    let report = run_replications(&StudyConfig::new(Study::TwoWay, 30, 0.0, 40, 1)).unwrap();
    assert!(report.failed > 0 && report.failed < 40, "{} failed", report.failed);
    let ok = report.successful().count();
    assert_eq!(ok + report.failed, 40);
    for a in &report.aggregates {
        assert_eq!(a.fits, ok);
    }
    let csv = report.replications_csv().unwrap();
    let errors = csv.lines().filter(|l| l.split(',').nth(1) == Some("")).count();
    assert_eq!(errors, report.failed);
}

#[test]
fn small_multi_studies_drop_race_by_sex() {
    let (_, cm, notes) = StudyConfig::new(Study::Multi, 200, 0.0, 1, 1).formulas();
    assert!(!cm.contains("sex)*race"));
    assert_eq!(notes.len(), 1);
    assert!(notes[0].contains("race:sex dropped"));
    let (_, cm, notes) = StudyConfig::new(Study::Multi, 500, 0.0, 1, 1).formulas();
    assert!(cm.contains("+ sex)*race"));
    assert!(notes.is_empty());
    let report = run_replications(&StudyConfig::new(Study::Multi, 200, 1.5, 2, 1)).unwrap();
    assert_eq!(report.failed, 0);
    let fit = report.replications[0].fit(Scheme::Abc, ModelClass::CatModified).unwrap();
    assert!(fit.coefficients.iter().all(|c| !c.label.starts_with("sex[uu]:")));
    assert_eq!(report.notes.len(), 1);
}

#[test]
fn invalid_configs_are_rejected() {
    let base = StudyConfig::new(Study::CatCont, 100, 0.0, 5, 1);
    let bad = [
        StudyConfig { n: 0, ..base.clone() },
        StudyConfig { replications: 0, ..base.clone() },
        StudyConfig { gamma: f64::NAN, ..base.clone() },
        base.clone().with_sigma_ac(0.0),
        StudyConfig { level: 1.0, ..base.clone() },
        base.clone().with_schemes(&[]),
    ];
    for config in bad {
        let err = run_replications(&config).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::Specification, "{err}");
    }
    assert!("nope".parse::<Study>().is_err());
    assert_eq!("cat_cont".parse::<Study>().unwrap(), Study::CatCont);
}

#[test]
fn csv_layouts() {
    let report = run_replications(&StudyConfig::new(Study::TwoWay, 120, 0.5, 3, 2)).unwrap();
    let reps = report.replications_csv().unwrap();
    assert!(reps.starts_with(
        "replication,scheme,model,label,estimate,std_error,lower,upper,truth,covered,error\n"
    ));
    // RGE rows carry the truth, ABC rows leave it blank.
    assert!(reps.lines().any(|l| l.starts_with("0,RGE,main_only,race[C],") && !l.contains(",,,")));
    assert!(reps.lines().any(|l| l.starts_with("0,ABC,main_only,race[C],") && l.ends_with(",,,")));
    let agg = report.aggregate_csv().unwrap();
    let lines: Vec<&str> = agg.lines().collect();
    assert_eq!(lines.len(), 1 + 3 * 2 * 2);
    assert!(lines[0].starts_with("scheme,model,coefficients,fits,failed,rmse,"));

    let dir = tempfile::tempdir().unwrap();
    let (r, a) = report.write_csv(dir.path()).unwrap();
    assert!(r.ends_with("two_way_replications.csv") && a.ends_with("two_way_aggregate.csv"));
    assert_eq!(std::fs::read_to_string(a).unwrap(), agg);
}

#[test]
fn omitted_terms_count_as_zero_in_all_coefficient_metrics() {
    let report = run_replications(&StudyConfig::new(Study::TwoWay, 200, 1.5, 1, 6)).unwrap();
    let rep = &report.replications[0];
    let main = rep.fit(Scheme::Rge, ModelClass::MainOnly).unwrap();
    let cm = rep.fit(Scheme::Rge, ModelClass::CatModified).unwrap();
    let widths: f64 = main.coefficients.iter().filter(|c| !c.pinned).map(|c| c.upper - c.lower).sum();
    let universe = cm.coefficients.iter().filter(|c| !c.pinned).count();
    // The main-only model leaves out race[B]:sex[vv] (truth 1.5), so it is
    // missed by a zero-width interval.
    let agg = report.aggregate(Scheme::Rge, ModelClass::MainOnly, CoefficientSet::All).unwrap();
    assert!((agg.mean_width - widths / universe as f64).abs() < 1e-12);
    assert!(agg.coverage.unwrap() < 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn aggregates_stay_in_range(seed in 0u64..1000, n in 10usize..60, gamma in -2.0f64..2.0) {
        let report = run_replications(&StudyConfig::new(Study::TwoWay, n, gamma, 6, seed)).unwrap();
        prop_assert_eq!(report.successful().count() + report.failed, 6);
        for a in &report.aggregates {
            if let Some(c) = a.coverage {
                prop_assert!((0.0..=1.0).contains(&c));
            }
            if a.fits > 0 {
                prop_assert!(a.mean_width >= 0.0);
            }
        }
        for c in &report.comparisons {
            if c.fits > 0 {
                prop_assert!((0.0..=1.0).contains(&c.se_larger_fraction));
            }
        }
    }
}
