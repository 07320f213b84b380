use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use catmod_core::constraints::Scheme;
use catmod_core::data::{load_csv, TypeHints};
use catmod_core::model::{fit_formula, FitOptions};

fn catmod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catmod"))
        .args(args)
        .env_remove("CATMOD_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn csv_rows(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn intercept_of_one_way_model_is_the_mean() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "t.csv", "y,g\n1,A\n2,A\n3,B\n");
    let o = catmod(&["fit", "--data", &data, "--formula", "y ~ g", "--out", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(&rows[0][0], "(Intercept)");
    assert!((rows[0][2].parse::<f64>().unwrap() - 2.0).abs() < 1e-12);

    let table = catmod(&["fit", "--data", &data, "--formula", "y ~ g"]);
    let text = stdout(&table);
    let line = text.lines().find(|l| l.starts_with("Intercept")).unwrap();
    assert!(line.split_whitespace().nth(1) == Some("2.000"), "{line}");
}

#[test]
fn reference_rows_are_marked_under_rge() {
    let data = fixtures().join("race_sex.csv");
    let data = data.to_str().unwrap();
    let o = catmod(&["fit", "--data", data, "--formula", "y ~ race*sex", "--id", "rge"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let white = text.lines().find(|l| l.trim_start().starts_with("White (")).unwrap();
    assert!(white.ends_with("ref      ref"), "{white}");
    assert!(text.lines().filter(|l| l.ends_with("ref      ref")).count() >= 6);

    let abc = stdout(&catmod(&["fit", "--data", data, "--formula", "y ~ race*sex"]));
    assert!(!abc.contains(" ref"));
    for level in ["White", "Black", "Hispanic", "Female", "Male"] {
        assert!(abc.contains(&format!("  {level} (")), "{level} missing");
    }

    let o = catmod(&["fit", "--data", data, "--formula", "y ~ race", "--id", "rge", "--ref", "race=Black"]);
    let black = stdout(&o).lines().find(|l| l.trim_start().starts_with("Black (")).unwrap().to_string();
    assert!(black.ends_with("ref      ref"));
}

#[test]
fn diagnose_tables_match_fixtures() {
    let data = fixtures().join("race_sex.csv");
    for (id, file) in [("rge", "race_sex_rge.txt"), ("abc", "race_sex_abc.txt")] {
        let o = catmod(&[
            "diagnose", "--data", data.to_str().unwrap(), "--formula", "y ~ race + sex",
            "--formula-cm", "y ~ race*sex", "--id", id,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let expected = std::fs::read_to_string(fixtures().join(file)).unwrap();
        let text = stdout(&o);
        assert!(text.starts_with(&expected), "{id}:\n{text}");
        assert!(text.contains("S^2 <= S_M^2"));
    }
}

#[test]
fn abc_diagnosis_of_two_way_anova_reports_unchanged_main_effects() {
    let data = fixtures().join("race_sex.csv");
    let o = catmod(&[
        "diagnose", "--data", data.to_str().unwrap(), "--formula", "y ~ race + sex",
        "--formula-cm", "y ~ race*sex", "--out", "csv",
    ]);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 6);
    for r in &rows {
        assert!(r[3].parse::<f64>().unwrap() < 1e-8, "{:?}", r);
        assert_eq!(&r[7], "unchanged");
    }
}

#[test]
fn cat_cont_diagnosis_includes_equal_variance_condition() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = String::from("x,g,y\n");
    for i in 0..30 {
        let x = (i as f64 * 0.37).sin() * (1.0 + (i % 3) as f64);
        let y = 1.0 + x * (1.0 + (i % 3) as f64 * 0.5) + (i as f64 * 1.3).cos();
        body.push_str(&format!("{x},{},{y}\n", ["a", "b", "c"][i % 3]));
    }
    let data = write(dir.path(), "cc.csv", &body);
    let o = catmod(&["diagnose", "--data", &data, "--formula", "y ~ x + g", "--formula-cm", "y ~ x*g"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Condition: "), "{}", stdout(&o));
}

#[test]
fn csv_output_round_trips_at_full_precision() {
    let data = fixtures().join("race_sex.csv");
    let path = data.to_str().unwrap();
    for id in ["abc", "rge", "stz"] {
        let o = catmod(&["fit", "--data", path, "--formula", "y ~ race*sex", "--id", id, "--out", "csv"]);
        let rows = csv_rows(&stdout(&o));
        let d = load_csv(&data, &TypeHints::new()).unwrap();
        let scheme = match id {
            "abc" => Scheme::Abc,
            "rge" => Scheme::Rge,
            _ => Scheme::Stz,
        };
        let f = fit_formula(&d, "y ~ race*sex", &FitOptions::default().with_identification(scheme)).unwrap();
        assert_eq!(rows.len(), f.coefficients.len());
        for r in &rows {
            let estimate: f64 = r[2].parse().unwrap();
            assert_eq!(estimate.to_bits(), f.coef(&r[0]).unwrap().to_bits(), "{id} {}", &r[0]);
        }
    }
}

#[test]
fn logistic_fits_use_normal_reference() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(
        dir.path(),
        "b.csv",
        "x,g,y\n0.1,a,0\n0.5,a,1\n-0.3,b,1\n1.2,b,0\n0.7,a,1\n-1,b,0\n0.2,a,0\n0.9,b,1\n0.4,a,1\n-0.6,b,0\n",
    );
    let o = catmod(&["fit", "--data", &data, "--formula", "y ~ x + g", "--family", "binomial"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("binomial; n = 10; p-values from normal"), "{}", stdout(&o));
}

#[test]
fn penalized_fit_reports_selected_lambda() {
    let data = fixtures().join("race_sex.csv");
    let o = catmod(&[
        "fit", "--data", data.to_str().unwrap(), "--formula", "y ~ race*sex", "--penalty", "ridge",
        "--folds", "5", "--rule", "min", "--out", "csv",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("lambda,(Intercept),"));
    assert_eq!(csv_rows(&text).len(), 50);
}

fn assert_fails(args: &[&str], code: i32) {
    let o = catmod(args);
    assert_eq!(o.status.code(), Some(code), "{args:?}: {}", stderr(&o));
    assert!(o.stdout.is_empty(), "partial output for {args:?}");
    assert!(!stderr(&o).trim().is_empty());
}

#[test]
fn exit_codes_follow_the_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.csv", "y,g\n1,A\n2,A\n3,B\n");
    let na = write(dir.path(), "na.csv", "y,g\n1,A\nNA,A\n3,B\n");
    let empty = write(dir.path(), "empty.csv", "a,b,y\np,u,1\np,v,2\nq,u,3\nq,u,4\n");
    let sep = write(dir.path(), "sep.csv", "x,y\n1,0\n2,0\n3,0\n4,1\n5,1\n6,1\n");

    assert_fails(&["fit", "--data", &good, "--formula", "y ~ g +"], 2);
    assert_fails(&["fit", "--data", &good, "--formula", "y ~ h"], 2);
    assert_fails(&["fit", "--data", &good, "--formula", "y ~ g", "--level", "1.5"], 2);
    assert_fails(&["fit", "--data", &good, "--formula", "y ~ g", "--ref", "g=A"], 2);
    assert_fails(&["fit", "--data", &good, "--formula", "y ~ g", "--id", "rge", "--ref", "gA"], 2);
    assert_fails(&["fit", "--data", &good, "--formula", "y ~ g", "--id", "xyz"], 2);
    assert_fails(&["diagnose", "--data", &good, "--formula", "y ~ g", "--formula-cm", "y ~ 1"], 2);
    assert_fails(&["fit", "--data", &na, "--formula", "y ~ g"], 3);
    assert_fails(&["fit", "--data", "/nonexistent/file.csv", "--formula", "y ~ g"], 3);
    assert_fails(&["fit", "--data", &empty, "--formula", "y ~ a*b"], 4);
    assert_fails(&["fit", "--data", &sep, "--formula", "y ~ x", "--family", "binomial"], 5);
    assert_fails(&["simulate", "--study", "two_way", "--reps", "0"], 2);
}

#[test]
fn simulation_is_reproducible() {
    let run = |dir: &Path| {
        let o = Command::new(env!("CARGO_BIN_EXE_catmod"))
            .args(["simulate", "--study", "two_way", "--gamma", "0", "--n", "500", "--reps", "50", "--seed", "7"])
            .env("CATMOD_OUT_DIR", dir)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        let summary: Vec<String> = stdout(&o).lines().filter(|l| !l.starts_with("wrote")).map(String::from).collect();
        let reps = std::fs::read(dir.join("two_way_replications.csv")).unwrap();
        let agg = std::fs::read(dir.join("two_way_aggregate.csv")).unwrap();
        (summary, reps, agg)
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run(a.path());
    assert_eq!(first, run(b.path()));
    assert!(first.0[0].starts_with("two_way: n = 500, gamma = 0"));
    assert_eq!(csv_rows(&String::from_utf8(first.2).unwrap()).len(), 3 * 2 * 2);
}

#[test]
fn small_multi_study_notes_the_dropped_interaction() {
    let dir = tempfile::tempdir().unwrap();
    let o = catmod(&[
        "simulate", "--study", "multi", "--n", "200", "--reps", "3", "--seed", "1", "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("race:sex dropped"), "{}", stderr(&o));
    assert!(dir.path().join("multi_aggregate.csv").exists());
}
