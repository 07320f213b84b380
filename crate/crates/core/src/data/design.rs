use std::ops::Range;

use nalgebra::DMatrix;

use super::{Centering, Dataset, Factor};
use crate::error::{Error, Result};
use crate::formula::ModelSpec;

/// A model term. Indices refer to `ModelSpec::continuous` (j) and
/// `ModelSpec::categorical` (k).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Intercept,
    Continuous(usize),
    CatMain(usize),
    CatCont(usize, usize),
    CatCat(usize, usize),
}

/// What a single design column represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TermTag {
    Intercept,
    Continuous(usize),
    CatMain(usize, usize),
    CatCont(usize, usize, usize),
    CatCat(usize, usize, usize, usize),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ColumnInfo {
    pub tag: TermTag,
    /// Index into `DesignInfo::terms`.
    pub term: usize,
    /// Unambiguous label, e.g. `x:race[B]`.
    pub label: String,
    /// Short label used in printed tables, e.g. `x:B`.
    pub display: String,
}

/// Column metadata shared by every fit on the same design.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DesignInfo {
    pub spec: ModelSpec,
    /// Level labels for each categorical in `spec.categorical`.
    pub levels: Vec<Vec<String>>,
    pub terms: Vec<Term>,
    pub term_ranges: Vec<Range<usize>>,
    pub columns: Vec<ColumnInfo>,
    /// Transform that was applied to the continuous covariates.
    pub centering: Centering,
}

impl DesignInfo {
    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn term_index(&self, term: Term) -> Option<usize> {
        self.terms.iter().position(|&t| t == term)
    }

    pub fn column_of(&self, tag: TermTag) -> Option<usize> {
        self.columns.iter().position(|c| c.tag == tag)
    }

    pub fn label(&self, col: usize) -> &str {
        &self.columns[col].label
    }

    /// Human-readable name of a term, e.g. `x:race`.
    pub fn term_name(&self, term: Term) -> String {
        let s = &self.spec;
        match term {
            Term::Intercept => "(Intercept)".into(),
            Term::Continuous(j) => s.continuous[j].clone(),
            Term::CatMain(k) => s.categorical[k].clone(),
            Term::CatCont(j, k) => format!("{}:{}", s.continuous[j], s.categorical[k]),
            Term::CatCat(k, k2) => format!("{}:{}", s.categorical[k], s.categorical[k2]),
        }
    }

    /// Builds the design rows for `data` using this design's levels and
    /// centering. Unseen levels are errors; levels are matched by label.
    pub fn rows_for(&self, data: &Dataset) -> Result<DMatrix<f64>> {
        let transformed = self.centering.apply(data)?;
        let factors = self
            .spec
            .categorical
            .iter()
            .zip(&self.levels)
            .map(|(name, levels)| {
                let f = data.factor(name)?;
                let map: Vec<usize> = f
                    .levels()
                    .iter()
                    .map(|l| {
                        levels.iter().position(|t| t == l).ok_or_else(|| {
                            Error::Data(format!("level '{l}' of '{name}' was not seen in training"))
                        })
                    })
                    .collect::<Result<_>>()?;
                Factor::new(f.codes().iter().map(|&c| map[c]).collect(), levels.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        let xs = self
            .spec
            .continuous
            .iter()
            .map(|name| transformed.continuous(name))
            .collect::<Result<Vec<_>>>()?;
        Ok(fill(self, data.n(), &xs, &factors))
    }
}

/// The full-rank-deficient design: intercept, continuous columns, one
/// indicator per level of every categorical, and every interaction column.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: DMatrix<f64>,
    pub info: DesignInfo,
}

impl DesignMatrix {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

fn layout(spec: &ModelSpec, levels: &[Vec<String>]) -> (Vec<Term>, Vec<Range<usize>>, Vec<ColumnInfo>) {
    let mut terms = vec![Term::Intercept];
    terms.extend((0..spec.continuous.len()).map(Term::Continuous));
    terms.extend((0..spec.categorical.len()).map(Term::CatMain));
    for (x, c) in &spec.cat_cont {
        let j = spec.continuous_index(x).expect("validated spec");
        let k = spec.categorical_index(c).expect("validated spec");
        terms.push(Term::CatCont(j, k));
    }
    for (a, b) in &spec.cat_cat {
        let k = spec.categorical_index(a).expect("validated spec");
        let k2 = spec.categorical_index(b).expect("validated spec");
        terms.push(Term::CatCat(k, k2));
    }

    let mut columns = Vec::new();
    let mut ranges = Vec::new();
    for (t, &term) in terms.iter().enumerate() {
        let start = columns.len();
        let mut push = |tag: TermTag, label: String, display: String| {
            columns.push(ColumnInfo {
                tag,
                term: t,
                label,
                display,
            })
        };
        match term {
            Term::Intercept => push(TermTag::Intercept, "(Intercept)".into(), "Intercept".into()),
            Term::Continuous(j) => {
                let name = &spec.continuous[j];
                push(TermTag::Continuous(j), name.clone(), name.clone())
            }
            Term::CatMain(k) => {
                let name = &spec.categorical[k];
                for (l, level) in levels[k].iter().enumerate() {
                    push(TermTag::CatMain(k, l), format!("{name}[{level}]"), level.clone());
                }
            }
            Term::CatCont(j, k) => {
                let (x, name) = (&spec.continuous[j], &spec.categorical[k]);
                for (l, level) in levels[k].iter().enumerate() {
                    push(
                        TermTag::CatCont(j, k, l),
                        format!("{x}:{name}[{level}]"),
                        format!("{x}:{level}"),
                    );
                }
            }
            Term::CatCat(k, k2) => {
                let (a, b) = (&spec.categorical[k], &spec.categorical[k2]);
                // First variable varies fastest.
                for (l2, lev2) in levels[k2].iter().enumerate() {
                    for (l, lev) in levels[k].iter().enumerate() {
                        push(
                            TermTag::CatCat(k, k2, l, l2),
                            format!("{a}[{lev}]:{b}[{lev2}]"),
                            format!("{lev}:{lev2}"),
                        );
                    }
                }
            }
        }
        ranges.push(start..columns.len());
    }
    (terms, ranges, columns)
}

fn fill(info: &DesignInfo, n: usize, xs: &[&[f64]], factors: &[Factor]) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, info.columns.len());
    for (col, c) in info.columns.iter().enumerate() {
        match c.tag {
            TermTag::Intercept => x.column_mut(col).fill(1.0),
            TermTag::Continuous(j) => {
                for i in 0..n {
                    x[(i, col)] = xs[j][i];
                }
            }
            TermTag::CatMain(k, l) => {
                for i in 0..n {
                    if factors[k].codes()[i] == l {
                        x[(i, col)] = 1.0;
                    }
                }
            }
            TermTag::CatCont(j, k, l) => {
                for i in 0..n {
                    if factors[k].codes()[i] == l {
                        x[(i, col)] = xs[j][i];
                    }
                }
            }
            TermTag::CatCat(k, k2, l, l2) => {
                for i in 0..n {
                    if factors[k].codes()[i] == l && factors[k2].codes()[i] == l2 {
                        x[(i, col)] = 1.0;
                    }
                }
            }
        }
    }
    x
}

/// Builds the design for `spec` from `data`, whose continuous covariates are
/// assumed already transformed by `centering` (pass [`Centering::identity`]
/// when no transform was applied).
///
/// Every categorical level must be observed, as must every cell of each
/// cat-cat interaction.
pub fn build_design(spec: &ModelSpec, data: &Dataset, centering: Centering) -> Result<DesignMatrix> {
    let factors: Vec<Factor> = spec
        .categorical
        .iter()
        .map(|name| data.factor(name).cloned())
        .collect::<Result<_>>()?;
    for (name, f) in spec.categorical.iter().zip(&factors) {
        if let Some(l) = f.counts().iter().position(|&c| c == 0) {
            return Err(Error::EmptyCell(format!(
                "level '{}' of '{name}' has no observations",
                f.levels()[l]
            )));
        }
    }
    for (a, b) in &spec.cat_cat {
        let (k, k2) = (
            spec.categorical_index(a).expect("validated spec"),
            spec.categorical_index(b).expect("validated spec"),
        );
        let (fa, fb) = (&factors[k], &factors[k2]);
        let mut counts = vec![vec![0usize; fb.n_levels()]; fa.n_levels()];
        for (&ca, &cb) in fa.codes().iter().zip(fb.codes()) {
            counts[ca][cb] += 1;
        }
        for (l, row) in counts.iter().enumerate() {
            if let Some(l2) = row.iter().position(|&c| c == 0) {
                return Err(Error::EmptyCell(format!(
                    "no observations with {a}={} and {b}={}",
                    fa.levels()[l],
                    fb.levels()[l2]
                )));
            }
        }
    }
    let xs = spec
        .continuous
        .iter()
        .map(|name| data.continuous(name))
        .collect::<Result<Vec<_>>>()?;
    data.continuous(&spec.response)?;

    let levels: Vec<Vec<String>> = factors.iter().map(|f| f.levels().to_vec()).collect();
    let (terms, term_ranges, columns) = layout(spec, &levels);
    for name in &centering.variables {
        if spec.continuous_index(name).is_none() {
            return Err(Error::InvalidArgument(format!(
                "centering refers to '{name}', which is not a continuous model term"
            )));
        }
    }
    let info = DesignInfo {
        spec: spec.clone(),
        levels,
        terms,
        term_ranges,
        columns,
        centering,
    };
    let x = fill(&info, data.n(), &xs, &factors);
    Ok(DesignMatrix { x, info })
}
