//! Identification constraints and their nullspace bases.
//!
//! Three schemes are available:
//!
//! * ABC (abundance-based): every categorical coefficient block averages to
//!   zero under the category proportions.
//! * RGE (reference group encoding): the reference level's coefficients are
//!   pinned to zero.
//! * STZ (sum to zero): every block sums to zero with unit weights.
//!
//! For a cat-cat pair `(k, k')` the ABC and STZ rows are, for every level ℓ'
//! of `k'`, a weighted sum over `k`'s levels, and for every level ℓ of `k`
//! except the first, a weighted sum over `k'`'s levels. The remaining row is
//! implied by the others and is left out so that the rows are independent.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::data::{DesignInfo, ProportionTable, Term, TermTag};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Abc,
    Rge,
    Stz,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Abc => "ABC",
            Scheme::Rge => "RGE",
            Scheme::Stz => "STZ",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A scheme plus, for RGE, optional per-variable reference levels (by
/// label). Variables without an entry use their first level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Identification {
    Abc,
    Rge { references: BTreeMap<String, String> },
    Stz,
}

impl Identification {
    pub fn rge() -> Self {
        Identification::Rge {
            references: BTreeMap::new(),
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            Identification::Abc => Scheme::Abc,
            Identification::Rge { .. } => Scheme::Rge,
            Identification::Stz => Scheme::Stz,
        }
    }
}

impl From<Scheme> for Identification {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Abc => Identification::Abc,
            Scheme::Rge => Identification::rge(),
            Scheme::Stz => Identification::Stz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RowTag {
    /// Index into `DesignInfo::terms` of the term this row constrains.
    pub term: usize,
    pub description: String,
}

/// The m×P constraint matrix `A` with `Aθ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    pub a: DMatrix<f64>,
    pub scheme: Scheme,
    pub rows: Vec<RowTag>,
    pub column_labels: Vec<String>,
}

impl ConstraintMatrix {
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn p(&self) -> usize {
        self.a.ncols()
    }

    /// Columns pinned to zero by a single-entry row (RGE reference levels).
    pub fn pinned_columns(&self) -> Vec<bool> {
        let mut pinned = vec![false; self.p()];
        for row in self.a.row_iter() {
            let nz: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, _)| i)
                .collect();
            if let [only] = nz[..] {
                pinned[only] = true;
            }
        }
        pinned
    }

    /// Sets coefficients (and their covariance rows) that a single-entry row
    /// pins to zero to exactly zero, removing rounding residue.
    pub fn zero_pinned(&self, coefs: &mut DVector<f64>, vcov: &mut DMatrix<f64>) {
        for (c, pinned) in self.pinned_columns().into_iter().enumerate() {
            if pinned {
                coefs[c] = 0.0;
                vcov.row_mut(c).fill(0.0);
                vcov.column_mut(c).fill(0.0);
            }
        }
    }

    /// CSV with one row per constraint: tag, then one weight per column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("constraint");
        for label in &self.column_labels {
            out.push(',');
            out.push_str(&csv_field(label));
        }
        out.push('\n');
        for (i, tag) in self.rows.iter().enumerate() {
            out.push_str(&csv_field(&tag.description));
            for v in self.a.row(i).iter() {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Orthonormal basis `Q` of the nullspace of a constraint matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NullspaceBasis {
    pub q: DMatrix<f64>,
}

struct Rows<'a> {
    info: &'a DesignInfo,
    a: Vec<Vec<f64>>,
    tags: Vec<RowTag>,
}

impl Rows<'_> {
    fn push(&mut self, term: usize, description: String, entries: &[(TermTag, f64)]) {
        let mut row = vec![0.0; self.info.n_columns()];
        for &(tag, w) in entries {
            row[self.info.column_of(tag).expect("tag from layout")] = w;
        }
        self.a.push(row);
        self.tags.push(RowTag { term, description });
    }
}

fn reference_levels(info: &DesignInfo, id: &Identification) -> Result<Vec<usize>> {
    let mut refs = vec![0; info.spec.categorical.len()];
    if let Identification::Rge { references } = id {
        for (var, level) in references {
            let k = info.spec.categorical_index(var).ok_or_else(|| {
                Error::Spec(format!("reference given for '{var}', which is not a categorical model term"))
            })?;
            refs[k] = info.levels[k].iter().position(|l| l == level).ok_or_else(|| {
                Error::Spec(format!("'{level}' is not a level of '{var}'"))
            })?;
        }
    }
    Ok(refs)
}

/// Builds the constraint matrix for `info` under `id`. ABC needs the
/// proportion table; RGE and STZ ignore it.
pub fn build_constraints(
    info: &DesignInfo,
    props: Option<&ProportionTable>,
    id: &Identification,
) -> Result<ConstraintMatrix> {
    let scheme = id.scheme();
    let spec = &info.spec;
    let refs = reference_levels(info, id)?;
    let mut rows = Rows {
        info,
        a: Vec::new(),
        tags: Vec::new(),
    };

    let props = match (scheme, props) {
        (Scheme::Abc, None) if !spec.categorical.is_empty() => {
            return Err(Error::InvalidArgument(
                "abundance-based constraints need a proportion table".into(),
            ))
        }
        (_, p) => p,
    };
    let marginal = |k: usize| -> Result<Vec<f64>> {
        let name = &spec.categorical[k];
        let props = props.expect("checked above");
        let levels = props.levels(name)?;
        if levels != info.levels[k].as_slice() {
            return Err(Error::InvalidArgument(format!(
                "proportion table levels for '{name}' do not match the design"
            )));
        }
        let pi = props.marginal(name)?;
        if let Some(l) = pi.iter().position(|&p| p <= 0.0) {
            return Err(Error::EmptyCell(format!(
                "level '{}' of '{name}' has zero proportion",
                info.levels[k][l]
            )));
        }
        Ok(pi)
    };
    let weights = |k: usize| -> Result<Vec<f64>> {
        match scheme {
            Scheme::Abc => marginal(k),
            _ => Ok(vec![1.0; info.levels[k].len()]),
        }
    };

    for (t, &term) in info.terms.iter().enumerate() {
        let name = info.term_name(term);
        match term {
            Term::Intercept | Term::Continuous(_) => {}
            Term::CatMain(k) => {
                if scheme == Scheme::Rge {
                    let r = refs[k];
                    rows.push(
                        t,
                        format!("{name}[{}] = 0", info.levels[k][r]),
                        &[(TermTag::CatMain(k, r), 1.0)],
                    );
                } else {
                    let w = weights(k)?;
                    let entries: Vec<_> = w
                        .iter()
                        .enumerate()
                        .map(|(l, &w)| (TermTag::CatMain(k, l), w))
                        .collect();
                    rows.push(t, format!("{name} weighted sum = 0"), &entries);
                }
            }
            Term::CatCont(j, k) => {
                if scheme == Scheme::Rge {
                    let r = refs[k];
                    rows.push(
                        t,
                        format!("{name}[{}] = 0", info.levels[k][r]),
                        &[(TermTag::CatCont(j, k, r), 1.0)],
                    );
                } else {
                    let w = weights(k)?;
                    let entries: Vec<_> = w
                        .iter()
                        .enumerate()
                        .map(|(l, &w)| (TermTag::CatCont(j, k, l), w))
                        .collect();
                    rows.push(t, format!("{name} weighted sum = 0"), &entries);
                }
            }
            Term::CatCat(k, k2) => {
                let (la, lb) = (info.levels[k].len(), info.levels[k2].len());
                let (a_name, b_name) = (&spec.categorical[k], &spec.categorical[k2]);
                if scheme == Scheme::Rge {
                    let (r, r2) = (refs[k], refs[k2]);
                    for l2 in 0..lb {
                        rows.push(
                            t,
                            format!("{name}[{}, {}] = 0", info.levels[k][r], info.levels[k2][l2]),
                            &[(TermTag::CatCat(k, k2, r, l2), 1.0)],
                        );
                    }
                    for l in (0..la).filter(|&l| l != r) {
                        rows.push(
                            t,
                            format!("{name}[{}, {}] = 0", info.levels[k][l], info.levels[k2][r2]),
                            &[(TermTag::CatCat(k, k2, l, r2), 1.0)],
                        );
                    }
                    continue;
                }
                let joint: Vec<Vec<f64>> = match scheme {
                    Scheme::Abc => {
                        marginal(k)?;
                        marginal(k2)?;
                        props.expect("checked above").pair(a_name, b_name)?
                    }
                    _ => vec![vec![1.0; lb]; la],
                };
                for l2 in 0..lb {
                    let entries: Vec<_> = (0..la)
                        .map(|l| (TermTag::CatCat(k, k2, l, l2), joint[l][l2]))
                        .collect();
                    rows.push(
                        t,
                        format!("{name} sum over {a_name} at {b_name}={} = 0", info.levels[k2][l2]),
                        &entries,
                    );
                }
                for l in 1..la {
                    let entries: Vec<_> = (0..lb)
                        .map(|l2| (TermTag::CatCat(k, k2, l, l2), joint[l][l2]))
                        .collect();
                    rows.push(
                        t,
                        format!("{name} sum over {b_name} at {a_name}={} = 0", info.levels[k][l]),
                        &entries,
                    );
                }
            }
        }
    }

    let p = info.n_columns();
    let m = rows.a.len();
    let a = DMatrix::from_fn(m, p, |i, j| rows.a[i][j]);
    Ok(ConstraintMatrix {
        a,
        scheme,
        rows: rows.tags,
        column_labels: info.columns.iter().map(|c| c.label.clone()).collect(),
    })
}

/// Orthonormal nullspace basis from a QR factorization of `Aᵀ`.
pub fn nullspace_basis(constraints: &ConstraintMatrix) -> Result<NullspaceBasis> {
    Ok(NullspaceBasis {
        q: linalg::nullspace(&constraints.a)?,
    })
}

/// Largest absolute constraint residual `max_i |(Aθ)_i|`.
pub fn check_satisfied(coefs: &DVector<f64>, constraints: &ConstraintMatrix) -> Result<f64> {
    if coefs.len() != constraints.p() {
        return Err(Error::Dimension(format!(
            "coefficient vector has {} entries, constraints expect {}",
            coefs.len(),
            constraints.p()
        )));
    }
    Ok(linalg::max_abs(&(&constraints.a * coefs)))
}
