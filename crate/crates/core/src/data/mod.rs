//! Tabular data, categorical proportions, centering and design matrices.

mod design;
mod proportions;
mod table;

pub use design::{build_design, ColumnInfo, DesignInfo, DesignMatrix, Term, TermTag};
pub use proportions::{compute_proportions, ProportionSource, ProportionTable};
pub use table::{load_csv, load_table, TypeHints};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::formula::{Schema, VarKind};

/// A categorical column: one level code per row plus the ordered level labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    codes: Vec<usize>,
    levels: Vec<String>,
}

impl Factor {
    pub fn new(codes: Vec<usize>, levels: Vec<String>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for level in &levels {
            if !seen.insert(level.as_str()) {
                return Err(Error::Data(format!("duplicate level label '{level}'")));
            }
        }
        if let Some(&bad) = codes.iter().find(|&&c| c >= levels.len()) {
            return Err(Error::Data(format!(
                "level code {bad} out of range for {} levels",
                levels.len()
            )));
        }
        Ok(Self { codes, levels })
    }

    /// Builds a factor from labels, ordering levels by first appearance.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Self {
        let mut levels: Vec<String> = Vec::new();
        let mut index: IndexMap<String, usize> = IndexMap::new();
        let codes = labels
            .iter()
            .map(|l| {
                let l = l.as_ref();
                *index.entry(l.to_string()).or_insert_with(|| {
                    levels.push(l.to_string());
                    levels.len() - 1
                })
            })
            .collect();
        Self { codes, levels }
    }

    pub fn codes(&self) -> &[usize] {
        &self.codes
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_index(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == label)
    }

    pub fn label(&self, row: usize) -> &str {
        &self.levels[self.codes[row]]
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.levels.len()];
        for &c in &self.codes {
            counts[c] += 1;
        }
        counts
    }

    /// Re-expresses the factor with `order` as its level list. Every current
    /// label must appear in `order`; extra labels become empty levels.
    pub fn reorder(&self, order: &[String]) -> Result<Self> {
        let map: Vec<usize> = self
            .levels
            .iter()
            .map(|l| {
                order.iter().position(|o| o == l).ok_or_else(|| {
                    Error::Data(format!("level '{l}' missing from the requested level order"))
                })
            })
            .collect::<Result<_>>()?;
        Factor::new(self.codes.iter().map(|&c| map[c]).collect(), order.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Continuous(Vec<f64>),
    Categorical(Factor),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Continuous(v) => v.len(),
            Column::Categorical(f) => f.codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> VarKind {
        match self {
            Column::Continuous(_) => VarKind::Continuous,
            Column::Categorical(_) => VarKind::Categorical,
        }
    }

    fn subset(&self, rows: &[usize]) -> Column {
        match self {
            Column::Continuous(v) => Column::Continuous(rows.iter().map(|&i| v[i]).collect()),
            Column::Categorical(f) => Column::Categorical(Factor {
                codes: rows.iter().map(|&i| f.codes[i]).collect(),
                levels: f.levels.clone(),
            }),
        }
    }
}

/// Named columns of equal length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    n: usize,
    columns: IndexMap<String, Column>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, name: impl Into<String>, column: Column) -> Result<()> {
        let name = name.into();
        if self.columns.is_empty() {
            self.n = column.len();
        } else if column.len() != self.n {
            return Err(Error::Data(format!(
                "column '{name}' has {} rows, expected {}",
                column.len(),
                self.n
            )));
        }
        if self.columns.contains_key(&name) {
            return Err(Error::Data(format!("duplicate column '{name}'")));
        }
        if let Column::Continuous(v) = &column {
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite value in column '{name}' at row {}",
                    i + 1
                )));
            }
        }
        self.columns.insert(name, column);
        Ok(())
    }

    pub fn push_continuous(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        self.push(name, Column::Continuous(values))
    }

    pub fn push_categorical<S: AsRef<str>>(
        &mut self,
        name: impl Into<String>,
        labels: &[S],
    ) -> Result<()> {
        self.push(name, Column::Categorical(Factor::from_labels(labels)))
    }

    /// Replaces an existing column, keeping its position.
    pub fn replace(&mut self, name: &str, column: Column) -> Result<()> {
        if column.len() != self.n {
            return Err(Error::Data(format!(
                "column '{name}' has {} rows, expected {}",
                column.len(),
                self.n
            )));
        }
        match self.columns.get_mut(name) {
            Some(slot) => {
                *slot = column;
                Ok(())
            }
            None => Err(Error::Data(format!("unknown column '{name}'"))),
        }
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .get(name)
            .ok_or_else(|| Error::Data(format!("unknown column '{name}'")))
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.columns.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn continuous(&self, name: &str) -> Result<&[f64]> {
        match self.column(name)? {
            Column::Continuous(v) => Ok(v),
            Column::Categorical(_) => {
                Err(Error::Data(format!("column '{name}' is categorical, not continuous")))
            }
        }
    }

    pub fn factor(&self, name: &str) -> Result<&Factor> {
        match self.column(name)? {
            Column::Categorical(f) => Ok(f),
            Column::Continuous(_) => {
                Err(Error::Data(format!("column '{name}' is continuous, not categorical")))
            }
        }
    }

    pub fn schema(&self) -> Schema {
        self.columns
            .iter()
            .map(|(k, c)| (k.clone(), c.kind()))
            .collect()
    }

    /// Rows `rows` (in that order) of every column. Categorical level lists
    /// are kept even when a level no longer occurs.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n) {
            return Err(Error::Data(format!("row index {bad} out of range")));
        }
        Ok(Dataset {
            n: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|(k, c)| (k.clone(), c.subset(rows)))
                .collect(),
        })
    }

    /// Imposes an explicit level order on a categorical column.
    pub fn set_level_order(&mut self, name: &str, order: &[String]) -> Result<()> {
        let reordered = self.factor(name)?.reorder(order)?;
        self.replace(name, Column::Categorical(reordered))
    }
}

/// Per-variable location and scale applied to continuous covariates.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Centering {
    pub variables: Vec<String>,
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Centering {
    /// No shift and unit scale for each variable.
    pub fn identity(variables: &[String]) -> Self {
        Self {
            variables: variables.to_vec(),
            centers: vec![0.0; variables.len()],
            scales: vec![1.0; variables.len()],
        }
    }

    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        self.variables
            .iter()
            .position(|v| v == name)
            .map(|i| (self.centers[i], self.scales[i]))
    }

    /// Applies the stored transform to `name` in `data`.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let mut out = data.clone();
        for (i, name) in self.variables.iter().enumerate() {
            let (c, s) = (self.centers[i], self.scales[i]);
            let values = data.continuous(name)?.iter().map(|&x| (x - c) / s).collect();
            out.replace(name, Column::Continuous(values))?;
        }
        Ok(out)
    }
}

/// Subtracts the sample mean of each listed column and, if `standardize`,
/// divides by the sample standard deviation (n − 1 divisor).
pub fn center_continuous(
    data: &Dataset,
    vars: &[String],
    standardize: bool,
) -> Result<(Dataset, Centering)> {
    let mut centers = Vec::with_capacity(vars.len());
    let mut scales = Vec::with_capacity(vars.len());
    for name in vars {
        let x = data.continuous(name)?;
        if x.is_empty() {
            return Err(Error::Data(format!("column '{name}' has no rows")));
        }
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let scale = if standardize {
            let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
            let sd = if x.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
            if !(sd > 0.0) {
                return Err(Error::Data(format!(
                    "column '{name}' has zero variance and cannot be standardized"
                )));
            }
            sd
        } else {
            1.0
        };
        centers.push(mean);
        scales.push(scale);
    }
    let centering = Centering {
        variables: vars.to_vec(),
        centers,
        scales,
    };
    Ok((centering.apply(data)?, centering))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_first_appearance_order() {
        let f = Factor::from_labels(&["b", "a", "b", "c"]);
        assert_eq!(f.levels(), &["b", "a", "c"]);
        assert_eq!(f.codes(), &[0, 1, 0, 2]);
        assert_eq!(f.counts(), vec![2, 1, 1]);
    }

    #[test]
    fn reorder_levels() {
        let f = Factor::from_labels(&["b", "a", "b"]);
        let g = f.reorder(&["a".into(), "b".into()]).unwrap();
        assert_eq!(g.codes(), &[1, 0, 1]);
        assert!(f.reorder(&["a".into()]).is_err());
    }

    #[test]
    fn ragged_push_is_rejected() {
        let mut d = Dataset::new();
        d.push_continuous("x", vec![1.0, 2.0]).unwrap();
        assert!(d.push_continuous("z", vec![1.0]).is_err());
        assert!(d.push_continuous("x", vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn centering_examples() {
        let mut d = Dataset::new();
        d.push_continuous("x", vec![1.0, 2.0, 3.0]).unwrap();
        d.push_continuous("z", vec![-1.0, 0.0, 1.0]).unwrap();
        d.push_continuous("k", vec![0.0, 0.0, 0.0]).unwrap();
        let (c, info) = center_continuous(&d, &["x".into(), "z".into()], false).unwrap();
        assert_eq!(c.continuous("x").unwrap(), &[-1.0, 0.0, 1.0]);
        assert_eq!(info.centers, vec![2.0, 0.0]);
        assert_eq!(c.continuous("z").unwrap(), &[-1.0, 0.0, 1.0]);

        let (s, info) = center_continuous(&d, &["x".into()], true).unwrap();
        assert_eq!(info.scales, vec![1.0]);
        assert_eq!(s.continuous("x").unwrap(), &[-1.0, 0.0, 1.0]);
        assert!(center_continuous(&d, &["k".into()], true).is_err());
        assert!(center_continuous(&d, &["k".into()], false).is_ok());
    }

    #[test]
    fn subset_keeps_levels() {
        let mut d = Dataset::new();
        d.push_categorical("g", &["A", "B", "A"]).unwrap();
        let s = d.subset(&[0, 2]).unwrap();
        assert_eq!(s.factor("g").unwrap().levels(), &["A", "B"]);
        assert_eq!(s.factor("g").unwrap().counts(), vec![2, 0]);
    }
}
