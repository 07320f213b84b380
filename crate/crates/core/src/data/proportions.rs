use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProportionSource {
    Sample,
    Population,
}

/// Joint proportions over the cross of several categorical variables.
///
/// `joint` is stored row-major: the last variable varies fastest.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProportionTable {
    variables: Vec<String>,
    levels: Vec<Vec<String>>,
    joint: Vec<f64>,
    source: ProportionSource,
}

impl ProportionTable {
    /// Validates user-supplied population proportions. Entries must be
    /// non-negative and sum to one within 1e-8; they are then renormalized.
    pub fn population(
        variables: Vec<String>,
        levels: Vec<Vec<String>>,
        joint: Vec<f64>,
    ) -> Result<Self> {
        if variables.len() != levels.len() {
            return Err(Error::InvalidArgument(
                "proportion table needs one level list per variable".into(),
            ));
        }
        let cells: usize = levels.iter().map(Vec::len).product();
        if joint.len() != cells {
            return Err(Error::InvalidArgument(format!(
                "proportion table has {} entries, expected {cells}",
                joint.len()
            )));
        }
        if joint.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument(
                "proportions must be finite and non-negative".into(),
            ));
        }
        let total: f64 = joint.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "proportions sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            variables,
            levels,
            joint: joint.iter().map(|p| p / total).collect(),
            source: ProportionSource::Population,
        })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn levels(&self, var: &str) -> Result<&[String]> {
        Ok(&self.levels[self.index(var)?])
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    pub fn source(&self) -> ProportionSource {
        self.source
    }

    fn index(&self, var: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v == var)
            .ok_or_else(|| Error::InvalidArgument(format!("proportion table has no variable '{var}'")))
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.levels.len()];
        for k in (0..self.levels.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.levels[k + 1].len();
        }
        strides
    }

    fn cell_levels(&self, cell: usize, strides: &[usize]) -> impl Iterator<Item = usize> + '_ {
        let strides = strides.to_vec();
        (0..self.levels.len()).map(move |k| (cell / strides[k]) % self.levels[k].len())
    }

    /// π̂_{k,ℓ} for every level ℓ of `var`.
    pub fn marginal(&self, var: &str) -> Result<Vec<f64>> {
        let k = self.index(var)?;
        let strides = self.strides();
        let mut out = vec![0.0; self.levels[k].len()];
        for (cell, &p) in self.joint.iter().enumerate() {
            out[(cell / strides[k]) % self.levels[k].len()] += p;
        }
        Ok(out)
    }

    /// Two-way table π̂_{k,k'}(ℓ, ℓ') as rows over `a`'s levels.
    pub fn pair(&self, a: &str, b: &str) -> Result<Vec<Vec<f64>>> {
        let (ka, kb) = (self.index(a)?, self.index(b)?);
        if ka == kb {
            return Err(Error::InvalidArgument(format!("pair view needs two variables, got '{a}' twice")));
        }
        let strides = self.strides();
        let mut out = vec![vec![0.0; self.levels[kb].len()]; self.levels[ka].len()];
        for (cell, &p) in self.joint.iter().enumerate() {
            let la = (cell / strides[ka]) % self.levels[ka].len();
            let lb = (cell / strides[kb]) % self.levels[kb].len();
            out[la][lb] += p;
        }
        Ok(out)
    }

    /// Distribution of `var` given `given = level`. Errors when the
    /// conditioning level has zero mass.
    pub fn conditional(&self, var: &str, given: &str, level: usize) -> Result<Vec<f64>> {
        let table = self.pair(given, var)?;
        let row = table.get(level).ok_or_else(|| {
            Error::InvalidArgument(format!("level index {level} out of range for '{given}'"))
        })?;
        let mass: f64 = row.iter().sum();
        if mass <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "conditioning level '{}' of '{given}' has zero mass",
                self.levels[self.index(given)?][level]
            )));
        }
        Ok(row.iter().map(|p| p / mass).collect())
    }

    /// Proportion of the combination `levels` (one index per variable).
    pub fn cell(&self, levels: &[usize]) -> f64 {
        let strides = self.strides();
        self.joint[levels.iter().zip(&strides).map(|(l, s)| l * s).sum::<usize>()]
    }

    /// Every level combination with its proportion, in storage order.
    pub fn cells(&self) -> Vec<(Vec<usize>, f64)> {
        let strides = self.strides();
        self.joint
            .iter()
            .enumerate()
            .map(|(cell, &p)| (self.cell_levels(cell, &strides).collect(), p))
            .collect()
    }
}

/// Sample proportions over the joint cross of `cats`.
pub fn compute_proportions(data: &Dataset, cats: &[String]) -> Result<ProportionTable> {
    if cats.is_empty() {
        return Err(Error::InvalidArgument(
            "proportions need at least one categorical variable".into(),
        ));
    }
    if data.n() == 0 {
        return Err(Error::Data("no rows to compute proportions from".into()));
    }
    let factors = cats
        .iter()
        .map(|c| data.factor(c))
        .collect::<Result<Vec<_>>>()?;
    for (name, f) in cats.iter().zip(&factors) {
        if let Some(empty) = f.counts().iter().position(|&c| c == 0) {
            return Err(Error::EmptyCell(format!(
                "level '{}' of '{name}' has no observations",
                f.levels()[empty]
            )));
        }
    }
    let levels: Vec<Vec<String>> = factors.iter().map(|f| f.levels().to_vec()).collect();
    let mut table = ProportionTable {
        variables: cats.to_vec(),
        joint: vec![0.0; levels.iter().map(Vec::len).product()],
        levels,
        source: ProportionSource::Sample,
    };
    let strides = table.strides();
    let mut counts = vec![0usize; table.joint.len()];
    for i in 0..data.n() {
        let cell: usize = factors
            .iter()
            .zip(&strides)
            .map(|(f, s)| f.codes()[i] * s)
            .sum();
        counts[cell] += 1;
    }
    let n = data.n() as f64;
    table.joint = counts.iter().map(|&c| c as f64 / n).collect();
    Ok(table)
}
