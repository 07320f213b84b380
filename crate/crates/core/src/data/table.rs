use std::io::Read;
use std::path::Path;

use indexmap::IndexMap;

use super::{Column, Dataset, Factor};
use crate::error::{Error, Result};
use crate::formula::VarKind;

/// Optional per-column type overrides for [`load_table`].
pub type TypeHints = IndexMap<String, VarKind>;

const MISSING: [&str; 4] = ["", "NA", "NaN", "."];

fn is_missing(cell: &str) -> bool {
    MISSING.iter().any(|m| cell.eq_ignore_ascii_case(m))
}

/// Reads comma-separated text with a header row.
///
/// Columns whose every cell parses as a real number become continuous; the
/// rest become categorical with levels in first-appearance order. `hints`
/// force a column's kind. Missing cells (`""`, `NA`, `NaN`, `.`) are errors.
pub fn load_table<R: Read>(source: R, hints: &TypeHints) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers: Vec<String> = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Data("empty file: no header row".into()));
    }
    for hint in hints.keys() {
        if !headers.contains(hint) {
            return Err(Error::Data(format!("type hint for unknown column '{hint}'")));
        }
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        for (j, cell) in record.iter().enumerate() {
            if is_missing(cell) {
                return Err(Error::Data(format!(
                    "missing value at row {}, column '{}'",
                    row + 1,
                    headers[j]
                )));
            }
            cells[j].push(cell.to_string());
        }
    }
    if cells[0].is_empty() {
        return Err(Error::Data("empty file: no data rows".into()));
    }

    let mut data = Dataset::new();
    for (name, raw) in headers.iter().zip(cells) {
        let parsed: Option<Vec<f64>> = raw.iter().map(|c| c.parse::<f64>().ok()).collect();
        let column = match (hints.get(name), parsed) {
            (Some(VarKind::Categorical), _) => Column::Categorical(Factor::from_labels(&raw)),
            (Some(VarKind::Continuous), Some(values)) | (None, Some(values)) => {
                Column::Continuous(values)
            }
            (Some(VarKind::Continuous), None) => {
                let (row, cell) = raw
                    .iter()
                    .enumerate()
                    .find(|(_, c)| c.parse::<f64>().is_err())
                    .expect("some cell failed to parse");
                return Err(Error::Data(format!(
                    "column '{name}' is declared continuous but row {} holds '{cell}'",
                    row + 1
                )));
            }
            (None, None) => Column::Categorical(Factor::from_labels(&raw)),
        };
        data.push(name.clone(), column)?;
    }
    Ok(data)
}

pub fn load_csv(path: impl AsRef<Path>, hints: &TypeHints) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open '{}': {e}", path.display())))?;
    load_table(std::io::BufReader::new(file), hints)
}

fn csv_error(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => Error::Data(format!(
            "ragged row{}: expected {expected_len} fields, found {len}",
            pos.as_ref()
                .map(|p| format!(" at line {}", p.line()))
                .unwrap_or_default()
        )),
        _ => Error::Data(format!("malformed CSV: {e}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Dataset> {
        load_table(text.as_bytes(), &TypeHints::new())
    }

    #[test]
    fn infers_types_and_levels() {
        let d = load("y,g\n1,A\n2,A\n3,B\n").unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.continuous("y").unwrap(), &[1.0, 2.0, 3.0]);
        let g = d.factor("g").unwrap();
        assert_eq!(g.levels(), &["A", "B"]);
        assert_eq!(g.counts(), vec![2, 1]);
    }

    #[test]
    fn hint_makes_numbers_categorical() {
        let mut hints = TypeHints::new();
        hints.insert("z".into(), VarKind::Categorical);
        let d = load_table("y,z\n1,0\n2,1\n3,0\n".as_bytes(), &hints).unwrap();
        assert_eq!(d.factor("z").unwrap().levels(), &["0", "1"]);
    }

    #[test]
    fn hint_conflict_is_an_error() {
        let mut hints = TypeHints::new();
        hints.insert("g".into(), VarKind::Continuous);
        let e = load_table("y,g\n1,A\n".as_bytes(), &hints).unwrap_err();
        assert!(e.to_string().contains("'g'"));
    }

    #[test]
    fn missing_cell_names_row_and_column() {
        let e = load("y,g\n1,A\nNA,B\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("row 2") && msg.contains("'y'"), "{msg}");
        assert!(load("y,g\n1,\n").is_err());
    }

    #[test]
    fn ragged_and_empty_inputs() {
        assert!(load("y,g\n1,A\n2\n").unwrap_err().to_string().contains("ragged"));
        assert!(load("").is_err());
        assert!(load("y,g\n").is_err());
    }
}
