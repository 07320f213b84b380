//! Text, CSV and JSON renderings of coefficient tables.

use super::summary::{CoefficientRow, CoefficientTable, RowStatus, TermKind};
use crate::error::{Error, Result};

pub(crate) fn fixed3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn estimate_cell(row: &CoefficientRow) -> String {
    match row.status {
        RowStatus::Reference => "ref".into(),
        _ => format!("{} ({})", fixed3(row.estimate), fixed3(row.std_error)),
    }
}

fn p_cell(row: &CoefficientRow) -> String {
    match (row.status, row.p_value) {
        (RowStatus::Reference, _) => "ref".into(),
        (_, Some(p)) if p < 0.001 => "<0.001".into(),
        (_, Some(p)) => fixed3(p),
        (_, None) => "NA".into(),
    }
}

pub(crate) enum Line {
    Cells(Vec<String>),
    Rule,
}

/// Lays out rows two spaces apart; the first `left` columns are
/// left-aligned and the rest right-aligned.
pub(crate) fn layout(header: Vec<String>, left: usize, lines: Vec<Line>) -> String {
    let ncol = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for line in &lines {
        if let Line::Cells(cells) = line {
            for (w, c) in widths.iter_mut().zip(cells) {
                *w = (*w).max(c.chars().count());
            }
        }
    }
    let total = widths.iter().sum::<usize>() + 2 * (ncol - 1);
    let fmt = |cells: &[String]| -> String {
        let mut s = String::new();
        for (i, (c, &w)) in cells.iter().zip(&widths).enumerate() {
            let sep = if i == 0 { "" } else { "  " };
            if i < left {
                s.push_str(&format!("{sep}{c:<w$}"));
            } else {
                s.push_str(&format!("  {c:>w$}"));
            }
        }
        s.trim_end().to_string()
    };
    let rule = "-".repeat(total);
    let mut out = String::new();
    out.push_str(&fmt(&header));
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    for line in &lines {
        match line {
            Line::Cells(c) => out.push_str(&fmt(c)),
            Line::Rule => out.push_str(&rule),
        }
        out.push('\n');
    }
    out
}

/// Single-model table: main effects first (categorical levels indented
/// under their variable, with proportions), then interactions after a rule.
pub fn render_table(table: &CoefficientTable) -> String {
    let mut lines = Vec::new();
    let mut last_term: Option<&str> = None;
    let mut in_interactions = false;
    for row in &table.rows {
        if row.kind.is_interaction() && !in_interactions {
            lines.push(Line::Rule);
            in_interactions = true;
        }
        let name = match row.kind {
            TermKind::Categorical => {
                if last_term != Some(row.term.as_str()) {
                    lines.push(Line::Cells(vec![row.term.clone(), String::new(), String::new()]));
                }
                let pct = row
                    .proportion
                    .map(|p| format!(" ({:.1}%)", 100.0 * p))
                    .unwrap_or_default();
                format!("  {}{pct}", row.display)
            }
            _ => row.display.clone(),
        };
        last_term = Some(row.term.as_str());
        lines.push(Line::Cells(vec![name, estimate_cell(row), p_cell(row)]));
    }
    lines.push(Line::Rule);
    let mut out = layout(
        vec!["Variable".into(), "Estimate (SE)".into(), "p-value".into()],
        1,
        lines,
    );
    let reference = match table.reference {
        super::Reference::StudentT { df } => format!("t({df})"),
        super::Reference::Normal => "normal".into(),
    };
    out.push_str(&format!(
        "{}; {} identification; {}; n = {}; p-values from {reference}\n",
        table.formula,
        table.scheme,
        table.family.name(),
        table.n
    ));
    out
}

/// One model in a side-by-side comparison.
pub struct ComparisonColumn<'a> {
    pub name: &'a str,
    pub table: &'a CoefficientTable,
}

/// Stacked comparison: for every coefficient, one line per model that has
/// it, with the variable named on the first line only. Main effects come
/// first; interactions follow a rule.
pub fn render_comparison(models: &[ComparisonColumn<'_>]) -> String {
    let mut mains: Vec<&str> = Vec::new();
    let mut interactions: Vec<&str> = Vec::new();
    for m in models {
        for row in &m.table.rows {
            let bucket = if row.kind.is_interaction() {
                &mut interactions
            } else {
                &mut mains
            };
            if !bucket.contains(&row.label.as_str()) {
                bucket.push(&row.label);
            }
        }
    }
    let mut lines = Vec::new();
    let emit = |labels: &[&str], lines: &mut Vec<Line>| {
        for label in labels {
            let mut first = true;
            for m in models {
                if let Some(row) = m.table.row(label) {
                    let var = if first { row.display.clone() } else { String::new() };
                    first = false;
                    lines.push(Line::Cells(vec![
                        var,
                        m.name.to_string(),
                        estimate_cell(row),
                        p_cell(row),
                    ]));
                }
            }
        }
    };
    emit(&mains, &mut lines);
    if !interactions.is_empty() {
        lines.push(Line::Rule);
        emit(&interactions, &mut lines);
    }
    lines.push(Line::Rule);
    layout(
        vec![
            "Variable".into(),
            "Model".into(),
            "Estimate (SE)".into(),
            "p-value".into(),
        ],
        2,
        lines,
    )
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with full-precision numbers (shortest round-trip representation).
pub fn render_csv(table: &CoefficientTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Numerical(format!("CSV rendering failed: {e}"));
    w.write_record([
        "label",
        "term",
        "estimate",
        "std_error",
        "statistic",
        "p_value",
        "ci_lower",
        "ci_upper",
        "proportion",
        "status",
    ])
    .map_err(io)?;
    for r in &table.rows {
        let status = match r.status {
            RowStatus::Estimated => "estimated",
            RowStatus::Reference => "reference",
            RowStatus::Degenerate => "degenerate",
        };
        w.write_record([
            r.label.clone(),
            r.term.clone(),
            r.estimate.to_string(),
            r.std_error.to_string(),
            opt(r.statistic),
            opt(r.p_value),
            r.ci_lower.to_string(),
            r.ci_upper.to_string(),
            opt(r.proportion),
            status.to_string(),
        ])
        .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Numerical(format!("CSV rendering failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn render_json(table: &CoefficientTable) -> Result<String> {
    serde_json::to_string_pretty(table)
        .map_err(|e| Error::Numerical(format!("JSON rendering failed: {e}")))
}
