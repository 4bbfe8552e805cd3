//! Misclassified-signs-per-data-point metric and decoder output coercion.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::dataset::Corpus;

/// Coerces decoder text to exactly `n_signs` labels.
///
/// Fields are whitespace-separated; only a literal `1` counts as a classifier.
/// Short outputs are padded with zeros and long ones truncated.
pub fn postprocess(decoded: &str, n_signs: usize) -> Vec<bool> {
    let mut labels: Vec<bool> = decoded.split_whitespace().take(n_signs).map(|f| f == "1").collect();
    labels.resize(n_signs, false);
    labels
}

pub fn render_labels(labels: &[bool]) -> String {
    labels.iter().map(|&l| if l { "1" } else { "0" }).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{predictions} predictions for {points} data points")]
    Count { points: usize, predictions: usize },
    #[error("prediction {index} has {found} labels, gold has {expected}")]
    Length { index: usize, expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mean_errors_per_point: f64,
    pub total_points: usize,
    pub total_sign_errors: usize,
    pub per_point_errors: Vec<usize>,
}

/// Hamming distance per point, averaged over points.
pub fn score(gold: &Corpus, predictions: &[Vec<bool>]) -> Result<EvalReport, EvalError> {
    if gold.len() != predictions.len() {
        return Err(EvalError::Count { points: gold.len(), predictions: predictions.len() });
    }
    let per_point_errors = gold
        .points
        .iter()
        .zip(predictions)
        .enumerate()
        .map(|(index, (g, p))| {
            if g.labels.len() != p.len() {
                return Err(EvalError::Length { index, expected: g.labels.len(), found: p.len() });
            }
            Ok(g.labels.iter().zip(p).filter(|(a, b)| a != b).count())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let total_sign_errors: usize = per_point_errors.iter().sum();
    let total_points = gold.len();
    let mean_errors_per_point = if total_points == 0 { 0.0 } else { total_sign_errors as f64 / total_points as f64 };
    Ok(EvalReport { mean_errors_per_point, total_points, total_sign_errors, per_point_errors })
}

impl EvalReport {
    /// `key=value` lines prefixed with `prefix.`.
    pub fn to_kv(&self, prefix: &str) -> String {
        format!(
            "{prefix}.mean_errors_per_point={:.6}\n{prefix}.total_points={}\n{prefix}.total_sign_errors={}\n",
            self.mean_errors_per_point, self.total_points, self.total_sign_errors
        )
    }
}

/// Rows of model name against per-split mean errors, laid out like a results table.
#[derive(Debug, Clone, Default)]
pub struct ResultsTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

impl ResultsTable {
    pub fn new(columns: &[&str]) -> Self {
        ResultsTable { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, model: impl Into<String>, values: Vec<Option<f64>>) {
        assert_eq!(values.len(), self.columns.len());
        self.rows.push((model.into(), values));
    }
}

impl fmt::Display for ResultsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|(m, _)| m.len()).chain(["Model".len()]).max().unwrap_or(5);
        let mut line = format!("{:<width$}", "Model");
        for c in &self.columns {
            write!(line, " | {c:>10}")?;
        }
        writeln!(f, "{line}")?;
        writeln!(f, "{}", "-".repeat(line.len()))?;
        for (model, values) in &self.rows {
            write!(f, "{model:<width$}")?;
            for v in values {
                match v {
                    Some(v) => write!(f, " | {v:>10.2}")?,
                    None => write!(f, " | {:>10}", "-")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Corpus {
        Corpus::parse_str("t", &lines.join("\n")).unwrap()
    }

    #[test]
    fn postprocess_pads_truncates_and_coerces() {
        assert_eq!(postprocess("0 0 1", 5), [false, false, true, false, false]);
        assert_eq!(postprocess("1 x 1 EOS", 3), [true, false, true]);
        assert_eq!(postprocess("", 2), [false, false]);
        assert_eq!(postprocess("1 1 1 1", 2), [true, true]);
        assert_eq!(postprocess("  1\t01 1.0 \n1", 4), [true, false, false, true]);
        assert!(postprocess("1", 0).is_empty());
    }

    #[test]
    fn postprocess_idempotent() {
        let once = postprocess("1 junk 1 0 1 1", 4);
        assert_eq!(postprocess(&render_labels(&once), 4), once);
    }

    #[test]
    fn perfect_and_all_zero_scores() {
        let gold = corpus(&["~A1~-~B1~", "A1"]);
        let perfect: Vec<_> = gold.points.iter().map(|p| p.labels.clone()).collect();
        assert_eq!(score(&gold, &perfect).unwrap().mean_errors_per_point, 0.0);
        let zeros: Vec<_> = gold.points.iter().map(|p| vec![false; p.len()]).collect();
        let r = score(&gold, &zeros).unwrap();
        assert_eq!(r.per_point_errors, [2, 0]);
        assert_eq!(r.mean_errors_per_point, 1.0);
    }

    #[test]
    fn length_errors() {
        let gold = corpus(&["A1-B1"]);
        assert_eq!(score(&gold, &[vec![false]]), Err(EvalError::Length { index: 0, expected: 2, found: 1 }));
        assert_eq!(score(&gold, &[]), Err(EvalError::Count { points: 1, predictions: 0 }));
    }

    #[test]
    fn table_layout() {
        let mut t = ResultsTable::new(&["Dev", "Test"]);
        t.push("CLF majority", vec![Some(0.27), None]);
        let s = t.to_string();
        assert!(s.contains("CLF majority |       0.27 |          -"));
    }
}
