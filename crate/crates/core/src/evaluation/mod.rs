//! Accuracy scoring and report rendering.

pub mod chart;
pub mod published;
pub mod report;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::datasets::DatasetKind;
use crate::stitch::ViewConfiguration;
use crate::vlm::{Answer, Prediction};

pub use report::{build_matrix, CellKey, Marker, ReportTables};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScoreError {
    #[error("no predictions to score")]
    Empty,
    #[error("no gold label for {0}")]
    MissingGold(String),
    #[error("predictions mix cells: {0}")]
    MixedCell(String),
}

/// Accuracy of one (dataset, configuration, prompt flag) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: DatasetKind,
    pub configuration: ViewConfiguration,
    pub prompt_on: bool,
    pub correct: u64,
    pub total: u64,
    /// Percent, `100 * correct / total`.
    pub accuracy: f64,
}

impl CellResult {
    pub fn new(
        dataset: DatasetKind,
        configuration: ViewConfiguration,
        prompt_on: bool,
        correct: u64,
        total: u64,
    ) -> Result<Self, ScoreError> {
        if total == 0 {
            return Err(ScoreError::Empty);
        }
        assert!(correct <= total, "correct {correct} exceeds total {total}");
        Ok(CellResult {
            dataset,
            configuration,
            prompt_on,
            correct,
            total,
            accuracy: 100.0 * correct as f64 / total as f64,
        })
    }

    pub fn key(&self) -> CellKey {
        CellKey { dataset: self.dataset, configuration: self.configuration, prompt_on: self.prompt_on }
    }

    /// Accuracy in hundredths of a percent, rounded half to even.
    pub fn hundredths(&self) -> u64 {
        accuracy_hundredths(self.correct, self.total)
    }

    pub fn formatted(&self) -> String {
        format_hundredths(self.hundredths())
    }
}

/// `round_half_even(10000 * correct / total)` in exact integer arithmetic.
pub fn accuracy_hundredths(correct: u64, total: u64) -> u64 {
    let num = u128::from(correct) * 10_000;
    let den = u128::from(total);
    let q = num / den;
    let r = num % den;
    let round_up = match (2 * r).cmp(&den) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Equal => q % 2 == 1,
        std::cmp::Ordering::Less => false,
    };
    (q + u128::from(round_up)) as u64
}

pub fn format_hundredths(h: u64) -> String {
    format!("{}.{:02}", h / 100, h % 100)
}

pub fn is_correct(parsed: Answer, gold: bool) -> bool {
    match parsed {
        Answer::Yes => gold,
        Answer::No => !gold,
        Answer::Unknown => false,
    }
}

/// Scores one cell's predictions. `Unknown` answers count as wrong.
pub fn score(
    dataset: DatasetKind,
    predictions: &[Prediction],
    gold: &HashMap<String, bool>,
) -> Result<CellResult, ScoreError> {
    let first = predictions.first().ok_or(ScoreError::Empty)?;
    let mut correct = 0u64;
    for p in predictions {
        if p.configuration != first.configuration || p.prompt_on != first.prompt_on {
            return Err(ScoreError::MixedCell(format!(
                "{}/{} vs {}/{}",
                first.configuration, first.prompt_on, p.configuration, p.prompt_on
            )));
        }
        let label = *gold.get(&p.example_id).ok_or_else(|| ScoreError::MissingGold(p.example_id.clone()))?;
        if is_correct(p.parsed, label) {
            correct += 1;
        }
    }
    CellResult::new(dataset, first.configuration, first.prompt_on, correct, predictions.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(id: &str, parsed: Answer) -> Prediction {
        Prediction {
            example_id: id.into(),
            raw_text: String::new(),
            parsed,
            configuration: ViewConfiguration::LeftView,
            prompt_on: true,
            latency_secs: 0.0,
        }
    }

    fn gold(pairs: &[(&str, bool)]) -> HashMap<String, bool> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn three_of_four() {
        let preds = [pred("a", Answer::Yes), pred("b", Answer::No), pred("c", Answer::Yes), pred("d", Answer::Yes)];
        let g = gold(&[("a", true), ("b", false), ("c", true), ("d", false)]);
        let cell = score(DatasetKind::VsrRandom, &preds, &g).unwrap();
        assert_eq!((cell.correct, cell.total), (3, 4));
        assert_eq!(cell.accuracy, 75.0);
        assert_eq!(cell.formatted(), "75.00");
    }

    #[test]
    fn unknown_counts_wrong() {
        let preds = [pred("a", Answer::Unknown), pred("b", Answer::Unknown)];
        let g = gold(&[("a", true), ("b", false)]);
        assert_eq!(score(DatasetKind::VsrRandom, &preds, &g).unwrap().accuracy, 0.0);
    }

    #[test]
    fn score_errors() {
        assert_eq!(score(DatasetKind::VsrRandom, &[], &gold(&[])), Err(ScoreError::Empty));
        assert_eq!(
            score(DatasetKind::VsrRandom, &[pred("zz", Answer::Yes)], &gold(&[])),
            Err(ScoreError::MissingGold("zz".into()))
        );
        let mut other = pred("b", Answer::Yes);
        other.prompt_on = false;
        assert!(matches!(
            score(DatasetKind::VsrRandom, &[pred("a", Answer::Yes), other], &gold(&[("a", true), ("b", true)])),
            Err(ScoreError::MixedCell(_))
        ));
    }

    #[test]
    fn half_even_rounding() {
        // 1/8 = 12.5 % exactly; 2/3 = 66.666..
        assert_eq!(format_hundredths(accuracy_hundredths(1, 8)), "12.50");
        assert_eq!(format_hundredths(accuracy_hundredths(2, 3)), "66.67");
        // 1/16 = 6.25 %; 1/32 = 3.125 % -> 3.12 (tie to even); 3/32 = 9.375 % -> 9.38
        assert_eq!(format_hundredths(accuracy_hundredths(1, 32)), "3.12");
        assert_eq!(format_hundredths(accuracy_hundredths(3, 32)), "9.38");
        assert_eq!(format_hundredths(accuracy_hundredths(5, 5)), "100.00");
        assert_eq!(format_hundredths(accuracy_hundredths(0, 7)), "0.00");
    }
}
