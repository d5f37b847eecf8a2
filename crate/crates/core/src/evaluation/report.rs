//! Accuracy grid in Markdown and CSV form.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{format_hundredths, CellResult};
use crate::datasets::DatasetKind;
use crate::stitch::ViewConfiguration;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("duplicate cell {0}")]
    DuplicateCell(String),
    #[error("no cells to report")]
    Empty,
    #[error("cells csv line {line}: {message}")]
    Csv { line: u64, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub dataset: DatasetKind,
    pub configuration: ViewConfiguration,
    pub prompt_on: bool,
}

impl std::fmt::Display for CellKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/prompt={}", self.dataset, self.configuration, self.prompt_on)
    }
}

/// Rank of a cell within its dataset column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Best,
    Second,
    Plain,
}

/// One grid row: a view configuration with a prompt flag.
pub type RowKey = (ViewConfiguration, bool);

/// Single-view group first, prompt off before on, then configuration order.
fn row_order(row: &RowKey) -> (bool, bool, ViewConfiguration) {
    (row.0.is_multi_view(), row.1, row.0)
}

#[derive(Debug, Clone)]
pub struct ReportTables {
    pub rows: Vec<RowKey>,
    pub columns: Vec<DatasetKind>,
    cells: BTreeMap<CellKey, CellResult>,
    markers: BTreeMap<CellKey, Marker>,
}

pub fn build_matrix(results: &[CellResult]) -> Result<ReportTables, ReportError> {
    if results.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut cells = BTreeMap::new();
    for cell in results {
        if cells.insert(cell.key(), cell.clone()).is_some() {
            return Err(ReportError::DuplicateCell(cell.key().to_string()));
        }
    }
    let mut rows: Vec<RowKey> =
        cells.keys().map(|k| (k.configuration, k.prompt_on)).collect::<BTreeSet<_>>().into_iter().collect();
    rows.sort_by_key(row_order);
    let columns: Vec<DatasetKind> = cells.keys().map(|k| k.dataset).collect::<BTreeSet<_>>().into_iter().collect();

    let mut markers = BTreeMap::new();
    for &dataset in &columns {
        let mut distinct: Vec<u64> = cells
            .values()
            .filter(|c| c.dataset == dataset)
            .map(CellResult::hundredths)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        distinct.sort_by_key(|&h| Reverse(h));
        for cell in cells.values().filter(|c| c.dataset == dataset) {
            let h = cell.hundredths();
            let marker = if Some(&h) == distinct.first() {
                Marker::Best
            } else if Some(&h) == distinct.get(1) {
                Marker::Second
            } else {
                Marker::Plain
            };
            markers.insert(cell.key(), marker);
        }
    }
    Ok(ReportTables { rows, columns, cells, markers })
}

impl ReportTables {
    pub fn cell(&self, row: RowKey, dataset: DatasetKind) -> Option<&CellResult> {
        self.cells.get(&CellKey { dataset, configuration: row.0, prompt_on: row.1 })
    }

    pub fn cells(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.values()
    }

    pub fn marker(&self, key: &CellKey) -> Marker {
        self.markers.get(key).copied().unwrap_or(Marker::Plain)
    }

    /// Cells carrying the best marker in `dataset`'s column.
    pub fn column_best(&self, dataset: DatasetKind) -> Vec<&CellResult> {
        self.cells.values().filter(|c| c.dataset == dataset && self.marker(&c.key()) == Marker::Best).collect()
    }

    /// Cells in grid order: rows, then columns.
    pub fn ordered_cells(&self) -> Vec<&CellResult> {
        let mut out = Vec::with_capacity(self.cells.len());
        for &row in &self.rows {
            for &dataset in &self.columns {
                if let Some(c) = self.cell(row, dataset) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// Markdown grid with **best** and <u>second best</u> per column.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("| View Type | View | View Prompt |");
        for d in &self.columns {
            let _ = write!(out, " {} |", d.display());
        }
        out.push_str("\n|---|---|:---:|");
        for _ in &self.columns {
            out.push_str("---:|");
        }
        out.push('\n');
        for &row in &self.rows {
            let group = if row_order(&row).0 { "Multi-view" } else { "Single-view" };
            let prompt = if row.1 { "✓" } else { "✗" };
            let _ = write!(out, "| {} | {} | {} |", group, row.0.display(), prompt);
            for &dataset in &self.columns {
                match self.cell(row, dataset) {
                    Some(c) => {
                        let v = c.formatted();
                        let text = match self.marker(&c.key()) {
                            Marker::Best => format!("**{v}**"),
                            Marker::Second => format!("<u>{v}</u>"),
                            Marker::Plain => v,
                        };
                        let _ = write!(out, " {text} |");
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Side-by-side grid of measured and reference accuracies with deltas.
    pub fn comparison_markdown(&self, reference: &ReportTables) -> String {
        let mut out = String::from("| Dataset | View | View Prompt | Measured | Reference | Delta |\n|---|---|:---:|---:|---:|---:|\n");
        for c in self.ordered_cells() {
            let Some(r) = reference.cells.get(&c.key()) else { continue };
            let delta = c.hundredths() as i64 - r.hundredths() as i64;
            let sign = if delta < 0 { "-" } else { "+" };
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {}{} |",
                c.dataset.display(),
                c.configuration.display(),
                if c.prompt_on { "✓" } else { "✗" },
                c.formatted(),
                r.formatted(),
                sign,
                format_hundredths(delta.unsigned_abs())
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let refs = self.ordered_cells();
        write_cells_csv(refs.into_iter())
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    dataset: DatasetKind,
    configuration: ViewConfiguration,
    prompt_on: bool,
    correct: u64,
    total: u64,
    accuracy: String,
}

pub fn write_cells_csv<'a>(cells: impl Iterator<Item = &'a CellResult>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in cells {
        w.serialize(CsvRow {
            dataset: c.dataset,
            configuration: c.configuration,
            prompt_on: c.prompt_on,
            correct: c.correct,
            total: c.total,
            accuracy: c.formatted(),
        })
        .expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

/// Parses `cells.csv`, checking each accuracy column against correct/total.
pub fn parse_cells_csv(text: &str) -> Result<Vec<CellResult>, ReportError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in reader.deserialize::<CsvRow>() {
        let row = row.map_err(|e| ReportError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = out.len() as u64 + 2;
        if row.total == 0 || row.correct > row.total {
            return Err(ReportError::Csv { line, message: format!("invalid count {}/{}", row.correct, row.total) });
        }
        let cell = CellResult::new(row.dataset, row.configuration, row.prompt_on, row.correct, row.total)
            .map_err(|e| ReportError::Csv { line, message: e.to_string() })?;
        if cell.formatted() != row.accuracy.trim() {
            return Err(ReportError::Csv {
                line,
                message: format!("accuracy {} does not match {}/{}", row.accuracy, row.correct, row.total),
            });
        }
        out.push(cell);
    }
    Ok(out)
}
