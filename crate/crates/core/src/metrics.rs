//! Summary statistics for a chain of components and side-by-side
//! comparison tables.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::ComponentSet;

/// One component's statistics. Percentages are stored unrounded.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    /// 1-based position in the chain.
    pub component: usize,
    pub pve: f64,
    pub pcve: f64,
    pub prcve: f64,
    pub card: usize,
    pub min_load: f64,
    pub min_pcont: f64,
    pub variance: f64,
}

#[derive(Debug, Clone)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
    source: DMatrix<f64>,
}

pub const CSV_HEADER: &str = "component,pve,pcve,prcve,card,min_load,min_pcont,variance";

pub fn summarize(set: &ComponentSet) -> SummaryTable {
    let trace = set.source.trace();
    let eig = &set.pca_eigenvalues;
    let mut pca_cum = 0.0;
    let rows = set
        .components
        .iter()
        .zip(&set.cumulative_vexp)
        .enumerate()
        .map(|(k, (c, &cum))| {
            if k < eig.len() {
                pca_cum += eig[k].max(0.0);
            }
            SummaryRow {
                component: k + 1,
                pve: 100.0 * c.vexp / trace,
                pcve: 100.0 * cum / trace,
                prcve: 100.0 * cum / pca_cum,
                card: c.cardinality(),
                min_load: c.min_load(),
                min_pcont: 100.0 * c.min_load() / c.l1_norm(),
                variance: c.variance,
            }
        })
        .collect();
    SummaryTable {
        rows,
        source: set.source.matrix().clone(),
    }
}

impl SummaryTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn pve(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.pve).collect()
    }

    pub fn pcve(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.pcve).collect()
    }

    /// Plain-text view, percentages to one decimal.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:>4} {:>6} {:>6} {:>6} {:>4} {:>8} {:>9} {:>8}\n",
            "comp", "PVE", "PCVE", "PRCVE", "card", "minload", "minpcont", "variance"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>4} {:>6.1} {:>6.1} {:>6.1} {:>4} {:>8.3} {:>9.1} {:>8.3}",
                r.component, r.pve, r.pcve, r.prcve, r.card, r.min_load, r.min_pcont, r.variance
            );
        }
        out
    }

    /// CSV at full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.component, r.pve, r.pcve, r.prcve, r.card, r.min_load, r.min_pcont, r.variance
            );
        }
        out
    }
}

/// Several methods' tables on the same matrix, aligned by component.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub labels: Vec<String>,
    /// `rows[k][m]` is method `m`'s row for component `k + 1`, if it has one.
    pub rows: Vec<Vec<Option<SummaryRow>>>,
}

pub fn compare(tables: &[SummaryTable], labels: &[&str]) -> Result<ComparisonReport> {
    if tables.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: tables.len(),
            found: labels.len(),
        });
    }
    if let Some(first) = tables.first() {
        for t in &tables[1..] {
            if t.source.shape() != first.source.shape() {
                return Err(Error::DimensionMismatch {
                    expected: first.source.nrows(),
                    found: t.source.nrows(),
                });
            }
            if t.source != first.source {
                return Err(Error::InvalidConfig(
                    "tables were computed from different matrices".into(),
                ));
            }
        }
    }
    let depth = tables.iter().map(SummaryTable::len).max().unwrap_or(0);
    let rows = (0..depth)
        .map(|k| tables.iter().map(|t| t.rows.get(k).cloned()).collect())
        .collect();
    Ok(ComparisonReport {
        labels: labels.iter().map(|s| s.to_string()).collect(),
        rows,
    })
}

impl ComparisonReport {
    pub fn to_text(&self) -> String {
        let width = self.labels.iter().map(String::len).max().unwrap_or(0).max(6);
        let mut out = format!("{:<width$} {:>4} {:>6} {:>6} {:>6} {:>4} {:>9}\n",
            "method", "comp", "PVE", "PCVE", "PRCVE", "card", "minpcont");
        for (k, row) in self.rows.iter().enumerate() {
            for (label, cell) in self.labels.iter().zip(row) {
                match cell {
                    Some(r) => {
                        let _ = writeln!(
                            out,
                            "{label:<width$} {:>4} {:>6.1} {:>6.1} {:>6.1} {:>4} {:>9.1}",
                            r.component, r.pve, r.pcve, r.prcve, r.card, r.min_pcont
                        );
                    }
                    None => {
                        let _ = writeln!(out, "{label:<width$} {:>4}", k + 1);
                    }
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("method,{CSV_HEADER}\n");
        for (k, row) in self.rows.iter().enumerate() {
            for (label, cell) in self.labels.iter().zip(row) {
                match cell {
                    Some(r) => {
                        let _ = writeln!(
                            out,
                            "{label},{},{},{},{},{},{},{},{}",
                            r.component,
                            r.pve,
                            r.pcve,
                            r.prcve,
                            r.card,
                            r.min_load,
                            r.min_pcont,
                            r.variance
                        );
                    }
                    None => {
                        let _ = writeln!(out, "{label},{},,,,,,,", k + 1);
                    }
                }
            }
        }
        out
    }
}
