use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::TrainReport;
use super::HarnessError;

const BUILTIN_REFERENCE: &str = include_str!("../../data/table1_reference.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub key: String,
    pub label: String,
}

/// Published accuracies (percent) keyed by model and dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub datasets: Vec<ReferenceEntry>,
    pub models: Vec<ReferenceEntry>,
    pub accuracy: BTreeMap<String, BTreeMap<String, f64>>,
}

impl ReferenceTable {
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN_REFERENCE).expect("bundled reference table parses")
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn get(&self, model: &str, dataset: &str) -> Option<f64> {
        self.accuracy.get(model)?.get(dataset).copied()
    }

    fn model_label<'a>(&'a self, key: &'a str) -> &'a str {
        self.models.iter().find(|m| m.key == key).map_or(key, |m| m.label.as_str())
    }
}

fn header(columns: &[&str]) -> String {
    let mut out = String::from("| Model |");
    for c in columns {
        out.push_str(&format!(" {c} |"));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(columns.len()));
    out.push('\n');
    out
}

fn row(label: &str, cells: &[String]) -> String {
    let mut out = format!("| {label} |");
    for c in cells {
        out.push_str(&format!(" {c} |"));
    }
    out.push('\n');
    out
}

/// The reference grid as a Markdown table, two decimals per cell.
pub fn emit_reference_table(reference: &ReferenceTable) -> String {
    let labels: Vec<&str> = reference.datasets.iter().map(|d| d.label.as_str()).collect();
    let mut out = header(&labels);
    for m in &reference.models {
        let cells: Vec<String> = reference
            .datasets
            .iter()
            .map(|d| reference.get(&m.key, &d.key).map_or_else(|| "-".to_owned(), |v| format!("{v:.2}")))
            .collect();
        out.push_str(&row(&m.label, &cells));
    }
    out
}

/// One row per trained model, one column per dataset. A cell reads
/// `ours (reference, delta)` in percent; cells without a run show `-`.
/// Later reports for the same model and dataset replace earlier ones.
pub fn emit_table(reports: &[TrainReport], reference: &ReferenceTable) -> String {
    let mut results: BTreeMap<(String, String), f64> = BTreeMap::new();
    let mut extra_datasets: Vec<String> = Vec::new();
    for r in reports {
        let Some(m) = &r.test_metrics else { continue };
        let dataset = r.config.dataset_name.clone();
        if !reference.datasets.iter().any(|d| d.key == dataset) && !extra_datasets.contains(&dataset) {
            extra_datasets.push(dataset.clone());
        }
        results.insert((r.config.model_name.name().to_owned(), dataset), m.accuracy * 100.0);
    }

    let mut columns: Vec<(String, String)> = reference.datasets.iter().map(|d| (d.key.clone(), d.label.clone())).collect();
    columns.extend(extra_datasets.into_iter().map(|d| (d.clone(), d)));
    let labels: Vec<&str> = columns.iter().map(|(_, l)| l.as_str()).collect();
    let mut out = header(&labels);

    let mut models: Vec<String> = results.keys().map(|(m, _)| m.clone()).collect();
    models.dedup();
    let rank = |m: &String| reference.models.iter().position(|e| &e.key == m).unwrap_or(usize::MAX);
    models.sort_by_key(|m| (rank(m), m.clone()));
    for m in &models {
        let cells: Vec<String> = columns
            .iter()
            .map(|(d, _)| match (results.get(&(m.clone(), d.clone())), reference.get(m, d)) {
                (Some(ours), Some(r)) => format!("{ours:.2} ({r:.2}, {:+.2})", ours - r),
                (Some(ours), None) => format!("{ours:.2}"),
                (None, _) => "-".to_owned(),
            })
            .collect();
        out.push_str(&row(reference.model_label(m), &cells));
    }
    out
}
