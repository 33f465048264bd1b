//! Renderer-agnostic chart descriptions.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartKind {
    Bar,
    Line,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

/// The tool call that produced a chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub params: Map<String, Value>,
    pub sql: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub chart_id: String,
    pub kind: ChartKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub categories: Vec<String>,
    pub series: Vec<Series>,
    pub provenance: Provenance,
}

impl ChartSpec {
    /// Builds a spec whose id is a digest of its content, so the same chart
    /// always gets the same id.
    pub fn new(
        kind: ChartKind,
        title: impl Into<String>,
        x_label: impl Into<String>,
        y_label: impl Into<String>,
        categories: Vec<String>,
        series: Vec<Series>,
        provenance: Provenance,
    ) -> Self {
        let mut spec = ChartSpec {
            chart_id: String::new(),
            kind,
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            categories,
            series,
            provenance,
        };
        let encoded = serde_json::to_vec(&spec).expect("chart spec serializes");
        spec.chart_id = format!("chart-{}", &hex::encode(Sha256::digest(&encoded))[..16]);
        spec
    }

    /// Arity rules: categories non-empty, every series as long as the
    /// categories, and exactly one series on bar charts.
    pub fn check(&self) -> Result<(), String> {
        if self.categories.is_empty() {
            return Err("chart has no categories".into());
        }
        if self.series.is_empty() {
            return Err("chart has no series".into());
        }
        if self.kind == ChartKind::Bar && self.series.len() != 1 {
            return Err(format!("bar chart has {} series", self.series.len()));
        }
        for s in &self.series {
            if s.values.len() != self.categories.len() {
                return Err(format!(
                    "series '{}' has {} values for {} categories",
                    s.name,
                    s.values.len(),
                    self.categories.len()
                ));
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                return Err(format!("series '{}' has a non-finite value", s.name));
            }
        }
        if self.provenance.tool.is_empty() {
            return Err("chart provenance names no tool".into());
        }
        Ok(())
    }
}
