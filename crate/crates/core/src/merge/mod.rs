//! Joins text-mined cells with digitized series into database records.

mod db;
mod matcher;
mod record;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::GraphMetadata;
use crate::digitizer::{Axis, CycleSeries, GraphSeriesFile};
use crate::extraction::{CellRecord, Component, Extractor, PaperExtraction};
use crate::standardize::{derive_cycle_metrics, ChemDictionary, CycleMetrics, MetricsConfig};

pub use db::{read_database, read_log, write_database, write_log, Database, DbError, DB_FORMAT, DB_VERSION};
pub use matcher::{match_labels_fallback, match_labels_gateway, match_tokens, soft_dice, LabelAssignment, MatchMethod};
pub use record::{
    materials_for_cell, standardize_conditions, standardize_materials, StandardConditions, StandardMaterial,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub doi: String,
    pub figure: String,
    pub panel: String,
    pub series_label: String,
    pub match_method: MatchMethod,
    pub match_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedCellRecord {
    pub cell: CellRecord,
    pub materials: Vec<StandardMaterial>,
    pub conditions: StandardConditions,
    pub series: CycleSeries,
    pub metrics: CycleMetrics,
    pub provenance: Provenance,
}

impl MergedCellRecord {
    /// `doi#figure#panel#cell`, unique within a database.
    pub fn id(&self) -> String {
        let p = &self.provenance;
        format!("{}#{}#{}#{}", p.doi, p.figure, p.panel, self.cell.cell_name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogKind {
    UnmatchedLabel,
    UnmatchedCell,
    Dropped,
    MissingGraph,
    MissingText,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub doi: String,
    pub figure: String,
    pub panel: String,
    pub kind: LogKind,
    pub item: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MergeConfig {
    pub match_threshold: f64,
    pub targets: Vec<u32>,
    pub metrics: MetricsConfig,
    /// Components whose name must resolve in the dictionary.
    pub required: Vec<Component>,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self {
            match_threshold: 0.6,
            targets: vec![100, 200, 300],
            metrics: MetricsConfig::default(),
            required: vec![Component::Separator],
        }
    }
}

/// Label matching strategy.
#[derive(Clone, Copy)]
pub enum Matcher<'a> {
    Fallback,
    Gateway(&'a Extractor),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assembly {
    pub records: Vec<MergedCellRecord>,
    pub log: Vec<LogEntry>,
}

type Key = (String, String, String);

fn key(g: &GraphMetadata) -> Key {
    (g.doi.clone(), g.figure_id.clone(), g.panel_label.clone())
}

struct Logger<'a> {
    graph: &'a GraphMetadata,
    out: Vec<LogEntry>,
}

impl Logger<'_> {
    fn push(&mut self, kind: LogKind, item: &str, reason: impl Into<String>) {
        self.out.push(LogEntry {
            doi: self.graph.doi.clone(),
            figure: self.graph.figure_id.clone(),
            panel: self.graph.panel_label.clone(),
            kind,
            item: item.to_string(),
            reason: reason.into(),
        });
    }
}

#[allow(clippy::too_many_arguments)]
fn assemble_graph(
    paper: &PaperExtraction,
    cells: &[CellRecord],
    conditions: &crate::extraction::OperatingConditions,
    graph: &GraphSeriesFile,
    dict: &ChemDictionary,
    cfg: &MergeConfig,
    matcher: Matcher<'_>,
    log: &mut Logger<'_>,
) -> Vec<MergedCellRecord> {
    if let Some(cause) = &graph.unextractable {
        for c in cells {
            log.push(LogKind::UnmatchedCell, &c.cell_name, format!("graph unextractable: {cause}"));
        }
        return Vec::new();
    }
    let names: Vec<String> = cells.iter().map(|c| c.cell_name.clone()).collect();
    let labels: Vec<String> = graph.series.iter().map(|s| s.label.clone()).collect();
    if names.is_empty() || labels.is_empty() {
        for l in &labels {
            log.push(LogKind::UnmatchedLabel, l, "no cells extracted for this graph");
        }
        for n in &names {
            log.push(LogKind::UnmatchedCell, n, "graph has no series");
        }
        return Vec::new();
    }
    let (assignments, method) = match matcher {
        Matcher::Fallback => (match_labels_fallback(&names, &labels, cfg.match_threshold), MatchMethod::Fallback),
        Matcher::Gateway(ex) => {
            let subject = format!("{}#{}#{}", graph.doi, graph.figure, graph.panel);
            match match_labels_gateway(ex, &subject, &names, &labels) {
                Ok(a) => (a, MatchMethod::Gateway),
                Err(e) => {
                    log.push(LogKind::Warning, "label_matching", format!("gateway failed, using fallback: {e}"));
                    (match_labels_fallback(&names, &labels, cfg.match_threshold), MatchMethod::Fallback)
                }
            }
        }
    };
    let conditions = standardize_conditions(conditions);
    let mut out = Vec::new();
    for a in &assignments {
        let Some(cell_name) = &a.cell else {
            log.push(LogKind::UnmatchedLabel, &a.label, format!("best similarity {:.3} below threshold", a.score));
            continue;
        };
        let cell = cells.iter().find(|c| &c.cell_name == cell_name).expect("assigned from this list");
        let series_rec = graph.series.iter().find(|s| s.label == a.label).expect("label from this graph");
        let series =
            CycleSeries { label: series_rec.label.clone(), points: series_rec.points.clone(), axis: Axis::Left };
        let metrics = match derive_cycle_metrics(&series, &cfg.targets, &cfg.metrics) {
            Ok(m) => m,
            Err(e) => {
                log.push(LogKind::Dropped, cell_name, format!("metrics: {e}"));
                continue;
            }
        };
        let entries = materials_for_cell(cell_name, &paper.materials);
        let materials = standardize_materials(cell, &entries, dict);
        let missing: Vec<&StandardMaterial> =
            materials.iter().filter(|m| cfg.required.contains(&m.component) && m.canonical_id.is_none()).collect();
        if let Some(m) = missing.first() {
            log.push(
                LogKind::Dropped,
                cell_name,
                format!("required {} {:?} not in the dictionary", m.component.as_str(), m.name),
            );
            continue;
        }
        for m in materials.iter().filter(|m| m.canonical_id.is_none()) {
            log.push(LogKind::Warning, cell_name, format!("{:?} not in the dictionary, kept by name", m.name));
        }
        for f in &conditions.flags {
            log.push(LogKind::Warning, cell_name, f.clone());
        }
        out.push(MergedCellRecord {
            cell: cell.clone(),
            materials,
            conditions: conditions.clone(),
            series,
            metrics,
            provenance: Provenance {
                doi: graph.doi.clone(),
                figure: graph.figure.clone(),
                panel: graph.panel.clone(),
                series_label: a.label.clone(),
                match_method: method,
                match_score: a.score,
            },
        });
    }
    for n in &names {
        if !assignments.iter().any(|a| a.cell.as_ref() == Some(n)) {
            log.push(LogKind::UnmatchedCell, n, "no legend label matched");
        }
    }
    out
}

/// Joins per-paper text extractions with per-graph series. Failures are
/// logged and skipped; output is ordered by (doi, figure, panel, cell).
pub fn assemble_database(
    papers: &[PaperExtraction],
    graphs: &[GraphSeriesFile],
    dict: &ChemDictionary,
    cfg: &MergeConfig,
    matcher: Matcher<'_>,
) -> Assembly {
    let by_key: BTreeMap<Key, &GraphSeriesFile> = graphs.iter().map(|g| (key(&g.graph()), g)).collect();
    let per_paper: Vec<(Vec<MergedCellRecord>, Vec<LogEntry>)> = papers
        .par_iter()
        .map(|paper| {
            let mut records = Vec::new();
            let mut entries = Vec::new();
            for g in &paper.graphs {
                let mut log = Logger { graph: &g.graph, out: Vec::new() };
                match by_key.get(&key(&g.graph)) {
                    Some(series) => records.extend(assemble_graph(
                        paper,
                        &g.cells,
                        &g.conditions,
                        series,
                        dict,
                        cfg,
                        matcher,
                        &mut log,
                    )),
                    None => {
                        for c in &g.cells {
                            log.push(LogKind::MissingGraph, &c.cell_name, "no digitized series for this graph");
                        }
                    }
                }
                entries.extend(log.out);
            }
            (records, entries)
        })
        .collect();
    let mut out = Assembly::default();
    for (r, l) in per_paper {
        out.records.extend(r);
        out.log.extend(l);
    }
    let text_keys: Vec<Key> = papers.iter().flat_map(|p| p.graphs.iter().map(|g| key(&g.graph))).collect();
    for (k, g) in &by_key {
        if !text_keys.contains(k) {
            let graph = g.graph();
            let mut log = Logger { graph: &graph, out: Vec::new() };
            for s in &g.series {
                log.push(LogKind::MissingText, &s.label, "no text extraction for this graph");
            }
            out.log.extend(log.out);
        }
    }
    out.records.sort_by(|a, b| {
        let ka = (&a.provenance.doi, &a.provenance.figure, &a.provenance.panel, &a.cell.cell_name);
        let kb = (&b.provenance.doi, &b.provenance.figure, &b.provenance.panel, &b.cell.cell_name);
        ka.cmp(&kb)
    });
    out.log.sort_by(|a, b| {
        (&a.doi, &a.figure, &a.panel, a.kind, &a.item, &a.reason)
            .cmp(&(&b.doi, &b.figure, &b.panel, b.kind, &b.item, &b.reason))
    });
    out
}
