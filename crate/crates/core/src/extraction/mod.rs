//! Staged text mining: cycle-graph classification, paragraph categorization,
//! cell extraction, material extraction and operating-condition extraction.
//! Each stage's output feeds the next; stages for one paper run in order.

mod catalog;
mod fallback;
pub mod templates;
mod types;

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;
use thiserror::Error;

use crate::corpus::{
    locate_related_paragraphs, normalize_whitespace, Caption, CorpusError, Document, GraphMetadata, Paragraph,
};
use crate::gateway::{Gateway, GatewayError, RenderedPrompt};

pub use catalog::{entity_catalog, entity_kinds, EntityCatalog, EntitySpec};
pub use fallback::{extract_text, fallback_extract, FallbackExtraction};
pub use templates::{response_schema, TemplateSet};
pub use types::*;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtractionError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("invalid categorization stage: {0}")]
    InvalidStage(String),
    #[error("no non-empty source text for operating conditions")]
    NoSources,
    #[error("empty caption for {0}")]
    EmptyCaption(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Major,
    Sub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(untagged)]
pub enum Category {
    Major(MajorCategory),
    Sub(SubCategory),
}

/// Runs the extraction stages against a gateway.
#[derive(Debug, Clone)]
pub struct Extractor {
    pub gateway: Gateway,
    pub templates: TemplateSet,
    pub retries: u32,
}

fn slots<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

pub(crate) fn name_tokens(s: &str) -> BTreeSet<String> {
    s.to_lowercase().split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_string).collect()
}

/// Picks the cell a material belongs to: exact (case-insensitive) name match,
/// else the unique cell sharing the most tokens. Ties and zero overlap leave
/// the material in the shared pool.
pub fn assign_cell(hint: &str, cells: &[String]) -> Option<String> {
    let hint_norm = normalize_whitespace(hint).to_lowercase();
    if let Some(c) = cells.iter().find(|c| normalize_whitespace(c).to_lowercase() == hint_norm) {
        return Some(c.clone());
    }
    let hint_tokens = name_tokens(hint);
    let mut best: Option<(usize, &String)> = None;
    let mut tied = false;
    for c in cells {
        let score = name_tokens(c).intersection(&hint_tokens).count();
        match best {
            _ if score == 0 => {}
            Some((b, _)) if score < b => {}
            Some((b, _)) if score == b => tied = true,
            _ => {
                best = Some((score, c));
                tied = false;
            }
        }
    }
    match best {
        Some((_, c)) if !tied => Some(c.clone()),
        _ => None,
    }
}

fn reading_from(v: &Value) -> Option<(Reading, Option<String>)> {
    let obj = v.as_object()?;
    let unit = obj.get("unit").and_then(Value::as_str).map(str::to_string);
    let get = |k: &str| obj.get(k).and_then(Value::as_f64);
    let r = match (get("value"), get("min"), get("max")) {
        (Some(x), _, _) => Reading::Point(x),
        (None, Some(a), Some(b)) => Reading::Range([a.min(b), a.max(b)]),
        (None, Some(a), None) | (None, None, Some(a)) => Reading::Point(a),
        _ => return None,
    };
    Some((r, unit))
}

impl Extractor {
    pub fn new(gateway: Gateway) -> Self {
        Self { gateway, templates: TemplateSet::builtin(), retries: 2 }
    }

    fn ask(&self, template: &str, subject: &str, slots: BTreeMap<String, String>) -> Result<Value, ExtractionError> {
        let t = self.templates.get(template);
        let schema = response_schema(&t.output_schema).expect("template schema is registered");
        let prompt: RenderedPrompt = t.prompt(subject, &slots)?;
        Ok(self.gateway.complete_structured(&prompt, &schema, self.retries)?.value)
    }

    /// Panels of `caption` that show a cycling test.
    pub fn classify_cycle_caption(&self, doi: &str, caption: &Caption) -> Result<Vec<GraphMetadata>, ExtractionError> {
        if caption.text.trim().is_empty() {
            return Err(ExtractionError::EmptyCaption(caption.figure_id.clone()));
        }
        let panels =
            if caption.panel_labels.is_empty() { "(none)".to_string() } else { caption.panel_labels.join(",") };
        let v = self.ask(
            templates::CYCLE_GRAPH_CLASSIFICATION,
            &format!("{doi}#{}", caption.figure_id),
            slots([("figure_id", caption.figure_id.clone()), ("panels", panels), ("caption", caption.text.clone())]),
        )?;
        let answered: BTreeSet<String> = v["cycle_panels"]
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(Value::as_str)
            .map(|p| p.trim().trim_matches(['(', ')']).to_lowercase())
            .collect();
        let metas = if caption.panel_labels.is_empty() {
            if answered.is_empty() {
                vec![]
            } else {
                vec![GraphMetadata::new(doi, &caption.figure_id, "")]
            }
        } else {
            caption
                .panel_labels
                .iter()
                .filter(|p| answered.contains(*p))
                .map(|p| GraphMetadata::new(doi, &caption.figure_id, p))
                .collect()
        };
        Ok(metas)
    }

    pub fn categorize_paragraph(
        &self,
        doi: &str,
        paragraph: &Paragraph,
        stage: Stage,
        major: Option<MajorCategory>,
    ) -> Result<Category, ExtractionError> {
        let subject = format!("{doi}#{}", paragraph.id);
        let slots = slots([("paragraph", paragraph.text.clone())]);
        match stage {
            Stage::Major => {
                let v = self.ask(templates::MAJOR_CATEGORIZATION, &subject, slots)?;
                let c = MajorCategory::parse(v["category"].as_str().unwrap_or_default())
                    .expect("schema restricts the category");
                Ok(Category::Major(c))
            }
            Stage::Sub => {
                let template = match major {
                    Some(MajorCategory::Material) => templates::SUB_CATEGORIZATION_MATERIAL,
                    Some(MajorCategory::OperatingCondition) => templates::SUB_CATEGORIZATION_OPERATION,
                    other => {
                        return Err(ExtractionError::InvalidStage(format!(
                            "sub-categorization needs a material or operating_condition major, got {other:?}"
                        )))
                    }
                };
                let v = self.ask(template, &subject, slots)?;
                let c = SubCategory::parse(v["category"].as_str().unwrap_or_default())
                    .expect("schema restricts the category");
                Ok(Category::Sub(c))
            }
        }
    }

    /// Major category, then sub category when the major has one.
    pub fn categorize(&self, doi: &str, paragraph: &Paragraph) -> Result<ParagraphCategory, ExtractionError> {
        let Category::Major(major) = self.categorize_paragraph(doi, paragraph, Stage::Major, None)? else {
            unreachable!()
        };
        let sub = match major {
            MajorCategory::Material | MajorCategory::OperatingCondition => {
                match self.categorize_paragraph(doi, paragraph, Stage::Sub, Some(major))? {
                    Category::Sub(s) => Some(s),
                    Category::Major(_) => unreachable!(),
                }
            }
            _ => None,
        };
        Ok(ParagraphCategory { paragraph_id: paragraph.id.clone(), major, sub })
    }

    pub fn extract_cells(
        &self,
        meta: &GraphMetadata,
        caption: &Caption,
        related: &[&Paragraph],
    ) -> Result<Vec<CellRecord>, ExtractionError> {
        let results = if related.is_empty() {
            "(none)".to_string()
        } else {
            related.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join("\n\n")
        };
        let v = self.ask(
            templates::CELL_EXTRACTION,
            &format!("{}#{}#{}", meta.doi, meta.figure_id, meta.panel_label),
            slots([
                ("figure_id", meta.figure_id.clone()),
                ("panel", if meta.panel_label.is_empty() { "(none)".into() } else { meta.panel_label.clone() }),
                ("caption", caption.text.clone()),
                ("results", results),
            ]),
        )?;

        let components = |v: &Value| -> BTreeMap<Component, String> {
            v.as_object()
                .into_iter()
                .flatten()
                .filter_map(|(k, v)| {
                    let name = normalize_whitespace(v.as_str()?);
                    (!name.is_empty()).then_some((Component::parse(k)?, name))
                })
                .collect()
        };

        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for cell in v["cells"].as_array().into_iter().flatten() {
            let name = normalize_whitespace(cell["cell_name"].as_str().unwrap_or_default());
            if name.is_empty() || !seen.insert(name.to_lowercase()) {
                continue;
            }
            let mut names = components(&cell["caption_components"]);
            let mut conflicts = Vec::new();
            for (comp, result_name) in components(&cell["result_components"]) {
                match names.get(&comp) {
                    Some(caption_name) if !caption_name.eq_ignore_ascii_case(&result_name) => conflicts.push(comp),
                    Some(_) => {}
                    None => {
                        names.insert(comp, result_name);
                    }
                }
            }
            if names.is_empty() {
                log::warn!("{}: cell {name:?} has no named components, skipped", meta.file_stem());
                continue;
            }
            out.push(CellRecord { cell_name: name, component_names: names, graph: meta.clone(), conflicts });
        }
        Ok(out)
    }

    pub fn extract_materials(
        &self,
        doi: &str,
        paragraph: &Paragraph,
        sub: SubCategory,
        cells: &[String],
    ) -> Result<Vec<MaterialEntry>, ExtractionError> {
        let Some(component) = sub.component() else {
            return Ok(Vec::new());
        };
        let v = self.ask(
            templates::MATERIAL_EXTRACTION,
            &format!("{doi}#{}", paragraph.id),
            slots([
                ("component", component.as_str().to_string()),
                ("cells", if cells.is_empty() { "(none)".into() } else { cells.join(", ") }),
                ("paragraph", paragraph.text.clone()),
            ]),
        )?;
        let mut out = Vec::new();
        for m in v["materials"].as_array().into_iter().flatten() {
            let name = normalize_whitespace(m["material_name"].as_str().unwrap_or_default());
            if name.is_empty() {
                continue;
            }
            let role = MaterialRole::parse(m["role"].as_str().unwrap_or("other")).unwrap_or(MaterialRole::Other);
            let amount = match &m["amount"] {
                Value::Number(n) => n.as_f64().map(Amount::Scalar),
                Value::Array(items) => Some(Amount::Ratio(items.iter().filter_map(Value::as_f64).collect())),
                _ => None,
            };
            let unit = m["unit"].as_str().map(str::trim).filter(|u| !u.is_empty()).map(str::to_string);
            let negative = match &amount {
                Some(Amount::Scalar(x)) => *x < 0.0,
                Some(Amount::Ratio(r)) => r.iter().any(|x| *x < 0.0),
                None => false,
            };
            let (amount, unit) = match (amount, unit) {
                (Some(_), None) => {
                    log::warn!("{doi}#{}: amount without unit for {name:?} dropped", paragraph.id);
                    (None, None)
                }
                (Some(_), u) if negative => {
                    log::warn!("{doi}#{}: negative amount for {name:?} dropped", paragraph.id);
                    (None, u)
                }
                other => other,
            };
            let cell = m["cell"].as_str().and_then(|hint| assign_cell(hint, cells));
            out.push(MaterialEntry { component, material_name: name, role, amount, unit, cell });
        }
        Ok(out)
    }

    /// Conditions for one graph, reading caption, then results, then methods.
    /// Each field keeps the value from the earliest source that states it.
    pub fn extract_operating_conditions(
        &self,
        meta: &GraphMetadata,
        caption: &str,
        results: &[&Paragraph],
        methods: &[&Paragraph],
    ) -> Result<OperatingConditions, ExtractionError> {
        let join = |ps: &[&Paragraph]| ps.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join("\n\n");
        let texts = [
            (Source::Caption, caption.trim().to_string()),
            (Source::Result, join(results)),
            (Source::Method, join(methods)),
        ];
        if texts.iter().all(|(_, t)| t.is_empty()) {
            return Err(ExtractionError::NoSources);
        }
        let mut parts = Vec::new();
        for (source, text) in texts {
            if text.is_empty() {
                continue;
            }
            let v = self.ask(
                templates::OPERATING_CONDITION_EXTRACTION,
                &format!("{}#{}#{}#{}", meta.doi, meta.figure_id, meta.panel_label, source.as_str()),
                slots([
                    ("figure_id", meta.figure_id.clone()),
                    ("panel", if meta.panel_label.is_empty() { "(none)".into() } else { meta.panel_label.clone() }),
                    ("source", source.as_str().to_string()),
                    ("text", text),
                ]),
            )?;
            let field = |key: &str, default_unit: &str| {
                reading_from(&v[key]).filter(|(r, _)| r.is_finite()).map(|(reading, unit)| ConditionValue {
                    reading,
                    unit: unit.unwrap_or_else(|| default_unit.to_string()),
                    source,
                })
            };
            parts.push(OperatingConditions {
                c_rate: field("c_rate", "C"),
                current_density: field("current_density", "mA/cm²"),
                temperature: field("temperature", "°C"),
            });
        }
        Ok(OperatingConditions::merge_by_precedence(&parts))
    }

    /// Runs every stage over one document.
    pub fn mine_paper(&self, doc: &Document) -> Result<PaperExtraction, ExtractionError> {
        let doi = doc.doi.as_str();

        let mut graphs = Vec::new();
        for caption in &doc.captions {
            graphs.extend(self.classify_cycle_caption(doi, caption)?);
        }

        let mut categories = Vec::new();
        for p in &doc.method_paragraphs {
            categories.push(self.categorize(doi, p)?);
        }

        let mut graph_out = Vec::new();
        let mut cell_names: Vec<String> = Vec::new();
        for meta in &graphs {
            let caption = doc.caption(&meta.figure_id).expect("classified from this caption");
            let related_ids = locate_related_paragraphs(doc, meta)?;
            let related: Vec<&Paragraph> = related_ids.iter().filter_map(|id| doc.paragraph(id)).collect();
            let cells = self.extract_cells(meta, caption, &related)?;
            for c in &cells {
                if !cell_names.contains(&c.cell_name) {
                    cell_names.push(c.cell_name.clone());
                }
            }
            graph_out.push((meta.clone(), related_ids, related, caption, cells));
        }

        let operation_paras: Vec<&Paragraph> = doc
            .method_paragraphs
            .iter()
            .zip(&categories)
            .filter(|(_, c)| c.major == MajorCategory::OperatingCondition && c.sub != Some(SubCategory::Other))
            .map(|(p, _)| p)
            .collect();

        let mut materials = Vec::new();
        for (p, cat) in doc.method_paragraphs.iter().zip(&categories) {
            // synthesis and other paragraphs never reach material extraction
            if let (MajorCategory::Material, Some(sub)) = (cat.major, cat.sub) {
                materials.extend(self.extract_materials(doi, p, sub, &cell_names)?);
            }
        }

        let mut out_graphs = Vec::new();
        for (meta, related_ids, related, caption, cells) in graph_out {
            let conditions = self.extract_operating_conditions(&meta, &caption.text, &related, &operation_paras)?;
            out_graphs.push(GraphExtraction { graph: meta, related_paragraphs: related_ids, cells, conditions });
        }

        Ok(PaperExtraction { doi: doi.to_string(), graphs: out_graphs, materials, paragraph_categories: categories })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Section;
    use crate::gateway::{AnswerKeyEntry, ScriptedBackend};
    use serde_json::json;
    use std::sync::Arc;

    fn para(id: &str, section: Section, text: &str) -> Paragraph {
        Paragraph { id: id.into(), section, text: text.into() }
    }

    /// Every combination of caption/result/method stating a c-rate and a
    /// temperature: the earliest stating source always wins.
    #[test]
    fn condition_precedence_over_all_presence_combinations() {
        let meta = GraphMetadata::new("10.5555/p", "Fig. 1", "a");
        let values = [(Source::Caption, 0.5), (Source::Result, 1.0), (Source::Method, 2.0)];
        for mask in 0u8..8 {
            let mut answers = Vec::new();
            for (i, (source, rate)) in values.iter().enumerate() {
                let stated = mask & (1 << i) != 0;
                let response = if stated {
                    json!({"c_rate": {"value": rate, "unit": "C"}, "temperature": {"value": 25.0 + i as f64, "unit": "°C"}})
                } else {
                    json!({"c_rate": null, "temperature": null})
                };
                answers.push(AnswerKeyEntry {
                    template: templates::OPERATING_CONDITION_EXTRACTION.into(),
                    subject: format!("10.5555/p#Fig. 1#a#{}", source.as_str()),
                    response,
                });
            }
            let ex = Extractor::new(Gateway::new(Arc::new(ScriptedBackend::from_entries(answers).unwrap())));
            let r = para("r1", Section::Result, "Results text.");
            let m = para("m1", Section::Method, "Methods text.");
            let got = ex.extract_operating_conditions(&meta, "Caption text.", &[&r], &[&m]).unwrap();
            let expected = values.iter().enumerate().find(|(i, _)| mask & (1 << i) != 0);
            match expected {
                None => assert!(got.is_empty(), "mask {mask:03b}"),
                Some((i, (source, rate))) => {
                    let c = got.c_rate.unwrap();
                    assert_eq!((c.source, c.reading), (*source, Reading::Point(*rate)), "mask {mask:03b}");
                    let t = got.temperature.unwrap();
                    assert_eq!(t.reading, Reading::Point(25.0 + i as f64));
                }
            }
        }
    }

    #[test]
    fn no_sources_is_an_error() {
        let ex = Extractor::new(Gateway::new(Arc::new(ScriptedBackend::default())));
        let meta = GraphMetadata::new("10.5555/p", "Fig. 1", "");
        assert_eq!(ex.extract_operating_conditions(&meta, "  ", &[], &[]), Err(ExtractionError::NoSources));
    }

    #[test]
    fn sub_stage_requires_component_major() {
        let ex = Extractor::new(Gateway::new(Arc::new(ScriptedBackend::default())));
        let p = para("m1", Section::Method, "text");
        let err = ex.categorize_paragraph("d", &p, Stage::Sub, Some(MajorCategory::Synthesis));
        assert!(matches!(err, Err(ExtractionError::InvalidStage(_))));
    }

    #[test]
    fn cell_assignment_rules() {
        let cells = vec!["bare Li".to_string(), "LiF-coated Li".to_string(), "HCE".to_string()];
        assert_eq!(assign_cell("BARE li", &cells).as_deref(), Some("bare Li"));
        assert_eq!(assign_cell("LiF coated", &cells).as_deref(), Some("LiF-coated Li"));
        // "li" is shared by two cells
        assert_eq!(assign_cell("Li", &cells), None);
        assert_eq!(assign_cell("Control", &cells), None);
    }

    #[test]
    fn sub_category_consistency() {
        assert!(SubCategory::Electrolyte.is_valid_for(MajorCategory::Material));
        assert!(!SubCategory::CyclePerformance.is_valid_for(MajorCategory::Material));
        assert!(SubCategory::CyclePerformance.is_valid_for(MajorCategory::OperatingCondition));
        assert!(!SubCategory::Other.is_valid_for(MajorCategory::Synthesis));
    }

    #[test]
    fn readings_from_values() {
        let v = serde_json::json!({"min": 1.0, "max": 0.2, "unit": "C"});
        assert_eq!(reading_from(&v).unwrap().0, Reading::Range([0.2, 1.0]));
        assert!(reading_from(&Value::Null).is_none());
    }
}
