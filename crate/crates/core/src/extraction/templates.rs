//! Shipped prompt templates and the response schema each one asks for.

use std::collections::BTreeMap;
use std::path::Path;

use crate::gateway::schema::{array, nullable, opt, req, Schema};
use crate::gateway::{GatewayError, PromptTemplate};

use super::types::MaterialRole;

pub const CYCLE_GRAPH_CLASSIFICATION: &str = "cycle_graph_classification";
pub const MAJOR_CATEGORIZATION: &str = "major_categorization";
pub const SUB_CATEGORIZATION_MATERIAL: &str = "sub_categorization_material";
pub const SUB_CATEGORIZATION_OPERATION: &str = "sub_categorization_operation";
pub const CELL_EXTRACTION: &str = "cell_extraction";
pub const MATERIAL_EXTRACTION: &str = "material_extraction";
pub const OPERATING_CONDITION_EXTRACTION: &str = "operating_condition_extraction";
pub const LABEL_MATCHING: &str = "label_matching";

const BUILTIN: [(&str, &str); 8] = [
    (CYCLE_GRAPH_CLASSIFICATION, include_str!("../../assets/prompts/cycle_graph_classification.toml")),
    (MAJOR_CATEGORIZATION, include_str!("../../assets/prompts/major_categorization.toml")),
    (SUB_CATEGORIZATION_MATERIAL, include_str!("../../assets/prompts/sub_categorization_material.toml")),
    (SUB_CATEGORIZATION_OPERATION, include_str!("../../assets/prompts/sub_categorization_operation.toml")),
    (CELL_EXTRACTION, include_str!("../../assets/prompts/cell_extraction.toml")),
    (MATERIAL_EXTRACTION, include_str!("../../assets/prompts/material_extraction.toml")),
    (OPERATING_CONDITION_EXTRACTION, include_str!("../../assets/prompts/operating_condition_extraction.toml")),
    (LABEL_MATCHING, include_str!("../../assets/prompts/label_matching.toml")),
];

#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<String, PromptTemplate>,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|(name, src)| {
                let t = PromptTemplate::from_toml(src).unwrap_or_else(|e| panic!("builtin template {name}: {e}"));
                assert_eq!(t.name, *name);
                (t.name.clone(), t)
            })
            .collect();
        Self { templates }
    }

    /// Built-in templates, overridden by any `<name>.toml` found in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, GatewayError> {
        let mut set = Self::builtin();
        for name in BUILTIN.iter().map(|(n, _)| *n) {
            let path = dir.join(format!("{name}.toml"));
            if path.exists() {
                let src = std::fs::read_to_string(&path).map_err(|e| GatewayError::Io(e.to_string()))?;
                let t = PromptTemplate::from_toml(&src)?;
                if t.name != name || t.output_schema != set.templates[name].output_schema {
                    return Err(GatewayError::InvalidTemplate(format!(
                        "{}: name or output_schema differs from the built-in template",
                        path.display()
                    )));
                }
                set.templates.insert(name.to_string(), t);
            }
        }
        Ok(set)
    }

    pub fn get(&self, name: &str) -> &PromptTemplate {
        self.templates.get(name).unwrap_or_else(|| panic!("unknown template {name}"))
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.values()
    }
}

fn components_object() -> Schema {
    Schema::Object(
        ["cathode", "anode", "electrolyte", "separator", "current_collector"]
            .into_iter()
            .map(|c| opt(c, nullable(Schema::String)))
            .collect(),
    )
}

fn reading() -> Schema {
    nullable(Schema::Object(vec![
        opt("value", Schema::Number),
        opt("min", Schema::Number),
        opt("max", Schema::Number),
        opt("unit", nullable(Schema::String)),
    ]))
}

/// Response schema by name.
pub fn response_schema(name: &str) -> Option<Schema> {
    Some(match name {
        "cycle_panels" => Schema::Object(vec![req("cycle_panels", array(Schema::String))]),
        "major_category" => Schema::Object(vec![req(
            "category",
            Schema::Enum(vec!["material", "synthesis", "operating_condition", "other"]),
        )]),
        "material_subcategory" => Schema::Object(vec![req(
            "category",
            Schema::Enum(vec!["cathode", "anode", "electrolyte", "separator", "current_collector", "other"]),
        )]),
        "operation_subcategory" => {
            Schema::Object(vec![req("category", Schema::Enum(vec!["cycle_performance", "other"]))])
        }
        "cells" => Schema::Object(vec![req(
            "cells",
            array(Schema::Object(vec![
                req("cell_name", Schema::String),
                opt("caption_components", components_object()),
                opt("result_components", components_object()),
            ])),
        )]),
        "materials" => Schema::Object(vec![req(
            "materials",
            array(Schema::Object(vec![
                req("material_name", Schema::String),
                req("role", Schema::Enum(MaterialRole::NAMES.to_vec())),
                opt("amount", nullable(Schema::NumberOrArray)),
                opt("unit", nullable(Schema::String)),
                opt("cell", nullable(Schema::String)),
            ])),
        )]),
        "conditions" => Schema::Object(vec![
            opt("c_rate", reading()),
            opt("current_density", reading()),
            opt("temperature", reading()),
        ]),
        "label_assignments" => Schema::Object(vec![req(
            "assignments",
            array(Schema::Object(vec![req("label", Schema::String), opt("cell", nullable(Schema::String))])),
        )]),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::parse_fenced;

    #[test]
    fn builtin_templates_are_valid_and_exemplars_match_schema() {
        let set = TemplateSet::builtin();
        assert_eq!(set.iter().count(), BUILTIN.len());
        for t in set.iter() {
            let schema = response_schema(&t.output_schema).expect("known schema");
            for ex in &t.exemplars {
                let v = parse_fenced(&format!("```json\n{}\n```", ex.output)).unwrap();
                schema.validate(&v).unwrap_or_else(|e| panic!("{} exemplar: {e}", t.name));
            }
        }
    }
}
