use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{GraphMetadata, Section};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MajorCategory {
    Material,
    Synthesis,
    OperatingCondition,
    Other,
}

impl MajorCategory {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "material" => Self::Material,
            "synthesis" => Self::Synthesis,
            "operating_condition" => Self::OperatingCondition,
            "other" => Self::Other,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubCategory {
    Cathode,
    Anode,
    Electrolyte,
    Separator,
    CurrentCollector,
    CyclePerformance,
    Other,
}

impl SubCategory {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "cathode" => Self::Cathode,
            "anode" => Self::Anode,
            "electrolyte" => Self::Electrolyte,
            "separator" => Self::Separator,
            "current_collector" => Self::CurrentCollector,
            "cycle_performance" => Self::CyclePerformance,
            "other" => Self::Other,
            _ => return None,
        })
    }

    pub fn is_valid_for(self, major: MajorCategory) -> bool {
        match major {
            MajorCategory::Material => self != Self::CyclePerformance,
            MajorCategory::OperatingCondition => matches!(self, Self::CyclePerformance | Self::Other),
            _ => false,
        }
    }

    pub fn component(self) -> Option<Component> {
        Some(match self {
            Self::Cathode => Component::Cathode,
            Self::Anode => Component::Anode,
            Self::Electrolyte => Component::Electrolyte,
            Self::Separator => Component::Separator,
            Self::CurrentCollector => Component::CurrentCollector,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Cathode,
    Anode,
    Electrolyte,
    Separator,
    CurrentCollector,
}

impl Component {
    pub const ALL: [Component; 5] = [
        Component::Cathode,
        Component::Anode,
        Component::Electrolyte,
        Component::Separator,
        Component::CurrentCollector,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cathode => "cathode",
            Self::Anode => "anode",
            Self::Electrolyte => "electrolyte",
            Self::Separator => "separator",
            Self::CurrentCollector => "current_collector",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialRole {
    ActiveMaterial,
    ConductiveAdditive,
    Binder,
    Salt,
    Solvent,
    Additive,
    Separator,
    CurrentCollector,
    Thickness,
    Loading,
    ElectrolyteAmount,
    Other,
}

impl MaterialRole {
    pub const NAMES: [&'static str; 12] = [
        "active_material",
        "conductive_additive",
        "binder",
        "salt",
        "solvent",
        "additive",
        "separator",
        "current_collector",
        "thickness",
        "loading",
        "electrolyte_amount",
        "other",
    ];

    pub fn parse(s: &str) -> Option<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }
}

/// A stated amount: a single number or a ratio such as `1:1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amount {
    Scalar(f64),
    Ratio(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell_name: String,
    pub component_names: BTreeMap<Component, String>,
    pub graph: GraphMetadata,
    /// Components whose caption and result names disagree; the caption wins.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conflicts: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialEntry {
    pub component: Component,
    pub material_name: String,
    pub role: MaterialRole,
    pub amount: Option<Amount>,
    pub unit: Option<String>,
    /// Owning cell; `None` is the paper-wide pool shared by all cells.
    pub cell: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Caption,
    Result,
    Method,
}

impl Source {
    pub const PRECEDENCE: [Source; 3] = [Source::Caption, Source::Result, Source::Method];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Caption => "caption",
            Self::Result => "result",
            Self::Method => "method",
        }
    }
}

impl From<Section> for Source {
    fn from(s: Section) -> Self {
        match s {
            Section::Result => Source::Result,
            Section::Method => Source::Method,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reading {
    Point(f64),
    Range([f64; 2]),
}

impl Reading {
    pub fn midpoint(&self) -> f64 {
        match *self {
            Reading::Point(v) => v,
            Reading::Range([a, b]) => 0.5 * (a + b),
        }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            Reading::Point(v) => v.is_finite(),
            Reading::Range([a, b]) => a.is_finite() && b.is_finite(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionValue {
    pub reading: Reading,
    pub unit: String,
    pub source: Source,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OperatingConditions {
    pub c_rate: Option<ConditionValue>,
    pub current_density: Option<ConditionValue>,
    pub temperature: Option<ConditionValue>,
}

impl OperatingConditions {
    pub fn is_empty(&self) -> bool {
        self.c_rate.is_none() && self.current_density.is_none() && self.temperature.is_none()
    }

    pub(crate) fn fields_mut(&mut self) -> [&mut Option<ConditionValue>; 3] {
        [&mut self.c_rate, &mut self.current_density, &mut self.temperature]
    }

    pub(crate) fn fields(&self) -> [&Option<ConditionValue>; 3] {
        [&self.c_rate, &self.current_density, &self.temperature]
    }

    /// Fills each field from the earliest source that states it.
    pub fn merge_by_precedence(parts: &[OperatingConditions]) -> OperatingConditions {
        let mut out = OperatingConditions::default();
        for (i, dst) in out.fields_mut().into_iter().enumerate() {
            *dst = parts.iter().filter_map(|p| p.fields()[i].clone()).min_by_key(|v| v.source);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParagraphCategory {
    pub paragraph_id: String,
    pub major: MajorCategory,
    pub sub: Option<SubCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExtraction {
    pub graph: GraphMetadata,
    pub related_paragraphs: Vec<String>,
    pub cells: Vec<CellRecord>,
    pub conditions: OperatingConditions,
}

/// Everything mined from one paper's text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperExtraction {
    pub doi: String,
    pub graphs: Vec<GraphExtraction>,
    pub materials: Vec<MaterialEntry>,
    pub paragraph_categories: Vec<ParagraphCategory>,
}

impl PaperExtraction {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("extraction serializes")
    }
}
