//! Deterministic pattern-grammar extractor used when no model is available.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::types::{
    Amount, Component, ConditionValue, MaterialEntry, MaterialRole, OperatingConditions, Reading, Source,
};
use crate::corpus::Paragraph;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FallbackExtraction {
    pub materials: Vec<MaterialEntry>,
    pub conditions: OperatingConditions,
}

const NUM: &str = r"\d+(?:\.\d+)?";
const DASH: &str = r"(?:–|—|-|~|to)";

static TEMPERATURE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"({NUM})(?:\s*(?:°C|℃)?\s*{DASH}\s*({NUM}))?\s*(°C|℃|K)(?:[^A-Za-z]|$)")).unwrap()
});

static CURRENT_DENSITY: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"({NUM})(?:\s*{DASH}\s*({NUM}))?\s*mA\s*(?:cm⁻²|cm−2|cm-2|cm\^-2|cm\^\{{-2\}}|/\s*cm²|/\s*cm2|cm²|cm2)"
    ))
    .unwrap()
});

static C_RATE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!(r"({NUM})(?:\s*C?\s*{DASH}\s*({NUM}))?\s?C(?:[^A-Za-z0-9]|$)")).unwrap());

static C_FRACTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bC\s*/\s*(\d+)\b").unwrap());

static CONCENTRATION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"({NUM})\s*(M|m|wt\s?\.?\s?%|mol\s?%)\s+([A-Za-z][A-Za-z0-9₀-₉()\-]*)")).unwrap()
});

static SOLVENT_RATIO: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"([A-Za-z][A-Za-z0-9-]*(?:\s*/\s*[A-Za-z][A-Za-z0-9-]*)+)\s*\(\s*({NUM}(?:\s*:\s*{NUM})+)\s*,?\s*(v/v|w/w|by volume|by weight|vol\.?|wt\.?)?\s*\)"
    ))
    .unwrap()
});

fn num(s: &str) -> f64 {
    s.parse().expect("regex guarantees a number")
}

fn reading(lo: &str, hi: Option<regex::Match<'_>>) -> Reading {
    match hi {
        Some(h) => Reading::Range([num(lo), num(h.as_str())]),
        None => Reading::Point(num(lo)),
    }
}

/// True when the character before `start` continues a number or word, so a
/// match starting at `start` would split a token.
fn splits_token(text: &str, start: usize) -> bool {
    text[..start].chars().next_back().is_some_and(|c| c.is_alphanumeric() || c == '.' || c == '/')
}

fn normalize_ratio_unit(u: Option<&str>) -> &'static str {
    match u.map(|u| u.trim_end_matches('.')) {
        Some("w/w") | Some("by weight") | Some("wt") => "w/w",
        _ => "v/v",
    }
}

fn concentration_unit(u: &str) -> (&'static str, MaterialRole) {
    let compact: String = u.chars().filter(|c| !c.is_whitespace() && *c != '.').collect();
    match compact.as_str() {
        "M" => ("M", MaterialRole::Salt),
        "m" => ("m", MaterialRole::Salt),
        "wt%" => ("wt%", MaterialRole::Additive),
        _ => ("mol%", MaterialRole::Additive),
    }
}

/// Extracts quantities matching the fallback grammar. Never fails; text with
/// no quantities yields an empty result.
pub fn fallback_extract(paragraph: &Paragraph) -> FallbackExtraction {
    extract_text(&paragraph.text, Source::from(paragraph.section))
}

pub fn extract_text(text: &str, source: Source) -> FallbackExtraction {
    let mut materials: Vec<(usize, MaterialEntry)> = Vec::new();

    for c in CONCENTRATION.captures_iter(text) {
        let whole = c.get(0).unwrap();
        let name = c[3].trim_end_matches(['(', '-']).to_string();
        if splits_token(text, whole.start()) || !name.chars().any(|ch| ch.is_ascii_uppercase()) {
            continue;
        }
        let (unit, role) = concentration_unit(&c[2]);
        materials.push((
            whole.start(),
            MaterialEntry {
                component: Component::Electrolyte,
                material_name: name,
                role,
                amount: Some(Amount::Scalar(num(&c[1]))),
                unit: Some(unit.to_string()),
                cell: None,
            },
        ));
    }

    for c in SOLVENT_RATIO.captures_iter(text) {
        let whole = c.get(0).unwrap();
        let names: String = c[1].split('/').map(str::trim).collect::<Vec<_>>().join("/");
        let parts: Vec<f64> = c[2].split(':').map(|p| num(p.trim())).collect();
        if names.split('/').count() != parts.len() {
            continue;
        }
        materials.push((
            whole.start(),
            MaterialEntry {
                component: Component::Electrolyte,
                material_name: names,
                role: MaterialRole::Solvent,
                amount: Some(Amount::Ratio(parts)),
                unit: Some(normalize_ratio_unit(c.get(3).map(|m| m.as_str())).to_string()),
                cell: None,
            },
        ));
    }
    materials.sort_by_key(|(pos, _)| *pos);

    let mut conditions = OperatingConditions::default();
    let mut temp_spans = Vec::new();

    for c in TEMPERATURE.captures_iter(text) {
        let start = c.get(0).unwrap().start();
        if splits_token(text, start) {
            continue;
        }
        temp_spans.push(start..c.get(3).unwrap().end());
        if conditions.temperature.is_none() {
            let unit = if &c[3] == "K" { "K" } else { "°C" };
            conditions.temperature =
                Some(ConditionValue { reading: reading(&c[1], c.get(2)), unit: unit.to_string(), source });
        }
    }

    if let Some(c) = CURRENT_DENSITY.captures_iter(text).find(|c| !splits_token(text, c.get(0).unwrap().start())) {
        conditions.current_density =
            Some(ConditionValue { reading: reading(&c[1], c.get(2)), unit: "mA/cm²".to_string(), source });
    }

    let c_rate = C_RATE
        .captures_iter(text)
        .filter(|c| {
            let start = c.get(0).unwrap().start();
            !splits_token(text, start) && !temp_spans.iter().any(|s| s.contains(&start))
        })
        .map(|c| (c.get(0).unwrap().start(), reading(&c[1], c.get(2))))
        .chain(C_FRACTION.captures_iter(text).filter_map(|c| {
            let d = num(&c[1]);
            (d > 0.0).then(|| (c.get(0).unwrap().start(), Reading::Point(1.0 / d)))
        }))
        .min_by_key(|(pos, _)| *pos);
    if let Some((_, r)) = c_rate {
        conditions.c_rate = Some(ConditionValue { reading: r, unit: "C".to_string(), source });
    }

    FallbackExtraction { materials: materials.into_iter().map(|(_, m)| m).collect(), conditions }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> FallbackExtraction {
        extract_text(text, Source::Method)
    }

    #[test]
    fn salt_grammar_hit() {
        let r = run("4 M LiFSI");
        assert_eq!(r.materials.len(), 1);
        let m = &r.materials[0];
        assert_eq!(m.material_name, "LiFSI");
        assert_eq!(m.role, MaterialRole::Salt);
        assert_eq!(m.amount, Some(Amount::Scalar(4.0)));
        assert_eq!(m.unit.as_deref(), Some("M"));
    }

    #[test]
    fn c_rate_and_temperature() {
        let r = run("cycled at 1 C and 25 °C");
        assert_eq!(r.conditions.c_rate.unwrap().reading, Reading::Point(1.0));
        let t = r.conditions.temperature.unwrap();
        assert_eq!(t.reading, Reading::Point(25.0));
        assert_eq!(t.unit, "°C");
    }

    #[test]
    fn prose_without_quantities() {
        let r = run("The morphology of the deposited lithium was examined carefully. Celgard separators are common.");
        assert!(r.materials.is_empty());
        assert!(r.conditions.is_empty());
    }

    #[test]
    fn electrolyte_recipe() {
        let r = run("1 M LiTFSI in DOL/DME (1:1 v/v) with 2 wt% LiNO₃");
        let names: Vec<_> = r.materials.iter().map(|m| (m.material_name.as_str(), m.role)).collect();
        assert_eq!(
            names,
            [("LiTFSI", MaterialRole::Salt), ("DOL/DME", MaterialRole::Solvent), ("LiNO₃", MaterialRole::Additive)]
        );
        assert_eq!(r.materials[1].amount, Some(Amount::Ratio(vec![1.0, 1.0])));
        assert_eq!(r.materials[2].unit.as_deref(), Some("wt%"));
    }

    #[test]
    fn ranges_current_density_and_kelvin() {
        let r = run("tested at 0.2–1.0 C and 0.5 mA cm⁻² at 298 K");
        assert_eq!(r.conditions.c_rate.unwrap().reading, Reading::Range([0.2, 1.0]));
        assert_eq!(r.conditions.current_density.unwrap().reading, Reading::Point(0.5));
        let t = r.conditions.temperature.unwrap();
        assert_eq!((t.reading, t.unit.as_str()), (Reading::Point(298.0), "K"));
    }

    #[test]
    fn c_fraction_and_no_false_positives() {
        let r = run("cycled at C/10 with a 50 m thick film");
        assert!((r.conditions.c_rate.unwrap().reading.midpoint() - 0.1).abs() < 1e-12);
        assert!(r.materials.is_empty());
    }

    #[test]
    fn temperature_is_not_a_c_rate() {
        let r = run("held at 25 °C");
        assert!(r.conditions.c_rate.is_none());
        let r = run("held at 60℃ then 2C");
        assert_eq!(r.conditions.c_rate.unwrap().reading, Reading::Point(2.0));
    }
}
