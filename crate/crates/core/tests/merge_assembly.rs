use std::collections::BTreeMap;

use cellmine_core::corpus::GraphMetadata;
use cellmine_core::digitizer::{GraphSeriesFile, SeriesRecord};
use cellmine_core::extraction::{
    Amount, CellRecord, Component, ConditionValue, GraphExtraction, MaterialEntry, MaterialRole, OperatingConditions,
    PaperExtraction, Reading, Source,
};
use cellmine_core::merge::{assemble_database, Database, LogKind, Matcher, MergeConfig};
use cellmine_core::standardize::ChemDictionary;
use proptest::prelude::*;

fn cell(name: &str, separator: &str, g: &GraphMetadata) -> CellRecord {
    CellRecord {
        cell_name: name.into(),
        component_names: BTreeMap::from([
            (Component::Cathode, "NCM811".to_string()),
            (Component::Separator, separator.to_string()),
        ]),
        graph: g.clone(),
        conflicts: vec![],
    }
}

fn curve(start: f64, fade: f64) -> Vec<(u32, f64)> {
    (1..=120).map(|c| (c, start - fade * f64::from(c))).collect()
}

fn paper(separators: &[(&str, &str)]) -> (PaperExtraction, GraphSeriesFile) {
    let g = GraphMetadata::new("10.5555/t.1", "Fig. 2", "b");
    let cells = separators.iter().map(|(n, s)| cell(n, s, &g)).collect();
    let p = PaperExtraction {
        doi: g.doi.clone(),
        graphs: vec![GraphExtraction {
            graph: g.clone(),
            related_paragraphs: vec![],
            cells,
            conditions: OperatingConditions {
                c_rate: Some(ConditionValue {
                    reading: Reading::Point(0.5),
                    unit: "C".into(),
                    source: Source::Caption,
                }),
                current_density: None,
                temperature: None,
            },
        }],
        materials: vec![
            MaterialEntry {
                component: Component::Electrolyte,
                material_name: "LiPF6".into(),
                role: MaterialRole::Salt,
                amount: Some(Amount::Scalar(1.0)),
                unit: Some("M".into()),
                cell: None,
            },
            MaterialEntry {
                component: Component::Electrolyte,
                material_name: "EC/DEC".into(),
                role: MaterialRole::Solvent,
                amount: Some(Amount::Ratio(vec![1.0, 1.0])),
                unit: Some("v/v".into()),
                cell: None,
            },
        ],
        paragraph_categories: vec![],
    };
    let series = separators
        .iter()
        .enumerate()
        .map(|(i, (n, _))| SeriesRecord {
            label: n.to_string(),
            points: curve(200.0 - 10.0 * i as f64, 0.3 + 0.1 * i as f64),
        })
        .chain(std::iter::once(SeriesRecord { label: "Control".into(), points: curve(150.0, 0.2) }))
        .collect();
    let gf = GraphSeriesFile {
        doi: g.doi.clone(),
        figure: g.figure_id.clone(),
        panel: g.panel_label.clone(),
        series,
        unextractable: None,
    };
    (p, gf)
}

#[test]
fn two_matched_cells_make_two_records() {
    let (p, g) = paper(&[("bare Li", "Celgard 2400"), ("LiF-coated Li", "Celgard 2500")]);
    let a = assemble_database(&[p], &[g], ChemDictionary::builtin(), &MergeConfig::default(), Matcher::Fallback);
    assert_eq!(a.records.len(), 2);
    assert_eq!(a.records[0].cell.cell_name, "LiF-coated Li");
    assert!(a.log.iter().any(|e| e.kind == LogKind::UnmatchedLabel && e.item == "Control"));
    let r = &a.records[1];
    assert_eq!(r.conditions.c_rate, Some(0.5));
    assert_eq!(r.metrics.initial_capacity, 199.7);
}

#[test]
fn unknown_required_separator_drops_record() {
    let (p, g) = paper(&[("bare Li", "Celgard 2400"), ("coated", "Al2O3-coated Celgard")]);
    let a = assemble_database(&[p], &[g], ChemDictionary::builtin(), &MergeConfig::default(), Matcher::Fallback);
    assert_eq!(a.records.len(), 1);
    assert!(a.log.iter().any(|e| e.kind == LogKind::Dropped && e.item == "coated"));
}

#[test]
fn replay_is_byte_identical_and_round_trips() {
    let build = || {
        let (p, g) = paper(&[("bare Li", "Celgard 2400"), ("LiF-coated Li", "Celgard 2500")]);
        let a = assemble_database(&[p], &[g], ChemDictionary::builtin(), &MergeConfig::default(), Matcher::Fallback);
        Database { records: a.records }
    };
    let (a, b) = (build(), build());
    assert_eq!(a.to_jsonl(), b.to_jsonl());
    assert_eq!(Database::parse_jsonl(&a.to_jsonl()).unwrap(), a);
}

proptest! {
    #[test]
    fn record_count_bounded_and_injective(n_cells in 1usize..5, perm in prop::collection::vec(0usize..100, 5)) {
        let names = ["HCE", "LHCE", "Baseline", "LiNO3 additive", "FEC-rich"];
        let seps: Vec<(&str, &str)> = names[..n_cells].iter().map(|n| (*n, "Celgard 2400")).collect();
        let (p, mut g) = paper(&seps);
        // shuffle series order
        let len = g.series.len();
        for (i, k) in perm.iter().enumerate().take(len) {
            g.series.swap(i % len, k % len);
        }
        let a = assemble_database(&[p], &[g.clone()], ChemDictionary::builtin(), &MergeConfig::default(), Matcher::Fallback);
        prop_assert!(a.records.len() <= n_cells.min(g.series.len()));
        let mut used: Vec<&str> = a.records.iter().map(|r| r.cell.cell_name.as_str()).collect();
        used.sort();
        used.dedup();
        prop_assert_eq!(used.len(), a.records.len());
        for r in &a.records {
            prop_assert_eq!(&r.provenance.series_label, &r.cell.cell_name);
        }
    }
}
