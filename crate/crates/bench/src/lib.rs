//! Seeded synthetic inputs shared by the benches.

use std::collections::BTreeMap;

use cellmine_core::corpus::GraphMetadata;
use cellmine_core::digitizer::{Axis, CycleSeries, Rgb};
use cellmine_core::extraction::{CellRecord, Component, MaterialRole};
use cellmine_core::merge::{MatchMethod, MergedCellRecord, Provenance, StandardConditions, StandardMaterial};
use cellmine_core::ml::{Dataset, Task};
use cellmine_core::standardize::{ChemDictionary, CycleMetrics};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Distinct colors with pixel counts: `k` curve hues blurred by
/// anti-aliasing, plus sparse grey noise.
pub fn color_histogram(k: usize, seed: u64) -> Vec<(Rgb, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..k {
        let base: Rgb = [rng.random(), rng.random(), rng.random()];
        for _ in 0..200 {
            let c = base.map(|v| v.saturating_add_signed(rng.random_range(-12..=12)));
            out.push((c, rng.random_range(1..40)));
        }
    }
    for _ in 0..300 {
        let g = rng.random_range(90..230);
        out.push(([g, g, g], 1));
    }
    out.sort();
    out.dedup_by_key(|(c, _)| *c);
    out
}

/// Smooth nonlinear regression problem with `n` rows and `d` features.
pub fn regression_dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let y =
        x.iter().map(|r| 10.0 * r[0] * r[1 % d] + 4.0 * (6.0 * r[2 % d]).sin() + rng.random_range(-0.5..0.5)).collect();
    Dataset::new(x, y, (0..n).map(|i| i.to_string()).collect(), Task::Regression).expect("valid dataset")
}

fn material(component: Component, role: MaterialRole, name: &str, value: Option<f64>) -> StandardMaterial {
    let e = ChemDictionary::builtin().lookup(name);
    StandardMaterial {
        component,
        role,
        name: name.into(),
        dict_name: e.map(|e| e.name.clone()),
        canonical_id: e.map(|e| e.canonical_id()),
        class: e.map(|e| e.class.clone()),
        value,
        unit: None,
        flags: vec![],
    }
}

/// Database-shaped records drawing cathode, salts and solvents from the
/// built-in dictionary.
pub fn synthetic_records(n: usize, seed: u64) -> Vec<MergedCellRecord> {
    const CATHODES: [&str; 5] = ["NCM811", "NCM622", "LFP", "LCO", "sulfur"];
    const SALTS: [&str; 4] = ["LiPF6", "LiTFSI", "LiFSI", "LiNO3"];
    const SOLVENTS: [&str; 6] = ["EC", "DMC", "DEC", "FEC", "DME", "DOL"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let name = format!("cell {i}");
            let mut m = vec![
                material(Component::Cathode, MaterialRole::ActiveMaterial, CATHODES[rng.random_range(0..5)], None),
                material(Component::Separator, MaterialRole::Separator, "Celgard 2400", None),
                material(Component::Cathode, MaterialRole::Loading, "loading", Some(rng.random_range(1.0..20.0))),
            ];
            for _ in 0..rng.random_range(1..=2) {
                let salt = SALTS[rng.random_range(0..4)];
                m.push(material(Component::Electrolyte, MaterialRole::Salt, salt, Some(rng.random_range(0.5..4.0))));
            }
            for _ in 0..rng.random_range(1..=3) {
                let solvent = SOLVENTS[rng.random_range(0..6)];
                m.push(material(
                    Component::Electrolyte,
                    MaterialRole::Solvent,
                    solvent,
                    Some(rng.random_range(0.1..1.0)),
                ));
            }
            let q0 = rng.random_range(120.0..220.0);
            let points: Vec<(u32, f64)> = (1..=300).map(|c| (c, q0 * (1.0 - 0.0005 * f64::from(c)))).collect();
            let g = GraphMetadata::new("10.5555/bench", "Fig. 1", "a");
            MergedCellRecord {
                cell: CellRecord {
                    cell_name: name.clone(),
                    component_names: BTreeMap::new(),
                    graph: g.clone(),
                    conflicts: vec![],
                },
                materials: m,
                conditions: StandardConditions {
                    c_rate: Some(rng.random_range(0.1..2.0)),
                    current_density: None,
                    temperature: Some(25.0),
                    flags: vec![],
                },
                series: CycleSeries { label: name.clone(), points, axis: Axis::Left },
                metrics: CycleMetrics {
                    initial_capacity: q0,
                    capacity_at: BTreeMap::from([(100, Some(q0 * 0.95))]),
                    max_cycle: 300,
                    eol_cycle: None,
                    stable_at: BTreeMap::from([(100, true)]),
                },
                provenance: Provenance {
                    doi: g.doi,
                    figure: g.figure_id,
                    panel: g.panel_label,
                    series_label: name,
                    match_method: MatchMethod::Fallback,
                    match_score: 1.0,
                },
            }
        })
        .collect()
}
