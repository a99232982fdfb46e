//! Dataset filtering and fixed-width feature encoding.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::extraction::{Component, MaterialRole};
use crate::merge::{MergedCellRecord, StandardMaterial};
use crate::ml::{Dataset, MlError, Task};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("no records to build a schema from")]
    EmptyDataset,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error("io: {0}")]
    Io(String),
}

/// Cathode family used by per-task filters.
pub fn cathode_family(dict_name: &str) -> &'static str {
    let n = dict_name.to_ascii_uppercase();
    if n.starts_with("NCM") || n.starts_with("NMC") || n == "NCA" {
        "NCM"
    } else if n == "LFP" {
        "LFP"
    } else if n == "SULFUR" || n == "S" {
        "S"
    } else {
        "other"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterCriteria {
    /// Room-temperature band in °C, inclusive.
    pub temperature_band: [f64; 2],
    pub keep_unstated_temperature: bool,
    /// Separators must resolve to a dictionary entry with this name prefix.
    pub separator_prefix: String,
    /// Cathode families to keep (`NCM`, `LFP`, `S`, `other`); empty keeps all.
    pub cathode_families: Vec<String>,
}

impl Default for FilterCriteria {
    fn default() -> Self {
        Self {
            temperature_band: [20.0, 30.0],
            keep_unstated_temperature: true,
            separator_prefix: "Celgard".into(),
            cathode_families: Vec::new(),
        }
    }
}

fn is_pure_separator(m: &StandardMaterial, prefix: &str) -> bool {
    m.class.as_deref() == Some("separator") && m.dict_name.as_deref().is_some_and(|n| n.starts_with(prefix))
}

/// The cathode family of a record, from its first cathode active material.
pub fn record_family(r: &MergedCellRecord) -> &'static str {
    r.materials
        .iter()
        .find(|m| m.component == Component::Cathode && m.role == MaterialRole::ActiveMaterial)
        .and_then(|m| m.dict_name.as_deref())
        .map_or("other", cathode_family)
}

pub fn passes_filter(r: &MergedCellRecord, c: &FilterCriteria) -> bool {
    let separators: Vec<&StandardMaterial> =
        r.materials.iter().filter(|m| m.component == Component::Separator).collect();
    if separators.is_empty() || !separators.iter().all(|m| is_pure_separator(m, &c.separator_prefix)) {
        return false;
    }
    let temp_ok = match r.conditions.temperature {
        Some(t) => t >= c.temperature_band[0] && t <= c.temperature_band[1],
        None => c.keep_unstated_temperature,
    };
    temp_ok && (c.cathode_families.is_empty() || c.cathode_families.iter().any(|f| f == record_family(r)))
}

pub fn filter_dataset<'a>(db: &'a [MergedCellRecord], c: &FilterCriteria) -> Vec<&'a MergedCellRecord> {
    db.iter().filter(|r| passes_filter(r, c)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    OnehotPresence,
    Concentration,
    Ratio,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub kind: SlotKind,
    /// Role for material slots, field name for numeric slots.
    pub source: String,
    /// Canonical identifier (SMILES or `name:` id) or canonical unit.
    pub canonical: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub version: u32,
    pub slots: Vec<Slot>,
    /// Fill value per slot name for missing numeric and concentration data,
    /// computed from the records the schema was built on.
    pub imputation: BTreeMap<String, f64>,
}

/// Roles encoded as presence slots, in slot order.
pub const PRESENCE_ROLES: [MaterialRole; 6] = [
    MaterialRole::ActiveMaterial,
    MaterialRole::ConductiveAdditive,
    MaterialRole::Binder,
    MaterialRole::Additive,
    MaterialRole::Salt,
    MaterialRole::Solvent,
];

/// Numeric slots: name and canonical unit.
pub const NUMERIC_FIELDS: [(&str, &str); 5] = [
    ("anode_thickness", "μm"),
    ("loading", "mg/cm²"),
    ("c_rate", "C"),
    ("current_density", "mA/cm²"),
    ("electrolyte_amount", "μL/mAh"),
];

pub const INITIAL_CAPACITY_SLOT: &str = "initial_capacity";

fn role_name(r: MaterialRole) -> &'static str {
    MaterialRole::NAMES[role_index(r)]
}

fn role_index(r: MaterialRole) -> usize {
    MaterialRole::NAMES.iter().position(|n| MaterialRole::parse(n) == Some(r)).expect("every role has a name")
}

/// Whether a material feeds the presence slots of its role. Active
/// materials count only on the cathode.
fn encodable(m: &StandardMaterial) -> bool {
    m.canonical_id.is_some()
        && PRESENCE_ROLES.contains(&m.role)
        && (m.role != MaterialRole::ActiveMaterial || m.component == Component::Cathode)
}

fn numeric_value(r: &MergedCellRecord, field: &str) -> Option<f64> {
    let material = |component: Component, role: MaterialRole| {
        r.materials
            .iter()
            .find(|m| m.role == role && (m.component == component || role != MaterialRole::Thickness))
            .and_then(|m| m.value)
    };
    let v = match field {
        "anode_thickness" => material(Component::Anode, MaterialRole::Thickness),
        "loading" => material(Component::Cathode, MaterialRole::Loading),
        "electrolyte_amount" => material(Component::Electrolyte, MaterialRole::ElectrolyteAmount),
        "c_rate" => r.conditions.c_rate,
        "current_density" => r.conditions.current_density,
        _ => None,
    };
    v.filter(|x| x.is_finite() && *x >= 0.0)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Default salt concentration when no record states one.
const DEFAULT_MOLARITY: f64 = 1.0;

/// Builds the schema: presence slots per role and species, a concentration
/// slot per salt, a ratio slot per solvent, then the numeric slots. Species
/// within a role are ordered by canonical identifier.
pub fn build_schema(subset: &[&MergedCellRecord]) -> Result<FeatureSchema, FeatureError> {
    if subset.is_empty() {
        return Err(FeatureError::EmptyDataset);
    }
    // canonical id -> smallest dictionary name, per role
    let mut species: BTreeMap<MaterialRole, BTreeMap<String, String>> = BTreeMap::new();
    let mut conc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in subset {
        for m in r.materials.iter().filter(|m| encodable(m)) {
            let id = m.canonical_id.clone().unwrap();
            let name = m.dict_name.clone().unwrap_or_else(|| m.name.clone());
            let e = species.entry(m.role).or_default().entry(id.clone()).or_insert(name.clone());
            if name < *e {
                *e = name;
            }
            if m.role == MaterialRole::Salt {
                if let Some(v) = m.value.filter(|v| v.is_finite() && *v >= 0.0) {
                    conc.entry(id).or_default().push(v);
                }
            }
        }
    }
    let mut slots = Vec::new();
    let mut imputation = BTreeMap::new();
    let all_conc: Vec<f64> = conc.values().flatten().copied().collect();
    let fallback_conc = median(all_conc).unwrap_or(DEFAULT_MOLARITY);
    for role in PRESENCE_ROLES {
        let Some(ids) = species.get(&role) else { continue };
        let rn = role_name(role);
        for (id, name) in ids {
            slots.push(Slot {
                name: format!("{rn}:{name}"),
                kind: SlotKind::OnehotPresence,
                source: rn.to_string(),
                canonical: id.clone(),
            });
        }
        let extra = match role {
            MaterialRole::Salt => Some((SlotKind::Concentration, "conc")),
            MaterialRole::Solvent => Some((SlotKind::Ratio, "ratio")),
            _ => None,
        };
        if let Some((kind, prefix)) = extra {
            for (id, name) in ids {
                let slot_name = format!("{prefix}:{name}");
                if kind == SlotKind::Concentration {
                    let fill = conc.get(id).cloned().and_then(median).unwrap_or(fallback_conc);
                    imputation.insert(slot_name.clone(), fill);
                }
                slots.push(Slot { name: slot_name, kind, source: rn.to_string(), canonical: id.clone() });
            }
        }
    }
    for (field, unit) in NUMERIC_FIELDS {
        let observed: Vec<f64> = subset.iter().filter_map(|r| numeric_value(r, field)).collect();
        imputation.insert(field.to_string(), median(observed).unwrap_or(0.0));
        slots.push(Slot {
            name: field.to_string(),
            kind: SlotKind::Numeric,
            source: field.to_string(),
            canonical: unit.to_string(),
        });
    }
    let init: Vec<f64> =
        subset.iter().map(|r| r.metrics.initial_capacity).filter(|v| v.is_finite() && *v >= 0.0).collect();
    imputation.insert(INITIAL_CAPACITY_SLOT.to_string(), median(init).unwrap_or(0.0));
    let schema = FeatureSchema { version: SCHEMA_VERSION, slots, imputation };
    schema.check()?;
    Ok(schema)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub id: String,
    pub values: Vec<f64>,
    pub target: Option<f64>,
}

impl FeatureSchema {
    pub fn width(&self) -> usize {
        self.slots.len()
    }

    pub fn width_with(&self, include_initial_capacity: bool) -> usize {
        self.width() + usize::from(include_initial_capacity)
    }

    pub fn names(&self, include_initial_capacity: bool) -> Vec<String> {
        let mut n: Vec<String> = self.slots.iter().map(|s| s.name.clone()).collect();
        if include_initial_capacity {
            n.push(INITIAL_CAPACITY_SLOT.to_string());
        }
        n
    }

    pub fn check(&self) -> Result<(), FeatureError> {
        if self.version != SCHEMA_VERSION {
            return Err(FeatureError::SchemaMismatch(format!("schema version {}", self.version)));
        }
        let mut seen = BTreeSet::new();
        for s in &self.slots {
            if !seen.insert(&s.name) {
                return Err(FeatureError::SchemaMismatch(format!("duplicate slot {}", s.name)));
            }
            let needs_fill = matches!(s.kind, SlotKind::Numeric | SlotKind::Concentration);
            if needs_fill && !self.imputation.get(&s.name).is_some_and(|v| v.is_finite()) {
                return Err(FeatureError::SchemaMismatch(format!("no fill value for {}", s.name)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, FeatureError> {
        let schema: Self = serde_json::from_str(s).map_err(|e| FeatureError::SchemaMismatch(e.to_string()))?;
        schema.check()?;
        Ok(schema)
    }
}

fn fill(schema: &FeatureSchema, slot: &str) -> f64 {
    schema.imputation.get(slot).copied().unwrap_or(0.0)
}

/// Encodes one record. Species the schema does not know leave every slot
/// of their role untouched; missing or invalid numbers take the schema's
/// fill values. Solvent ratios are renormalized over known solvents, with
/// an even split when any known solvent lacks a fraction.
pub fn encode_record(
    r: &MergedCellRecord,
    schema: &FeatureSchema,
    include_initial_capacity: bool,
) -> Result<FeatureVector, FeatureError> {
    schema.check()?;
    let mut values = vec![0.0; schema.width_with(include_initial_capacity)];
    let index: BTreeMap<(SlotKind, &str, &str), usize> =
        schema.slots.iter().enumerate().map(|(i, s)| ((s.kind, s.source.as_str(), s.canonical.as_str()), i)).collect();
    let mut solvents: Vec<(usize, Option<f64>)> = Vec::new();
    for m in r.materials.iter().filter(|m| encodable(m)) {
        let rn = role_name(m.role);
        let id = m.canonical_id.as_deref().unwrap();
        let Some(&p) = index.get(&(SlotKind::OnehotPresence, rn, id)) else {
            continue;
        };
        values[p] = 1.0;
        let valid = m.value.filter(|v| v.is_finite() && *v >= 0.0);
        let fraction = valid.filter(|v| *v <= 1.0);
        match m.role {
            MaterialRole::Salt => {
                if let Some(&c) = index.get(&(SlotKind::Concentration, rn, id)) {
                    values[c] = valid.unwrap_or_else(|| fill(schema, &schema.slots[c].name));
                }
            }
            MaterialRole::Solvent => {
                if let Some(&c) = index.get(&(SlotKind::Ratio, rn, id)) {
                    match solvents.iter_mut().find(|(i, _)| *i == c) {
                        Some((_, f)) => *f = f.zip(fraction).map(|(a, b)| a + b),
                        None => solvents.push((c, fraction)),
                    }
                }
            }
            _ => {}
        }
    }
    if !solvents.is_empty() {
        let total: f64 = solvents.iter().filter_map(|s| s.1).sum();
        let complete = solvents.iter().all(|s| s.1.is_some()) && total > 0.0;
        for (i, f) in &solvents {
            values[*i] = if complete { f.unwrap() / total } else { 1.0 / solvents.len() as f64 };
        }
    }
    for (i, s) in schema.slots.iter().enumerate().filter(|(_, s)| s.kind == SlotKind::Numeric) {
        values[i] = numeric_value(r, &s.source).unwrap_or_else(|| fill(schema, &s.name));
    }
    if include_initial_capacity {
        let v = r.metrics.initial_capacity;
        *values.last_mut().unwrap() = if v.is_finite() && v >= 0.0 { v } else { fill(schema, INITIAL_CAPACITY_SLOT) };
    }
    debug_assert!(values.iter().all(|v| v.is_finite()));
    Ok(FeatureVector { id: r.id(), values, target: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "target", content = "cycle", rename_all = "snake_case")]
pub enum Target {
    InitialCapacity,
    CapacityAtCycle(u32),
    Stability(u32),
}

impl Target {
    pub fn task(self) -> Task {
        match self {
            Target::Stability(_) => Task::Classification,
            _ => Task::Regression,
        }
    }

    /// Initial capacity is an input only when predicting later capacity.
    pub fn uses_initial_capacity(self) -> bool {
        matches!(self, Target::CapacityAtCycle(_))
    }

    pub fn cycle(self) -> Option<u32> {
        match self {
            Target::InitialCapacity => None,
            Target::CapacityAtCycle(n) | Target::Stability(n) => Some(n),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::InitialCapacity => "initial_capacity",
            Target::CapacityAtCycle(_) => "capacity_at_cycle",
            Target::Stability(_) => "stability",
        }
    }

    /// Target value, or `None` when the record has none (for example no
    /// capacity recorded near the target cycle).
    pub fn value(self, r: &MergedCellRecord) -> Option<f64> {
        match self {
            Target::InitialCapacity => Some(r.metrics.initial_capacity),
            Target::CapacityAtCycle(n) => r.metrics.capacity_at.get(&n).copied().flatten(),
            Target::Stability(n) => r.metrics.stable_at.get(&n).map(|s| f64::from(u8::from(*s))),
        }
        .filter(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSet {
    pub dataset: Dataset,
    pub names: Vec<String>,
    /// Cathode family per row, for stratified splits and parity tags.
    pub families: Vec<String>,
    /// Records without a target value.
    pub skipped: Vec<String>,
}

/// Encodes every record that has a value for `target`.
pub fn encode_dataset(
    records: &[&MergedCellRecord],
    schema: &FeatureSchema,
    target: Target,
) -> Result<EncodedSet, FeatureError> {
    let include = target.uses_initial_capacity();
    let (mut x, mut y, mut ids, mut families, mut skipped) = (vec![], vec![], vec![], vec![], vec![]);
    for r in records {
        match target.value(r) {
            Some(t) => {
                let v = encode_record(r, schema, include)?;
                x.push(v.values);
                y.push(t);
                ids.push(v.id);
                families.push(record_family(r).to_string());
            }
            None => skipped.push(r.id()),
        }
    }
    let dataset = Dataset::new(x, y, ids, target.task())?;
    Ok(EncodedSet { dataset, names: schema.names(include), families, skipped })
}

/// Columnar CSV: `id`, one column per slot, then `target`.
pub fn dataset_to_csv(set: &EncodedSet) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend(set.names.iter().cloned());
    header.push("target".into());
    w.write_record(&header).unwrap();
    for ((row, y), id) in set.dataset.x.iter().zip(&set.dataset.y).zip(&set.dataset.ids) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        rec.push(y.to_string());
        w.write_record(&rec).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Parses [`dataset_to_csv`] output back into a dataset.
pub fn dataset_from_csv(src: &str, task: Task) -> Result<(Dataset, Vec<String>), FeatureError> {
    let mut r = csv::Reader::from_reader(src.as_bytes());
    let header: Vec<String> =
        r.headers().map_err(|e| FeatureError::SchemaMismatch(e.to_string()))?.iter().map(str::to_string).collect();
    if header.len() < 2 || header[0] != "id" || header.last().map(String::as_str) != Some("target") {
        return Err(FeatureError::SchemaMismatch("expected id,...,target columns".into()));
    }
    let names = header[1..header.len() - 1].to_vec();
    let (mut x, mut y, mut ids) = (vec![], vec![], vec![]);
    for rec in r.records() {
        let rec = rec.map_err(|e| FeatureError::SchemaMismatch(e.to_string()))?;
        let num = |s: &str| s.parse::<f64>().map_err(|e| FeatureError::SchemaMismatch(format!("{s:?}: {e}")));
        ids.push(rec[0].to_string());
        x.push((1..rec.len() - 1).map(|i| num(&rec[i])).collect::<Result<Vec<_>, _>>()?);
        y.push(num(&rec[rec.len() - 1])?);
    }
    Ok((Dataset::new(x, y, ids, task)?, names))
}
