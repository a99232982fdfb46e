//! Standardization of one cell's materials and conditions.

use serde::{Deserialize, Serialize};

use crate::extraction::{
    Amount, CellRecord, Component, ConditionValue, MaterialEntry, MaterialRole, OperatingConditions,
};
use crate::standardize::{
    convert_concentration, mixture_density, normalize_quantity, normalize_ratio, ChemDictionary, ConcentrationUnit,
    QuantityKind, QuantityValue, StandardizeError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardMaterial {
    pub component: Component,
    pub role: MaterialRole,
    /// Name as written.
    pub name: String,
    /// Dictionary name, when found.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dict_name: Option<String>,
    /// SMILES, or `name:<dictionary name>` for species without one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    /// Canonical value: mol/L for salts, volume fraction for solvents, μm,
    /// mg/cm² or μL/mAh for numeric roles; the written amount otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    /// Marks such as `approximate_density` or `unit_error`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StandardConditions {
    /// C
    pub c_rate: Option<f64>,
    /// mA/cm²
    pub current_density: Option<f64>,
    /// °C
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

fn condition(v: &Option<ConditionValue>, kind: QuantityKind, name: &str, flags: &mut Vec<String>) -> Option<f64> {
    let v = v.as_ref()?;
    match normalize_quantity(&QuantityValue::Scalar(v.reading.midpoint()), &v.unit, kind) {
        Ok(q) => q.scalar(),
        Err(e) => {
            flags.push(format!("{name}: {e}"));
            None
        }
    }
}

pub fn standardize_conditions(c: &OperatingConditions) -> StandardConditions {
    let mut flags = Vec::new();
    let out = StandardConditions {
        c_rate: condition(&c.c_rate, QuantityKind::CRate, "c_rate", &mut flags),
        current_density: condition(&c.current_density, QuantityKind::CurrentDensity, "current_density", &mut flags),
        temperature: condition(&c.temperature, QuantityKind::Temperature, "temperature", &mut flags),
        flags: Vec::new(),
    };
    StandardConditions { flags, ..out }
}

/// Materials that apply to `cell`: its own entries, plus pooled entries for
/// any (component, role) it does not state itself.
pub fn materials_for_cell<'a>(cell: &str, all: &'a [MaterialEntry]) -> Vec<&'a MaterialEntry> {
    let own: Vec<&MaterialEntry> = all.iter().filter(|m| m.cell.as_deref() == Some(cell)).collect();
    let mut out = own.clone();
    for m in all.iter().filter(|m| m.cell.is_none()) {
        if !own.iter().any(|o| o.component == m.component && o.role == m.role) {
            out.push(m);
        }
    }
    out
}

fn base(entry: &MaterialEntry, name: &str, dict: &ChemDictionary) -> StandardMaterial {
    let hit = dict.lookup(name);
    StandardMaterial {
        component: entry.component,
        role: entry.role,
        name: name.to_string(),
        dict_name: hit.map(|e| e.name.clone()),
        canonical_id: hit.map(|e| e.canonical_id()),
        class: hit.map(|e| e.class.clone()),
        value: None,
        unit: None,
        flags: Vec::new(),
    }
}

fn numeric_kind(role: MaterialRole) -> Option<QuantityKind> {
    match role {
        MaterialRole::Thickness => Some(QuantityKind::Thickness),
        MaterialRole::Loading => Some(QuantityKind::Loading),
        MaterialRole::ElectrolyteAmount => Some(QuantityKind::ElectrolyteAmount),
        _ => None,
    }
}

/// Standardizes the materials of one cell. Names missing from the dictionary
/// keep `canonical_id: None`; the caller decides whether that drops the cell.
pub fn standardize_materials(
    cell: &CellRecord,
    entries: &[&MaterialEntry],
    dict: &ChemDictionary,
) -> Vec<StandardMaterial> {
    let mut out = Vec::new();
    // solvents first so salt conversions can use their densities
    for e in entries.iter().filter(|e| e.role == MaterialRole::Solvent) {
        let names: Vec<&str> = e.material_name.split('/').map(str::trim).filter(|n| !n.is_empty()).collect();
        let fractions = match &e.amount {
            Some(Amount::Ratio(parts)) if parts.len() == names.len() => normalize_ratio(parts).ok(),
            Some(Amount::Scalar(v)) if names.len() == 1 && (0.0..=1.0).contains(v) => Some(vec![*v]),
            _ => None,
        };
        for (i, n) in names.iter().enumerate() {
            let mut m = base(e, n, dict);
            if let Some(f) = &fractions {
                m.value = Some(f[i]);
                m.unit = Some("fraction".into());
            }
            out.push(m);
        }
    }
    let solvent_density = || {
        let parts: Vec<(f64, f64)> = out
            .iter()
            .filter(|m: &&StandardMaterial| m.role == MaterialRole::Solvent)
            .filter_map(|m| {
                let d = dict.lookup(m.dict_name.as_deref()?)?.density?;
                Some((m.value.unwrap_or(1.0), d))
            })
            .collect();
        mixture_density(&parts)
    };
    let density = solvent_density();

    for e in entries.iter().filter(|e| e.role != MaterialRole::Solvent) {
        let mut m = base(e, &e.material_name, dict);
        let scalar = match e.amount {
            Some(Amount::Scalar(v)) => Some(v),
            _ => None,
        };
        match (e.role, scalar, e.unit.as_deref()) {
            (MaterialRole::Salt, Some(v), Some(u)) => match salt_molarity(v, u, &m, density, dict) {
                Ok((c, approx)) => {
                    m.value = Some(c);
                    m.unit = Some("mol/L".into());
                    if approx {
                        m.flags.push("approximate_density".into());
                    }
                }
                Err(err) => m.flags.push(format!("concentration: {err}")),
            },
            (role, Some(v), Some(u)) if numeric_kind(role).is_some() => {
                match normalize_quantity(&QuantityValue::Scalar(v), u, numeric_kind(role).unwrap()) {
                    Ok(q) => {
                        m.value = q.scalar();
                        m.unit = Some(q.unit);
                    }
                    Err(err) => m.flags.push(format!("unit: {err}")),
                }
            }
            (_, Some(v), u) => {
                m.value = Some(v);
                m.unit = u.map(str::to_string);
            }
            _ => {}
        }
        out.push(m);
    }

    // component names stated for the cell stand in for missing entries
    for (component, role) in
        [(Component::Cathode, MaterialRole::ActiveMaterial), (Component::Separator, MaterialRole::Separator)]
    {
        if out.iter().any(|m| m.component == component && m.role == role) {
            continue;
        }
        if let Some(name) = cell.component_names.get(&component) {
            let stub = MaterialEntry {
                component,
                material_name: name.clone(),
                role,
                amount: None,
                unit: None,
                cell: Some(cell.cell_name.clone()),
            };
            out.push(base(&stub, name, dict));
        }
    }
    out.sort_by(|a, b| (a.component, a.role, &a.name).cmp(&(b.component, b.role, &b.name)));
    out
}

/// Salt concentration in mol/L, and whether the density was approximated
/// from the solvent mixture.
fn salt_molarity(
    v: f64,
    unit: &str,
    m: &StandardMaterial,
    solvent_density: Option<f64>,
    dict: &ChemDictionary,
) -> Result<(f64, bool), StandardizeError> {
    let cu = ConcentrationUnit::parse(unit).ok_or_else(|| StandardizeError::UnknownUnit(unit.to_string()))?;
    if cu == ConcentrationUnit::Molar {
        let q = normalize_quantity(&QuantityValue::Scalar(v), unit, QuantityKind::Concentration)?;
        return Ok((q.scalar().unwrap(), false));
    }
    let mw = m
        .dict_name
        .as_deref()
        .and_then(|n| dict.lookup(n))
        .map(|e| e.molecular_weight)
        .ok_or_else(|| StandardizeError::NotFound(m.name.clone()))?;
    let c = convert_concentration(v, cu, mw, solvent_density)?;
    Ok((c, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::GraphMetadata;
    use crate::extraction::{Reading, Source};
    use std::collections::BTreeMap;

    fn entry(
        role: MaterialRole,
        name: &str,
        amount: Option<Amount>,
        unit: Option<&str>,
        cell: Option<&str>,
    ) -> MaterialEntry {
        MaterialEntry {
            component: Component::Electrolyte,
            material_name: name.into(),
            role,
            amount,
            unit: unit.map(str::to_string),
            cell: cell.map(str::to_string),
        }
    }

    fn cell(name: &str) -> CellRecord {
        CellRecord {
            cell_name: name.into(),
            component_names: BTreeMap::from([
                (Component::Cathode, "NCM811".to_string()),
                (Component::Separator, "Celgard 2400".to_string()),
            ]),
            graph: GraphMetadata::new("d", "Fig. 1", "a"),
            conflicts: vec![],
        }
    }

    #[test]
    fn pool_fills_only_missing_roles() {
        let all = vec![
            entry(MaterialRole::Salt, "LiFSI", Some(Amount::Scalar(4.0)), Some("M"), Some("HCE")),
            entry(MaterialRole::Salt, "LiPF6", Some(Amount::Scalar(1.0)), Some("M"), None),
            entry(MaterialRole::Solvent, "DME", None, None, None),
        ];
        let hce: Vec<_> = materials_for_cell("HCE", &all).iter().map(|m| m.material_name.as_str()).collect();
        assert_eq!(hce, ["LiFSI", "DME"]);
        let base: Vec<_> = materials_for_cell("Baseline", &all).iter().map(|m| m.material_name.as_str()).collect();
        assert_eq!(base, ["LiPF6", "DME"]);
    }

    #[test]
    fn solvents_split_and_molal_salt_converted() {
        let d = ChemDictionary::builtin();
        let all = [
            entry(MaterialRole::Solvent, "DOL/DME", Some(Amount::Ratio(vec![1.0, 1.0])), Some("v/v"), None),
            entry(MaterialRole::Salt, "LiTFSI", Some(Amount::Scalar(1.0)), Some("m"), None),
        ];
        let refs: Vec<&MaterialEntry> = all.iter().collect();
        let out = standardize_materials(&cell("x"), &refs, d);
        let solvents: Vec<_> = out.iter().filter(|m| m.role == MaterialRole::Solvent).collect();
        assert_eq!(solvents.len(), 2);
        assert!(solvents.iter().all(|m| m.value == Some(0.5)));
        let salt = out.iter().find(|m| m.role == MaterialRole::Salt).unwrap();
        let rho = 0.5 * d.lookup("DOL").unwrap().density.unwrap() + 0.5 * d.lookup("DME").unwrap().density.unwrap();
        let expect = 1000.0 * rho / (1000.0 + 287.09);
        assert!((salt.value.unwrap() - expect).abs() < 1e-12);
        assert_eq!(salt.flags, ["approximate_density"]);
        // component names fill cathode and separator
        assert!(out.iter().any(|m| m.role == MaterialRole::ActiveMaterial && m.dict_name.as_deref() == Some("NCM811")));
        assert!(out
            .iter()
            .any(|m| m.role == MaterialRole::Separator && m.dict_name.as_deref() == Some("Celgard 2400")));
    }

    #[test]
    fn conditions_to_canonical_units() {
        let cv = |r, u: &str| Some(ConditionValue { reading: r, unit: u.into(), source: Source::Method });
        let c = OperatingConditions {
            c_rate: cv(Reading::Range([0.2, 1.0]), "C"),
            current_density: cv(Reading::Point(5.0), "A/m²"),
            temperature: cv(Reading::Point(298.15), "K"),
        };
        let s = standardize_conditions(&c);
        assert!((s.c_rate.unwrap() - 0.6).abs() < 1e-12);
        assert!((s.current_density.unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(s.temperature, Some(25.0));
    }
}
