//! Concentration conversion and unit normalization to canonical units.

use serde::{Deserialize, Serialize};

use super::StandardizeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcentrationUnit {
    /// mol/L
    Molar,
    /// mol/kg of solvent
    Molal,
    /// mass percent of solute in solution
    WeightPercent,
}

fn check_params(salt_mw: f64, density: Option<f64>) -> Result<(), StandardizeError> {
    if !(salt_mw > 0.0 && salt_mw.is_finite()) {
        return Err(StandardizeError::InvalidParameter(format!("molecular weight {salt_mw}")));
    }
    if let Some(d) = density {
        if !(d > 0.0 && d.is_finite()) {
            return Err(StandardizeError::InvalidParameter(format!("density {d}")));
        }
    }
    Ok(())
}

/// Converts a salt concentration to mol/L. `density` is the solution
/// density in g/mL, needed for molality and mass percent.
pub fn convert_concentration(
    value: f64,
    unit: ConcentrationUnit,
    salt_mw: f64,
    density: Option<f64>,
) -> Result<f64, StandardizeError> {
    if value < 0.0 || !value.is_finite() {
        return Err(StandardizeError::NegativeValue(value));
    }
    check_params(salt_mw, density)?;
    match unit {
        ConcentrationUnit::Molar => Ok(value),
        ConcentrationUnit::Molal => {
            let rho = density.ok_or(StandardizeError::MissingDensity)?;
            Ok(1000.0 * rho * value / (1000.0 + value * salt_mw))
        }
        ConcentrationUnit::WeightPercent => {
            if value >= 100.0 {
                return Err(StandardizeError::WeightPercentOutOfRange(value));
            }
            let rho = density.ok_or(StandardizeError::MissingDensity)?;
            Ok(10.0 * rho * value / salt_mw)
        }
    }
}

/// Inverse of [`convert_concentration`]: mol/L to the requested unit.
pub fn convert_from_molar(
    molarity: f64,
    unit: ConcentrationUnit,
    salt_mw: f64,
    density: Option<f64>,
) -> Result<f64, StandardizeError> {
    if molarity < 0.0 || !molarity.is_finite() {
        return Err(StandardizeError::NegativeValue(molarity));
    }
    check_params(salt_mw, density)?;
    match unit {
        ConcentrationUnit::Molar => Ok(molarity),
        ConcentrationUnit::Molal => {
            let rho = density.ok_or(StandardizeError::MissingDensity)?;
            // solvent mass per litre of solution must stay positive
            let solvent_g = 1000.0 * rho - molarity * salt_mw;
            if solvent_g <= 0.0 {
                return Err(StandardizeError::InvalidParameter(format!(
                    "{molarity} mol/L of a {salt_mw} g/mol salt exceeds the solution mass"
                )));
            }
            Ok(1000.0 * molarity / solvent_g)
        }
        ConcentrationUnit::WeightPercent => {
            let rho = density.ok_or(StandardizeError::MissingDensity)?;
            let w = molarity * salt_mw / (10.0 * rho);
            if w >= 100.0 {
                return Err(StandardizeError::WeightPercentOutOfRange(w));
            }
            Ok(w)
        }
    }
}

impl ConcentrationUnit {
    /// Maps a written unit ("M", "mol/kg", "wt%", ...) to its kind.
    pub fn parse(raw: &str) -> Option<Self> {
        if raw.trim() == "m" {
            return Some(Self::Molal);
        }
        match compact_unit(raw).as_str() {
            "m" | "mol/l" | "moll-1" | "moldm-3" => Some(Self::Molar),
            "mol/kg" | "molkg-1" => Some(Self::Molal),
            "wt" => Some(Self::WeightPercent),
            _ => None,
        }
    }
}

/// Volume-weighted density of a solvent mixture, used as an approximate
/// solution density when none is reported.
pub fn mixture_density(parts: &[(f64, f64)]) -> Option<f64> {
    let total: f64 = parts.iter().map(|(frac, _)| frac).sum();
    (total > 0.0 && parts.iter().all(|(f, d)| *f >= 0.0 && *d > 0.0))
        .then(|| parts.iter().map(|(f, d)| f * d).sum::<f64>() / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantityKind {
    Concentration,
    SolventRatio,
    Thickness,
    Temperature,
    CurrentDensity,
    Loading,
    CRate,
    ElectrolyteAmount,
}

impl QuantityKind {
    pub const ALL: [QuantityKind; 8] = [
        QuantityKind::Concentration,
        QuantityKind::SolventRatio,
        QuantityKind::Thickness,
        QuantityKind::Temperature,
        QuantityKind::CurrentDensity,
        QuantityKind::Loading,
        QuantityKind::CRate,
        QuantityKind::ElectrolyteAmount,
    ];

    pub fn canonical_unit(self) -> &'static str {
        match self {
            Self::Concentration => "mol/L",
            Self::SolventRatio => "fraction",
            Self::Thickness => "μm",
            Self::Temperature => "°C",
            Self::CurrentDensity => "mA/cm²",
            Self::Loading => "mg/cm²",
            Self::CRate => "C",
            Self::ElectrolyteAmount => "μL/mAh",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuantityValue {
    Scalar(f64),
    Ratio(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub kind: QuantityKind,
    pub value: QuantityValue,
    pub unit: String,
}

impl Quantity {
    pub fn scalar(&self) -> Option<f64> {
        match self.value {
            QuantityValue::Scalar(v) => Some(v),
            QuantityValue::Ratio(_) => None,
        }
    }
}

/// How a raw unit maps to the canonical one: `canonical = raw * scale + offset`.
#[derive(Debug, Clone, Copy)]
struct Conversion {
    kind: QuantityKind,
    scale: f64,
    offset: f64,
}

const fn conv(kind: QuantityKind, scale: f64, offset: f64) -> Conversion {
    Conversion { kind, scale, offset }
}

/// Accepted units per kind, keyed by their compact spelling (see
/// [`compact_unit`]).
const UNIT_TABLE: &[(&str, Conversion)] = {
    use QuantityKind::*;
    &[
        ("mol/l", conv(Concentration, 1.0, 0.0)),
        ("m", conv(Concentration, 1.0, 0.0)),
        ("moll-1", conv(Concentration, 1.0, 0.0)),
        ("moldm-3", conv(Concentration, 1.0, 0.0)),
        ("mm", conv(Concentration, 1e-3, 0.0)),
        ("mmol/l", conv(Concentration, 1e-3, 0.0)),
        ("fraction", conv(SolventRatio, 1.0, 0.0)),
        ("v/v", conv(SolventRatio, 1.0, 0.0)),
        ("w/w", conv(SolventRatio, 1.0, 0.0)),
        ("vol", conv(SolventRatio, 1.0, 0.0)),
        ("wt", conv(SolventRatio, 1.0, 0.0)),
        ("byvolume", conv(SolventRatio, 1.0, 0.0)),
        ("byweight", conv(SolventRatio, 1.0, 0.0)),
        ("μm", conv(Thickness, 1.0, 0.0)),
        ("um", conv(Thickness, 1.0, 0.0)),
        ("micron", conv(Thickness, 1.0, 0.0)),
        ("nm", conv(Thickness, 1e-3, 0.0)),
        ("mm", conv(Thickness, 1e3, 0.0)),
        ("cm", conv(Thickness, 1e4, 0.0)),
        ("°c", conv(Temperature, 1.0, 0.0)),
        ("℃", conv(Temperature, 1.0, 0.0)),
        ("c", conv(Temperature, 1.0, 0.0)),
        ("degc", conv(Temperature, 1.0, 0.0)),
        ("k", conv(Temperature, 1.0, -273.15)),
        ("ma/cm2", conv(CurrentDensity, 1.0, 0.0)),
        ("macm-2", conv(CurrentDensity, 1.0, 0.0)),
        ("μa/cm2", conv(CurrentDensity, 1e-3, 0.0)),
        ("ua/cm2", conv(CurrentDensity, 1e-3, 0.0)),
        ("μacm-2", conv(CurrentDensity, 1e-3, 0.0)),
        ("a/cm2", conv(CurrentDensity, 1e3, 0.0)),
        ("a/m2", conv(CurrentDensity, 0.1, 0.0)),
        ("am-2", conv(CurrentDensity, 0.1, 0.0)),
        ("mg/cm2", conv(Loading, 1.0, 0.0)),
        ("mgcm-2", conv(Loading, 1.0, 0.0)),
        ("g/m2", conv(Loading, 0.1, 0.0)),
        ("c", conv(CRate, 1.0, 0.0)),
        ("crate", conv(CRate, 1.0, 0.0)),
        ("μl/mah", conv(ElectrolyteAmount, 1.0, 0.0)),
        ("ul/mah", conv(ElectrolyteAmount, 1.0, 0.0)),
        ("ml/ah", conv(ElectrolyteAmount, 1.0, 0.0)),
        ("μlmah-1", conv(ElectrolyteAmount, 1.0, 0.0)),
    ]
};

/// Case-folded unit with spaces dropped, superscripts and the micro sign
/// folded, and "per" spellings reduced.
pub fn compact_unit(unit: &str) -> String {
    let mut s = String::new();
    for c in unit.trim().chars() {
        match c {
            ' ' | '\u{a0}' | '·' | '.' | '(' | ')' | '%' => {}
            '²' => s.push('2'),
            '³' => s.push('3'),
            '⁻' | '−' | '–' => s.push('-'),
            '¹' => s.push('1'),
            'µ' => s.push('μ'),
            'M' if unit.trim() == "M" => s.push('m'),
            c => s.extend(c.to_lowercase()),
        }
    }
    s.replace("-rate", "rate").replace("_", "")
}

fn conversion(raw_unit: &str, kind: QuantityKind) -> Result<Conversion, StandardizeError> {
    let key = compact_unit(raw_unit);
    // "M" is molar, lower-case "m" is molal and never reaches this table
    if raw_unit.trim() == "m" && kind == QuantityKind::Concentration {
        return Err(StandardizeError::NeedsConversion("m".into()));
    }
    let matches: Vec<&Conversion> = UNIT_TABLE.iter().filter(|(k, _)| *k == key).map(|(_, c)| c).collect();
    if let Some(c) = matches.iter().find(|c| c.kind == kind) {
        return Ok(**c);
    }
    if kind == QuantityKind::Concentration && matches!(key.as_str(), "mol/kg" | "molkg-1" | "wt") {
        return Err(StandardizeError::NeedsConversion(raw_unit.to_string()));
    }
    if matches.is_empty() {
        Err(StandardizeError::UnknownUnit(raw_unit.to_string()))
    } else {
        Err(StandardizeError::DimensionMismatch { unit: raw_unit.to_string(), kind })
    }
}

/// Converts a raw reading to its kind's canonical unit. Ratios are scaled
/// to fractions summing to one. Molal and mass-percent concentrations need
/// [`convert_concentration`] and are reported as `NeedsConversion`.
pub fn normalize_quantity(
    value: &QuantityValue,
    raw_unit: &str,
    kind: QuantityKind,
) -> Result<Quantity, StandardizeError> {
    let c = conversion(raw_unit, kind)?;
    let value = match (value, kind) {
        (QuantityValue::Ratio(parts), QuantityKind::SolventRatio) => QuantityValue::Ratio(normalize_ratio(parts)?),
        (QuantityValue::Scalar(v), QuantityKind::SolventRatio) if *v >= 0.0 && *v <= 1.0 => {
            QuantityValue::Ratio(vec![*v])
        }
        (QuantityValue::Scalar(v), k) if k != QuantityKind::SolventRatio => {
            if !v.is_finite() {
                return Err(StandardizeError::InvalidParameter(format!("non-finite value {v}")));
            }
            let out = v * c.scale + c.offset;
            QuantityValue::Scalar(out)
        }
        _ => return Err(StandardizeError::DimensionMismatch { unit: raw_unit.to_string(), kind }),
    };
    Ok(Quantity { kind, value, unit: kind.canonical_unit().to_string() })
}

/// Ratio parts scaled to fractions summing to one.
pub fn normalize_ratio(parts: &[f64]) -> Result<Vec<f64>, StandardizeError> {
    if parts.is_empty() || parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(StandardizeError::InvalidParameter(format!("ratio {parts:?}")));
    }
    let total: f64 = parts.iter().sum();
    if total <= 0.0 {
        return Err(StandardizeError::InvalidParameter(format!("ratio {parts:?} sums to zero")));
    }
    Ok(parts.iter().map(|p| p / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ConcentrationUnit::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn unit_parsing_and_mixture_density() {
        assert_eq!(ConcentrationUnit::parse("M"), Some(Molar));
        assert_eq!(ConcentrationUnit::parse("m"), Some(Molal));
        assert_eq!(ConcentrationUnit::parse("mol kg⁻¹"), Some(Molal));
        assert_eq!(ConcentrationUnit::parse("wt %"), Some(WeightPercent));
        assert_eq!(ConcentrationUnit::parse("mol%"), None);
        let d = mixture_density(&[(0.5, 1.06), (0.5, 0.87)]).unwrap();
        assert!((d - 0.965).abs() < 1e-12);
        assert_eq!(mixture_density(&[]), None);
    }

    #[test]
    fn molality_example() {
        let c = convert_concentration(1.0, Molal, 100.0, Some(1.1)).unwrap();
        assert!((c - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_and_errors() {
        for u in [Molar, Molal, WeightPercent] {
            assert_eq!(convert_concentration(0.0, u, 287.09, Some(1.2)).unwrap(), 0.0);
        }
        assert_eq!(
            convert_concentration(100.0, WeightPercent, 68.95, Some(1.0)),
            Err(StandardizeError::WeightPercentOutOfRange(100.0))
        );
        assert_eq!(convert_concentration(1.0, Molal, 100.0, None), Err(StandardizeError::MissingDensity));
        assert_eq!(convert_concentration(-1.0, Molar, 100.0, None), Err(StandardizeError::NegativeValue(-1.0)));
    }

    #[test]
    fn wt_percent_round_trip() {
        let c = convert_concentration(2.0, WeightPercent, 68.95, Some(0.95)).unwrap();
        assert!(rel(convert_from_molar(c, WeightPercent, 68.95, Some(0.95)).unwrap(), 2.0) < 1e-12);
    }

    #[test]
    fn kelvin_to_celsius_exact() {
        let q = normalize_quantity(&QuantityValue::Scalar(298.15), "K", QuantityKind::Temperature).unwrap();
        assert_eq!(q.value, QuantityValue::Scalar(25.0));
        assert_eq!(q.unit, "°C");
    }

    #[test]
    fn ratio_and_thickness() {
        let q = normalize_quantity(&QuantityValue::Ratio(vec![1.0, 1.0]), "v/v", QuantityKind::SolventRatio).unwrap();
        assert_eq!(q.value, QuantityValue::Ratio(vec![0.5, 0.5]));
        let q = normalize_quantity(&QuantityValue::Scalar(0.25), "mm", QuantityKind::Thickness).unwrap();
        assert_eq!(q.value, QuantityValue::Scalar(250.0));
    }

    #[test]
    fn unit_spellings() {
        let cd = |u: &str| {
            normalize_quantity(&QuantityValue::Scalar(2.0), u, QuantityKind::CurrentDensity)
                .map(|q| q.scalar().unwrap())
        };
        assert_eq!(cd("mA cm⁻²").unwrap(), 2.0);
        assert_eq!(cd("mA/cm2").unwrap(), 2.0);
        assert!((cd("A/m²").unwrap() - 0.2).abs() < 1e-15);
        assert!((cd("µA cm-2").unwrap() - 0.002).abs() < 1e-15);
        assert_eq!(cd("furlongs"), Err(StandardizeError::UnknownUnit("furlongs".into())));
        assert!(matches!(cd("mm"), Err(StandardizeError::DimensionMismatch { .. })));
    }

    #[test]
    fn molal_needs_conversion() {
        let r = normalize_quantity(&QuantityValue::Scalar(2.0), "m", QuantityKind::Concentration);
        assert!(matches!(r, Err(StandardizeError::NeedsConversion(_))));
        let r = normalize_quantity(&QuantityValue::Scalar(2.0), "M", QuantityKind::Concentration).unwrap();
        assert_eq!(r.scalar(), Some(2.0));
        let r = normalize_quantity(&QuantityValue::Scalar(2.0), "wt%", QuantityKind::Concentration);
        assert!(matches!(r, Err(StandardizeError::NeedsConversion(_))));
    }

    #[test]
    fn canonical_units_are_idempotent() {
        for kind in QuantityKind::ALL {
            let v = if kind == QuantityKind::SolventRatio {
                QuantityValue::Ratio(vec![0.25, 0.75])
            } else {
                QuantityValue::Scalar(3.5)
            };
            let once = normalize_quantity(&v, kind.canonical_unit(), kind).unwrap();
            let twice = normalize_quantity(&once.value, &once.unit, kind).unwrap();
            assert_eq!(once, twice, "{kind:?}");
        }
    }
}
