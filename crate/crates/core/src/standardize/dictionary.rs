use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use super::smiles::is_valid_smiles;
use super::StandardizeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChemEntry {
    pub name: String,
    pub class: String,
    pub synonyms: Vec<String>,
    /// `None` for materials without a molecular structure (oxides, carbons).
    pub smiles: Option<String>,
    pub formula: String,
    pub molecular_weight: f64,
    pub density: Option<f64>,
}

impl ChemEntry {
    /// SMILES when the species has one, else a name-based identifier.
    pub fn canonical_id(&self) -> String {
        self.smiles.clone().unwrap_or_else(|| format!("name:{}", self.name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChemDictionary {
    pub version: u32,
    entries: Vec<ChemEntry>,
    index: BTreeMap<String, usize>,
}

/// Lookup key: lowercase alphanumerics, subscript digits folded to ASCII.
pub fn normalize_name(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            '₀'..='₉' => char::from_digit(c as u32 - '₀' as u32, 10).unwrap(),
            _ => c,
        })
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

static BUILTIN: LazyLock<ChemDictionary> = LazyLock::new(|| {
    ChemDictionary::parse(include_str!("../../assets/chem_dictionary.tsv")).expect("built-in dictionary parses")
});

impl ChemDictionary {
    pub fn builtin() -> &'static ChemDictionary {
        &BUILTIN
    }

    pub fn load(path: &Path) -> Result<Self, StandardizeError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| StandardizeError::Dictionary(format!("{}: {e}", path.display())))?;
        Self::parse(&src)
    }

    pub fn parse(src: &str) -> Result<Self, StandardizeError> {
        let bad = |line: usize, m: &str| StandardizeError::Dictionary(format!("line {line}: {m}"));
        let mut version = 0;
        let mut entries = Vec::new();
        let mut index = BTreeMap::new();
        for (n, line) in src.lines().enumerate() {
            let n = n + 1;
            if let Some(meta) = line.strip_prefix("# version\t") {
                version = meta.trim().parse().map_err(|_| bad(n, "bad version"))?;
                continue;
            }
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 7 {
                return Err(bad(n, "expected 7 tab-separated columns"));
            }
            let smiles = Some(cols[3].trim()).filter(|s| !s.is_empty()).map(str::to_string);
            if let Some(s) = &smiles {
                if !is_valid_smiles(s) {
                    return Err(bad(n, &format!("invalid SMILES {s:?}")));
                }
            }
            let mw: f64 = cols[5].trim().parse().map_err(|_| bad(n, "bad molecular weight"))?;
            if mw.is_nan() || mw <= 0.0 {
                return Err(bad(n, "molecular weight must be positive"));
            }
            let density = match cols[6].trim() {
                "" => None,
                d => Some(d.parse::<f64>().ok().filter(|d| *d > 0.0).ok_or_else(|| bad(n, "bad density"))?),
            };
            let entry = ChemEntry {
                name: cols[0].trim().to_string(),
                class: cols[1].trim().to_string(),
                synonyms: cols[2].split('|').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect(),
                smiles,
                formula: cols[4].trim().to_string(),
                molecular_weight: mw,
                density,
            };
            let id = entries.len();
            for key in std::iter::once(&entry.name).chain(&entry.synonyms).map(|s| normalize_name(s)) {
                if let Some(prev) = index.insert(key.clone(), id) {
                    if prev != id {
                        return Err(bad(n, &format!("name {key:?} already used")));
                    }
                }
            }
            entries.push(entry);
        }
        Ok(Self { version, entries, index })
    }

    pub fn lookup(&self, name: &str) -> Option<&ChemEntry> {
        self.index.get(&normalize_name(name)).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[ChemEntry] {
        &self.entries
    }
}

/// SMILES for `name`. Names without a structure are `NotFound` too; callers
/// choose whether to keep the raw name.
pub fn name_to_smiles<'a>(name: &str, dict: &'a ChemDictionary) -> Result<&'a str, StandardizeError> {
    dict.lookup(name).and_then(|e| e.smiles.as_deref()).ok_or_else(|| StandardizeError::NotFound(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        let d = ChemDictionary::builtin();
        assert_eq!(name_to_smiles("LiTFSI", d).unwrap(), "[Li+].C(F)(F)(F)S(=O)(=O)[N-]S(=O)(=O)C(F)(F)F");
        assert_eq!(name_to_smiles("PVdF", d), name_to_smiles("PVDF", d));
        assert_eq!(name_to_smiles("LiPF₆", d), name_to_smiles("lithium hexafluorophosphate", d));
        assert_eq!(name_to_smiles("Xyz-42", d), Err(StandardizeError::NotFound("Xyz-42".into())));
        assert_eq!(d.lookup("NMC811").unwrap().canonical_id(), "name:NCM811");
    }

    #[test]
    fn builtin_size_and_densities() {
        let d = ChemDictionary::builtin();
        assert!(d.entries().len() >= 60);
        assert!(d.entries().iter().filter(|e| e.class == "solvent").all(|e| e.density.is_some()));
    }

    #[test]
    fn duplicate_names_rejected() {
        let src = "a\tsalt\tb\tC\tC\t12\t\nb\tsalt\t\tC\tC\t12\t\n";
        assert!(ChemDictionary::parse(src).is_err());
    }
}
