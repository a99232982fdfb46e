//! The frozen list of entity kinds a database record may carry.

use std::sync::LazyLock;

use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct EntitySpec {
    pub name: String,
    pub group: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct EntityCatalog {
    pub version: u32,
    pub entities: Vec<EntitySpec>,
}

impl EntityCatalog {
    pub fn contains(&self, name: &str) -> bool {
        self.entities.iter().any(|e| e.name == name)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

static CATALOG: LazyLock<EntityCatalog> = LazyLock::new(|| {
    serde_json::from_str(include_str!("../../assets/entity_catalog.json")).expect("entity catalog parses")
});

pub fn entity_catalog() -> &'static EntityCatalog {
    &CATALOG
}

/// Names of every entity kind in catalog order.
pub fn entity_kinds() -> Vec<&'static str> {
    CATALOG.entities.iter().map(|e| e.name.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn catalog_has_29_unique_entities() {
        let kinds = entity_kinds();
        assert_eq!(kinds.len(), 29);
        assert_eq!(kinds.iter().collect::<BTreeSet<_>>().len(), 29);
        let groups: BTreeSet<_> = entity_catalog().entities.iter().map(|e| e.group.as_str()).collect();
        assert_eq!(groups, BTreeSet::from(["cell", "material", "operating_condition"]));
    }
}
