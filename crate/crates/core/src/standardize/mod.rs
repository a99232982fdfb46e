//! Canonical names, units and cycle metrics.

mod dictionary;
mod metrics;
mod smiles;
mod units;

pub use dictionary::{name_to_smiles, normalize_name, ChemDictionary, ChemEntry};
pub use metrics::{capacity_at, derive_cycle_metrics, CycleMetrics, MetricsConfig};
pub use smiles::is_valid_smiles;
pub use units::{
    compact_unit, convert_concentration, convert_from_molar, mixture_density, normalize_quantity, normalize_ratio,
    ConcentrationUnit, Quantity, QuantityKind, QuantityValue,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StandardizeError {
    #[error("not in the chemical dictionary: {0}")]
    NotFound(String),
    #[error("dictionary: {0}")]
    Dictionary(String),
    #[error("conversion needs a density")]
    MissingDensity,
    #[error("negative or non-finite value {0}")]
    NegativeValue(f64),
    #[error("mass percent {0} must be below 100")]
    WeightPercentOutOfRange(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown unit {0:?}")]
    UnknownUnit(String),
    #[error("unit {unit:?} does not measure {kind:?}")]
    DimensionMismatch { unit: String, kind: QuantityKind },
    #[error("unit {0:?} needs a concentration conversion")]
    NeedsConversion(String),
    #[error("series has {0} distinct cycles, need at least 2")]
    SeriesTooShort(usize),
}
