pub mod corpus;
pub mod digitizer;
pub mod eval;
pub mod extraction;
pub mod features;
pub mod fixtures;
pub mod gateway;
pub mod merge;
pub mod ml;
pub mod standardize;

/// The types most pipeline code touches, in one import.
pub mod prelude {
    pub use crate::corpus::{Document, GraphMetadata};
    pub use crate::digitizer::{digitize, CycleSeries, DigitizerConfig};
    pub use crate::eval::{classification_metrics, regression_metrics};
    pub use crate::extraction::{Extractor, PaperExtraction};
    pub use crate::features::{build_schema, encode_dataset, filter_dataset, FeatureSchema, FilterCriteria, Target};
    pub use crate::gateway::Gateway;
    pub use crate::merge::{assemble_database, Database, MergeConfig, MergedCellRecord};
    pub use crate::ml::{fit_forest, fit_gbm, predict, train_test_split, Dataset, Ensemble, Task};
}
