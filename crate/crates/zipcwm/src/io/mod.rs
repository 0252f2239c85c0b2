//! Dataset ingestion and report emission: header-driven CSV schemas, the
//! flat key-value run configuration, and deterministic JSON/CSV writers.

mod config;
mod csv_data;
mod reports;
mod schema;

pub use config::RunConfig;
pub use csv_data::{load_csv, load_csv_str, write_dataset_csv, LoadedDataset};
pub use reports::{
    render_confusion_table, write_dataset_with_sidecar, write_evaluation, write_fit, write_json,
    write_selection, EvaluationReport,
};
pub use schema::{ColumnRole, DatasetSchema};
