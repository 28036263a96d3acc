use crate::DeviceId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no device can reach the base station")]
    NoConnectableDevice,
    #[error("no base-station-connectable head candidate")]
    NoEligibleHead,
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty member list")]
    EmptyMemberList,
    #[error("data signature mismatch between members")]
    SignatureMismatch,
    #[error("probe set has no labels")]
    MissingLabels,
    #[error("label {label} outside [0, {num_classes})")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("feature index {index} out of range for {len} columns")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("duplicate device id {0}")]
    DuplicateDevice(DeviceId),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
