//! Binary patient matrices, their ±1 encoding, code descriptions and the
//! synthetic multi-silo data source.

mod codes;
mod matrix;
mod synth;

use alloc::string::String;

pub use codes::{describe_patient, CodeDictionary, COMMON_ICU_CODES};
pub use matrix::{binarize, encode_pm1, encode_rows_pm1, PatientMatrix, RowSource};
pub use synth::{synth_source, synthetic_labels, SourceParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("non-binary value {value} at row {row}, column {col}")]
    NonBinary { row: usize, col: usize, value: u32 },
    #[error("row {row} has {found} values, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("expected {expected} cells, found {found}")]
    Length { expected: usize, found: usize },
    #[error("expected {expected} feature labels, found {found}")]
    LabelCount { expected: usize, found: usize },
    #[error("row {row} out of range for matrix with {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("duplicate code {0:?} in dictionary")]
    DuplicateCode(String),
    #[error("invalid source parameters: {0}")]
    Config(String),
    #[error("could not calibrate mean probability to {target} (reached {achieved})")]
    Calibration { target: f64, achieved: f64 },
}
