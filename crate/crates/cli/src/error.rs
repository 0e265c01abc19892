use fuzzlens_core::code_db::DbError;
use fuzzlens_core::lang::ManifestError;
use fuzzlens_core::queries::QueryError;
use fuzzlens_core::warehouse::WarehouseError;
use serde::Serialize;
use thiserror::Error;

/// How an error surfaces: CLI exit code and HTTP status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The request itself is malformed (bad ARG shape, bad JSON, missing field).
    Malformed,
    /// Well-formed but refers to something that does not fit (no entity,
    /// unknown query, unknown file, no facts).
    Invalid,
    /// The analysis failed.
    Analysis,
}

impl ErrorClass {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorClass::Malformed | ErrorClass::Invalid => 2,
            ErrorClass::Analysis => 3,
        }
    }

    pub fn http_status(self) -> u16 {
        match self {
            ErrorClass::Malformed => 400,
            ErrorClass::Invalid => 422,
            ErrorClass::Analysis => 500,
        }
    }
}

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("unknown query `{0}`, expected q1, q2 or q3")]
    UnknownQuery(String),
    #[error("no source file named `{0}` in the project")]
    UnknownFile(String),
    #[error("unknown job `{0}`")]
    UnknownJob(String),
    #[error("no facts loaded for generation {0}; run `fuzz` first")]
    NoFacts(String),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Db(#[from] DbError),
    #[error(transparent)]
    Warehouse(#[from] WarehouseError),
    #[error("{0}")]
    Io(String),
}

impl ApiError {
    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::BadRequest(_) => "BadRequest",
            ApiError::UnknownQuery(_) => "UnknownQuery",
            ApiError::UnknownFile(_) => "UnknownFile",
            ApiError::UnknownJob(_) => "UnknownJob",
            ApiError::NoFacts(_) => "NoFacts",
            ApiError::Manifest(_) => "ManifestError",
            ApiError::Query(q) => q.kind(),
            ApiError::Db(_) => "BuildError",
            ApiError::Warehouse(_) => "WarehouseError",
            ApiError::Io(_) => "IoError",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            ApiError::BadRequest(_) | ApiError::Manifest(_) => ErrorClass::Malformed,
            ApiError::Query(QueryError::ArgShape { .. }) => ErrorClass::Malformed,
            ApiError::Query(q) if q.is_user_error() => ErrorClass::Invalid,
            ApiError::UnknownQuery(_) | ApiError::UnknownFile(_) | ApiError::UnknownJob(_) | ApiError::NoFacts(_) => {
                ErrorClass::Invalid
            }
            // A missing or unreadable source file named by the manifest is the caller's fault.
            ApiError::Db(DbError::Manifest(_) | DbError::Io { .. }) => ErrorClass::Malformed,
            _ => ErrorClass::Analysis,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody { error: ErrorDetail { kind: self.kind(), message: self.to_string() } }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Serialize)]
pub struct ErrorDetail {
    pub kind: &'static str,
    pub message: String,
}
