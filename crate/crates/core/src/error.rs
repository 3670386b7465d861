use thiserror::Error;

/// Errors surfaced by every operation in the crate.
///
/// Each variant maps onto a stable machine-readable code (see [`Error::code`]),
/// which the HTTP layer echoes in its error envelope.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field `{field}`: {reason}")]
    InvalidField { field: String, reason: String },

    #[error("zone {0} is not configured")]
    ZoneUnknown(u32),

    #[error("{kind} `{id}` not found")]
    NotFound { kind: &'static str, id: String },

    #[error("reference `{0}` does not resolve to a record of the matching kind")]
    DanglingReference(String),

    #[error("illegal case status transition {from} -> {to}")]
    IllegalTransition { from: String, to: String },

    #[error("only a secretary may override the open-case check")]
    OverrideForbidden,

    #[error("certificate `{0}` was not issued")]
    NotIssued(String),

    #[error("invalid location: {0}")]
    InvalidLocation(String),

    #[error("point ({lat}, {lon}) lies outside every zone")]
    Unzoned { lat: f64, lon: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("label `{0}` is not in the declared class set")]
    UnknownLabel(String),

    #[error("feature vector does not match the schema: {0}")]
    SchemaMismatch(String),

    #[error("{records} records cannot be split into {k} folds")]
    TooFewRecords { records: usize, k: usize },

    #[error("need at least two classes, found {0}")]
    InsufficientClasses(usize),

    #[error("message is empty")]
    EmptyMessage,

    #[error("character {0:?} is outside the GSM-7 alphabet")]
    UnsupportedCharset(char),

    #[error("no SMS gateway is configured")]
    GatewayUnconfigured,

    #[error("forbidden: {0}")]
    Forbidden(String),

    #[error("advisory body is empty")]
    EmptyBody,

    #[error("malformed CSV: {0}")]
    MalformedCsv(String),

    #[error("bad credentials")]
    BadCredentials,

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("store is unavailable after an injected crash")]
    Crashed,

    #[error("storage error: {0}")]
    Storage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidField { .. } => "INVALID_FIELD",
            Error::ZoneUnknown(_) => "ZONE_UNKNOWN",
            Error::NotFound { .. } => "NOT_FOUND",
            Error::DanglingReference(_) => "DANGLING_REFERENCE",
            Error::IllegalTransition { .. } => "ILLEGAL_TRANSITION",
            Error::OverrideForbidden => "OVERRIDE_FORBIDDEN",
            Error::NotIssued(_) => "NOT_ISSUED",
            Error::InvalidLocation(_) => "INVALID_LOCATION",
            Error::Unzoned { .. } => "UNZONED",
            Error::EmptyDataset => "EMPTY_DATASET",
            Error::UnknownLabel(_) => "UNKNOWN_LABEL",
            Error::SchemaMismatch(_) => "SCHEMA_MISMATCH",
            Error::TooFewRecords { .. } => "TOO_FEW_RECORDS",
            Error::InsufficientClasses(_) => "INSUFFICIENT_CLASSES",
            Error::EmptyMessage => "EMPTY_MESSAGE",
            Error::UnsupportedCharset(_) => "UNSUPPORTED_CHARSET",
            Error::GatewayUnconfigured => "GATEWAY_UNCONFIGURED",
            Error::Forbidden(_) => "FORBIDDEN",
            Error::EmptyBody => "EMPTY_BODY",
            Error::MalformedCsv(_) => "MALFORMED_CSV",
            Error::BadCredentials => "BAD_CREDENTIALS",
            Error::Conflict(_) => "CONFLICT",
            Error::Crashed => "CRASHED",
            Error::Storage(_) | Error::Io(_) => "STORAGE",
        }
    }

    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidField {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn not_found(kind: &'static str, id: impl ToString) -> Self {
        Error::NotFound {
            kind,
            id: id.to_string(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::MalformedCsv(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
