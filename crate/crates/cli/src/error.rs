use segment_purify::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn missing_model(path: &std::path::Path, hint: &str) -> Self {
        CliError::Validation(format!("missing model {} ({hint})", path.display()))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::ManifestParse(_)
            | Error::ShotCoverage { .. }
            | Error::DanglingReference { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidArgument(_)
            | Error::NoPositives
            | Error::UnknownClass(_)
            | Error::UnresolvedLabel { .. } => CliError::Validation(e.to_string()),
            Error::Io { .. }
            | Error::DescriptorFormat { .. }
            | Error::ModelFormat(_)
            | Error::Degenerate(_)
            | Error::Singular(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
