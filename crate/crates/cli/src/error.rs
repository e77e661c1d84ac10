use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid value for {field}: {message}")]
    Validation { field: String, message: String },
    #[error("{stage} failed: {source}")]
    Runtime {
        stage: &'static str,
        #[source]
        source: qrdr::Error,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Checks(String),
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Wraps a library error; argument errors count as validation failures.
    pub fn at(stage: &'static str) -> impl FnOnce(qrdr::Error) -> Self {
        move |e| match e {
            qrdr::Error::InvalidArgument { name, reason } => CliError::Validation {
                field: name.to_string(),
                message: format!("{reason} (during {stage})"),
            },
            source => CliError::Runtime { stage, source },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 1,
            _ => 2,
        }
    }
}
