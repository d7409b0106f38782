use std::fmt;

/// Failure classes, one per nonzero exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Numerical,
    Statistical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Config,
            message: message.into(),
        }
    }

    pub fn statistical(message: impl Into<String>) -> Self {
        CliError {
            kind: Kind::Statistical,
            message: message.into(),
        }
    }

    /// A solver error attributed to a config section.
    pub fn field(section: &str, e: noisyqed::Error) -> Self {
        let mut err = CliError::from(e);
        err.message = format!("{section}: {}", err.message);
        err
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Config => 2,
            Kind::Numerical => 3,
            Kind::Statistical => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<noisyqed::Error> for CliError {
    fn from(e: noisyqed::Error) -> Self {
        let kind = if e.is_numerical() {
            Kind::Numerical
        } else if e.is_statistical() {
            Kind::Statistical
        } else {
            Kind::Config
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::config(e.to_string())
    }
}
