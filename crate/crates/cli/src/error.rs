use std::fmt::Display;
use std::process::ExitCode;

use serde_json::json;

/// Exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Data,
    Model,
}

impl Kind {
    pub fn code(self) -> u8 {
        match self {
            Kind::Usage => 2,
            Kind::Data => 3,
            Kind::Model => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::Data => "data",
            Kind::Model => "model",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(msg: impl Display) -> Self {
        Self { kind: Kind::Usage, error: anyhow::anyhow!("{msg}") }
    }

    /// One JSON object on stderr, then the exit code.
    pub fn report(&self) -> ExitCode {
        let chain: Vec<String> = self.error.chain().skip(1).map(|c| c.to_string()).collect();
        let body = json!({
            "error": {
                "kind": self.kind.name(),
                "exit_code": self.kind.code(),
                "message": self.error.to_string(),
                "causes": chain,
            }
        });
        eprintln!("{body}");
        ExitCode::from(self.kind.code())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags a fallible call with the exit class it maps to.
pub trait Classify<T> {
    fn data(self) -> CliResult<T>;
    fn model(self) -> CliResult<T>;
    fn data_ctx(self, ctx: impl Display) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn data(self) -> CliResult<T> {
        self.map_err(|e| CliError { kind: Kind::Data, error: e.into() })
    }

    fn model(self) -> CliResult<T> {
        self.map_err(|e| CliError { kind: Kind::Model, error: e.into() })
    }

    fn data_ctx(self, ctx: impl Display) -> CliResult<T> {
        self.map_err(|e| CliError { kind: Kind::Data, error: e.into().context(ctx.to_string()) })
    }
}
