//! One-line, machine-parseable failure classes for the CLI.
//!
//! Every fatal error prints as `error[<class>]: <message>` on stderr and the
//! process exits nonzero.

use std::fmt;

#[derive(Debug)]
pub struct CliError {
    pub class: &'static str,
    pub msg: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.class, self.msg)
    }
}

impl std::error::Error for CliError {}

pub fn fail(class: &'static str, msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(CliError {
        class,
        msg: msg.into(),
    })
}

/// Map library errors onto CLI classes.
pub fn from_core(err: wavescan::Error) -> anyhow::Error {
    let class = match &err {
        wavescan::Error::InvalidInput(_) => "invalid-input",
        wavescan::Error::DegenerateInput(_) => "degenerate-input",
        wavescan::Error::NumericalDegeneracy(_) => "numerical-degeneracy",
        wavescan::Error::NoTestableVariant => "no-testable-variant",
    };
    fail(class, err.to_string())
}

pub fn io_err(path: &std::path::Path, err: std::io::Error) -> anyhow::Error {
    fail("io-error", format!("{}: {}", path.display(), err))
}
