use std::fmt;

use olid::error::ErrorKind;

pub const OK: u8 = 0;
pub const USAGE: u8 = 1;
pub const DATA: u8 = 2;
pub const NUMERICAL: u8 = 3;

/// A problem with the command line or configuration file.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// A check that ran to completion but did not pass.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

/// Exit status for an error: configuration problems are usage errors,
/// library errors map by kind, anything else (I/O, malformed files) is a
/// data error.
pub fn code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return USAGE;
        }
        if cause.is::<NumericalFailure>() {
            return NUMERICAL;
        }
        if let Some(e) = cause.downcast_ref::<olid::Error>() {
            return match e.kind() {
                ErrorKind::Usage => USAGE,
                ErrorKind::Data => DATA,
                ErrorKind::Numerical => NUMERICAL,
            };
        }
    }
    DATA
}
