//! Exit codes: 0 success, 2 usage, 3 data, 4 I/O.

use std::fmt;

pub const USAGE: i32 = 2;
pub const DATA: i32 = 3;
pub const IO: i32 = 4;

/// A command line that parsed but cannot be acted on.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return USAGE;
        }
        if cause.is::<std::io::Error>() {
            return IO;
        }
        if let Some(e) = cause.downcast_ref::<intrarc::Error>() {
            return match e {
                intrarc::Error::Io(_) => IO,
                intrarc::Error::Csv(c) if c.is_io_error() => IO,
                _ => DATA,
            };
        }
    }
    DATA
}
