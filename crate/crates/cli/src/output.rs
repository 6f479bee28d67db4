//! Artifact writers. CSV rows are serde structs whose field names are the
//! column headers.

use crate::config::RunConfig;
use crate::{CliError, Command};
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
pub struct RunEcho<'a> {
    pub version: &'static str,
    pub command: &'a Command,
    pub config: &'a RunConfig,
}

impl<'a> RunEcho<'a> {
    pub fn new(command: &'a Command, config: &'a RunConfig) -> Self {
        RunEcho { version: env!("CARGO_PKG_VERSION"), command, config }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("cannot write {}: {e}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
