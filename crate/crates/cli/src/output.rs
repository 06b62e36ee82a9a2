use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use superstat::{Error, Result};

/// Exit codes, one per error class.
pub mod exit {
    pub const OK: u8 = 0;
    pub const GENERIC: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const DATA: u8 = 4;
    pub const NUMERICAL: u8 = 5;
    pub const CONFIG: u8 = 6;
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => exit::IO,
        Error::Parse { .. }
        | Error::NonPositivePrice { .. }
        | Error::DuplicateTimestamp { .. }
        | Error::NonMonotonicSession { .. }
        | Error::EmptyInput
        | Error::SeriesTooShort { .. }
        | Error::ZeroVariance
        | Error::DegenerateWindow { .. }
        | Error::TooFewSamples { .. } => exit::DATA,
        Error::NoCrossing { .. }
        | Error::Domain(_)
        | Error::OptimizationFailure(_)
        | Error::QuadratureFailure { .. }
        | Error::TooFewPoints { .. }
        | Error::AllBelowFloor { .. } => exit::NUMERICAL,
        Error::InvalidArgument(_) | Error::WindowTooSmall { .. } | Error::PeriodTooLong { .. } => {
            exit::USAGE
        }
        Error::Config { .. } => exit::CONFIG,
        Error::Serialization(_) => exit::GENERIC,
    }
}

/// Output files held in memory until the whole command has succeeded, so
/// a failing run leaves nothing behind.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn csv(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut Vec<u8>) -> Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name.to_string(), buf));
        Ok(())
    }

    /// Pretty JSON with a trailing newline. Non-finite numbers would be
    /// written as `null`; since no output type serializes an absent value
    /// as `null`, any `null` is rejected here.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let tree = serde_json::to_value(value)?;
        if let Some(path) = find_null(&tree, String::new()) {
            return Err(Error::Domain(format!(
                "non-finite value at `{path}` in {name}"
            )));
        }
        let mut buf = serde_json::to_vec_pretty(&tree)?;
        buf.push(b'\n');
        self.files.push((name.to_string(), buf));
        Ok(())
    }

    /// Writes every file; on failure removes what was already written.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Err(e) = fs::write(&path, bytes) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(io_error(&path, e));
            }
            written.push(path);
        }
        if let Some(missing) = written.iter().find(|p| !p.is_file()) {
            return Err(io_error(
                missing,
                std::io::Error::new(std::io::ErrorKind::NotFound, "artifact vanished"),
            ));
        }
        Ok(written)
    }
}

pub fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn find_null(v: &serde_json::Value, path: String) -> Option<String> {
    use serde_json::Value;
    match v {
        Value::Null => Some(if path.is_empty() {
            "<root>".into()
        } else {
            path
        }),
        Value::Array(items) => items
            .iter()
            .enumerate()
            .find_map(|(i, x)| find_null(x, format!("{path}[{i}]"))),
        Value::Object(map) => map.iter().find_map(|(k, x)| {
            let p = if path.is_empty() {
                k.clone()
            } else {
                format!("{path}.{k}")
            };
            find_null(x, p)
        }),
        _ => None,
    }
}
