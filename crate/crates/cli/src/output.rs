//! CSV and JSON emission.
//!
//! Floats are written in the shortest form that parses back to the same
//! value, switching to exponent notation for very large or small magnitudes.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        ryu::Buffer::new().format_finite(v).to_string()
    }
}

/// Empty field for `None`.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// `dir/stem.csv` → `dir/stem.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Fails early when the directory that should receive `path` is missing,
/// so long runs do not end in a write error.
pub fn check_parent_dir(path: &Path) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => return Ok(()),
    };
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::io(
            path,
            io::Error::new(io::ErrorKind::NotFound, "output directory does not exist"),
        ))
    }
}

/// A CSV sink writing either to a file or to stdout.
pub struct CsvOut {
    inner: csv::Writer<Box<dyn Write>>,
    path: Option<PathBuf>,
}

impl CsvOut {
    pub fn create(path: Option<&Path>) -> Result<Self> {
        let sink: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).map_err(|e| CliError::io(p, e))?,
            )),
            None => Box::new(io::stdout().lock()),
        };
        Ok(Self {
            inner: csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(sink),
            path: path.map(Path::to_path_buf),
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(|e| self.err(e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| match &self.path {
            Some(p) => CliError::io(p, e),
            None => CliError::io(Path::new("<stdout>"), e),
        })
    }

    fn err(&self, e: csv::Error) -> CliError {
        let path = self
            .path
            .clone()
            .unwrap_or_else(|| PathBuf::from("<stdout>"));
        CliError::io(&path, io::Error::other(e))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [
            0.1,
            1.0 / 3.0,
            1e-300,
            6.02e23,
            -2.5,
            0.0,
            f64::MIN_POSITIVE,
        ] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn sibling_names() {
        assert_eq!(
            sibling(Path::new("out/run.csv"), "manifest.json"),
            PathBuf::from("out/run.manifest.json")
        );
        assert_eq!(
            sibling(Path::new("run"), "coords.csv"),
            PathBuf::from("run.coords.csv")
        );
    }
}
