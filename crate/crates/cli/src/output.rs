//! CSV and metadata writers. Every file is written as `NAME.partial` and
//! renamed once complete, so an interrupted run never leaves a file that looks
//! finished.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::CliError;

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvOut {
    writer: csv::Writer<BufWriter<File>>,
    partial: PathBuf,
    path: PathBuf,
}

impl CsvOut {
    pub fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, CliError> {
        let path = dir.join(name);
        let partial = partial_path(&path);
        let file = File::create(&partial).map_err(|e| CliError::io(&partial, e))?;
        let mut writer = csv::Writer::from_writer(BufWriter::new(file));
        writer.write_record(header).map_err(|e| CliError::io(&partial, e))?;
        Ok(Self { writer, partial, path })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| CliError::io(&self.partial, e))
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let Self { writer, partial, path } = self;
        let mut inner = writer.into_inner().map_err(|e| CliError::io(&partial, e.into_error()))?;
        inner.flush().map_err(|e| CliError::io(&partial, e))?;
        drop(inner);
        fs::rename(&partial, &path).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// `key = value` lines, written atomically like the CSV files.
pub fn write_metadata(dir: &Path, name: &str, entries: &[(String, String)]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let partial = partial_path(&path);
    let mut text = String::new();
    for (k, v) in entries {
        text.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(&partial, text).map_err(|e| CliError::io(&partial, e))?;
    fs::rename(&partial, &path).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
