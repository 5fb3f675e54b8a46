//! File writers. Numbers in CSV files use `{:.16e}` (17 significant digits,
//! `.` as decimal point); every file ends with a newline.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn optional(x: Option<f64>) -> String {
    x.map(number).unwrap_or_default()
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        context: format!("writing {}", path.display()),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        context: format!("creating {}", dir.display()),
        source,
    })
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize to JSON");
    text.push('\n');
    fs::write(&path, text).map_err(io(&path))?;
    Ok(path)
}

pub fn write_csv<I>(dir: &Path, name: &str, header: &[&str], rows: I) -> Result<PathBuf, CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let path = dir.join(name);
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)
        .map_err(|e| csv_error(&path, e))?;
    writer.write_record(header).map_err(|e| csv_error(&path, e))?;
    for row in rows {
        writer.write_record(&row).map_err(|e| csv_error(&path, e))?;
    }
    writer.flush().map_err(io(&path))?;
    Ok(path)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Io {
        context: format!("writing {}", path.display()),
        source: std::io::Error::other(e),
    }
}
