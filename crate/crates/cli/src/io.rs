//! Reading inputs and writing artifacts. Every failure names the file.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use hallway_loc::fuse::FloorPlan;
use hallway_loc::imgcore::{decode_ppm, encode_ppm, RgbImage};
use hallway_loc::wlan::{read_fingerprints_csv, read_scan_csv, FingerprintDb, RssScan};

use crate::error::CliError;

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::input(path, e))
}

pub fn read_image(path: &Path) -> Result<RgbImage, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(path, e))?;
    decode_ppm(&bytes).map_err(|e| CliError::input(path, e))
}

pub fn read_scan(path: &Path) -> Result<RssScan, CliError> {
    read_scan_csv(open(path)?).map_err(|e| CliError::input(path, e))
}

pub fn read_db(path: &Path) -> Result<FingerprintDb, CliError> {
    read_fingerprints_csv(open(path)?).map_err(|e| CliError::input(path, e))
}

pub fn read_plan(path: &Path) -> Result<FloorPlan, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    FloorPlan::from_json(&text).map_err(|e| CliError::input(path, e))
}

/// The flag value, else the config value, else a usage error naming both.
pub fn pick(flag: Option<&PathBuf>, config: Option<&PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    flag.or(config)
        .cloned()
        .ok_or_else(|| CliError::Usage(format!("no {what} file: pass --{what} or set paths.{what} in the config")))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::output(path, e))
}

pub fn write_image(path: &Path, img: &RgbImage) -> Result<(), CliError> {
    write_bytes(path, &encode_ppm(img))
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_bytes(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::output("<stdout>", e))
        }
    }
}

/// Builds a CSV document in memory.
pub fn csv_text<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}
