use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{bound_flags, ModeSet};
use crate::error::{Error, Result};
use crate::landscape::write_grid_field;

pub const MODE_MANIFEST: &str = "modes.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct ModeManifestRow {
    pub index: usize,
    pub nu_thz: f64,
    pub bound: bool,
}

/// Writes `modes.csv` (`index,nu_thz,bound`) for every mode and a
/// `mode_NNN.hmap` field file for the first `max_fields` modes into `dir`.
/// Returns every path written.
pub fn write_modeset(
    modes: &ModeSet,
    dir: impl AsRef<Path>,
    max_fields: usize,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let flags = bound_flags(modes);
    let mut csv = String::from("index,nu_thz,bound\n");
    let mut written = Vec::with_capacity(modes.len() + 1);
    for (i, (&nu, &bound)) in modes.freqs.iter().zip(&flags).enumerate() {
        let _ = writeln!(csv, "{i},{nu:.9e},{}", u8::from(bound));
        if i < max_fields {
            let path = dir.join(format!("mode_{i:03}.hmap"));
            write_grid_field(&path, &modes.grid, &modes.fields[i])?;
            written.push(path);
        }
    }
    let manifest = dir.join(MODE_MANIFEST);
    std::fs::write(&manifest, csv)?;
    written.insert(0, manifest);
    Ok(written)
}

pub fn read_mode_manifest(path: impl AsRef<Path>) -> Result<Vec<ModeManifestRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let perr = |message: String| Error::Parse {
            line: n + 1,
            message,
        };
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(perr(format!("expected 3 columns, found {}", parts.len())));
        }
        rows.push(ModeManifestRow {
            index: parts[0].parse().map_err(|_| perr("bad index".into()))?,
            nu_thz: parts[1].parse().map_err(|_| perr("bad frequency".into()))?,
            bound: match parts[2] {
                "1" => true,
                "0" => false,
                other => return Err(perr(format!("bad bound flag {other:?}"))),
            },
        });
    }
    Ok(rows)
}
