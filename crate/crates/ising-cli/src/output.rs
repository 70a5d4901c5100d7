//! File emission: CSV, JSON, PGM, text grids and the audit log.

use crate::CliError;
use ising_core::{Configuration, Site};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Output directory that records every file it writes, for the audit log.
pub struct OutDir {
    root: PathBuf,
    written: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(io)?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        std::fs::write(self.path(name), bytes).map_err(io)?;
        self.written.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(io)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// RFC 4180 CSV with a header row.
    pub fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(io)?;
        self.write(name, &bytes)
    }

    /// Writes `audit.log`: one `key = value` line per entry, then the hash of
    /// every file written so far. No timestamps, so reruns are byte-identical.
    pub fn audit(&mut self, entries: &[(&str, String)]) -> Result<(), CliError> {
        let mut text = String::new();
        for (k, v) in entries {
            let _ = writeln!(text, "{k} = {v}");
        }
        for (name, hash) in &self.written {
            let _ = writeln!(text, "sha256({name}) = {hash}");
        }
        self.write("audit.log", text.as_bytes())
    }
}

/// Spins on the rectangle `lo..=hi` of the plane through the origin spanned by
/// the first two axes, top row first.
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<i8>,
}

impl Grid {
    pub fn sample(u: &Configuration, lo: [i64; 2], hi: [i64; 2]) -> Self {
        let d = u.dim();
        let mut cells = Vec::new();
        for y in (lo[1]..=hi[1]).rev() {
            for x in lo[0]..=hi[0] {
                let mut c = vec![0i64; d];
                c[0] = x;
                c[1] = y;
                cells.push(u.spin(&Site::new(&c)));
            }
        }
        Self { width: (hi[0] - lo[0] + 1) as usize, height: (hi[1] - lo[1] + 1) as usize, cells }
    }

    /// `+` and `-` characters, one row per line.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.cells.len() + self.height);
        for row in self.cells.chunks(self.width) {
            s.extend(row.iter().map(|v| if *v > 0 { '+' } else { '-' }));
            s.push('\n');
        }
        s
    }

    /// Binary PGM (P5, maxval 255): −1 → 0, +1 → 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.cells.iter().map(|v| if *v > 0 { 255u8 } else { 0u8 }));
        out
    }
}
