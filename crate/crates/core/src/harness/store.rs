//! Append-only JSON-lines record store.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{SweepRecord, SCHEMA_VERSION};
use crate::error::{Error, Result};

/// What was found when a store was opened.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OpenReport {
    pub records: usize,
    /// Line number (1-based) and content of a dropped partial trailing line.
    pub truncated: Option<(usize, String)>,
}

pub struct Store {
    path: PathBuf,
    file: File,
    records: BTreeMap<String, SweepRecord>,
}

fn parse_line(line: &str, lineno: usize) -> Result<SweepRecord> {
    let v: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::Corrupt {
        line: lineno,
        reason: e.to_string(),
    })?;
    let found = v
        .get("schema")
        .and_then(|s| s.as_u64())
        .ok_or_else(|| Error::Corrupt { line: lineno, reason: "missing schema field".into() })?;
    if found != SCHEMA_VERSION as u64 {
        return Err(Error::Schema { found: found as u32, expected: SCHEMA_VERSION });
    }
    serde_json::from_value(v).map_err(|e| Error::Corrupt { line: lineno, reason: e.to_string() })
}

/// Read every complete record. A malformed final line is reported, not an
/// error; a malformed line followed by valid ones is.
fn scan(path: &Path) -> Result<(Vec<SweepRecord>, u64, Option<(usize, String)>, bool)> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut good_bytes = 0u64;
    let mut bad: Option<(usize, String, Error)> = None;
    let mut needs_newline = false;
    for (i, chunk) in reader.split(b'\n').enumerate() {
        let raw = chunk?;
        let lineno = i + 1;
        if let Some((_, _, err)) = bad.take() {
            return Err(err);
        }
        let text = String::from_utf8_lossy(&raw).into_owned();
        if text.trim().is_empty() {
            good_bytes += raw.len() as u64 + 1;
            continue;
        }
        match parse_line(&text, lineno) {
            Ok(r) => {
                out.push(r);
                good_bytes += raw.len() as u64 + 1;
            }
            Err(e @ Error::Schema { .. }) => return Err(e),
            Err(e) => bad = Some((lineno, text, e)),
        }
    }
    let len = std::fs::metadata(path)?.len();
    if good_bytes > len {
        // last valid line had no trailing newline
        good_bytes = len;
        needs_newline = true;
    }
    Ok((out, good_bytes, bad.map(|(l, t, _)| (l, t)), needs_newline))
}

impl Store {
    /// Open or create a store, keeping every complete record and dropping a
    /// partial trailing line.
    pub fn open(path: impl AsRef<Path>) -> Result<(Store, OpenReport)> {
        let path = path.as_ref().to_path_buf();
        let mut report = OpenReport::default();
        let mut records = BTreeMap::new();
        if path.exists() {
            let (recs, good, truncated, needs_newline) = scan(&path)?;
            let file = OpenOptions::new().write(true).open(&path)?;
            if truncated.is_some() {
                file.set_len(good)?;
            }
            if needs_newline {
                let mut f = &file;
                f.seek(SeekFrom::End(0))?;
                f.write_all(b"\n")?;
            }
            report.truncated = truncated;
            report.records = recs.len();
            for r in recs {
                records.insert(r.key.clone(), r);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok((Store { path, file, records }, report))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, key: &str) -> bool {
        self.records.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&SweepRecord> {
        self.records.get(key)
    }

    /// Records sorted by key.
    pub fn records(&self) -> impl Iterator<Item = &SweepRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Write one record and flush it. Existing keys are left untouched.
    pub fn append(&mut self, rec: SweepRecord) -> Result<bool> {
        if self.records.contains_key(&rec.key) {
            return Ok(false);
        }
        let mut line = serde_json::to_string(&rec)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        self.records.insert(rec.key.clone(), rec);
        Ok(true)
    }
}

/// Read-only load of a store's complete records, sorted by key.
pub fn load(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    let (mut recs, _, _, _) = scan(path.as_ref())?;
    recs.sort_by(|a, b| a.key.cmp(&b.key));
    recs.dedup_by(|a, b| a.key == b.key);
    Ok(recs)
}
