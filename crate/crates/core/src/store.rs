//! API value space and argument value space.
//!
//! [`ValueStore`] keeps, per API, the deduplicated list of recorded entries,
//! and a cross-API index from `(argument name, FuzzType)` to the values seen
//! under that name. [`StoreFile`] persists the entries as an append-only
//! line-delimited file; the index is rebuilt on load.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::model::{
    entry_fingerprint, infer_fuzz_type, value_fingerprint, Fingerprint, FuzzType,
    InvocationEntry, Value,
};
use crate::rng::RngStream;

pub const STORE_MAGIC: &str = "#tracefuzz-store v1";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no seed entries for api `{0}`")]
    NoSeedEntries(String),
    #[error("{path}: not a store file (expected header `{STORE_MAGIC}`)")]
    BadHeader { path: PathBuf },
    #[error("{path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A trace line that could not be turned into an entry.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestStats {
    /// Distinct apis among the well-formed records of this batch.
    pub apis_covered: usize,
    pub entries_added: usize,
    pub duplicates_skipped: usize,
    pub errors: Vec<RecordError>,
}

impl IngestStats {
    pub fn records_ok(&self) -> usize {
        self.entries_added + self.duplicates_skipped
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreStats {
    pub num_apis: usize,
    pub total_entries: usize,
}

#[derive(Debug, Default, Clone)]
struct ApiValues {
    entries: Vec<InvocationEntry>,
    fingerprints: HashSet<Fingerprint>,
    signature: String,
}

#[derive(Debug, Default, Clone)]
struct ArgValues {
    values: Vec<Value>,
    seen: HashSet<Fingerprint>,
}

/// In-memory value spaces. Read-only after ingestion; `Sync`.
#[derive(Debug, Default, Clone)]
pub struct ValueStore {
    apis: BTreeMap<String, ApiValues>,
    args: HashMap<(String, FuzzType), BTreeMap<String, ArgValues>>,
}

impl ValueStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one entry unless an entry with the same fingerprint is already
    /// stored for its api. Returns whether it was added.
    pub fn insert(&mut self, entry: InvocationEntry) -> bool {
        let fp = entry_fingerprint(&entry);
        let slot = self.apis.entry(entry.api.clone()).or_default();
        if !slot.fingerprints.insert(fp) {
            return false;
        }
        if slot.entries.is_empty() {
            slot.signature = entry.signature();
        }
        for arg in &entry.args {
            let ty = infer_fuzz_type(&arg.value);
            if ty == FuzzType::Opaque {
                continue;
            }
            let rows = self
                .args
                .entry((arg.name.clone(), ty))
                .or_default()
                .entry(entry.api.clone())
                .or_default();
            if rows.seen.insert(value_fingerprint(&arg.value)) {
                rows.values.push(arg.value.clone());
            }
        }
        slot.entries.push(entry);
        true
    }

    /// Ingests a stream of parsed records. Malformed records are reported
    /// and skipped.
    pub fn ingest<I>(&mut self, records: I) -> IngestStats
    where
        I: IntoIterator<Item = Result<InvocationEntry, RecordError>>,
    {
        self.ingest_with(records, |_| {})
    }

    pub(crate) fn ingest_with<I, F>(&mut self, records: I, mut on_added: F) -> IngestStats
    where
        I: IntoIterator<Item = Result<InvocationEntry, RecordError>>,
        F: FnMut(&InvocationEntry),
    {
        let mut stats = IngestStats::default();
        let mut apis = HashSet::new();
        for rec in records {
            match rec {
                Ok(entry) => {
                    apis.insert(entry.api.clone());
                    if self.insert(entry.clone()) {
                        on_added(&entry);
                        stats.entries_added += 1;
                    } else {
                        stats.duplicates_skipped += 1;
                    }
                }
                Err(e) => stats.errors.push(e),
            }
        }
        stats.apis_covered = apis.len();
        stats
    }

    /// Uniformly samples one stored entry of `api`.
    pub fn sample_entry(&self, api: &str, rng: &mut RngStream) -> Result<&InvocationEntry, StoreError> {
        let slot = self
            .apis
            .get(api)
            .filter(|s| !s.entries.is_empty())
            .ok_or_else(|| StoreError::NoSeedEntries(api.to_owned()))?;
        Ok(&slot.entries[rng.below(slot.entries.len())])
    }

    /// Every api other than `exclude_api` holding at least one value under
    /// `(arg_name, arg_type)`, in api-name order.
    pub fn query_arg_candidates(
        &self,
        arg_type: &FuzzType,
        arg_name: &str,
        exclude_api: &str,
    ) -> Vec<(&str, &[Value])> {
        // HashMap lookups need an owned key; the clone is per query, not per row.
        let key = (arg_name.to_owned(), arg_type.clone());
        match self.args.get(&key) {
            None => Vec::new(),
            Some(by_api) => by_api
                .iter()
                .filter(|(api, rows)| api.as_str() != exclude_api && !rows.values.is_empty())
                .map(|(api, rows)| (api.as_str(), rows.values.as_slice()))
                .collect(),
        }
    }

    pub fn stats(&self) -> StoreStats {
        StoreStats {
            num_apis: self.apis.len(),
            total_entries: self.apis.values().map(|s| s.entries.len()).sum(),
        }
    }

    pub fn apis(&self) -> impl Iterator<Item = &str> {
        self.apis.keys().map(String::as_str)
    }

    pub fn entries(&self, api: &str) -> &[InvocationEntry] {
        self.apis.get(api).map_or(&[], |s| s.entries.as_slice())
    }

    /// Canonical signature of the first entry recorded for `api`.
    pub fn signature(&self, api: &str) -> Option<&str> {
        self.apis.get(api).map(|s| s.signature.as_str())
    }

    pub fn all_entries(&self) -> impl Iterator<Item = &InvocationEntry> {
        self.apis.values().flat_map(|s| s.entries.iter())
    }

    /// Loads a store file written by [`StoreFile`] or [`ValueStore::save`].
    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim_end() == STORE_MAGIC => {}
            Some(Err(e)) => return Err(e.into()),
            _ => {
                return Err(StoreError::BadHeader {
                    path: path.to_owned(),
                })
            }
        }
        let mut store = ValueStore::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry = parse_record(&line).map_err(|message| StoreError::Corrupt {
                path: path.to_owned(),
                line: i + 2,
                message,
            })?;
            store.insert(entry);
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let mut out = io::BufWriter::new(File::create(path)?);
        writeln!(out, "{STORE_MAGIC}")?;
        for e in self.all_entries() {
            writeln!(out, "{}", serde_json::to_string(e).map_err(io::Error::other)?)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Parses and validates one trace record.
pub fn parse_record(line: &str) -> Result<InvocationEntry, String> {
    let entry: InvocationEntry = serde_json::from_str(line).map_err(|e| e.to_string())?;
    entry.validate()?;
    Ok(entry)
}

/// Parses line-delimited trace records; blank lines and `#` comments are skipped.
/// Line numbers are 1-based.
pub fn parse_trace<R: BufRead>(reader: R) -> impl Iterator<Item = Result<InvocationEntry, RecordError>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                return Some(Err(RecordError {
                    line: i + 1,
                    message: e.to_string(),
                }))
            }
        };
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            return None;
        }
        Some(parse_record(trimmed).map_err(|message| RecordError {
            line: i + 1,
            message,
        }))
    })
}

pub fn parse_trace_str(text: &str) -> impl Iterator<Item = Result<InvocationEntry, RecordError>> + '_ {
    parse_trace(text.as_bytes())
}

/// A [`ValueStore`] backed by an append-only file.
#[derive(Debug)]
pub struct StoreFile {
    path: PathBuf,
    store: ValueStore,
}

impl StoreFile {
    /// Opens an existing store file or creates a new one.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let store = if path.exists() {
            ValueStore::load(&path)?
        } else {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(&path, format!("{STORE_MAGIC}\n"))?;
            ValueStore::new()
        };
        Ok(Self { path, store })
    }

    /// Ingests records and appends the newly added entries to the file.
    pub fn ingest<I>(&mut self, records: I) -> Result<IngestStats, StoreError>
    where
        I: IntoIterator<Item = Result<InvocationEntry, RecordError>>,
    {
        let mut out = io::BufWriter::new(OpenOptions::new().append(true).open(&self.path)?);
        let mut write_err = None;
        let stats = self.store.ingest_with(records, |e| {
            if write_err.is_none() {
                let line = serde_json::to_string(e).map_err(io::Error::other);
                if let Err(err) = line.and_then(|l| writeln!(out, "{l}")) {
                    write_err = Some(err);
                }
            }
        });
        if let Some(e) = write_err {
            return Err(e.into());
        }
        out.flush()?;
        Ok(stats)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn store(&self) -> &ValueStore {
        &self.store
    }

    pub fn into_store(self) -> ValueStore {
        self.store
    }
}
