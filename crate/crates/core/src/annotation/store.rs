use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{validate_application, AnnotationSet, LabelApplication, Rubric, Violation};

/// One line of the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub tx: u64,
    #[serde(flatten)]
    pub op: LogOp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum LogOp {
    Add { application: LabelApplication },
    Delete { application_id: String },
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Violation(#[from] Violation),
    #[error("application id `{0}` already exists")]
    DuplicateId(String),
    #[error("no application with id `{0}`")]
    NotFound(String),
    #[error("corrupt log at line {line}: {detail}")]
    Corrupt { line: usize, detail: String },
    #[error("storage failure: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredApplication {
    pub tx: u64,
    #[serde(flatten)]
    pub application: LabelApplication,
}

/// Immutable view of the store at one transaction.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    pub last_tx: u64,
    by_tx: BTreeMap<u64, LabelApplication>,
    tx_of: HashMap<String, u64>,
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.by_tx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_tx.is_empty()
    }

    pub fn get(&self, application_id: &str) -> Option<&LabelApplication> {
        self.tx_of.get(application_id).and_then(|tx| self.by_tx.get(tx))
    }

    /// Live applications in transaction order, optionally filtered.
    pub fn query(&self, annotator: Option<&str>, match_id: Option<&str>) -> Vec<StoredApplication> {
        self.by_tx
            .iter()
            .filter(|(_, a)| annotator.is_none_or(|x| a.annotator_id == x))
            .filter(|(_, a)| match_id.is_none_or(|x| a.match_id == x))
            .map(|(&tx, a)| StoredApplication { tx, application: a.clone() })
            .collect()
    }

    pub fn applications(&self) -> Vec<LabelApplication> {
        self.by_tx.values().cloned().collect()
    }

    pub fn annotation_set(&self, annotator: &str) -> AnnotationSet {
        AnnotationSet::from_applications(annotator, self.by_tx.values())
    }

    pub fn annotators(&self) -> Vec<String> {
        let mut v: Vec<String> = self.by_tx.values().map(|a| a.annotator_id.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Pairs of application ids that overlap for the same annotator and player.
    pub fn audit(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for annotator in self.annotators() {
            let set = self.annotation_set(&annotator);
            for (i, j) in set.overlapping_pairs() {
                out.push((set.applications[i].application_id.clone(), set.applications[j].application_id.clone()));
            }
        }
        out
    }

    fn apply(&mut self, rec: LogRecord) -> Result<(), String> {
        if rec.tx <= self.last_tx {
            return Err(format!("transaction id {} not above {}", rec.tx, self.last_tx));
        }
        match rec.op {
            LogOp::Add { application } => {
                if self.tx_of.contains_key(&application.application_id) {
                    return Err(format!("duplicate application id `{}`", application.application_id));
                }
                self.tx_of.insert(application.application_id.clone(), rec.tx);
                self.by_tx.insert(rec.tx, application);
            }
            LogOp::Delete { application_id } => {
                let tx = self
                    .tx_of
                    .remove(&application_id)
                    .ok_or_else(|| format!("delete of unknown application `{application_id}`"))?;
                self.by_tx.remove(&tx);
            }
        }
        self.last_tx = rec.tx;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub records: usize,
    /// Bytes of an unterminated final line that were discarded.
    pub truncated_bytes: u64,
}

/// Append-only, fsynced annotation log. Writes go through one lock; readers
/// take cheap snapshots and never block on disk.
pub struct AnnotationStore {
    path: Option<PathBuf>,
    writer: Mutex<Option<File>>,
    snapshot: RwLock<Arc<Snapshot>>,
}

impl AnnotationStore {
    pub fn in_memory() -> Self {
        AnnotationStore { path: None, writer: Mutex::new(None), snapshot: RwLock::new(Arc::new(Snapshot::default())) }
    }

    /// Open or create a log. A final line without its newline is an
    /// interrupted write and is cut off; any other bad line is an error.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, LoadReport), StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(&path)?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;
        let (snap, report) = replay(&buf)?;
        if report.truncated_bytes > 0 {
            file.set_len(buf.len() as u64 - report.truncated_bytes)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        let store = AnnotationStore {
            path: Some(path),
            writer: Mutex::new(Some(file)),
            snapshot: RwLock::new(Arc::new(snap)),
        };
        Ok((store, report))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().clone()
    }

    /// Validate against the annotator's current applications and append.
    /// An empty `application_id` is replaced with one derived from the
    /// transaction id.
    pub fn add(&self, rubric: &Rubric, mut app: LabelApplication) -> Result<StoredApplication, StoreError> {
        let mut writer = self.writer.lock();
        let current = self.snapshot();
        let tx = current.last_tx + 1;
        if app.application_id.is_empty() {
            app.application_id = format!("app-{tx}");
        }
        if current.tx_of.contains_key(&app.application_id) {
            return Err(StoreError::DuplicateId(app.application_id));
        }
        validate_application(rubric, &current.annotation_set(&app.annotator_id), &app)?;
        let rec = LogRecord { tx, op: LogOp::Add { application: app.clone() } };
        self.commit(&mut writer, &current, rec)?;
        Ok(StoredApplication { tx, application: app })
    }

    pub fn delete(&self, application_id: &str) -> Result<u64, StoreError> {
        let mut writer = self.writer.lock();
        let current = self.snapshot();
        if !current.tx_of.contains_key(application_id) {
            return Err(StoreError::NotFound(application_id.to_string()));
        }
        let tx = current.last_tx + 1;
        let rec = LogRecord { tx, op: LogOp::Delete { application_id: application_id.to_string() } };
        self.commit(&mut writer, &current, rec)?;
        Ok(tx)
    }

    fn commit(&self, writer: &mut Option<File>, current: &Snapshot, rec: LogRecord) -> Result<(), StoreError> {
        if let Some(file) = writer.as_mut() {
            let mut line = serde_json::to_vec(&rec).expect("record serializes");
            line.push(b'\n');
            file.write_all(&line)?;
            file.sync_data()?;
        }
        let mut next = current.clone();
        next.apply(rec).expect("validated before commit");
        *self.snapshot.write() = Arc::new(next);
        Ok(())
    }
}

/// Rebuild the state a log describes without opening it for writing.
/// An unterminated final line is ignored, as on open.
pub fn replay(buf: &[u8]) -> Result<(Snapshot, LoadReport), StoreError> {
    let mut snap = Snapshot::default();
    let mut report = LoadReport::default();
    let complete = match buf.iter().rposition(|&b| b == b'\n') {
        Some(i) => i + 1,
        None => 0,
    };
    report.truncated_bytes = (buf.len() - complete) as u64;
    for (i, line) in buf[..complete].split(|&b| b == b'\n').enumerate() {
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let rec: LogRecord = serde_json::from_slice(line)
            .map_err(|e| StoreError::Corrupt { line: i + 1, detail: e.to_string() })?;
        snap.apply(rec).map_err(|detail| StoreError::Corrupt { line: i + 1, detail })?;
        report.records += 1;
    }
    Ok((snap, report))
}
