//! File-backed workspace.
//!
//! ```text
//! ROOT/
//!   matches/{sha256}.jsonl      ingested logs, named by content hash
//!   sequences/{sha256}.jsonl    abstraction output for the match with that hash
//!   rubric.toml
//!   annotations.log             append-only annotation store
//! ```
//!
//! Derived results are cached in memory under a key hashed from the kind of
//! result, its parameters and the hashes of every input it reads.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::Serialize;
use sha2::{Digest, Sha256};

use seqlab_core::abstraction::{abstract_match, compress_dss, sequences_from_jsonl, sequences_to_jsonl, StateSequence};
use seqlab_core::annotation::{load_rubric, AnnotationStore, LabelApplication, LoadReport, Rubric, RubricError, StoreError, StoredApplication};
use seqlab_core::fixtures::RUBRIC_FINAL;
use seqlab_core::segmentation::{find_boundaries, split_sequence, SegmentBoundaries};
use seqlab_core::telemetry::{parse_match_log, to_jsonl, MatchLog, ParseError};
use seqlab_core::{DssSequence, ProximityConfig, Segment};

use crate::pipeline::{self, EmbeddingView, MineParams, PipelineError};

#[derive(Debug, thiserror::Error)]
pub enum WorkspaceError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("match `{0}` already exists")]
    Conflict(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Rubric(#[from] RubricError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("storage failure: {0}")]
    Io(#[from] std::io::Error),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A stored match with everything computed at ingest.
#[derive(Debug)]
pub struct IngestedMatch {
    pub log: MatchLog,
    pub hash: String,
    pub boundaries: SegmentBoundaries,
    pub sequences: Vec<StateSequence>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchSummary {
    pub match_id: String,
    pub hash: String,
    pub players: usize,
    pub match_end_s: f64,
    pub boundaries: SegmentBoundaries,
}

struct RubricState {
    rubric: Arc<Rubric>,
    hash: String,
}

#[derive(Default)]
struct MatchIndex {
    by_id: BTreeMap<String, Arc<IngestedMatch>>,
    /// Hash over the sorted (id, content hash) list.
    hash: String,
}

pub struct Workspace {
    root: PathBuf,
    proximity: ProximityConfig,
    matches: RwLock<Arc<MatchIndex>>,
    ingest_lock: Mutex<()>,
    rubric: RwLock<RubricState>,
    store: AnnotationStore,
    load_report: LoadReport,
    cache: Mutex<HashMap<String, Arc<Vec<u8>>>>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::File::open(&tmp)?.sync_all()?;
    fs::rename(&tmp, path)
}

impl Workspace {
    /// Open `root`, creating the layout if needed and loading every stored match.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, WorkspaceError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("matches"))?;
        fs::create_dir_all(root.join("sequences"))?;
        let rubric_path = root.join("rubric.toml");
        if !rubric_path.exists() {
            write_atomic(&rubric_path, RUBRIC_FINAL.as_bytes())?;
        }
        let rubric_text = fs::read_to_string(&rubric_path)?;
        let rubric = load_rubric(&rubric_text)?;
        let (store, load_report) = AnnotationStore::open(root.join("annotations.log"))?;
        let ws = Workspace {
            proximity: ProximityConfig::default(),
            matches: RwLock::new(Arc::new(MatchIndex::default())),
            ingest_lock: Mutex::new(()),
            rubric: RwLock::new(RubricState { rubric: Arc::new(rubric), hash: sha256_hex(rubric_text.as_bytes()) }),
            store,
            load_report,
            cache: Mutex::new(HashMap::new()),
            root,
        };
        let mut by_id = BTreeMap::new();
        for m in pipeline::load_matches_dir(&ws.root.join("matches"))? {
            let entry = ws.prepare(m)?;
            by_id.insert(entry.log.match_id.clone(), Arc::new(entry));
        }
        *ws.matches.write() = Arc::new(index(by_id));
        Ok(ws)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn store(&self) -> &AnnotationStore {
        &self.store
    }

    /// What reopening the annotation log found.
    pub fn load_report(&self) -> LoadReport {
        self.load_report
    }

    /// Abstract a parsed match, reusing the on-disk sequence file when present.
    fn prepare(&self, log: MatchLog) -> Result<IngestedMatch, WorkspaceError> {
        let canonical = to_jsonl(&log);
        let hash = sha256_hex(canonical.as_bytes());
        let seq_path = self.root.join("sequences").join(format!("{hash}.jsonl"));
        let cached = fs::read_to_string(&seq_path).ok().and_then(|t| sequences_from_jsonl(&t).ok());
        let sequences = match cached {
            Some(s) if s.len() == log.players.len() => s,
            _ => {
                let s = abstract_match(&log, &self.proximity).map_err(PipelineError::from)?;
                write_atomic(&seq_path, sequences_to_jsonl(&s).as_bytes())?;
                s
            }
        };
        Ok(IngestedMatch { boundaries: find_boundaries(&log), log, hash, sequences })
    }

    /// Parse, validate, store and abstract a raw match log.
    pub fn ingest(&self, raw: &[u8]) -> Result<Arc<IngestedMatch>, WorkspaceError> {
        let log = parse_match_log(raw)?;
        let _guard = self.ingest_lock.lock();
        let current = self.matches.read().clone();
        if current.by_id.contains_key(&log.match_id) {
            return Err(WorkspaceError::Conflict(log.match_id));
        }
        let entry = Arc::new(self.prepare(log)?);
        write_atomic(&self.root.join("matches").join(format!("{}.jsonl", entry.hash)), to_jsonl(&entry.log).as_bytes())?;
        let mut by_id = current.by_id.clone();
        by_id.insert(entry.log.match_id.clone(), entry.clone());
        *self.matches.write() = Arc::new(index(by_id));
        Ok(entry)
    }

    pub fn match_ids(&self) -> Vec<String> {
        self.matches.read().by_id.keys().cloned().collect()
    }

    pub fn get_match(&self, id: &str) -> Result<Arc<IngestedMatch>, WorkspaceError> {
        self.matches
            .read()
            .by_id
            .get(id)
            .cloned()
            .ok_or_else(|| WorkspaceError::NotFound(format!("match `{id}`")))
    }

    pub fn summaries(&self) -> Vec<MatchSummary> {
        self.matches
            .read()
            .by_id
            .values()
            .map(|m| MatchSummary {
                match_id: m.log.match_id.clone(),
                hash: m.hash.clone(),
                players: m.log.players.len(),
                match_end_s: m.log.match_end_s(),
                boundaries: m.boundaries,
            })
            .collect()
    }

    pub fn rubric(&self) -> Arc<Rubric> {
        self.rubric.read().rubric.clone()
    }

    /// Replace the rubric. Existing applications are kept as they are.
    pub fn set_rubric(&self, rubric: Rubric) -> Result<(), WorkspaceError> {
        let text = rubric.to_toml();
        let mut state = self.rubric.write();
        write_atomic(&self.root.join("rubric.toml"), text.as_bytes())?;
        *state = RubricState { rubric: Arc::new(rubric), hash: sha256_hex(text.as_bytes()) };
        Ok(())
    }

    pub fn annotate(&self, app: LabelApplication) -> Result<StoredApplication, WorkspaceError> {
        let m = self.get_match(&app.match_id)?;
        if !m.log.players.iter().any(|p| p.player_id.as_str() == app.player_id) {
            return Err(WorkspaceError::BadRequest(format!(
                "player `{}` is not in match `{}`",
                app.player_id, app.match_id
            )));
        }
        let rubric = self.rubric();
        Ok(self.store.add(&rubric, app)?)
    }

    pub fn delete_annotation(&self, id: &str) -> Result<u64, WorkspaceError> {
        self.store.delete(id).map_err(|e| match e {
            StoreError::NotFound(id) => WorkspaceError::NotFound(format!("application `{id}`")),
            other => other.into(),
        })
    }

    fn snapshot_index(&self) -> Arc<MatchIndex> {
        self.matches.read().clone()
    }

    /// Serialized result for the key, computing and caching it on a miss.
    fn cached<T: Serialize>(
        &self,
        key_parts: &[&str],
        compute: impl FnOnce() -> Result<T, WorkspaceError>,
    ) -> Result<Arc<Vec<u8>>, WorkspaceError> {
        let key = sha256_hex(key_parts.join("\u{1f}").as_bytes());
        if let Some(hit) = self.cache.lock().get(&key) {
            return Ok(hit.clone());
        }
        let body = Arc::new(serde_json::to_vec(&compute()?).expect("results serialize"));
        self.cache.lock().insert(key, body.clone());
        Ok(body)
    }

    pub fn mine_json(&self, segment: Option<Segment>, params: MineParams) -> Result<Arc<Vec<u8>>, WorkspaceError> {
        let idx = self.snapshot_index();
        let p = serde_json::to_string(&params).expect("params serialize");
        self.cached(&["mine", &idx.hash, &seg_key(segment), &p], || {
            Ok(pipeline::mine(segment, idx.corpus(segment), params)?)
        })
    }

    pub fn graph_json(&self, segment: Option<Segment>) -> Result<Arc<Vec<u8>>, WorkspaceError> {
        let idx = self.snapshot_index();
        self.cached(&["graph", &idx.hash, &seg_key(segment)], || Ok(pipeline::graph(segment, idx.corpus(segment))?))
    }

    pub fn embedding_json(&self, segment: Option<Segment>, k: usize) -> Result<Arc<Vec<u8>>, WorkspaceError> {
        let idx = self.snapshot_index();
        self.cached(&["dtw", &idx.hash, &seg_key(segment), &k.to_string()], || {
            let r = pipeline::dtw_analysis(&idx.corpus(segment), k, true, Default::default())?;
            Ok(EmbeddingView::new(segment, &r))
        })
    }

    pub fn irr_json(&self, a: &str, b: &str, window_s: f64) -> Result<Arc<Vec<u8>>, WorkspaceError> {
        let idx = self.snapshot_index();
        let snap = self.store.snapshot();
        let (rubric, rubric_hash) = {
            let r = self.rubric.read();
            (r.rubric.clone(), r.hash.clone())
        };
        let tx = snap.last_tx.to_string();
        let w = window_s.to_string();
        self.cached(&["irr", &idx.hash, &rubric_hash, &tx, a, b, &w], || {
            let apps = snap.applications();
            Ok(pipeline::irr(&apps, a, &apps, b, &idx.logs(), window_s, &rubric)?)
        })
    }

    pub fn report_json(&self) -> Result<Arc<Vec<u8>>, WorkspaceError> {
        let idx = self.snapshot_index();
        let snap = self.store.snapshot();
        let tx = snap.last_tx.to_string();
        self.cached(&["report", &idx.hash, &tx], || {
            Ok(pipeline::segment_report(&snap.applications(), &idx.logs(), &idx.sequences())?)
        })
    }

    /// One match's sequences, optionally cut to a segment and/or run-compressed.
    pub fn sequences_json(&self, id: &str, segment: Option<Segment>, dss: bool) -> Result<Vec<u8>, WorkspaceError> {
        let m = self.get_match(id)?;
        let seqs: Vec<StateSequence> = match segment {
            Some(s) => m.sequences.iter().map(|q| split_sequence(q, &m.boundaries)[&s].clone()).collect(),
            None => m.sequences.clone(),
        };
        Ok(if dss {
            serde_json::to_vec(&seqs.iter().map(compress_dss).collect::<Vec<_>>())
        } else {
            serde_json::to_vec(&seqs)
        }
        .expect("sequences serialize"))
    }
}

impl MatchIndex {
    fn logs(&self) -> Vec<MatchLog> {
        self.by_id.values().map(|m| m.log.clone()).collect()
    }

    fn sequences(&self) -> Vec<Vec<StateSequence>> {
        self.by_id.values().map(|m| m.sequences.clone()).collect()
    }

    fn corpus(&self, segment: Option<Segment>) -> Vec<DssSequence> {
        let corpora = pipeline::corpora(&self.logs(), &self.sequences());
        match segment {
            Some(s) => corpora.get(&s).cloned().unwrap_or_default(),
            None => corpora.into_values().flatten().collect(),
        }
    }
}

fn seg_key(segment: Option<Segment>) -> String {
    segment.map_or_else(|| "all".to_string(), |s| s.name().to_string())
}

fn index(by_id: BTreeMap<String, Arc<IngestedMatch>>) -> MatchIndex {
    let listing: String = by_id.iter().map(|(id, m)| format!("{id}\u{1f}{}\n", m.hash)).collect();
    MatchIndex { hash: sha256_hex(listing.as_bytes()), by_id }
}
