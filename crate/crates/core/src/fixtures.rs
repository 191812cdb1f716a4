//! Bundled fixture data: rubrics, a labelled reference match, a pair of
//! annotator sets for agreement checks, and the synthetic corpus manifest.
//!
//! The files under `fixtures/` are regenerated with
//! `cargo run -p seqlab-core --example build_fixtures`.

use serde::Deserialize;

use crate::annotation::{applications_from_jsonl, load_rubric, AnnotationSet, LabelApplication, Rubric};
use crate::synth::{generate_synthetic_match, SynthConfig, SynthError, TowerFallSpec};
use crate::telemetry::{parse_match_log, MatchLog};

pub const RUBRIC_FINAL: &str = include_str!("../fixtures/rubric_final.toml");
pub const RUBRIC_ITER1: &str = include_str!("../fixtures/rubric_iter1.toml");
pub const MATCH_PAPER: &str = include_str!("../fixtures/match_paper.jsonl");
pub const ANNOTATIONS_PAPER: &str = include_str!("../fixtures/annotations_paper.jsonl");
pub const IRR_FIXTURE_A: &str = include_str!("../fixtures/irr_fixture_A.jsonl");
pub const IRR_FIXTURE_B: &str = include_str!("../fixtures/irr_fixture_B.jsonl");
pub const CORPUS_MANIFEST: &str = include_str!("../fixtures/corpus.toml");

/// Window width used when checking the bundled agreement pair.
pub const IRR_WINDOW_S: f64 = 5.0;

pub fn rubric_final() -> Rubric {
    load_rubric(RUBRIC_FINAL).expect("bundled rubric is valid")
}

pub fn rubric_iter1() -> Rubric {
    load_rubric(RUBRIC_ITER1).expect("bundled rubric is valid")
}

pub fn paper_match() -> MatchLog {
    parse_match_log(MATCH_PAPER.as_bytes()).expect("bundled match is valid")
}

pub fn paper_annotations() -> Vec<LabelApplication> {
    applications_from_jsonl(ANNOTATIONS_PAPER).expect("bundled annotations parse")
}

fn single_annotator(text: &str) -> AnnotationSet {
    let apps = applications_from_jsonl(text).expect("bundled annotations parse");
    let annotator = apps.first().map(|a| a.annotator_id.clone()).unwrap_or_default();
    AnnotationSet { annotator_id: annotator, applications: apps }
}

pub fn irr_sets() -> (AnnotationSet, AnnotationSet) {
    (single_annotator(IRR_FIXTURE_A), single_annotator(IRR_FIXTURE_B))
}

#[derive(Debug, Clone, Deserialize)]
pub struct CorpusManifest {
    #[serde(default)]
    pub defaults: SynthConfig,
    #[serde(rename = "match")]
    pub matches: Vec<CorpusEntry>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CorpusEntry {
    pub seed: u64,
    pub duration_s: Option<f64>,
    pub towers: Option<Vec<TowerFallSpec>>,
    #[serde(default)]
    pub surrender_before_late: bool,
}

impl CorpusManifest {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn config(&self, entry: &CorpusEntry) -> SynthConfig {
        let mut cfg = self.defaults.clone();
        cfg.match_id = Some(format!("corpus-{}", entry.seed));
        if let Some(d) = entry.duration_s {
            cfg.duration_s = d;
        }
        if let Some(t) = &entry.towers {
            cfg.towers = t.clone();
        }
        cfg.surrender_before_late = entry.surrender_before_late;
        cfg
    }

    pub fn generate(&self) -> Result<Vec<MatchLog>, SynthError> {
        self.matches
            .iter()
            .map(|e| generate_synthetic_match(&self.config(e), e.seed))
            .collect()
    }
}

pub fn corpus_manifest() -> CorpusManifest {
    CorpusManifest::parse(CORPUS_MANIFEST).expect("bundled manifest is valid")
}

/// Every match listed in the manifest, including the surrendered ones.
pub fn bundled_corpus() -> Vec<MatchLog> {
    corpus_manifest().generate().expect("bundled manifest generates")
}
