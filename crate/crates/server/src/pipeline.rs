//! Analyses shared by the command line and the REST handlers. Both paths
//! call these functions on the same inputs, so their JSON is identical.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use seqlab_core::abstraction::{abstract_match, AbstractionError, StateSequence};
use seqlab_core::annotation::{irr_report, AnnotationSet, KappaError, KappaReport, LabelApplication, Rubric};
use seqlab_core::dtw::{
    hierarchical_cluster, mds_embed, pairwise_distances, ClusterAssignment, DistanceMatrix, DtwError, DtwOptions,
    Embedding2D, Linkage, StateCostMatrix,
};
use seqlab_core::report::{label_counts_by_segment, state_frequency_by_segment, ReportError, SegmentLabelReport, StateFrequency};
use seqlab_core::segmentation::{find_boundaries, segment_corpus};
use seqlab_core::seqmine::{
    build_behavior_graph, mine_ngrams, plot_data, top_frequent_sequences, BehaviorGraph, FrequentSequenceTable,
    MineError, NgramParams, NgramTable, PlotSpec, SequenceCorpus,
};
use seqlab_core::telemetry::{parse_match_log, MatchLog, ParseError};
use seqlab_core::{DssSequence, ProximityConfig, Segment};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Parse { path: String, source: ParseError },
    #[error(transparent)]
    Abstraction(#[from] AbstractionError),
    #[error(transparent)]
    Mine(#[from] MineError),
    #[error(transparent)]
    Dtw(#[from] DtwError),
    #[error(transparent)]
    Kappa(#[from] KappaError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Every `*.jsonl` match log in `dir`, sorted by match id.
pub fn load_matches_dir(dir: &Path) -> Result<Vec<MatchLog>, PipelineError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let raw = std::fs::read(&p)?;
        let m = parse_match_log(&raw).map_err(|source| PipelineError::Parse { path: p.display().to_string(), source })?;
        out.push(m);
    }
    out.sort_by(|a, b| a.match_id.cmp(&b.match_id));
    Ok(out)
}

pub fn abstract_all(matches: &[MatchLog], cfg: &ProximityConfig) -> Result<Vec<Vec<StateSequence>>, PipelineError> {
    Ok(matches.iter().map(|m| abstract_match(m, cfg)).collect::<Result<_, _>>()?)
}

/// Per-segment corpora over complete games, with matches taken in id order.
pub fn corpora(matches: &[MatchLog], sequences: &[Vec<StateSequence>]) -> BTreeMap<Segment, Vec<DssSequence>> {
    let mut pairs: Vec<(MatchLog, Vec<StateSequence>)> =
        matches.iter().cloned().zip(sequences.iter().cloned()).collect();
    pairs.sort_by(|a, b| a.0.match_id.cmp(&b.0.match_id));
    segment_corpus(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MineParams {
    pub top: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub min_support: f64,
}

impl Default for MineParams {
    fn default() -> Self {
        MineParams { top: 10, ngram_min: 2, ngram_max: 4, min_support: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MineResult {
    pub segment: Option<Segment>,
    pub params: MineParams,
    pub frequent: FrequentSequenceTable,
    pub ngrams: NgramTable,
    pub plot: PlotSpec,
}

pub fn mine(segment: Option<Segment>, sequences: Vec<DssSequence>, params: MineParams) -> Result<MineResult, PipelineError> {
    let corpus = SequenceCorpus::new(segment, sequences)?;
    let frequent = top_frequent_sequences(&corpus, params.top)?;
    let ngrams = mine_ngrams(&corpus, NgramParams::new(params.ngram_min, params.ngram_max, params.min_support))?;
    let plot = plot_data(&frequent)?;
    Ok(MineResult { segment, params, frequent, ngrams, plot })
}

pub fn graph(segment: Option<Segment>, sequences: Vec<DssSequence>) -> Result<BehaviorGraph, PipelineError> {
    Ok(build_behavior_graph(&SequenceCorpus::new(segment, sequences)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtwResult {
    pub distances: DistanceMatrix,
    pub clusters: ClusterAssignment,
    pub embedding: Embedding2D,
}

pub fn dtw_analysis(
    sequences: &[DssSequence],
    k: usize,
    normalize: bool,
    linkage: Linkage,
) -> Result<DtwResult, PipelineError> {
    let distances = pairwise_distances(sequences, &StateCostMatrix::unit(), DtwOptions { normalize, band: None })?;
    let clusters = hierarchical_cluster(&distances, linkage, k)?;
    let embedding = mds_embed(&distances)?;
    Ok(DtwResult { distances, clusters, embedding })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPoint {
    pub id: String,
    pub u: f64,
    pub v: f64,
    pub cluster: usize,
}

/// Scatter data for the cluster view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingView {
    pub segment: Option<Segment>,
    pub k: usize,
    pub points: Vec<ClusterPoint>,
    pub eigenvalues: [f64; 2],
    pub degenerate: bool,
}

impl EmbeddingView {
    pub fn new(segment: Option<Segment>, r: &DtwResult) -> Self {
        let points = r
            .embedding
            .points
            .iter()
            .zip(&r.clusters.labels)
            .map(|(p, &cluster)| ClusterPoint { id: p.id.clone(), u: p.u, v: p.v, cluster })
            .collect();
        EmbeddingView {
            segment,
            k: r.clusters.k,
            points,
            eigenvalues: r.embedding.eigenvalues,
            degenerate: r.embedding.degenerate,
        }
    }
}

pub fn irr(
    a: &[LabelApplication],
    annotator_a: &str,
    b: &[LabelApplication],
    annotator_b: &str,
    matches: &[MatchLog],
    window_s: f64,
    rubric: &Rubric,
) -> Result<KappaReport, PipelineError> {
    let a = AnnotationSet::from_applications(annotator_a, a.iter().filter(|x| x.annotator_id == annotator_a));
    let b = AnnotationSet::from_applications(annotator_b, b.iter().filter(|x| x.annotator_id == annotator_b));
    Ok(irr_report(&a, &b, matches, window_s, rubric)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub labels: SegmentLabelReport,
    pub state_frequency: StateFrequency,
}

/// Label usage by segment over every application, plus the tick histogram
/// of the abstracted matches.
pub fn segment_report(
    apps: &[LabelApplication],
    matches: &[MatchLog],
    sequences: &[Vec<StateSequence>],
) -> Result<SegmentReport, PipelineError> {
    let bounds = matches.iter().map(|m| (m.match_id.clone(), find_boundaries(m))).collect();
    let mut apps = apps.to_vec();
    apps.sort_by(|x, y| x.application_id.cmp(&y.application_id));
    let labels = label_counts_by_segment(&apps, &bounds)?;
    let flat: Vec<StateSequence> = sequences.iter().flatten().cloned().collect();
    let state_frequency = state_frequency_by_segment(&flat, &bounds)?;
    Ok(SegmentReport { labels, state_frequency })
}
