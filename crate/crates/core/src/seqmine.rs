//! Frequent-sequence statistics, contiguous n-gram mining, the stacked
//! frequency plot and the state transition graph.
//!
//! Patterns are counted over run-compressed sequences by default, so a
//! pattern is the list of distinct successive states. Ties are broken by the
//! canonical [`BehaviorState`] order, which makes every output reproducible.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::{BehaviorState, DssSequence};
use crate::segmentation::Segment;

pub type Pattern = Vec<BehaviorState>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MineError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("table is empty")]
    EmptyTable,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("sequence {0} belongs to a different segment")]
    SegmentMismatch(String),
}

/// How a sequence is turned into the symbol list that gets counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternMode {
    /// One symbol per run.
    #[default]
    Dss,
    /// One symbol per tick.
    RawTicks,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceCorpus {
    pub segment: Option<Segment>,
    pub sequences: Vec<DssSequence>,
}

impl SequenceCorpus {
    pub fn new(segment: Option<Segment>, sequences: Vec<DssSequence>) -> Result<Self, MineError> {
        if let Some(seg) = segment {
            if let Some(bad) = sequences.iter().find(|s| s.segment.is_some_and(|x| x != seg)) {
                return Err(MineError::SegmentMismatch(bad.label()));
            }
        }
        Ok(SequenceCorpus { segment, sequences })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    fn symbols(&self, mode: PatternMode) -> Vec<Pattern> {
        self.sequences
            .iter()
            .map(|s| match mode {
                PatternMode::Dss => s.pattern(),
                PatternMode::RawTicks => s
                    .runs
                    .iter()
                    .flat_map(|r| std::iter::repeat_n(r.state, r.length))
                    .collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequentRow {
    pub pattern: Pattern,
    pub count: usize,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequentSequenceTable {
    pub total: usize,
    pub rows: Vec<FrequentRow>,
    pub coverage: f64,
}

pub fn top_frequent_sequences(corpus: &SequenceCorpus, k: usize) -> Result<FrequentSequenceTable, MineError> {
    top_frequent_sequences_with(corpus, k, PatternMode::Dss)
}

/// Exact counts of whole-sequence patterns, top `k` by count descending then
/// pattern ascending.
pub fn top_frequent_sequences_with(
    corpus: &SequenceCorpus,
    k: usize,
    mode: PatternMode,
) -> Result<FrequentSequenceTable, MineError> {
    if k == 0 {
        return Err(MineError::InvalidParameter("k must be >= 1"));
    }
    if corpus.is_empty() {
        return Err(MineError::EmptyCorpus);
    }
    let total = corpus.len();
    let mut counts: HashMap<Pattern, usize> = HashMap::new();
    for p in corpus.symbols(mode) {
        *counts.entry(p).or_insert(0) += 1;
    }
    let mut rows: Vec<(Pattern, usize)> = counts.into_iter().collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    rows.truncate(k);
    let rows: Vec<FrequentRow> = rows
        .into_iter()
        .map(|(pattern, count)| FrequentRow { pattern, count, share: count as f64 / total as f64 })
        .collect();
    let coverage = rows.iter().map(|r| r.share).sum();
    Ok(FrequentSequenceTable { total, rows, coverage })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramRow {
    pub ngram: Pattern,
    /// Fraction of sequences containing the n-gram at least once.
    pub support: f64,
    /// Number of sequences containing it.
    pub sequences: usize,
    /// Total occurrences, overlapping ones included.
    pub occurrences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramTable {
    pub total: usize,
    pub rows: Vec<NgramRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgramParams {
    pub min_len: usize,
    pub max_len: usize,
    pub min_support: f64,
}

impl NgramParams {
    pub fn new(min_len: usize, max_len: usize, min_support: f64) -> Self {
        NgramParams { min_len, max_len, min_support }
    }
}

pub fn mine_ngrams(corpus: &SequenceCorpus, params: NgramParams) -> Result<NgramTable, MineError> {
    mine_ngrams_with(corpus, params, PatternMode::Dss)
}

/// Contiguous n-grams of length `min_len..=max_len` whose support reaches
/// `min_support`. Rows are ordered by support descending, then length
/// ascending, then lexicographically.
pub fn mine_ngrams_with(
    corpus: &SequenceCorpus,
    params: NgramParams,
    mode: PatternMode,
) -> Result<NgramTable, MineError> {
    let NgramParams { min_len, max_len, min_support } = params;
    if min_len == 0 || max_len < min_len {
        return Err(MineError::InvalidParameter("need 1 <= min_len <= max_len"));
    }
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(MineError::InvalidParameter("min_support must be in (0, 1]"));
    }
    if corpus.is_empty() {
        return Err(MineError::EmptyCorpus);
    }
    let total = corpus.len();
    // (sequences containing, occurrences)
    let mut stats: HashMap<&[BehaviorState], (usize, usize)> = HashMap::new();
    let symbols = corpus.symbols(mode);
    for seq in &symbols {
        let mut seen: HashSet<&[BehaviorState]> = HashSet::new();
        for len in min_len..=max_len.min(seq.len()) {
            for w in seq.windows(len) {
                let e = stats.entry(w).or_insert((0, 0));
                e.1 += 1;
                if seen.insert(w) {
                    e.0 += 1;
                }
            }
        }
    }
    // count/total >= min_support, with a little slack for values like 0.1 * 30
    let threshold = min_support * total as f64 - 1e-9;
    let mut rows: Vec<NgramRow> = stats
        .into_iter()
        .filter(|(_, (seqs, _))| *seqs as f64 >= threshold)
        .map(|(ngram, (seqs, occ))| NgramRow {
            ngram: ngram.to_vec(),
            support: seqs as f64 / total as f64,
            sequences: seqs,
            occurrences: occ,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.sequences
            .cmp(&a.sequences)
            .then(a.ngram.len().cmp(&b.ngram.len()))
            .then_with(|| a.ngram.cmp(&b.ngram))
    });
    Ok(NgramTable { total, rows })
}

// ---------------------------------------------------------------------------
// Frequency plot
// ---------------------------------------------------------------------------

/// Fixed palette, one colour per state in canonical order.
pub const STATE_COLORS: [&str; 10] = [
    "#7fc97f", "#d95f02", "#e7298a", "#386cb0", "#1a1a1a",
    "#f0027f", "#beaed4", "#fdc086", "#bf5b17", "#66a61e",
];

pub fn state_color(s: BehaviorState) -> &'static str {
    STATE_COLORS[s.index()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    /// 1 = most frequent, drawn at the bottom.
    pub rank: usize,
    pub pattern: Pattern,
    pub share: f64,
    pub y_offset: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub total_sequences: usize,
    pub coverage: f64,
    /// Longest pattern; the x axis runs over operation numbers `1..=x_max`.
    pub x_max: usize,
    pub bands: Vec<Band>,
    pub colors: Vec<(BehaviorState, String)>,
}

/// Stack the table rows as horizontal bands, rank 1 at the bottom, each band
/// as tall as its share.
pub fn plot_data(table: &FrequentSequenceTable) -> Result<PlotSpec, MineError> {
    if table.rows.is_empty() {
        return Err(MineError::EmptyTable);
    }
    let mut y = 0.0;
    let bands = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let band = Band {
                rank: i + 1,
                pattern: row.pattern.clone(),
                share: row.share,
                y_offset: y,
                height: row.share,
            };
            y += row.share;
            band
        })
        .collect();
    Ok(PlotSpec {
        total_sequences: table.total,
        coverage: table.coverage,
        x_max: table.rows.iter().map(|r| r.pattern.len()).max().unwrap_or(0),
        bands,
        colors: BehaviorState::ALL.iter().map(|&s| (s, state_color(s).to_string())).collect(),
    })
}

pub const SVG_WIDTH: f64 = 720.0;
pub const SVG_HEIGHT: f64 = 420.0;
pub const PLOT_LEFT: f64 = 70.0;
pub const PLOT_TOP: f64 = 20.0;
pub const PLOT_WIDTH: f64 = 440.0;
pub const PLOT_HEIGHT: f64 = 340.0;

/// Render the plot as a standalone SVG document. Output depends only on the spec.
pub fn render_svg(spec: &PlotSpec) -> Result<Vec<u8>, MineError> {
    if spec.bands.is_empty() {
        return Err(MineError::EmptyTable);
    }
    let bottom = PLOT_TOP + PLOT_HEIGHT;
    let scale = if spec.coverage > 0.0 { PLOT_HEIGHT / spec.coverage } else { 0.0 };
    let cell_w = PLOT_WIDTH / spec.x_max.max(1) as f64;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>"#);
    for band in &spec.bands {
        let h = band.height * scale;
        let y = bottom - (band.y_offset + band.height) * scale;
        for (i, state) in band.pattern.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<rect class="band" data-rank="{}" data-share="{:.6}" data-state="{}" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{}" stroke="white" stroke-width="0.5"/>"#,
                band.rank,
                band.share,
                state.name(),
                PLOT_LEFT + i as f64 * cell_w,
                y,
                cell_w,
                h,
                state_color(*state)
            );
        }
    }
    // axes
    let _ = writeln!(
        s,
        r#"<line x1="{PLOT_LEFT}" y1="{bottom}" x2="{}" y2="{bottom}" stroke="black"/>"#,
        PLOT_LEFT + PLOT_WIDTH
    );
    let _ = writeln!(s, r#"<line x1="{PLOT_LEFT}" y1="{PLOT_TOP}" x2="{PLOT_LEFT}" y2="{bottom}" stroke="black"/>"#);
    let _ = writeln!(
        s,
        r#"<text class="y-max" x="{:.1}" y="{:.1}" text-anchor="end">{:.1}%</text>"#,
        PLOT_LEFT - 4.0,
        PLOT_TOP + 4.0,
        spec.coverage * 100.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">0%</text>"#,
        PLOT_LEFT - 4.0,
        bottom
    );
    let _ = writeln!(
        s,
        r#"<text class="y-label" transform="translate(16,{:.1}) rotate(-90)" text-anchor="middle">Cum. % freq. (n={})</text>"#,
        PLOT_TOP + PLOT_HEIGHT / 2.0,
        spec.total_sequences
    );
    for i in 0..spec.x_max {
        let _ = writeln!(
            s,
            r#"<text x="{:.3}" y="{:.1}" text-anchor="middle">{}</text>"#,
            PLOT_LEFT + (i as f64 + 0.5) * cell_w,
            bottom + 14.0,
            i + 1
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">operation number</text>"#,
        PLOT_LEFT + PLOT_WIDTH / 2.0,
        bottom + 30.0
    );
    // legend
    let lx = PLOT_LEFT + PLOT_WIDTH + 20.0;
    for (i, (state, color)) in spec.colors.iter().enumerate() {
        let ly = PLOT_TOP + i as f64 * 18.0;
        let _ = writeln!(
            s,
            r#"<rect class="key" data-state="{}" x="{lx:.1}" y="{ly:.1}" width="12" height="12" fill="{color}"/>"#,
            state.name()
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 18.0, ly + 10.0, state.name());
    }
    s.push_str("</svg>\n");
    Ok(s.into_bytes())
}

// ---------------------------------------------------------------------------
// Transition graph
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub state: BehaviorState,
    /// Number of runs of this state.
    pub visits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: BehaviorState,
    pub to: BehaviorState,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

/// Node visits and run-to-run transitions over the whole corpus.
pub fn build_behavior_graph(corpus: &SequenceCorpus) -> BehaviorGraph {
    let mut visits: BTreeMap<BehaviorState, usize> = BTreeMap::new();
    let mut edges: BTreeMap<(BehaviorState, BehaviorState), usize> = BTreeMap::new();
    for seq in &corpus.sequences {
        for run in &seq.runs {
            *visits.entry(run.state).or_insert(0) += 1;
        }
        for w in seq.runs.windows(2) {
            *edges.entry((w[0].state, w[1].state)).or_insert(0) += 1;
        }
    }
    BehaviorGraph {
        nodes: visits.into_iter().map(|(state, visits)| GraphNode { state, visits }).collect(),
        edges: edges
            .into_iter()
            .map(|((from, to), count)| GraphEdge { from, to, count })
            .collect(),
    }
}
